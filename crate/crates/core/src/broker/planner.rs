//! Planner interface and its two implementations.

use alloc::collections::{BTreeMap, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use super::{BrokerError, Intent, PlannedSubscription, Signature, Task, TaskInput, TaskKind};
use crate::fabric::SubscriptionKind;
use crate::simnet::node::{NetworkState, RATE_LIMIT};

/// What the planner wants to do next in a planning episode.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Action {
    EmitTask(Task),
    EmitSubscription(PlannedSubscription),
    EmitMetaprompt(String),
    Finish,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlannerAction {
    pub thoughts: Vec<String>,
    pub action: Action,
}

impl PlannerAction {
    fn bare(action: Action) -> Self {
        PlannerAction {
            thoughts: Vec::new(),
            action,
        }
    }
}

pub struct PlanningContext<'a> {
    pub intent: &'a Intent,
    /// Streams resolved from the subscription selector, in name order.
    pub streams: &'a [String],
    pub result_topic: &'a str,
    pub step: usize,
}

pub trait Planner {
    fn id(&self) -> &str;
    fn seed(&self) -> u64;
    fn step(&mut self, ctx: &PlanningContext<'_>) -> Result<PlannerAction, BrokerError>;
    /// Up to `fanout` `(aspect, text)` children of the prompt reached via `path`,
    /// never repeating an aspect already on the path.
    fn sub_prompts(&mut self, root: &str, path: &[String], fanout: usize) -> Vec<(String, String)>;
    /// Restricted-DSL source for a tool task.
    fn tool_program(&mut self, task: &Task, network: &NetworkState) -> Result<String, BrokerError>;
    /// Prompts waiting to be carried over the fabric, if the planner is remote.
    fn take_outbox(&mut self) -> Vec<String> {
        Vec::new()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Verb {
    Compare,
    Capability(&'static str),
    Tool,
}

/// Keyword stems checked in order; the first hit decides the plan shape.
const VOCABULARY: &[(&str, Verb)] = &[
    ("compar", Verb::Compare),
    ("predict", Verb::Capability("traffic-prediction")),
    ("forecast", Verb::Capability("traffic-prediction")),
    ("optimi", Verb::Capability("network-optimization")),
    ("summar", Verb::Capability("summarization")),
    ("irrigat", Verb::Capability("irrigation-advice")),
    ("tool", Verb::Tool),
];

pub const COMPARE_CAPABILITY: &str = "comparative-analysis";
pub const DEFAULT_TOOL: &str = "analysis-tool";

pub const ASPECTS: &[&str] = &[
    "radio-conditions",
    "interference",
    "traffic-load",
    "mobility",
    "configuration",
    "hardware-faults",
    "software-faults",
    "policy",
    "topology",
];

/// Deterministic template planner over a fixed vocabulary.
#[derive(Debug, Clone, Default)]
pub struct MockPlanner {
    seed: u64,
}

impl MockPlanner {
    pub fn new(seed: u64) -> Self {
        MockPlanner { seed }
    }

    fn verb(text: &str) -> Option<Verb> {
        let lower = text.to_ascii_lowercase();
        VOCABULARY.iter().find(|(stem, _)| lower.contains(stem)).map(|(_, v)| *v)
    }

    fn script(&self, ctx: &PlanningContext<'_>) -> Result<Vec<Action>, BrokerError> {
        let intent = ctx.intent;
        let verb = Self::verb(&intent.text).ok_or_else(|| BrokerError::PlanningFailed("unknown-intent".into()))?;
        let streams: Vec<String> = match intent.constraints.get("streams") {
            Some(list) => list.split(',').map(|s| s.trim().to_string()).filter(|s| !s.is_empty()).collect(),
            None => ctx.streams.to_vec(),
        };
        if streams.is_empty() {
            return Err(BrokerError::PlanningFailed("no-streams".into()));
        }
        if verb == Verb::Compare && streams.len() < 2 {
            return Err(BrokerError::PlanningFailed("compare-needs-two-streams".into()));
        }
        let mut out = Vec::new();
        let mut ingests = Vec::new();
        for s in &streams {
            let t = Task::new(&format!("t{}", out.len()), TaskKind::Ingest, vec![TaskInput::Stream(s.clone())]);
            ingests.push(TaskInput::Task(t.task_id.clone()));
            out.push(Action::EmitTask(t));
        }
        let mut core = match verb {
            Verb::Tool => {
                let mut t = Task::new(&format!("t{}", out.len()), TaskKind::ToolInvoke, ingests);
                t.capability = Some(intent.constraints.get("tool").map_or(DEFAULT_TOOL, String::as_str).to_string());
                t.signature = Some(Signature::new("stream", "insight"));
                for key in ["dsl", "invariant"] {
                    if let Some(v) = intent.constraints.get(key) {
                        t.params.insert(key.to_string(), v.clone());
                    }
                }
                t
            }
            Verb::Compare | Verb::Capability(_) => {
                let cap = match verb {
                    Verb::Capability(c) => c,
                    _ => COMPARE_CAPABILITY,
                };
                let mut t = Task::new(&format!("t{}", out.len()), TaskKind::Infer, ingests);
                t.capability = Some(cap.to_string());
                t
            }
        };
        core.params.entry("prompt".into()).or_insert_with(|| intent.text.clone());
        let core_id = core.task_id.clone();
        let tool = core.kind == TaskKind::ToolInvoke;
        out.push(Action::EmitTask(core));
        if streams.len() > 1 && !tool {
            let t = Task::new(&format!("t{}", out.len()), TaskKind::Aggregate, vec![TaskInput::Task(core_id)]);
            out.push(Action::EmitTask(t));
        }
        out.push(Action::EmitSubscription(PlannedSubscription {
            selector: ctx.result_topic.to_string(),
            subscriber: intent.issuer.clone(),
            kind: SubscriptionKind::Inference,
        }));
        out.push(Action::Finish);
        Ok(out)
    }
}

impl Planner for MockPlanner {
    fn id(&self) -> &str {
        "mock-planner"
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn step(&mut self, ctx: &PlanningContext<'_>) -> Result<PlannerAction, BrokerError> {
        let script = self.script(ctx)?;
        let action = script.get(ctx.step).cloned().unwrap_or(Action::Finish);
        let mut thoughts = Vec::new();
        if ctx.step == 0 {
            thoughts.push(format!("intent: {}", ctx.intent.text));
            thoughts.push(format!("plan length {}", script.len() - 1));
        }
        Ok(PlannerAction { thoughts, action })
    }

    fn sub_prompts(&mut self, root: &str, path: &[String], fanout: usize) -> Vec<(String, String)> {
        ASPECTS
            .iter()
            .filter(|a| !path.iter().any(|p| p == *a))
            .take(fanout)
            .map(|a| {
                let mut chain: Vec<&str> = path.iter().map(String::as_str).collect();
                chain.push(a);
                chain.reverse();
                (a.to_string(), format!("Examine {} for: {root}", chain.join(" within ")))
            })
            .collect()
    }

    fn tool_program(&mut self, task: &Task, network: &NetworkState) -> Result<String, BrokerError> {
        if let Some(src) = task.params.get("dsl") {
            return Ok(src.clone());
        }
        let node = network
            .nodes()
            .find(|n| n.load.is_some() && n.knob(RATE_LIMIT).is_some())
            .ok_or_else(|| BrokerError::SynthesisFailed("no-tunable-node".into()))?;
        let cap = task.capability.as_deref().unwrap_or(DEFAULT_TOOL);
        let current = node.knob(RATE_LIMIT).expect("filtered above");
        Ok(format!("# {cap}\nlimit {} {RATE_LIMIT} {current}\n", node.id))
    }
}

/// Relays planning prompts to an external planner over the fabric.
///
/// Replies are pushed back as structured actions; until one arrives every
/// step fails with `awaiting-external-planner`.
#[derive(Debug, Clone, Default)]
pub struct BridgePlanner {
    seed: u64,
    outbox: Vec<String>,
    replies: VecDeque<PlannerAction>,
    programs: BTreeMap<String, String>,
}

pub const BRIDGE_TOPIC: &str = "planner/external/requests";

impl BridgePlanner {
    pub fn new(seed: u64) -> Self {
        BridgePlanner {
            seed,
            ..Default::default()
        }
    }

    pub fn push_reply(&mut self, action: PlannerAction) {
        self.replies.push_back(action);
    }

    pub fn push_program(&mut self, task_id: &str, source: &str) {
        self.programs.insert(task_id.to_string(), source.to_string());
    }
}

impl Planner for BridgePlanner {
    fn id(&self) -> &str {
        "external-bridge"
    }

    fn seed(&self) -> u64 {
        self.seed
    }

    fn step(&mut self, ctx: &PlanningContext<'_>) -> Result<PlannerAction, BrokerError> {
        if let Some(a) = self.replies.pop_front() {
            return Ok(a);
        }
        self.outbox.push(format!("plan step {} for: {}", ctx.step, ctx.intent.text));
        Err(BrokerError::PlanningFailed("awaiting-external-planner".into()))
    }

    fn sub_prompts(&mut self, root: &str, _path: &[String], _fanout: usize) -> Vec<(String, String)> {
        self.outbox.push(format!("expand: {root}"));
        Vec::new()
    }

    fn tool_program(&mut self, task: &Task, _network: &NetworkState) -> Result<String, BrokerError> {
        if let Some(src) = self.programs.get(&task.task_id) {
            return Ok(src.clone());
        }
        self.outbox.push(format!("write tool for {}", task.task_id));
        Err(BrokerError::SynthesisFailed("awaiting-external-planner".into()))
    }

    fn take_outbox(&mut self) -> Vec<String> {
        core::mem::take(&mut self.outbox)
    }
}

impl PlannerAction {
    pub fn finish() -> Self {
        PlannerAction::bare(Action::Finish)
    }

    pub fn task(t: Task) -> Self {
        PlannerAction::bare(Action::EmitTask(t))
    }
}
