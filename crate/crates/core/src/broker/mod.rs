//! Task broker: turns intents into task plans, expands metaprompts, selects
//! or synthesizes tools and drives plan execution over the fabric.

pub mod planner;

use alloc::boxed::Box;
use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use planner::{Action, BridgePlanner, MockPlanner, Planner, PlannerAction, PlanningContext, BRIDGE_TOPIC};

use crate::fabric::envelope::{KEY_LOCALITY, KEY_SESSION};
use crate::fabric::{
    AuditOp, Fabric, FabricError, JournalEntry, MessageEnvelope, MessageKind, Outcome, Outgoing, Selector,
    SubscriptionKind, SubscriptionRequest, TokenState,
};
use crate::guard::{GuardedProgram, Invariant};
use crate::hash::{StableHash, StableHasher};
use crate::ids::{MessageId, ModelId, NodeId, PlanId, SubscriptionId};
use crate::interconnect::{IcError, Interconnect, KEY_CAPABILITY, KEY_DOMAIN};
use crate::registry::{CapabilitySet, Registry};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const BROKER: &str = "broker";
pub const DEFAULT_MAX_STEPS: usize = 64;
pub const DEFAULT_FANOUT: usize = 3;
pub const DEFAULT_MAX_DEPTH: usize = 4;
pub const DEFAULT_TOOL_INVARIANT: &str = "throughput > 0";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BrokerError {
    #[error("intent text is empty")]
    InvalidIntent,
    #[error("planning failed: {0}")]
    PlanningFailed(String),
    #[error("no eligible model for task `{0}`")]
    NoEligibleModel(String),
    #[error("plan is malformed: {0}")]
    InvalidPlan(String),
    #[error("metaprompt depth {0} is out of range")]
    DepthExceeded(usize),
    #[error("sandbox rejected synthesized tool: {0}")]
    SandboxRejected(String),
    #[error("tool synthesis failed: {0}")]
    SynthesisFailed(String),
    #[error("unknown plan {0}")]
    UnknownPlan(PlanId),
}

impl BrokerError {
    pub fn code(&self) -> &'static str {
        match self {
            BrokerError::InvalidIntent => "invalid-intent",
            BrokerError::PlanningFailed(_) => "planning-failed",
            BrokerError::NoEligibleModel(_) => "no-eligible-model",
            BrokerError::InvalidPlan(_) => "invalid-plan",
            BrokerError::DepthExceeded(_) => "depth-exceeded",
            BrokerError::SandboxRejected(_) => "sandbox-rejected",
            BrokerError::SynthesisFailed(_) => "synthesis-failed",
            BrokerError::UnknownPlan(_) => "unknown-plan",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Intent {
    pub text: String,
    pub issuer: NodeId,
    pub target_domain: Option<String>,
    pub constraints: BTreeMap<String, String>,
}

impl Intent {
    pub fn new(text: &str, issuer: &NodeId) -> Self {
        Intent {
            text: text.to_string(),
            issuer: issuer.clone(),
            target_domain: None,
            constraints: BTreeMap::new(),
        }
    }

    pub fn constraint(mut self, key: &str, value: &str) -> Self {
        self.constraints.insert(key.to_string(), value.to_string());
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum TaskKind {
    Ingest,
    Transform,
    Infer,
    Aggregate,
    SubscribeBinding,
    ToolInvoke,
}

impl TaskKind {
    pub fn as_str(self) -> &'static str {
        match self {
            TaskKind::Ingest => "ingest",
            TaskKind::Transform => "transform",
            TaskKind::Infer => "infer",
            TaskKind::Aggregate => "aggregate",
            TaskKind::SubscribeBinding => "subscribe-binding",
            TaskKind::ToolInvoke => "tool-invoke",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum TaskInput {
    Task(String),
    Stream(String),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Signature {
    pub input: String,
    pub output: String,
}

impl Signature {
    pub fn new(input: &str, output: &str) -> Self {
        Signature {
            input: input.to_string(),
            output: output.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Task {
    pub task_id: String,
    pub kind: TaskKind,
    pub inputs: Vec<TaskInput>,
    pub capability: Option<String>,
    pub assigned_model: Option<ModelId>,
    pub signature: Option<Signature>,
    pub params: BTreeMap<String, String>,
}

impl Task {
    pub fn new(id: &str, kind: TaskKind, inputs: Vec<TaskInput>) -> Self {
        Task {
            task_id: id.to_string(),
            kind,
            inputs,
            capability: None,
            assigned_model: None,
            signature: None,
            params: BTreeMap::new(),
        }
    }

    /// Identity of what the task asks for, independent of its id and inputs.
    pub fn spec_hash(&self) -> StableHash {
        let mut h = StableHasher::new();
        h.str(self.kind.as_str()).str(self.capability.as_deref().unwrap_or(""));
        if let Some(s) = &self.signature {
            h.str(&s.input).str(&s.output);
        }
        for (k, v) in &self.params {
            h.str(k).str(v);
        }
        h.finish()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PlannedSubscription {
    pub selector: String,
    pub subscriber: NodeId,
    pub kind: SubscriptionKind,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Provenance {
    pub planner: String,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TaskPlan {
    pub plan_id: PlanId,
    pub intent: String,
    pub issuer: NodeId,
    pub target_domain: Option<String>,
    pub tasks: Vec<Task>,
    pub subscriptions: Vec<PlannedSubscription>,
    pub result_topic: String,
    pub provenance: Provenance,
    pub thoughts: Vec<String>,
}

impl TaskPlan {
    pub fn count(&self, kind: TaskKind) -> usize {
        self.tasks.iter().filter(|t| t.kind == kind).count()
    }

    pub fn streams(&self) -> Vec<&str> {
        let mut out = Vec::new();
        for t in &self.tasks {
            for i in &t.inputs {
                if let TaskInput::Stream(s) = i {
                    out.push(s.as_str());
                }
            }
        }
        out
    }

    /// Task indices in dependency order (stable by position); an error names a
    /// task with an unresolved input or a cycle.
    pub fn topological_order(&self) -> Result<Vec<usize>, BrokerError> {
        let index: BTreeMap<&str, usize> = self.tasks.iter().enumerate().map(|(i, t)| (t.task_id.as_str(), i)).collect();
        if index.len() != self.tasks.len() {
            return Err(BrokerError::InvalidPlan("duplicate-task-id".into()));
        }
        let mut deps: Vec<BTreeSet<usize>> = Vec::with_capacity(self.tasks.len());
        for t in &self.tasks {
            let mut d = BTreeSet::new();
            for i in &t.inputs {
                if let TaskInput::Task(id) = i {
                    let j = *index
                        .get(id.as_str())
                        .ok_or_else(|| BrokerError::InvalidPlan(format!("unresolved-input:{}:{id}", t.task_id)))?;
                    d.insert(j);
                }
            }
            deps.push(d);
        }
        let mut done = BTreeSet::new();
        let mut order = Vec::new();
        while order.len() < self.tasks.len() {
            let next = (0..self.tasks.len()).find(|i| !done.contains(i) && deps[*i].iter().all(|d| done.contains(d)));
            let Some(i) = next else {
                return Err(BrokerError::InvalidPlan("cycle".into()));
            };
            done.insert(i);
            order.push(i);
        }
        Ok(order)
    }

    /// Tasks no other task consumes.
    pub fn sinks(&self) -> Vec<usize> {
        let consumed: BTreeSet<&str> = self
            .tasks
            .iter()
            .flat_map(|t| t.inputs.iter())
            .filter_map(|i| match i {
                TaskInput::Task(id) => Some(id.as_str()),
                TaskInput::Stream(_) => None,
            })
            .collect();
        (0..self.tasks.len()).filter(|i| !consumed.contains(self.tasks[*i].task_id.as_str())).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SubPrompt {
    pub index: usize,
    pub parent: Option<usize>,
    pub depth: usize,
    pub aspect: Option<String>,
    pub text: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum ToolOrigin {
    Catalog,
    Synthesized,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ToolSpec {
    pub tool_id: String,
    pub signature: Signature,
    pub program: GuardedProgram,
    pub origin: ToolOrigin,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ToolChoice<'a> {
    Use(&'a ToolSpec),
    Synthesize,
}

/// First catalog entry whose signature matches the task's.
pub fn select_tool<'a>(task: &Task, catalog: &'a [ToolSpec]) -> ToolChoice<'a> {
    match &task.signature {
        Some(sig) => catalog
            .iter()
            .find(|t| &t.signature == sig)
            .map_or(ToolChoice::Synthesize, ToolChoice::Use),
        None => ToolChoice::Synthesize,
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum TaskOutcome {
    Ok(String),
    Failed(String),
    Skipped,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum PlanStatus {
    Completed,
    TaskFailed { task_id: String, cause: String },
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PlanResult {
    pub plan_id: PlanId,
    pub status: PlanStatus,
    pub per_task: BTreeMap<String, TaskOutcome>,
    /// Envelopes published while the plan ran, in publish order.
    pub trace: Vec<MessageId>,
}

#[derive(Debug, Clone, Default)]
struct PlanRuntime {
    ingest: BTreeMap<SubscriptionId, String>,
    latest: BTreeMap<String, MessageEnvelope>,
    fresh: BTreeSet<String>,
    runs: u64,
}

pub struct Broker {
    pub planner: Box<dyn Planner + Send>,
    pub max_steps: usize,
    pub fanout: usize,
    pub max_depth: usize,
    pub catalog: Vec<ToolSpec>,
    plans: BTreeMap<PlanId, TaskPlan>,
    runtimes: BTreeMap<PlanId, PlanRuntime>,
    results: Vec<PlanResult>,
    cache: BTreeMap<StableHash, String>,
    next_plan: u64,
}

impl Default for Broker {
    fn default() -> Self {
        Broker::new(Box::new(MockPlanner::new(0)))
    }
}

impl fmt::Debug for Broker {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Broker")
            .field("planner", &self.planner.id())
            .field("plans", &self.plans.len())
            .field("catalog", &self.catalog.len())
            .finish()
    }
}

impl Broker {
    pub fn new(planner: Box<dyn Planner + Send>) -> Self {
        Broker {
            planner,
            max_steps: DEFAULT_MAX_STEPS,
            fanout: DEFAULT_FANOUT,
            max_depth: DEFAULT_MAX_DEPTH,
            catalog: Vec::new(),
            plans: BTreeMap::new(),
            runtimes: BTreeMap::new(),
            results: Vec::new(),
            cache: BTreeMap::new(),
            next_plan: 0,
        }
    }

    pub fn plan(&self, id: PlanId) -> Option<&TaskPlan> {
        self.plans.get(&id)
    }

    pub fn plans(&self) -> impl Iterator<Item = &TaskPlan> {
        self.plans.values()
    }

    /// Results of every plan run so far, oldest first.
    pub fn results(&self) -> &[PlanResult] {
        &self.results
    }

    /// Runs one planning episode and binds every infer task to a model.
    pub fn decompose_intent(
        &mut self,
        intent: &Intent,
        streams: &[String],
        registry: &Registry,
        fabric: &mut Fabric,
    ) -> Result<TaskPlan, BrokerError> {
        fabric.advance();
        let r = self.decompose_inner(intent, streams, registry);
        let (outcome, note) = match &r {
            Ok(p) => (Outcome::Ok, Some(format!("{} tasks={}", p.plan_id, p.tasks.len()))),
            Err(e) => (Outcome::error(e.code()), None),
        };
        fabric.audit(AuditOp::Plan, intent.issuer.as_str(), None, None, outcome, note);
        let plan = r?;
        self.plans.insert(plan.plan_id, plan.clone());
        Ok(plan)
    }

    fn decompose_inner(&mut self, intent: &Intent, streams: &[String], registry: &Registry) -> Result<TaskPlan, BrokerError> {
        if intent.text.trim().is_empty() {
            return Err(BrokerError::InvalidIntent);
        }
        let plan_id = PlanId(self.next_plan + 1);
        let result_topic = format!("plans/{plan_id}/result");
        let mut tasks = Vec::new();
        let mut subscriptions = Vec::new();
        let mut thoughts = Vec::new();
        let mut finished = false;
        for step in 0..self.max_steps {
            let ctx = PlanningContext {
                intent,
                streams,
                result_topic: &result_topic,
                step,
            };
            let a = self.planner.step(&ctx)?;
            thoughts.extend(a.thoughts);
            match a.action {
                Action::EmitTask(t) => tasks.push(t),
                Action::EmitSubscription(s) => subscriptions.push(s),
                Action::EmitMetaprompt(p) => thoughts.push(format!("metaprompt: {p}")),
                Action::Finish => {
                    finished = true;
                    break;
                }
            }
        }
        if !finished {
            return Err(BrokerError::PlanningFailed(format!("max-steps:{}", self.max_steps)));
        }
        let mut plan = TaskPlan {
            plan_id,
            intent: intent.text.clone(),
            issuer: intent.issuer.clone(),
            target_domain: intent.target_domain.clone(),
            tasks,
            subscriptions,
            result_topic,
            provenance: Provenance {
                planner: self.planner.id().to_string(),
                seed: self.planner.seed(),
            },
            thoughts,
        };
        plan.topological_order()?;
        for t in plan.tasks.iter_mut().filter(|t| t.kind == TaskKind::Infer) {
            let cap = t.capability.clone().ok_or_else(|| BrokerError::InvalidPlan(format!("no-capability:{}", t.task_id)))?;
            let hits = registry
                .query_by_capability(&CapabilitySet::of(&[&cap]), plan.target_domain.as_deref())
                .map_err(|_| BrokerError::NoEligibleModel(t.task_id.clone()))?;
            t.assigned_model = Some(hits.into_iter().next().ok_or_else(|| BrokerError::NoEligibleModel(t.task_id.clone()))?);
        }
        self.next_plan += 1;
        Ok(plan)
    }

    /// Tree of sub-prompts rooted at `prompt` (index 0).
    pub fn expand_metaprompt(&mut self, prompt: &str, depth: usize) -> Result<Vec<SubPrompt>, BrokerError> {
        if depth == 0 || depth > self.max_depth {
            return Err(BrokerError::DepthExceeded(depth));
        }
        let mut out = alloc::vec![SubPrompt {
            index: 0,
            parent: None,
            depth: 0,
            aspect: None,
            text: prompt.to_string(),
        }];
        let mut paths: Vec<Vec<String>> = alloc::vec![Vec::new()];
        let mut frontier = alloc::vec![0usize];
        for level in 1..=depth {
            let mut next = Vec::new();
            for parent in frontier {
                let path = paths[parent].clone();
                for (aspect, text) in self.planner.sub_prompts(prompt, &path, self.fanout) {
                    let index = out.len();
                    let mut p = path.clone();
                    p.push(aspect.clone());
                    paths.push(p);
                    out.push(SubPrompt {
                        index,
                        parent: Some(parent),
                        depth: level,
                        aspect: Some(aspect),
                        text,
                    });
                    next.push(index);
                }
            }
            frontier = next;
        }
        Ok(out)
    }
}

fn system_broker() -> NodeId {
    NodeId::new(BROKER).expect("valid id")
}

/// Builds and installs a plan for an inference subscription; streams are the
/// existing topics matching the request selector.
pub fn on_inference_subscription(ic: &mut Interconnect, req: &SubscriptionRequest) -> Result<PlanId, IcError> {
    let selector = match Selector::parse(&req.selector) {
        Ok(s) if ic.fabric.is_registered(&req.subscriber) => s,
        _ => {
            let e = ic.fabric.subscribe(req.clone()).expect_err("selector or node is invalid");
            return Err(e.into());
        }
    };
    let streams: Vec<String> = ic
        .fabric
        .topics()
        .map(|t| t.name().to_string())
        .filter(|n| selector.matches_topic(n))
        .collect();
    let text = req
        .params
        .get("prompt")
        .or_else(|| req.params.get("intent"))
        .cloned()
        .unwrap_or_default();
    let mut intent = Intent::new(&text, &req.subscriber);
    intent.target_domain = req.params.get(KEY_DOMAIN).cloned();
    intent.constraints = req.params.clone();
    let plan = ic.broker.decompose_intent(&intent, &streams, &ic.registry, &mut ic.fabric)?;
    install(ic, &plan)?;
    Ok(plan.plan_id)
}

/// Subscribes the broker to every stream the plan ingests.
pub fn install(ic: &mut Interconnect, plan: &TaskPlan) -> Result<(), IcError> {
    let me = system_broker();
    let mut rt = PlanRuntime::default();
    let streams: BTreeSet<String> = plan.streams().into_iter().map(String::from).collect();
    for s in streams {
        if ic.fabric.topic(&s).is_none() {
            return Err(FabricError::UnknownTopic(s).into());
        }
        let sub = ic.fabric.subscribe(SubscriptionRequest::durable(&s, &me))?;
        rt.ingest.insert(sub, s);
    }
    ic.fabric.ensure_shared(&plan.result_topic);
    ic.broker.plans.insert(plan.plan_id, plan.clone());
    ic.broker.runtimes.insert(plan.plan_id, rt);
    Ok(())
}

/// Feeds stream updates to installed plans; a plan runs once every stream
/// has delivered since its previous run.
pub fn pump_plans(ic: &mut Interconnect) -> Result<bool, IcError> {
    let me = system_broker();
    let mut any = false;
    for prompt in ic.broker.planner.take_outbox() {
        ic.fabric.ensure_shared(BRIDGE_TOPIC);
        ic.fabric
            .publish(Outgoing::new(BRIDGE_TOPIC, MessageKind::Prompt, "bridge", BROKER).payload(prompt))?;
        any = true;
    }
    let ids: Vec<PlanId> = ic.broker.runtimes.keys().copied().collect();
    for id in ids {
        let subs: Vec<(SubscriptionId, String)> = ic.broker.runtimes[&id].ingest.iter().map(|(k, v)| (*k, v.clone())).collect();
        for (sub, stream) in subs {
            for d in ic.fabric.drain_subscription(&me, sub) {
                any = true;
                let rt = ic.broker.runtimes.get_mut(&id).expect("present");
                rt.latest.insert(stream.clone(), d.envelope);
                rt.fresh.insert(stream.clone());
            }
        }
        let rt = &ic.broker.runtimes[&id];
        if !rt.ingest.is_empty() && rt.fresh.len() == rt.ingest.len() {
            let inputs = rt.latest.clone();
            let rt = ic.broker.runtimes.get_mut(&id).expect("present");
            rt.fresh.clear();
            rt.runs += 1;
            let result = execute_plan(ic, id, &inputs)?;
            ic.broker.results.push(result);
        }
    }
    Ok(any)
}

fn meta_map(pairs: &[(&str, String)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.clone())).collect()
}

/// Executes the plan over the given stream samples in topological order.
/// A failing task stops the run; everything not yet run is `Skipped`.
pub fn execute_plan(ic: &mut Interconnect, id: PlanId, inputs: &BTreeMap<String, MessageEnvelope>) -> Result<PlanResult, IcError> {
    let plan = ic.broker.plan(id).cloned().ok_or(BrokerError::UnknownPlan(id))?;
    let order = plan.topological_order()?;
    let journal_start = ic.fabric.journal().len();
    ic.fabric.advance();
    ic.fabric
        .audit(AuditOp::Execute, BROKER, None, None, Outcome::Ok, Some(format!("{id} start")));
    let mut outputs: BTreeMap<String, String> = BTreeMap::new();
    let mut per_task: BTreeMap<String, TaskOutcome> = plan.tasks.iter().map(|t| (t.task_id.clone(), TaskOutcome::Skipped)).collect();
    let mut status = PlanStatus::Completed;
    for i in &order {
        let task = &plan.tasks[*i];
        let r = run_task(ic, &plan, task, inputs, &outputs);
        match r {
            Ok(out) => {
                per_task.insert(task.task_id.clone(), TaskOutcome::Ok(out.clone()));
                outputs.insert(task.task_id.clone(), out);
            }
            Err(cause) => {
                per_task.insert(task.task_id.clone(), TaskOutcome::Failed(cause.clone()));
                status = PlanStatus::TaskFailed {
                    task_id: task.task_id.clone(),
                    cause,
                };
                break;
            }
        }
    }
    if status == PlanStatus::Completed {
        let sinks = plan.sinks();
        if let Some(last) = sinks.last() {
            let body = outputs.get(&plan.tasks[*last].task_id).cloned().unwrap_or_default();
            let msg = Outgoing::new(&plan.result_topic, MessageKind::InferenceResult, &id.to_string(), BROKER)
                .meta("plan", id.to_string())
                .payload(body);
            ic.fabric.publish(msg)?;
        }
    }
    let outcome = match &status {
        PlanStatus::Completed => Outcome::Ok,
        PlanStatus::TaskFailed { .. } => Outcome::error("task-failed"),
    };
    ic.fabric.advance();
    ic.fabric.audit(AuditOp::Execute, BROKER, None, None, outcome, Some(format!("{id} end")));
    let trace = ic.fabric.journal()[journal_start..]
        .iter()
        .filter_map(|e| match e {
            JournalEntry::Envelope { id, .. } => Some(*id),
            _ => None,
        })
        .collect();
    Ok(PlanResult {
        plan_id: id,
        status,
        per_task,
        trace,
    })
}

fn input_text(task: &Task, inputs: &BTreeMap<String, MessageEnvelope>, outputs: &BTreeMap<String, String>) -> Result<String, String> {
    let mut parts = Vec::new();
    for i in &task.inputs {
        match i {
            TaskInput::Stream(s) => {
                let env = inputs.get(s).ok_or_else(|| format!("no-data:{s}"))?;
                parts.push(format!("{s}={}", env.payload_str().unwrap_or("<binary>")));
            }
            TaskInput::Task(t) => parts.push(outputs.get(t).cloned().ok_or_else(|| format!("no-output:{t}"))?),
        }
    }
    Ok(parts.join("; "))
}

fn run_task(
    ic: &mut Interconnect,
    plan: &TaskPlan,
    task: &Task,
    inputs: &BTreeMap<String, MessageEnvelope>,
    outputs: &BTreeMap<String, String>,
) -> Result<String, String> {
    let text = input_text(task, inputs, outputs)?;
    match task.kind {
        TaskKind::Ingest | TaskKind::Transform | TaskKind::SubscribeBinding => Ok(text),
        TaskKind::Aggregate => Ok(format!("aggregate({text})")),
        TaskKind::Infer => {
            let data = infer_input(ic, plan, task, inputs, &text).map_err(|e| e.code().to_string())?;
            let mut meta = meta_map(&[
                (KEY_SESSION, plan.plan_id.to_string()),
                (KEY_CAPABILITY, task.capability.clone().unwrap_or_default()),
            ]);
            if let Some(d) = &plan.target_domain {
                meta.insert(KEY_DOMAIN.into(), d.clone());
            }
            if let Some(l) = task.params.get(KEY_LOCALITY) {
                meta.insert(KEY_LOCALITY.into(), l.clone());
            }
            let token = ic.participate_inference(&data, &meta).map_err(|e| e.code().to_string())?;
            ic.pump_hosts().map_err(|e| e.code().to_string())?;
            let entry = ic.token_entry(token).expect("token just issued");
            match entry.token.state() {
                TokenState::Notified => Ok(entry
                    .result
                    .as_ref()
                    .map(|b| String::from_utf8_lossy(b).into_owned())
                    .unwrap_or_default()),
                TokenState::Failed => Err(entry.token.failure.clone().unwrap_or_else(|| "failed".into())),
                TokenState::Pending => Err("no-reply".into()),
            }
        }
        TaskKind::ToolInvoke => {
            let tool = match select_tool(task, &ic.broker.catalog) {
                ToolChoice::Use(t) => t.clone(),
                ToolChoice::Synthesize => synthesize_tool(ic, task).map_err(|e| e.code().to_string())?,
            };
            if let Some(target) = deploy_target(&tool.program.source) {
                ic.deploy(&tool.program, &target).map_err(|e| e.code().to_string())?;
            }
            Ok(format!("insight[{}]({text})", tool.tool_id))
        }
    }
}

/// Single-stream infer tasks use the delivered envelope itself; multi-input
/// tasks publish a combined data envelope on the plan's input topic first.
fn infer_input(
    ic: &mut Interconnect,
    plan: &TaskPlan,
    task: &Task,
    inputs: &BTreeMap<String, MessageEnvelope>,
    text: &str,
) -> Result<MessageEnvelope, IcError> {
    if let [TaskInput::Task(t)] = task.inputs.as_slice() {
        if let Some(src) = plan.tasks.iter().find(|x| &x.task_id == t) {
            if let (TaskKind::Ingest, [TaskInput::Stream(s)]) = (src.kind, src.inputs.as_slice()) {
                if let Some(env) = inputs.get(s) {
                    return Ok(env.clone());
                }
            }
        }
    }
    let topic = format!("plans/{}/input", plan.plan_id);
    let tid = ic.fabric.ensure_shared(&topic);
    let msg = Outgoing::new(&topic, MessageKind::Data, &plan.plan_id.to_string(), BROKER).payload(text);
    let metadata = msg.metadata.clone();
    let payload = msg.payload.clone();
    let p = ic.fabric.publish(msg)?;
    Ok(MessageEnvelope {
        id: p.id,
        topic: tid,
        payload,
        metadata,
        logical_time: p.logical_time,
    })
}

/// Generates a program for a tool task, sandboxes it and, if accepted, adds
/// it to the catalog. Identical task specs hit the cache.
pub fn synthesize_tool(ic: &mut Interconnect, task: &Task) -> Result<ToolSpec, IcError> {
    if task.kind != TaskKind::ToolInvoke {
        return Err(BrokerError::SynthesisFailed("not-a-tool-task".into()).into());
    }
    let key = task.spec_hash();
    if let Some(id) = ic.broker.cache.get(&key) {
        if let Some(t) = ic.broker.catalog.iter().find(|t| &t.tool_id == id) {
            return Ok(t.clone());
        }
    }
    let source = ic.broker.planner.tool_program(task, &ic.network)?;
    let tool_id = format!("tool-{key}");
    let author = ic.broker.planner.id().to_string();
    let effects = effects_of(&source);
    let program = GuardedProgram {
        program_id: tool_id.clone(),
        source,
        declared_effects: effects,
        author,
    };
    let inv_text = task.params.get("invariant").map_or(DEFAULT_TOOL_INVARIANT, String::as_str);
    let inv: Invariant = inv_text
        .parse()
        .map_err(|_| BrokerError::SynthesisFailed(format!("bad-invariant:{inv_text}")))?;
    let verdict = ic.sandbox(&program, &[inv])?;
    if !verdict.accepted() {
        let reason = verdict.reason.map(|r| r.to_string()).unwrap_or_default();
        return Err(BrokerError::SandboxRejected(reason).into());
    }
    let spec = ToolSpec {
        tool_id: tool_id.clone(),
        signature: task.signature.clone().unwrap_or_else(|| Signature::new("stream", "insight")),
        program,
        origin: ToolOrigin::Synthesized,
    };
    ic.broker.catalog.push(spec.clone());
    ic.broker.cache.insert(key, tool_id);
    Ok(spec)
}

/// First node a program addresses; tools are deployed against it.
fn deploy_target(source: &str) -> Option<NodeId> {
    fn first(prog: &[crate::guard::Instr]) -> Option<&str> {
        use crate::guard::Instr;
        prog.iter().find_map(|i| match i {
            Instr::Set { node, .. } | Instr::Scale { node, .. } | Instr::Limit { node, .. } => Some(node.as_str()),
            Instr::Reroute { from, .. } => Some(from.as_str()),
            Instr::Repeat { body, .. } => first(body),
        })
    }
    let prog = crate::guard::parse(source).ok()?;
    first(&prog).and_then(|n| NodeId::new(n).ok())
}

/// The knobs a generated program writes, used as its declared effects.
fn effects_of(source: &str) -> Vec<String> {
    let mut out = BTreeSet::new();
    if let Ok(p) = crate::guard::parse(source) {
        collect_effects(&p, &mut out);
    }
    out.into_iter().collect()
}

fn collect_effects(prog: &[crate::guard::Instr], out: &mut BTreeSet<String>) {
    use crate::guard::Instr;
    for i in prog {
        match i {
            Instr::Set { knob, .. } | Instr::Scale { knob, .. } | Instr::Limit { knob, .. } => {
                out.insert(knob.clone());
            }
            Instr::Reroute { .. } => {
                out.insert(crate::guard::OFFERED_LOAD.to_string());
            }
            Instr::Repeat { body, .. } => collect_effects(body, out),
        }
    }
}
