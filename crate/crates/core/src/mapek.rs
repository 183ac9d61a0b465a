//! Monitor, analyze, plan and execute over a shared knowledge base.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::fabric::{AuditOp, MessageKind, Outcome, Outgoing, SubscriptionRequest};
use crate::ids::{AdaptationId, FindingId, MessageId, NodeId, SnapshotId, SubscriptionId};
use crate::interconnect::{IcError, Interconnect, KEY_KNOB, KEY_VALUE};
use crate::rational::Rational;
use crate::simnet::node::ADMISSION_RATE;
use crate::simnet::World;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const DEFAULT_ID: &str = "mapek";
pub const MONITOR_PREFIX: &str = "monitor/";
const LOAD_SUFFIX: &str = "/load";

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LoopConfig {
    pub theta: Rational,
    pub window: usize,
    /// Multiplier applied to the admission rate per adaptation.
    pub factor: Rational,
    pub selector: String,
}

impl Default for LoopConfig {
    fn default() -> Self {
        LoopConfig {
            theta: Rational::new(4, 5),
            window: 10,
            factor: Rational::new(9, 10),
            selector: "telemetry/**".into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum Source {
    Monitor,
    Analyze,
    Plan,
    Execute,
    External,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum Value {
    Scalar(Rational),
    Series(Vec<Rational>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct KnowledgeRecord {
    pub key: String,
    pub value: Value,
    pub source: Source,
    pub logical_time: u64,
}

/// Append-only; a record's index is its stable reference.
#[derive(Debug, Clone, Default)]
pub struct Knowledge {
    records: Vec<KnowledgeRecord>,
}

impl Knowledge {
    pub fn append(&mut self, key: String, value: Value, source: Source, logical_time: u64) -> usize {
        self.records.push(KnowledgeRecord {
            key,
            value,
            source,
            logical_time,
        });
        self.records.len() - 1
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn records(&self) -> &[KnowledgeRecord] {
        &self.records
    }

    pub fn get(&self, index: usize) -> Option<&KnowledgeRecord> {
        self.records.get(index)
    }

    pub fn latest(&self, key: &str) -> Option<&KnowledgeRecord> {
        self.records.iter().rev().find(|r| r.key == key)
    }

    /// The last `n` scalar values under `key`, oldest first, with their indices.
    pub fn window(&self, key: &str, n: usize) -> Vec<(usize, Rational)> {
        let mut out: Vec<(usize, Rational)> = self
            .records
            .iter()
            .enumerate()
            .rev()
            .filter_map(|(i, r)| match (&r.value, r.key == key) {
                (Value::Scalar(v), true) => Some((i, *v)),
                _ => None,
            })
            .take(n)
            .collect();
        out.reverse();
        out
    }

    /// Nodes with at least one monitor load sample, in name order.
    pub fn monitored_nodes(&self) -> BTreeSet<String> {
        self.records
            .iter()
            .filter(|r| r.source == Source::Monitor)
            .filter_map(|r| r.key.strip_prefix(MONITOR_PREFIX)?.strip_suffix(LOAD_SUFFIX))
            .map(str::to_string)
            .collect()
    }
}

pub fn load_key(node: &str) -> String {
    format!("{MONITOR_PREFIX}{node}{LOAD_SUFFIX}")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum FindingKind {
    Congestion,
    Anomaly,
    SlaRisk,
    None,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Finding {
    pub finding_id: FindingId,
    pub kind: FindingKind,
    pub node: Option<String>,
    pub mean: Option<Rational>,
    pub evidence: Vec<usize>,
    pub severity: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ManagedAction {
    pub target: NodeId,
    pub knob: String,
    pub new_value: Rational,
}

impl core::fmt::Display for ManagedAction {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        write!(f, "{}.{}={}", self.target, self.knob, self.new_value)
    }
}

/// Holds when every listed node's windowed mean load is strictly below its bound.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ExpectedEffect {
    pub mean_below: Vec<(NodeId, Rational)>,
}

impl ExpectedEffect {
    pub fn holds(&self, k: &Knowledge, window: usize) -> bool {
        self.mean_below
            .iter()
            .all(|(n, bound)| mean(&k.window(&load_key(n.as_str()), window)).is_some_and(|m| m < *bound))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AdaptationPlan {
    pub plan_id: AdaptationId,
    pub actions: Vec<ManagedAction>,
    pub expected_effect: ExpectedEffect,
    pub rollback_ref: SnapshotId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ExecutionReport {
    pub plan_id: AdaptationId,
    pub applied: Vec<ManagedAction>,
    pub settled_ticks: u64,
    pub effect_held: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum MapekError {
    #[error("no monitor records to analyze")]
    InsufficientData,
    #[error("no knob can address the findings")]
    NoApplicableAction,
    #[error("action {0} could not be applied")]
    ExecutionFailed(String),
    #[error("expected effect of {0} did not hold; configuration rolled back")]
    RollbackPerformed(AdaptationId),
    #[error(transparent)]
    Interconnect(#[from] IcError),
}

impl MapekError {
    pub fn code(&self) -> &'static str {
        match self {
            MapekError::InsufficientData => "insufficient-data",
            MapekError::NoApplicableAction => "no-applicable-action",
            MapekError::ExecutionFailed(_) => "execution-failed",
            MapekError::RollbackPerformed(_) => "rollback-performed",
            MapekError::Interconnect(e) => e.code(),
        }
    }
}

/// The system a loop manages: fabric access plus a way to let time pass.
pub trait ManagedSystem {
    fn interconnect(&mut self) -> &mut Interconnect;
    fn settle(&mut self, ticks: u64) -> Result<(), IcError>;
}

impl ManagedSystem for World {
    fn interconnect(&mut self) -> &mut Interconnect {
        &mut self.ic
    }

    fn settle(&mut self, ticks: u64) -> Result<(), IcError> {
        self.step(ticks).map(|_| ())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct StageTimes {
    pub monitor: u64,
    pub analyze: u64,
    pub plan: Option<u64>,
    pub execute: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum IterationOutcome {
    Healthy,
    Adapted,
    RolledBack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct IterationReport {
    pub index: u32,
    pub monitored: usize,
    pub findings: Vec<Finding>,
    pub plan: Option<AdaptationPlan>,
    pub execution: Option<ExecutionReport>,
    pub outcome: IterationOutcome,
    pub stage_times: StageTimes,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LoopReport {
    pub loop_id: String,
    pub iterations: Vec<IterationReport>,
    pub adaptations: u32,
    /// Adaptations applied before the first healthy analysis.
    pub converged_at: Option<u32>,
}

pub struct ManagingLoop {
    id: NodeId,
    pub config: LoopConfig,
    knowledge: Knowledge,
    seen: BTreeSet<MessageId>,
    subscription: SubscriptionId,
    next_finding: u64,
    next_plan: u64,
}

fn mean(samples: &[(usize, Rational)]) -> Option<Rational> {
    if samples.is_empty() {
        return None;
    }
    let sum = samples.iter().fold(Rational::ZERO, |acc, (_, v)| acc + *v);
    Some(sum / Rational::integer(samples.len() as i128))
}

impl ManagingLoop {
    pub fn new(ic: &mut Interconnect, id: &str, config: LoopConfig) -> Result<Self, MapekError> {
        let node = ic.register_node(id);
        let subscription = ic.subscribe(SubscriptionRequest::durable(&config.selector, &node))?;
        Ok(ManagingLoop {
            id: node,
            config,
            knowledge: Knowledge::default(),
            seen: BTreeSet::new(),
            subscription,
            next_finding: 0,
            next_plan: 0,
        })
    }

    pub fn id(&self) -> &NodeId {
        &self.id
    }

    pub fn knowledge(&self) -> &Knowledge {
        &self.knowledge
    }

    /// Folds pending telemetry into knowledge; returns the number of new records.
    pub fn monitor(&mut self, ic: &mut Interconnect) -> usize {
        let mut n = 0;
        for d in ic.fabric.drain_subscription(&self.id, self.subscription) {
            if self.ingest(&d.envelope) {
                n += 1;
            }
        }
        ic.fabric.advance();
        ic.fabric.note(self.id.as_str(), format!("monitor ingested {n}"));
        n
    }

    /// Records one telemetry envelope unless its id was already seen.
    pub fn ingest(&mut self, env: &crate::fabric::MessageEnvelope) -> bool {
        let mut segs = env.topic.name().split('/');
        let (Some(_), Some(node)) = (segs.next(), segs.next()) else {
            return false;
        };
        let Some(value) = env.payload_str().and_then(|p| p.parse::<Rational>().ok()) else {
            return false;
        };
        if !self.seen.insert(env.id) {
            return false;
        }
        self.knowledge.append(load_key(node), Value::Scalar(value), Source::Monitor, env.logical_time);
        true
    }

    pub fn analyze(&mut self, ic: &mut Interconnect) -> Result<Vec<Finding>, MapekError> {
        let now = ic.fabric.advance();
        let nodes = self.knowledge.monitored_nodes();
        if nodes.is_empty() {
            ic.fabric.note(self.id.as_str(), "analyze insufficient-data");
            return Err(MapekError::InsufficientData);
        }
        let theta = self.config.theta;
        let mut findings = Vec::new();
        for node in nodes {
            let samples = self.knowledge.window(&load_key(&node), self.config.window);
            let m = mean(&samples).expect("monitored nodes have samples");
            self.knowledge
                .append(format!("analyze/{node}/mean"), Value::Scalar(m), Source::Analyze, now);
            if m <= theta {
                continue;
            }
            let severity = ((m - theta) / (Rational::ONE - theta)).clamp(Rational::ZERO, Rational::ONE);
            self.knowledge
                .append(format!("analyze/{node}/severity"), Value::Scalar(severity), Source::Analyze, now);
            findings.push(Finding {
                finding_id: self.finding_id(),
                kind: FindingKind::Congestion,
                node: Some(node),
                mean: Some(m),
                evidence: samples.iter().map(|(i, _)| *i).collect(),
                severity,
            });
        }
        if findings.is_empty() {
            findings.push(Finding {
                finding_id: self.finding_id(),
                kind: FindingKind::None,
                node: None,
                mean: None,
                evidence: Vec::new(),
                severity: Rational::ZERO,
            });
        }
        let summary: Vec<String> = findings
            .iter()
            .map(|f| match &f.node {
                Some(n) => format!("{} {n} severity {}", f.finding_id, f.severity),
                None => format!("{} none", f.finding_id),
            })
            .collect();
        ic.fabric.note(self.id.as_str(), format!("analyze {}", summary.join(", ")));
        Ok(findings)
    }

    fn finding_id(&mut self) -> FindingId {
        self.next_finding += 1;
        FindingId(self.next_finding)
    }

    pub fn plan(&mut self, ic: &mut Interconnect, findings: &[Finding]) -> Result<AdaptationPlan, MapekError> {
        let now = ic.fabric.advance();
        let mut ranked: Vec<&Finding> = findings.iter().filter(|f| f.kind != FindingKind::None).collect();
        ranked.sort_by(|a, b| b.severity.cmp(&a.severity).then_with(|| a.node.cmp(&b.node)));
        let mut actions = Vec::new();
        let mut bounds = Vec::new();
        for f in ranked {
            let Some(node) = f.node.as_deref().and_then(|n| ic.network.get_by_name(n)) else {
                continue;
            };
            let Some(current) = node.knob(ADMISSION_RATE) else {
                continue;
            };
            actions.push(ManagedAction {
                target: node.id.clone(),
                knob: ADMISSION_RATE.to_string(),
                new_value: current * self.config.factor,
            });
            if let Some(m) = f.mean {
                bounds.push((node.id.clone(), m));
            }
        }
        if actions.is_empty() {
            ic.fabric.audit(
                AuditOp::Plan,
                self.id.as_str(),
                None,
                None,
                Outcome::error("no-applicable-action"),
                None,
            );
            return Err(MapekError::NoApplicableAction);
        }
        self.next_plan += 1;
        let plan_id = AdaptationId(self.next_plan);
        let targets: Vec<NodeId> = actions.iter().map(|a| a.target.clone()).collect();
        let rollback_ref = ic.guard.take_snapshot(&ic.network, &targets);
        let listed: Vec<String> = actions.iter().map(ToString::to_string).collect();
        let note = format!("{plan_id} {} rollback {rollback_ref}", listed.join(" "));
        ic.fabric.audit(AuditOp::Plan, self.id.as_str(), None, None, Outcome::Ok, Some(note));
        self.knowledge.append(
            format!("plan/{plan_id}/actions"),
            Value::Scalar(Rational::integer(actions.len() as i128)),
            Source::Plan,
            now,
        );
        Ok(AdaptationPlan {
            plan_id,
            actions,
            expected_effect: ExpectedEffect { mean_below: bounds },
            rollback_ref,
        })
    }

    pub fn execute<S: ManagedSystem>(&mut self, sys: &mut S, plan: &AdaptationPlan) -> Result<ExecutionReport, MapekError> {
        let ic = sys.interconnect();
        ic.fabric.advance();
        if !ic.guard.has_snapshot(plan.rollback_ref) {
            return self.fail(ic, plan, "no-rollback-snapshot");
        }
        if let Some(bad) = plan
            .actions
            .iter()
            .find(|a| ic.network.get(&a.target).and_then(|n| n.spec_of(&a.knob)).is_none())
        {
            let text = bad.to_string();
            return self.fail(ic, plan, &text);
        }
        for a in &plan.actions {
            let msg = Outgoing::new(format!("control/{}", a.target), MessageKind::Control, "mapek", self.id.as_str())
                .meta(KEY_KNOB, a.knob.clone())
                .meta(KEY_VALUE, a.new_value.to_string());
            ic.publish(msg)?;
        }
        ic.pump()?;
        if let Some(bad) = plan
            .actions
            .iter()
            .find(|a| ic.network.get(&a.target).and_then(|n| n.knob(&a.knob)) != Some(a.new_value))
        {
            let text = bad.to_string();
            ic.guard.restore(plan.rollback_ref, &mut ic.network).map_err(IcError::from)?;
            return self.fail(ic, plan, &text);
        }
        ic.fabric.advance();
        ic.fabric.audit(
            AuditOp::Execute,
            self.id.as_str(),
            None,
            None,
            Outcome::Ok,
            Some(format!("{} applied {}", plan.plan_id, plan.actions.len())),
        );
        let settle = self.config.window as u64;
        sys.settle(settle)?;
        let ic = sys.interconnect();
        self.monitor(ic);
        let held = plan.expected_effect.holds(&self.knowledge, self.config.window);
        let now = ic.fabric.now();
        self.knowledge.append(
            format!("execute/{}/effect-held", plan.plan_id),
            Value::Scalar(Rational::integer(i128::from(held))),
            Source::Execute,
            now,
        );
        if !held {
            ic.guard.restore(plan.rollback_ref, &mut ic.network).map_err(IcError::from)?;
            ic.fabric.advance();
            ic.fabric.audit(
                AuditOp::Rollback,
                self.id.as_str(),
                None,
                None,
                Outcome::Ok,
                Some(format!("{} restored {}", plan.plan_id, plan.rollback_ref)),
            );
            return Err(MapekError::RollbackPerformed(plan.plan_id));
        }
        Ok(ExecutionReport {
            plan_id: plan.plan_id,
            applied: plan.actions.clone(),
            settled_ticks: settle,
            effect_held: true,
        })
    }

    fn fail<T>(&self, ic: &mut Interconnect, plan: &AdaptationPlan, what: &str) -> Result<T, MapekError> {
        ic.fabric.audit(
            AuditOp::Execute,
            self.id.as_str(),
            None,
            None,
            Outcome::error("execution-failed"),
            Some(format!("{} {what}", plan.plan_id)),
        );
        Err(MapekError::ExecutionFailed(what.to_string()))
    }

    /// Iterates the cycle until analysis finds nothing or `max_iterations`
    /// is reached. A rollback ends the loop and is reported, not returned.
    pub fn run_loop<S: ManagedSystem>(&mut self, sys: &mut S, max_iterations: u32) -> Result<LoopReport, MapekError> {
        let mut report = LoopReport {
            loop_id: self.id.to_string(),
            iterations: Vec::new(),
            adaptations: 0,
            converged_at: None,
        };
        for index in 1..=max_iterations {
            let ic = sys.interconnect();
            let monitored = self.monitor(ic);
            let mut times = StageTimes {
                monitor: ic.fabric.now(),
                ..StageTimes::default()
            };
            let findings = self.analyze(ic)?;
            times.analyze = ic.fabric.now();
            let mut it = IterationReport {
                index,
                monitored,
                findings,
                plan: None,
                execution: None,
                outcome: IterationOutcome::Healthy,
                stage_times: times,
            };
            if it.findings.iter().all(|f| f.kind == FindingKind::None) {
                report.converged_at = Some(report.adaptations);
                report.iterations.push(it);
                break;
            }
            let plan = self.plan(ic, &it.findings)?;
            it.stage_times.plan = Some(ic.fabric.now());
            let result = self.execute(sys, &plan);
            it.stage_times.execute = Some(sys.interconnect().fabric.now());
            it.plan = Some(plan);
            match result {
                Ok(exec) => {
                    report.adaptations += 1;
                    it.outcome = IterationOutcome::Adapted;
                    it.execution = Some(exec);
                    report.iterations.push(it);
                }
                Err(MapekError::RollbackPerformed(_)) => {
                    it.outcome = IterationOutcome::RolledBack;
                    report.iterations.push(it);
                    break;
                }
                Err(e) => return Err(e),
            }
        }
        Ok(report)
    }
}
