//! Sandbox, deployment gate, rollback, consensus and approval queue for
//! generated configuration programs.

pub mod dsl;
pub mod interp;

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

use crate::hash::{StableHash, StableHasher};
use crate::ids::{DeploymentId, NodeId, PlanId, SnapshotId, TicketId};
use crate::rational::Rational;
use crate::simnet::node::{NetworkState, SimNode};

pub use dsl::{canonical_text, parse, structural_hash, DslError, Instr};
pub use interp::{EffectSet, Fault, Interpreter, Invariant, InvalidInvariant, DEFAULT_BUDGET, OFFERED_LOAD};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct GuardedProgram {
    pub program_id: String,
    pub source: String,
    pub declared_effects: Vec<String>,
    pub author: String,
}

impl GuardedProgram {
    pub fn new(program_id: &str, source: &str, effects: &[&str], author: &str) -> Self {
        GuardedProgram {
            program_id: program_id.to_string(),
            source: source.to_string(),
            declared_effects: effects.iter().map(|e| e.to_string()).collect(),
            author: author.to_string(),
        }
    }

    /// Exact identity of the submitted text.
    pub fn source_hash(&self) -> StableHash {
        let mut h = StableHasher::new();
        h.str("src").str(&self.source);
        h.finish()
    }

    /// Formatting-independent identity; unparsable sources fall back to raw text.
    pub fn structural_hash(&self) -> StableHash {
        match parse(&self.source) {
            Ok(p) => structural_hash(&p),
            Err(_) => self.source_hash(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum VerdictStatus {
    Accepted,
    Rejected,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum RejectReason {
    ParseError,
    InvariantViolation(String),
    Timeout,
    IllegalInstruction,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RejectReason::ParseError => f.write_str("parse-error"),
            RejectReason::InvariantViolation(name) => write!(f, "invariant-violation({name})"),
            RejectReason::Timeout => f.write_str("timeout"),
            RejectReason::IllegalInstruction => f.write_str("illegal-instruction"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SandboxVerdict {
    pub program_id: String,
    pub source_hash: StableHash,
    pub status: VerdictStatus,
    pub reason: Option<RejectReason>,
    pub detail: Option<String>,
    pub metric_deltas: BTreeMap<String, Rational>,
    pub steps: u64,
}

impl SandboxVerdict {
    pub fn accepted(&self) -> bool {
        self.status == VerdictStatus::Accepted
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum DeploymentStatus {
    Active,
    RolledBack,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct DeploymentRecord {
    pub deployment_id: DeploymentId,
    pub target: NodeId,
    pub config_hash_before: StableHash,
    pub config_hash_after: StableHash,
    pub program_id: String,
    pub status: DeploymentStatus,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Subject {
    Program(String),
    Plan(PlanId),
}

impl fmt::Display for Subject {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Subject::Program(p) => write!(f, "program:{p}"),
            Subject::Plan(p) => write!(f, "{p}"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum TicketReason {
    ConsensusDisagreement,
    HighImpact,
    Manual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum TicketState {
    Open,
    Approved,
    Denied,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct HitlTicket {
    pub ticket_id: TicketId,
    pub subject: Subject,
    pub reason: TicketReason,
    pub state: TicketState,
    pub note: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum HitlPolicy {
    /// Every accepted program needs an approved ticket before deploy.
    Strict,
    #[default]
    EscalateOnly,
    /// No tickets are opened automatically.
    Off,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ConsensusVerdict {
    Consensus(GuardedProgram),
    Escalate(TicketId),
    /// Disagreement with tickets disabled by policy.
    Disagreement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConsensusResult {
    pub verdict: ConsensusVerdict,
    pub agreement: Rational,
}

/// A prompt-refinement message owed to a planner.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Feedback {
    pub author: String,
    pub program_id: String,
    pub text: String,
}

impl Feedback {
    pub fn topic(&self) -> String {
        format!("planner/{}/feedback", self.author)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum GuardError {
    #[error("program `{0}` has no accepted sandbox verdict for its current source")]
    DeployWithoutVerdict(String),
    #[error("program `{0}` awaits approval")]
    AwaitingApproval(String),
    #[error("program `{0}` was denied")]
    Blocked(String),
    #[error("program `{program}` failed against live state: {reason}")]
    DeployFailed { program: String, reason: String },
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("no active deployment {0}")]
    UnknownDeployment(DeploymentId),
    #[error("unknown snapshot {0}")]
    UnknownSnapshot(SnapshotId),
    #[error("unknown ticket {0}")]
    UnknownTicket(TicketId),
    #[error("ticket {0} is already resolved")]
    TicketClosed(TicketId),
    #[error("consensus needs at least two outputs")]
    TooFewOutputs,
}

impl GuardError {
    pub fn code(&self) -> &'static str {
        match self {
            GuardError::DeployWithoutVerdict(_) => "deploy-without-verdict",
            GuardError::AwaitingApproval(_) => "awaiting-approval",
            GuardError::Blocked(_) => "blocked",
            GuardError::DeployFailed { .. } => "deploy-failed",
            GuardError::UnknownNode(_) => "unknown-node",
            GuardError::UnknownDeployment(_) => "unknown-deployment",
            GuardError::UnknownSnapshot(_) => "unknown-snapshot",
            GuardError::UnknownTicket(_) => "unknown-ticket",
            GuardError::TicketClosed(_) => "ticket-closed",
            GuardError::TooFewOutputs => "too-few-outputs",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Decision {
    Approved,
    Denied,
}

#[derive(Debug, Clone)]
struct Deployment {
    record: DeploymentRecord,
    snapshot: SnapshotId,
}

#[derive(Debug, Clone, Default)]
pub struct Guard {
    pub policy: HitlPolicy,
    pub budget: Option<u64>,
    verdicts: BTreeMap<String, SandboxVerdict>,
    deployments: BTreeMap<DeploymentId, Deployment>,
    snapshots: BTreeMap<SnapshotId, Vec<SimNode>>,
    tickets: BTreeMap<TicketId, HitlTicket>,
    feedback: Vec<Feedback>,
    next_deployment: u64,
    next_snapshot: u64,
    next_ticket: u64,
}

impl Guard {
    pub fn new(policy: HitlPolicy) -> Self {
        Guard {
            policy,
            ..Guard::default()
        }
    }

    /// Interprets `p` against a private copy of `snapshot`.
    pub fn sandbox_run(&mut self, p: &GuardedProgram, invariants: &[Invariant], snapshot: &NetworkState) -> SandboxVerdict {
        let verdict = evaluate(p, invariants, snapshot, self.budget.unwrap_or(DEFAULT_BUDGET));
        if verdict.accepted() {
            if self.policy == HitlPolicy::Strict {
                let subject = Subject::Program(p.program_id.clone());
                if !self.tickets.values().any(|t| t.subject == subject) {
                    self.open_ticket(subject, TicketReason::HighImpact);
                }
            }
        } else {
            let reason = verdict.reason.as_ref().map(|r| r.to_string()).unwrap_or_default();
            let detail = verdict.detail.clone().unwrap_or_default();
            self.feedback.push(Feedback {
                author: p.author.clone(),
                program_id: p.program_id.clone(),
                text: format!("sandbox rejected {}: {reason} {detail}", p.program_id).trim_end().to_string(),
            });
        }
        self.verdicts.insert(p.program_id.clone(), verdict.clone());
        verdict
    }

    pub fn verdict(&self, program_id: &str) -> Option<&SandboxVerdict> {
        self.verdicts.get(program_id)
    }

    fn gate(&self, p: &GuardedProgram) -> Result<(), GuardError> {
        let id = &p.program_id;
        match self.verdicts.get(id) {
            Some(v) if v.accepted() && v.source_hash == p.source_hash() => {}
            _ => return Err(GuardError::DeployWithoutVerdict(id.clone())),
        }
        let subject = Subject::Program(id.clone());
        let mut approved = false;
        for t in self.tickets.values().filter(|t| t.subject == subject) {
            match t.state {
                TicketState::Denied => return Err(GuardError::Blocked(id.clone())),
                TicketState::Open => return Err(GuardError::AwaitingApproval(id.clone())),
                TicketState::Approved => approved = true,
            }
        }
        if self.policy == HitlPolicy::Strict && !approved {
            return Err(GuardError::AwaitingApproval(id.clone()));
        }
        Ok(())
    }

    /// Applies an accepted program to the live state, snapshotting every node it touches.
    pub fn deploy(&mut self, p: &GuardedProgram, target: &NodeId, live: &mut NetworkState) -> Result<DeploymentRecord, GuardError> {
        self.gate(p)?;
        let before = live
            .get(target)
            .ok_or_else(|| GuardError::UnknownNode(target.to_string()))?
            .config_hash();
        let program = parse(&p.source).map_err(|e| GuardError::DeployFailed {
            program: p.program_id.clone(),
            reason: e.to_string(),
        })?;
        let effects = EffectSet::new(&p.declared_effects);
        let mut interp = Interpreter::new(live.clone(), &effects, self.budget.unwrap_or(DEFAULT_BUDGET));
        interp.run(&program).map_err(|f| GuardError::DeployFailed {
            program: p.program_id.clone(),
            reason: format!("{f:?}"),
        })?;
        let mut touched: Vec<NodeId> = interp.touched.iter().cloned().collect();
        if !touched.contains(target) {
            touched.push(target.clone());
        }
        let snapshot = self.take_snapshot(live, &touched);
        for id in &touched {
            let updated = interp.state.get(id).expect("touched node exists").clone();
            *live.get_mut(id).expect("touched node exists") = updated;
        }
        let after = live.get(target).expect("target exists").config_hash();
        self.next_deployment += 1;
        let record = DeploymentRecord {
            deployment_id: DeploymentId(self.next_deployment),
            target: target.clone(),
            config_hash_before: before,
            config_hash_after: after,
            program_id: p.program_id.clone(),
            status: DeploymentStatus::Active,
        };
        self.deployments.insert(record.deployment_id, Deployment { record: record.clone(), snapshot });
        Ok(record)
    }

    pub fn rollback(&mut self, id: DeploymentId, live: &mut NetworkState) -> Result<DeploymentRecord, GuardError> {
        let dep = match self.deployments.get(&id) {
            Some(d) if d.record.status == DeploymentStatus::Active => d.clone(),
            _ => return Err(GuardError::UnknownDeployment(id)),
        };
        self.restore(dep.snapshot, live)?;
        let d = self.deployments.get_mut(&id).expect("present");
        d.record.status = DeploymentStatus::RolledBack;
        Ok(d.record.clone())
    }

    pub fn deployment(&self, id: DeploymentId) -> Option<&DeploymentRecord> {
        self.deployments.get(&id).map(|d| &d.record)
    }

    pub fn deployments(&self) -> impl Iterator<Item = &DeploymentRecord> {
        self.deployments.values().map(|d| &d.record)
    }

    /// Copies the listed nodes; unknown ids are skipped.
    pub fn take_snapshot(&mut self, live: &NetworkState, nodes: &[NodeId]) -> SnapshotId {
        self.next_snapshot += 1;
        let id = SnapshotId(self.next_snapshot);
        let copies = nodes.iter().filter_map(|n| live.get(n).cloned()).collect();
        self.snapshots.insert(id, copies);
        id
    }

    pub fn restore(&self, id: SnapshotId, live: &mut NetworkState) -> Result<(), GuardError> {
        let nodes = self.snapshots.get(&id).ok_or(GuardError::UnknownSnapshot(id))?;
        for saved in nodes {
            if let Some(n) = live.get_mut(&saved.id) {
                n.restore_from(saved);
            }
        }
        Ok(())
    }

    pub fn has_snapshot(&self, id: SnapshotId) -> bool {
        self.snapshots.contains_key(&id)
    }

    pub fn consensus_check(&mut self, outputs: &[GuardedProgram]) -> Result<ConsensusResult, GuardError> {
        if outputs.len() < 2 {
            return Err(GuardError::TooFewOutputs);
        }
        let hashes: Vec<StableHash> = outputs.iter().map(GuardedProgram::structural_hash).collect();
        // First output of the largest group; ties go to the earliest group.
        let mut best = (0usize, 0usize);
        for (i, h) in hashes.iter().enumerate() {
            let count = hashes.iter().filter(|x| *x == h).count();
            if count > best.1 {
                best = (i, count);
            }
        }
        let n = outputs.len();
        let agreement = Rational::new(best.1 as i128, n as i128);
        if best.1 * 2 > n {
            return Ok(ConsensusResult {
                verdict: ConsensusVerdict::Consensus(outputs[best.0].clone()),
                agreement,
            });
        }
        for p in outputs {
            self.feedback.push(Feedback {
                author: p.author.clone(),
                program_id: p.program_id.clone(),
                text: format!("no consensus on {}: agreement {agreement}", p.program_id),
            });
        }
        let verdict = if self.policy == HitlPolicy::Off {
            ConsensusVerdict::Disagreement
        } else {
            let ids: Vec<&str> = outputs.iter().map(|p| p.program_id.as_str()).collect();
            let t = self.open_ticket(Subject::Program(outputs[0].program_id.clone()), TicketReason::ConsensusDisagreement);
            self.tickets.get_mut(&t).expect("just opened").note = Some(format!("candidates: {}", ids.join(",")));
            ConsensusVerdict::Escalate(t)
        };
        Ok(ConsensusResult { verdict, agreement })
    }

    pub fn open_ticket(&mut self, subject: Subject, reason: TicketReason) -> TicketId {
        self.next_ticket += 1;
        let id = TicketId(self.next_ticket);
        self.tickets.insert(
            id,
            HitlTicket {
                ticket_id: id,
                subject,
                reason,
                state: TicketState::Open,
                note: None,
            },
        );
        id
    }

    pub fn resolve(&mut self, id: TicketId, decision: Decision, note: &str) -> Result<HitlTicket, GuardError> {
        let t = self.tickets.get_mut(&id).ok_or(GuardError::UnknownTicket(id))?;
        if t.state != TicketState::Open {
            return Err(GuardError::TicketClosed(id));
        }
        t.state = match decision {
            Decision::Approved => TicketState::Approved,
            Decision::Denied => TicketState::Denied,
        };
        t.note = Some(note.to_string());
        Ok(t.clone())
    }

    pub fn ticket(&self, id: TicketId) -> Option<&HitlTicket> {
        self.tickets.get(&id)
    }

    pub fn tickets(&self) -> impl Iterator<Item = &HitlTicket> {
        self.tickets.values()
    }

    /// Reinstates a ticket loaded from storage, keeping the id counter ahead of it.
    pub fn restore_ticket(&mut self, t: HitlTicket) {
        self.next_ticket = self.next_ticket.max(t.ticket_id.0);
        self.tickets.insert(t.ticket_id, t);
    }

    pub fn take_feedback(&mut self) -> Vec<Feedback> {
        core::mem::take(&mut self.feedback)
    }
}

fn evaluate(p: &GuardedProgram, invariants: &[Invariant], snapshot: &NetworkState, budget: u64) -> SandboxVerdict {
    let mut v = SandboxVerdict {
        program_id: p.program_id.clone(),
        source_hash: p.source_hash(),
        status: VerdictStatus::Rejected,
        reason: None,
        detail: None,
        metric_deltas: BTreeMap::new(),
        steps: 0,
    };
    let program = match parse(&p.source) {
        Ok(prog) => prog,
        Err(e) => {
            v.reason = Some(match e {
                DslError::Illegal { .. } => RejectReason::IllegalInstruction,
                DslError::Parse { .. } => RejectReason::ParseError,
            });
            v.detail = Some(e.to_string());
            return v;
        }
    };
    let effects = EffectSet::new(&p.declared_effects);
    let mut interp = Interpreter::new(snapshot.clone(), &effects, budget);
    let outcome = interp.run(&program);
    v.steps = interp.steps;
    match outcome {
        Err(Fault::Timeout) => v.reason = Some(RejectReason::Timeout),
        Err(Fault::Illegal(d)) => {
            v.reason = Some(RejectReason::IllegalInstruction);
            v.detail = Some(d);
        }
        Err(Fault::Violation(name)) => v.reason = Some(RejectReason::InvariantViolation(name)),
        Ok(()) => {
            if let Some(bad) = invariants.iter().find(|i| !i.holds(&interp.state)) {
                v.reason = Some(RejectReason::InvariantViolation(bad.to_string()));
            } else {
                v.status = VerdictStatus::Accepted;
                v.metric_deltas = interp::metric_deltas(snapshot, &interp.state);
            }
        }
    }
    v
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simnet::node::{NodeKind, NodeSpec, RATE_LIMIT};

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn live() -> NetworkState {
        let mut s = NetworkState::default();
        s.insert(SimNode::from_spec(NodeSpec::new("cell-1", NodeKind::UeGen).load(q("0.9"))).unwrap());
        s.insert(SimNode::from_spec(NodeSpec::new("cell-2", NodeKind::UeGen).load(q("0.3"))).unwrap());
        s
    }

    fn cell(n: &str) -> NodeId {
        NodeId::new(n).unwrap()
    }

    fn positive() -> Vec<Invariant> {
        vec!["throughput > 0".parse().unwrap()]
    }

    #[test]
    fn forced_violation_is_rejected() {
        let mut g = Guard::default();
        let s = live();
        let p = GuardedProgram::new("p1", "set cell-1 rate-limit 0", &[RATE_LIMIT], "planner-a");
        let v = g.sandbox_run(&p, &positive(), &s);
        assert_eq!(v.status, VerdictStatus::Rejected);
        assert_eq!(v.reason, Some(RejectReason::InvariantViolation("throughput > 0".into())));
        let fb = g.take_feedback();
        assert_eq!(fb.len(), 1);
        assert_eq!(fb[0].topic(), "planner/planner-a/feedback");
    }

    #[test]
    fn reroute_accepted_with_deltas() {
        let mut g = Guard::default();
        let s = live();
        let p = GuardedProgram::new("p2", "reroute cell-1 cell-2 1/3", &[OFFERED_LOAD], "a");
        let v = g.sandbox_run(&p, &positive(), &s);
        assert!(v.accepted());
        assert_eq!(v.reason, None);
        assert_eq!(v.metric_deltas["cell-1.utilization"], q("-3/10"));
        assert_eq!(v.metric_deltas["cell-2.throughput"], q("3/10"));
        assert_eq!(s, live());
    }

    #[test]
    fn unknown_instruction_is_illegal() {
        let mut g = Guard::default();
        let v = g.sandbox_run(&GuardedProgram::new("p3", "format disk", &[], "a"), &[], &live());
        assert_eq!(v.reason, Some(RejectReason::IllegalInstruction));
    }

    #[test]
    fn deploy_then_rollback_restores_hash() {
        let mut g = Guard::default();
        let mut s = live();
        let before = s.get(&cell("cell-1")).unwrap().config_hash();
        let state_before = s.state_hash();
        let p = GuardedProgram::new("v2", "set cell-1 admission-rate 0.9\nreroute cell-1 cell-2 0.5", &["admission-rate", OFFERED_LOAD], "a");
        assert!(g.sandbox_run(&p, &positive(), &s).accepted());
        let rec = g.deploy(&p, &cell("cell-1"), &mut s).unwrap();
        assert_eq!(rec.config_hash_before, before);
        assert_ne!(rec.config_hash_after, before);
        let rb = g.rollback(rec.deployment_id, &mut s).unwrap();
        assert_eq!(rb.status, DeploymentStatus::RolledBack);
        assert_eq!(s.get(&cell("cell-1")).unwrap().config_hash(), before);
        assert_eq!(s.state_hash(), state_before);
        assert_eq!(g.rollback(rec.deployment_id, &mut s), Err(GuardError::UnknownDeployment(rec.deployment_id)));
    }

    #[test]
    fn gate_refuses_rejected_unverdicted_and_edited() {
        let mut g = Guard::default();
        let mut s = live();
        let bad = GuardedProgram::new("bad", "set cell-1 rate-limit 0", &[RATE_LIMIT], "a");
        g.sandbox_run(&bad, &positive(), &s);
        assert_eq!(g.deploy(&bad, &cell("cell-1"), &mut s), Err(GuardError::DeployWithoutVerdict("bad".into())));
        let fresh = GuardedProgram::new("fresh", "set cell-1 rate-limit 5", &[RATE_LIMIT], "a");
        assert!(g.deploy(&fresh, &cell("cell-1"), &mut s).is_err());
        g.sandbox_run(&fresh, &positive(), &s);
        let mut edited = fresh.clone();
        edited.source = "set cell-1 rate-limit 0".into();
        assert!(matches!(g.deploy(&edited, &cell("cell-1"), &mut s), Err(GuardError::DeployWithoutVerdict(_))));
        assert!(g.deploy(&fresh, &cell("cell-1"), &mut s).is_ok());
    }

    #[test]
    fn consensus_majorities() {
        let mut g = Guard::default();
        let a = GuardedProgram::new("a", "set cell-1 rate-limit 5", &[], "m1");
        let a2 = GuardedProgram::new("a2", "# same\nSET cell-1 RATE-LIMIT 5.0", &[], "m2");
        let b = GuardedProgram::new("b", "set cell-1 rate-limit 6", &[], "m3");
        let c = GuardedProgram::new("c", "set cell-1 rate-limit 7", &[], "m4");
        let r = g.consensus_check(&[a.clone(), a2.clone(), b.clone()]).unwrap();
        assert_eq!(r.verdict, ConsensusVerdict::Consensus(a.clone()));
        assert_eq!(r.agreement, q("2/3"));
        let r = g.consensus_check(&[a.clone(), b.clone(), c]).unwrap();
        assert!(matches!(r.verdict, ConsensusVerdict::Escalate(_)));
        assert_eq!(g.tickets().filter(|t| t.state == TicketState::Open).count(), 1);
        let r = g.consensus_check(&[a.clone(), a2]).unwrap();
        assert_eq!(r.agreement, Rational::ONE);
        let r = g.consensus_check(&[a.clone(), b]).unwrap();
        assert!(matches!(r.verdict, ConsensusVerdict::Escalate(_)));
        assert_eq!(g.consensus_check(&[a]), Err(GuardError::TooFewOutputs));
    }

    #[test]
    fn strict_policy_and_tickets() {
        let mut g = Guard::new(HitlPolicy::Strict);
        let mut s = live();
        let p = GuardedProgram::new("p", "limit cell-1 rate-limit 50", &[RATE_LIMIT], "a");
        assert!(g.sandbox_run(&p, &positive(), &s).accepted());
        assert_eq!(g.deploy(&p, &cell("cell-1"), &mut s), Err(GuardError::AwaitingApproval("p".into())));
        let t = g.tickets().next().unwrap().ticket_id;
        let resolved = g.resolve(t, Decision::Approved, "ok").unwrap();
        assert_eq!(resolved.state, TicketState::Approved);
        assert_eq!(g.resolve(t, Decision::Denied, "again"), Err(GuardError::TicketClosed(t)));
        assert!(g.deploy(&p, &cell("cell-1"), &mut s).is_ok());
        assert_eq!(g.resolve(TicketId(99), Decision::Denied, ""), Err(GuardError::UnknownTicket(TicketId(99))));

        let d = GuardedProgram::new("d", "limit cell-2 rate-limit 50", &[RATE_LIMIT], "a");
        g.sandbox_run(&d, &positive(), &s);
        let t = g.tickets().find(|t| t.subject == Subject::Program("d".into())).unwrap().ticket_id;
        g.resolve(t, Decision::Denied, "no").unwrap();
        g.sandbox_run(&d, &positive(), &s);
        assert_eq!(g.deploy(&d, &cell("cell-2"), &mut s), Err(GuardError::Blocked("d".into())));
    }
}
