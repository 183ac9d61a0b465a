//! Budgeted interpreter for parsed programs and invariant predicates.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::dsl::Instr;
use crate::ids::NodeId;
use crate::rational::Rational;
use crate::simnet::node::{KnobError, NetworkState, SimNode};

pub const DEFAULT_BUDGET: u64 = 10_000;

/// Effect name that authorizes `reroute`.
pub const OFFERED_LOAD: &str = "offered-load";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Fault {
    Timeout,
    Illegal(String),
    Violation(String),
}

/// Effect names a program may touch: a bare knob (`rate-limit`) applies to
/// every node, `node.knob` to one node.
#[derive(Debug, Clone, Default)]
pub struct EffectSet(BTreeSet<String>);

impl EffectSet {
    pub fn new<'a>(names: impl IntoIterator<Item = &'a String>) -> Self {
        EffectSet(names.into_iter().map(|s| s.to_ascii_lowercase()).collect())
    }

    pub fn allows(&self, node: &str, effect: &str) -> bool {
        self.0.contains(effect) || self.0.contains(&format!("{node}.{effect}"))
    }
}

pub struct Interpreter<'a> {
    pub state: NetworkState,
    effects: &'a EffectSet,
    budget: u64,
    pub steps: u64,
    pub touched: BTreeSet<NodeId>,
}

impl<'a> Interpreter<'a> {
    pub fn new(state: NetworkState, effects: &'a EffectSet, budget: u64) -> Self {
        Interpreter {
            state,
            effects,
            budget,
            steps: 0,
            touched: BTreeSet::new(),
        }
    }

    pub fn run(&mut self, program: &[Instr]) -> Result<(), Fault> {
        for instr in program {
            self.tick()?;
            match instr {
                Instr::Repeat { count, body } => {
                    for _ in 0..*count {
                        self.run(body)?;
                    }
                }
                Instr::Set { node, knob, value } => self.write_knob(node, knob, |_| Some(*value))?,
                Instr::Scale { node, knob, factor } => self.write_knob(node, knob, |v| v.checked_mul(factor))?,
                Instr::Limit { node, knob, max } => self.write_knob(node, knob, |v| Some(v.min(*max)))?,
                Instr::Reroute { from, to, fraction } => self.reroute(from, to, *fraction)?,
            }
        }
        Ok(())
    }

    fn tick(&mut self) -> Result<(), Fault> {
        self.steps += 1;
        if self.steps > self.budget {
            Err(Fault::Timeout)
        } else {
            Ok(())
        }
    }

    fn node_mut(&mut self, name: &str) -> Result<&mut SimNode, Fault> {
        let id = NodeId::new(name).map_err(|_| Fault::Illegal(format!("unknown-node:{name}")))?;
        self.state
            .get_mut(&id)
            .ok_or_else(|| Fault::Illegal(format!("unknown-node:{name}")))
    }

    fn write_knob(
        &mut self,
        node: &str,
        knob: &str,
        f: impl FnOnce(Rational) -> Option<Rational>,
    ) -> Result<(), Fault> {
        let allowed = self.effects.allows(node, knob);
        let n = self.node_mut(node)?;
        let current = n
            .knob(knob)
            .ok_or_else(|| Fault::Illegal(format!("unknown-knob:{node}.{knob}")))?;
        if !allowed {
            return Err(Fault::Violation(format!("undeclared-effect:{node}.{knob}")));
        }
        let next = f(current).ok_or_else(|| Fault::Violation("numeric-overflow".to_string()))?;
        n.set_knob(knob, next).map_err(|e| match e {
            KnobError::UnknownKnob { .. } => Fault::Illegal(format!("unknown-knob:{node}.{knob}")),
            KnobError::OutOfRange { .. } => Fault::Violation(format!("knob-range:{node}.{knob}")),
        })?;
        let id = n.id.clone();
        self.touched.insert(id);
        Ok(())
    }

    fn reroute(&mut self, from: &str, to: &str, fraction: Rational) -> Result<(), Fault> {
        for n in [from, to] {
            let node = self.node_mut(n)?;
            if node.load.is_none() {
                return Err(Fault::Illegal(format!("no-load:{n}")));
            }
        }
        if !self.effects.allows(from, OFFERED_LOAD) || !self.effects.allows(to, OFFERED_LOAD) {
            return Err(Fault::Violation(format!("undeclared-effect:{OFFERED_LOAD}")));
        }
        if fraction < Rational::ZERO || fraction > Rational::ONE {
            return Err(Fault::Violation("reroute-fraction".to_string()));
        }
        if from == to {
            return Ok(());
        }
        let overflow = || Fault::Violation("numeric-overflow".to_string());
        let src = self.node_mut(from)?;
        let mut load = src.load.expect("checked above");
        let moved = load.offered_load.checked_mul(&fraction).ok_or_else(overflow)?;
        load.offered_load = load.offered_load.checked_sub(&moved).ok_or_else(overflow)?;
        src.load = Some(load);
        let src_id = src.id.clone();
        let dst = self.node_mut(to)?;
        let mut load = dst.load.expect("checked above");
        load.offered_load = load.offered_load.checked_add(&moved).ok_or_else(overflow)?;
        dst.load = Some(load);
        let dst_id = dst.id.clone();
        self.touched.insert(src_id);
        self.touched.insert(dst_id);
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CmpOp {
    Gt,
    Ge,
    Lt,
    Le,
    Eq,
    Ne,
}

impl CmpOp {
    fn as_str(self) -> &'static str {
        match self {
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Eq => "=",
            CmpOp::Ne => "!=",
        }
    }

    fn holds(self, l: Rational, r: Rational) -> bool {
        match self {
            CmpOp::Gt => l > r,
            CmpOp::Ge => l >= r,
            CmpOp::Lt => l < r,
            CmpOp::Le => l <= r,
            CmpOp::Eq => l == r,
            CmpOp::Ne => l != r,
        }
    }
}

/// `[node.]metric op value`, e.g. `throughput > 0` or `cell-1.utilization <= 0.8`.
///
/// Metrics are `throughput`, `utilization`, `queue-depth` or any knob name.
/// Without a node prefix the predicate must hold on every node that has the
/// metric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Invariant {
    pub node: Option<String>,
    pub metric: String,
    pub op: CmpOp,
    pub value: Rational,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid invariant `{0}`")]
pub struct InvalidInvariant(pub String);

impl FromStr for Invariant {
    type Err = InvalidInvariant;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let err = || InvalidInvariant(s.to_string());
        let words: Vec<&str> = s.split_whitespace().collect();
        let [lhs, op, rhs] = words[..] else { return Err(err()) };
        let op = match op {
            ">" => CmpOp::Gt,
            ">=" => CmpOp::Ge,
            "<" => CmpOp::Lt,
            "<=" => CmpOp::Le,
            "=" | "==" => CmpOp::Eq,
            "!=" => CmpOp::Ne,
            _ => return Err(err()),
        };
        let lhs = lhs.to_ascii_lowercase();
        let (node, metric) = match lhs.split_once('.') {
            Some((n, m)) => (Some(n.to_string()), m.to_string()),
            None => (None, lhs),
        };
        if !crate::ids::is_segment(&metric) || node.as_deref().is_some_and(|n| !crate::ids::is_segment(n)) {
            return Err(err());
        }
        Ok(Invariant {
            node,
            metric,
            op,
            value: rhs.parse().map_err(|_| err())?,
        })
    }
}

impl fmt::Display for Invariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(n) = &self.node {
            write!(f, "{n}.")?;
        }
        write!(f, "{} {} {}", self.metric, self.op.as_str(), self.value)
    }
}

pub fn metric(node: &SimNode, name: &str) -> Option<Rational> {
    match name {
        "throughput" => node.throughput(),
        "utilization" => node.utilization(),
        "queue-depth" => node.load.map(|l| l.queue_depth),
        "offered-load" => node.load.map(|l| l.offered_load),
        knob => node.knob(knob),
    }
}

impl Invariant {
    pub fn holds(&self, state: &NetworkState) -> bool {
        state
            .nodes()
            .filter(|n| self.node.as_deref().is_none_or(|want| n.id.as_str() == want))
            .filter_map(|n| metric(n, &self.metric))
            .all(|v| self.op.holds(v, self.value))
    }
}

/// Throughput and utilization change per loaded node, zero deltas omitted.
pub fn metric_deltas(before: &NetworkState, after: &NetworkState) -> BTreeMap<String, Rational> {
    let mut out = BTreeMap::new();
    for n in after.nodes() {
        let Some(old) = before.get(&n.id) else { continue };
        for m in ["throughput", "utilization"] {
            if let (Some(a), Some(b)) = (metric(old, m), metric(n, m)) {
                if a != b {
                    out.insert(format!("{}.{m}", n.id), b - a);
                }
            }
        }
    }
    out
}
