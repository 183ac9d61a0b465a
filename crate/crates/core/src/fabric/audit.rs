//! Append-only audit trail of fabric operations.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::ids::{MessageId, ModelId};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum AuditOp {
    Publish,
    Subscribe,
    Unsubscribe,
    Deliver,
    ParticipateInference,
    ParticipateLearning,
    Negotiate,
    Plan,
    Execute,
    Sandbox,
    Rollback,
    HitlResolve,
}

impl AuditOp {
    pub const ALL: [AuditOp; 12] = [
        AuditOp::Publish,
        AuditOp::Subscribe,
        AuditOp::Unsubscribe,
        AuditOp::Deliver,
        AuditOp::ParticipateInference,
        AuditOp::ParticipateLearning,
        AuditOp::Negotiate,
        AuditOp::Plan,
        AuditOp::Execute,
        AuditOp::Sandbox,
        AuditOp::Rollback,
        AuditOp::HitlResolve,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            AuditOp::Publish => "publish",
            AuditOp::Subscribe => "subscribe",
            AuditOp::Unsubscribe => "unsubscribe",
            AuditOp::Deliver => "deliver",
            AuditOp::ParticipateInference => "participate-inference",
            AuditOp::ParticipateLearning => "participate-learning",
            AuditOp::Negotiate => "negotiate",
            AuditOp::Plan => "plan",
            AuditOp::Execute => "execute",
            AuditOp::Sandbox => "sandbox",
            AuditOp::Rollback => "rollback",
            AuditOp::HitlResolve => "hitl-resolve",
        }
    }
}

impl fmt::Display for AuditOp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AuditOp {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        AuditOp::ALL.into_iter().find(|o| o.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum Outcome {
    Ok,
    Error(String),
}

impl Outcome {
    pub fn error(code: &str) -> Self {
        Outcome::Error(code.to_string())
    }

    pub fn is_ok(&self) -> bool {
        matches!(self, Outcome::Ok)
    }
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Outcome::Ok => f.write_str("ok"),
            Outcome::Error(code) => write!(f, "error:{code}"),
        }
    }
}

impl FromStr for Outcome {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        if s == "ok" {
            Ok(Outcome::Ok)
        } else {
            match s.strip_prefix("error:") {
                Some(code) if !code.is_empty() => Ok(Outcome::Error(code.to_string())),
                _ => Err(()),
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AuditRecord {
    pub seq: u64,
    pub logical_time: u64,
    pub op: AuditOp,
    pub actor: String,
    pub message_id: Option<MessageId>,
    pub model_id: Option<ModelId>,
    pub outcome: Outcome,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct AuditFilter {
    pub ops: Option<BTreeSet<AuditOp>>,
    pub actor: Option<String>,
    /// Inclusive on both ends.
    pub time_range: Option<(u64, u64)>,
}

impl AuditFilter {
    pub fn op(op: AuditOp) -> Self {
        AuditFilter {
            ops: Some([op].into_iter().collect()),
            ..Default::default()
        }
    }

    pub fn actor(actor: &str) -> Self {
        AuditFilter {
            actor: Some(actor.to_string()),
            ..Default::default()
        }
    }

    pub fn accepts(&self, r: &AuditRecord) -> bool {
        self.ops.as_ref().is_none_or(|ops| ops.contains(&r.op))
            && self.actor.as_ref().is_none_or(|a| *a == r.actor)
            && self
                .time_range
                .is_none_or(|(t0, t1)| (t0..=t1).contains(&r.logical_time))
    }
}

/// Records are only ever appended; `seq` is dense from 0.
#[derive(Debug, Clone, Default)]
pub struct AuditLog {
    records: Vec<AuditRecord>,
}

impl AuditLog {
    pub fn append(
        &mut self,
        logical_time: u64,
        op: AuditOp,
        actor: &str,
        message_id: Option<MessageId>,
        model_id: Option<ModelId>,
        outcome: Outcome,
    ) -> &AuditRecord {
        let seq = self.records.len() as u64;
        self.records.push(AuditRecord {
            seq,
            logical_time,
            op,
            actor: actor.to_string(),
            message_id,
            model_id,
            outcome,
        });
        &self.records[seq as usize]
    }

    pub fn query(&self, filter: &AuditFilter) -> Vec<AuditRecord> {
        self.records.iter().filter(|r| filter.accepts(r)).cloned().collect()
    }

    pub fn records(&self) -> &[AuditRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn filter_by_op_actor_time() {
        let mut log = AuditLog::default();
        log.append(1, AuditOp::Publish, "a", Some(MessageId(1)), None, Outcome::Ok);
        log.append(1, AuditOp::Deliver, "b", Some(MessageId(1)), None, Outcome::Ok);
        log.append(2, AuditOp::Publish, "b", None, None, Outcome::error("unknown-topic"));
        assert_eq!(log.query(&AuditFilter::op(AuditOp::Publish)).len(), 2);
        assert_eq!(log.query(&AuditFilter::actor("b")).len(), 2);
        assert!(log.query(&AuditFilter::actor("zzz")).is_empty());
        let f = AuditFilter { time_range: Some((2, 5)), ..Default::default() };
        assert_eq!(log.query(&f)[0].seq, 2);
        assert_eq!(log.query(&AuditFilter::default()).len(), 3);
    }

    #[test]
    fn outcome_text() {
        assert_eq!("error:x".parse::<Outcome>(), Ok(Outcome::error("x")));
        assert!("error:".parse::<Outcome>().is_err());
        assert_eq!(alloc::format!("{}", Outcome::error("no-model")), "error:no-model");
    }
}
