//! Message-bus profile table.

use alloc::collections::BTreeSet;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ids::NodeId;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum Guarantee {
    Ordered,
    AtLeastOnce,
    AtMostOnce,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct BackendProfile {
    pub name: String,
    pub guarantees: BTreeSet<Guarantee>,
    pub max_latency_budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct InteractionSpec {
    pub participants: Vec<NodeId>,
    pub realtime: bool,
    pub guarantees: BTreeSet<Guarantee>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BackendError {
    #[error("backend profile `{0}` declares no guarantees")]
    EmptyGuarantees(String),
    #[error("interaction has no participants")]
    NoParticipants,
    #[error("no backend satisfies the requested guarantees")]
    NoSatisfyingBackend,
}

#[derive(Debug, Clone, Default)]
pub struct BackendTable {
    profiles: Vec<BackendProfile>,
}

impl BackendTable {
    pub fn new(profiles: Vec<BackendProfile>) -> Result<Self, BackendError> {
        if let Some(p) = profiles.iter().find(|p| p.guarantees.is_empty()) {
            return Err(BackendError::EmptyGuarantees(p.name.clone()));
        }
        Ok(BackendTable { profiles })
    }

    /// The profiles shipped by default, loosely modelled on RIC message routing and log brokers.
    pub fn standard() -> Self {
        let p = |name: &str, g: &[Guarantee], lat: u64| BackendProfile {
            name: name.to_string(),
            guarantees: g.iter().copied().collect(),
            max_latency_budget: lat,
        };
        BackendTable {
            profiles: alloc::vec![
                p("kafka", &[Guarantee::Ordered, Guarantee::AtLeastOnce], 20),
                p("nats", &[Guarantee::AtMostOnce], 3),
                p("rmr", &[Guarantee::Ordered], 1),
            ],
        }
    }

    pub fn profiles(&self) -> &[BackendProfile] {
        &self.profiles
    }

    /// Realtime interactions rank by `(latency, name)`; others by name alone.
    pub fn select(&self, spec: &InteractionSpec) -> Result<&BackendProfile, BackendError> {
        if spec.participants.is_empty() {
            return Err(BackendError::NoParticipants);
        }
        self.profiles
            .iter()
            .filter(|p| spec.guarantees.is_subset(&p.guarantees))
            .min_by(|a, b| {
                if spec.realtime {
                    (a.max_latency_budget, &a.name).cmp(&(b.max_latency_budget, &b.name))
                } else {
                    a.name.cmp(&b.name)
                }
            })
            .ok_or(BackendError::NoSatisfyingBackend)
    }
}
