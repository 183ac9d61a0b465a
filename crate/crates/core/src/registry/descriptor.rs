//! In-memory model descriptor; the document format lives in the std crate.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::version::Version;
use crate::ids::{is_segment, ModelId};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum ModelCategory {
    /// General-purpose model not tailored to a domain.
    Foundation,
    /// Tuned for one network function or domain.
    Specialized,
    /// Spans several domains.
    Hybrid,
    /// Links and orchestrates other models.
    Controller,
}

impl ModelCategory {
    pub const ALL: [ModelCategory; 4] = [
        ModelCategory::Foundation,
        ModelCategory::Specialized,
        ModelCategory::Hybrid,
        ModelCategory::Controller,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ModelCategory::Foundation => "foundation",
            ModelCategory::Specialized => "specialized",
            ModelCategory::Hybrid => "hybrid",
            ModelCategory::Controller => "controller",
        }
    }
}

impl fmt::Display for ModelCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ModelCategory {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        ModelCategory::ALL.into_iter().find(|c| c.as_str() == s).ok_or(())
    }
}

/// Capability names that mark a model as orchestrating other models.
pub const CONTROLLER_CAPABILITIES: [&str; 2] = ["model-orchestration", "task-brokering"];

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Capability {
    pub name: String,
    pub params: BTreeMap<String, String>,
}

impl Capability {
    pub fn named(name: &str) -> Self {
        Capability {
            name: name.to_string(),
            params: BTreeMap::new(),
        }
    }

    pub fn with_param(mut self, key: &str, value: &str) -> Self {
        self.params.insert(key.to_string(), value.to_string());
        self
    }
}

/// Capabilities keyed by name, so names are unique by construction.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct CapabilitySet {
    entries: BTreeMap<String, Capability>,
}

impl CapabilitySet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn of(names: &[&str]) -> Self {
        names.iter().map(|n| Capability::named(n)).collect()
    }

    /// Returns the displaced entry when the name was already present.
    pub fn insert(&mut self, cap: Capability) -> Option<Capability> {
        self.entries.insert(cap.name.clone(), cap)
    }

    pub fn get(&self, name: &str) -> Option<&Capability> {
        self.entries.get(name)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.entries.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Capability> {
        self.entries.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.keys().map(String::as_str)
    }

    /// Superset test by name.
    pub fn covers(&self, required: &CapabilitySet) -> bool {
        required.names().all(|n| self.contains(n))
    }
}

impl FromIterator<Capability> for CapabilitySet {
    fn from_iter<I: IntoIterator<Item = Capability>>(iter: I) -> Self {
        let mut s = CapabilitySet::new();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct Architecture {
    pub family: String,
    /// Opaque label such as `7B`; never interpreted.
    pub parameter_scale_label: String,
    pub custom_elements: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct PerformanceLimits {
    pub rate_limit_per_tick: u64,
    pub latency_ticks: u64,
    pub throughput_per_tick: u64,
    pub max_concurrent: u64,
}

impl Default for PerformanceLimits {
    fn default() -> Self {
        PerformanceLimits {
            rate_limit_per_tick: 10,
            latency_ticks: 1,
            throughput_per_tick: 10,
            max_concurrent: 4,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SecurityProfile {
    pub auth_methods: Vec<String>,
    pub encryption: Vec<String>,
    pub privacy_policy: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct ModelDescriptor {
    pub model_id: ModelId,
    pub model_type: String,
    pub version: Version,
    pub architecture: Architecture,
    pub hyperparameters: BTreeMap<String, String>,
    pub capabilities: CapabilitySet,
    pub domains: Vec<String>,
    pub performance: PerformanceLimits,
    pub security: SecurityProfile,
    pub category: ModelCategory,
    /// Unknown document members keyed by dotted path, values kept as raw document text.
    pub extras: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum InvalidDescriptor {
    #[error("bad value at `{0}`")]
    BadValue(String),
}

impl ModelDescriptor {
    /// Builds a descriptor with default limits and a derived category.
    pub fn new(model_id: ModelId, model_type: &str, version: Version, capabilities: CapabilitySet, domains: &[&str]) -> Self {
        let mut d = ModelDescriptor {
            model_id,
            model_type: model_type.to_string(),
            version,
            architecture: Architecture {
                family: "transformer".to_string(),
                parameter_scale_label: "7B".to_string(),
                custom_elements: Vec::new(),
            },
            hyperparameters: BTreeMap::new(),
            capabilities,
            domains: domains.iter().map(|d| d.to_string()).collect(),
            performance: PerformanceLimits::default(),
            security: SecurityProfile::default(),
            category: ModelCategory::Foundation,
            extras: BTreeMap::new(),
        };
        d.category = classify(&d);
        d
    }

    pub fn validate(&self) -> Result<(), InvalidDescriptor> {
        let bad = |p: &str| Err(InvalidDescriptor::BadValue(p.to_string()));
        if self.model_type.is_empty() {
            return bad("modelType");
        }
        if self.capabilities.is_empty() {
            return bad("capabilities");
        }
        if self.capabilities.names().any(|n| !is_segment(n)) {
            return bad("capabilities.name");
        }
        let p = &self.performance;
        for (v, path) in [
            (p.rate_limit_per_tick, "performance.rateLimitPerTick"),
            (p.latency_ticks, "performance.latencyTicks"),
            (p.throughput_per_tick, "performance.throughputPerTick"),
            (p.max_concurrent, "performance.maxConcurrent"),
        ] {
            if v == 0 {
                return bad(path);
            }
        }
        Ok(())
    }
}

/// Total classification used when a document does not state its category.
pub fn classify(d: &ModelDescriptor) -> ModelCategory {
    if CONTROLLER_CAPABILITIES.iter().any(|c| d.capabilities.contains(c)) {
        ModelCategory::Controller
    } else {
        match d.domains.len() {
            0 => ModelCategory::Foundation,
            1 => ModelCategory::Specialized,
            _ => ModelCategory::Hybrid,
        }
    }
}
