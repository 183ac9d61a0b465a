//! Simulated network elements and their tunable knobs.

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use crate::hash::{StableHash, StableHasher};
use crate::ids::{ModelId, NodeId};
use crate::rational::Rational;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum NodeKind {
    Nwdaf,
    Ric,
    UeGen,
    ModelHost,
    App,
}

impl NodeKind {
    pub const ALL: [NodeKind; 5] = [NodeKind::Nwdaf, NodeKind::Ric, NodeKind::UeGen, NodeKind::ModelHost, NodeKind::App];

    pub fn as_str(self) -> &'static str {
        match self {
            NodeKind::Nwdaf => "nwdaf",
            NodeKind::Ric => "ric",
            NodeKind::UeGen => "ue-gen",
            NodeKind::ModelHost => "model-host",
            NodeKind::App => "app",
        }
    }

    pub fn knobs(self) -> &'static [KnobSpec] {
        match self {
            NodeKind::UeGen => UE_GEN_KNOBS,
            NodeKind::Nwdaf => NWDAF_KNOBS,
            NodeKind::Ric => RIC_KNOBS,
            NodeKind::ModelHost => HOST_KNOBS,
            NodeKind::App => &[],
        }
    }
}

impl fmt::Display for NodeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for NodeKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        NodeKind::ALL.into_iter().find(|k| k.as_str() == s).ok_or(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KnobSpec {
    pub name: &'static str,
    pub min: Rational,
    pub max: Rational,
    pub default: Rational,
}

const fn knob(name: &'static str, min: i128, max: i128, default: i128) -> KnobSpec {
    KnobSpec {
        name,
        min: Rational::integer(min),
        max: Rational::integer(max),
        default: Rational::integer(default),
    }
}

pub const ADMISSION_RATE: &str = "admission-rate";
pub const RATE_LIMIT: &str = "rate-limit";

const UE_GEN_KNOBS: &[KnobSpec] = &[knob(ADMISSION_RATE, 0, 1, 1), knob(RATE_LIMIT, 0, 1000, 100)];
const NWDAF_KNOBS: &[KnobSpec] = &[knob("sampling-rate", 0, 100, 1), knob("report-interval", 1, 1000, 10)];
const RIC_KNOBS: &[KnobSpec] = &[knob("prb-share", 0, 1, 1), knob("tx-power", 0, 100, 40)];
const HOST_KNOBS: &[KnobSpec] = &[knob(RATE_LIMIT, 0, 1000, 100), knob("max-concurrent", 1, 1000, 4)];

/// Offered traffic against a service rate, both per tick.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct LoadModel {
    pub offered_load: Rational,
    pub service_rate: Rational,
    pub queue_depth: Rational,
}

impl LoadModel {
    /// Offered load expressed as a utilization against unit service rate.
    pub fn with_utilization(u: Rational) -> Self {
        LoadModel {
            offered_load: u,
            service_rate: Rational::ONE,
            queue_depth: Rational::ZERO,
        }
    }

    pub fn utilization(&self) -> Rational {
        self.offered_load / self.service_rate
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NodeSpec {
    pub id: NodeId,
    pub kind: NodeKind,
    pub knobs: BTreeMap<String, Rational>,
    pub hosted_models: Vec<ModelId>,
    pub load: Option<LoadModel>,
}

impl NodeSpec {
    pub fn new(id: &str, kind: NodeKind) -> Self {
        NodeSpec {
            id: NodeId::new(id).expect("node id"),
            kind,
            knobs: BTreeMap::new(),
            hosted_models: Vec::new(),
            load: None,
        }
    }

    pub fn knob(mut self, name: &str, value: Rational) -> Self {
        self.knobs.insert(name.to_string(), value);
        self
    }

    pub fn hosting(mut self, model: &str) -> Self {
        self.hosted_models.push(ModelId::new(model).expect("model id"));
        self
    }

    /// Sets a constant utilization against unit service rate.
    pub fn load(mut self, utilization: Rational) -> Self {
        self.load = Some(LoadModel::with_utilization(utilization));
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum KnobError {
    #[error("node `{node}` has no knob `{knob}`")]
    UnknownKnob { node: NodeId, knob: String },
    #[error("value {value} for `{node}.{}` is outside [{}, {}]", spec.name, spec.min, spec.max)]
    OutOfRange {
        node: NodeId,
        value: Rational,
        spec: &'static KnobSpec,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimNode {
    pub id: NodeId,
    pub kind: NodeKind,
    knobs: BTreeMap<String, Rational>,
    pub hosted_models: Vec<ModelId>,
    pub load: Option<LoadModel>,
    /// Hosted models answer every request with an error while set.
    pub faulty: bool,
    config_hash: StableHash,
}

impl SimNode {
    pub fn from_spec(spec: NodeSpec) -> Result<Self, KnobError> {
        let mut knobs: BTreeMap<String, Rational> = spec
            .kind
            .knobs()
            .iter()
            .map(|k| (k.name.to_string(), k.default))
            .collect();
        let mut node = SimNode {
            id: spec.id,
            kind: spec.kind,
            knobs: BTreeMap::new(),
            hosted_models: spec.hosted_models,
            load: spec.load,
            faulty: false,
            config_hash: StableHash(0),
        };
        for (k, v) in spec.knobs {
            node.check(&k, v)?;
            knobs.insert(k, v);
        }
        node.knobs = knobs;
        node.rehash();
        Ok(node)
    }

    pub fn knobs(&self) -> &BTreeMap<String, Rational> {
        &self.knobs
    }

    pub fn knob(&self, name: &str) -> Option<Rational> {
        self.knobs.get(name).copied()
    }

    pub fn spec_of(&self, name: &str) -> Option<&'static KnobSpec> {
        self.kind.knobs().iter().find(|k| k.name == name)
    }

    pub fn check(&self, name: &str, value: Rational) -> Result<(), KnobError> {
        let spec = self.spec_of(name).ok_or_else(|| KnobError::UnknownKnob {
            node: self.id.clone(),
            knob: name.to_string(),
        })?;
        if value < spec.min || value > spec.max {
            return Err(KnobError::OutOfRange {
                node: self.id.clone(),
                value,
                spec,
            });
        }
        Ok(())
    }

    pub fn set_knob(&mut self, name: &str, value: Rational) -> Result<(), KnobError> {
        self.check(name, value)?;
        self.knobs.insert(name.to_string(), value);
        self.rehash();
        Ok(())
    }

    pub fn config_hash(&self) -> StableHash {
        self.config_hash
    }

    fn rehash(&mut self) {
        let mut h = StableHasher::new();
        h.str(self.id.as_str());
        for (k, v) in &self.knobs {
            h.str(k).str(&v.to_string());
        }
        self.config_hash = h.finish();
    }

    /// Offered load after admission control.
    pub fn admitted_load(&self) -> Option<Rational> {
        let load = self.load?;
        let admission = self.knob(ADMISSION_RATE).unwrap_or(Rational::ONE);
        Some(load.offered_load * admission)
    }

    pub fn utilization(&self) -> Option<Rational> {
        let load = self.load?;
        Some(self.admitted_load()? / load.service_rate)
    }

    /// min(admitted, service rate, rate limit).
    pub fn throughput(&self) -> Option<Rational> {
        let load = self.load?;
        let mut t = self.admitted_load()?.min(load.service_rate);
        if let Some(limit) = self.knob(RATE_LIMIT) {
            t = t.min(limit);
        }
        Some(t)
    }

    /// Advances the queue by one tick.
    pub fn step_queue(&mut self) {
        let (Some(arrival), Some(served)) = (self.admitted_load(), self.throughput()) else {
            return;
        };
        if let Some(load) = self.load.as_mut() {
            let q = load.queue_depth + arrival - served;
            load.queue_depth = q.max(Rational::ZERO);
        }
    }

    /// Restores knob values captured from an earlier copy of this node.
    pub fn restore_from(&mut self, earlier: &SimNode) {
        self.knobs = earlier.knobs.clone();
        self.load = earlier.load;
        self.config_hash = earlier.config_hash;
    }
}

/// The managed system's live configuration.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct NetworkState {
    nodes: BTreeMap<NodeId, SimNode>,
}

impl NetworkState {
    pub fn insert(&mut self, node: SimNode) -> bool {
        if self.nodes.contains_key(&node.id) {
            return false;
        }
        self.nodes.insert(node.id.clone(), node);
        true
    }

    pub fn get(&self, id: &NodeId) -> Option<&SimNode> {
        self.nodes.get(id)
    }

    pub fn get_by_name(&self, id: &str) -> Option<&SimNode> {
        self.nodes.iter().find(|(k, _)| k.as_str() == id).map(|(_, v)| v)
    }

    pub fn get_mut(&mut self, id: &NodeId) -> Option<&mut SimNode> {
        self.nodes.get_mut(id)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SimNode> {
        self.nodes.values()
    }

    pub fn nodes_mut(&mut self) -> impl Iterator<Item = &mut SimNode> {
        self.nodes.values_mut()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Hosts of `model`, in node-id order.
    pub fn hosts_of(&self, model: &ModelId) -> Vec<&SimNode> {
        self.nodes.values().filter(|n| n.hosted_models.contains(model)).collect()
    }

    /// Hash over every mutable field of every node.
    pub fn state_hash(&self) -> StableHash {
        let mut h = StableHasher::new();
        for n in self.nodes.values() {
            h.str(n.id.as_str()).str(&n.config_hash.to_string());
            if let Some(l) = n.load {
                h.str(&l.offered_load.to_string())
                    .str(&l.service_rate.to_string())
                    .str(&l.queue_depth.to_string());
            }
            h.field(&[u8::from(n.faulty)]);
        }
        h.finish()
    }
}
