//! Model descriptor store: validation, versioning, capability queries and
//! learning buffers.

pub mod descriptor;
pub mod schema;
pub mod version;

use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub use descriptor::{
    classify, Architecture, Capability, CapabilitySet, InvalidDescriptor, ModelCategory, ModelDescriptor,
    PerformanceLimits, SecurityProfile,
};
pub use schema::{MappingStep, SchemaCatalog, SchemaMapping};
pub use version::{Version, VersionPart};

use crate::ids::{ModelId, NodeId, TokenId};

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum RegistryError {
    #[error("model {0} version {1} is already registered")]
    DuplicateModelVersion(ModelId, Version),
    #[error("unknown model `{0}`")]
    UnknownModel(String),
    #[error("capability query must name at least one capability")]
    BadQuery,
    #[error(transparent)]
    Invalid(#[from] InvalidDescriptor),
}

impl RegistryError {
    pub fn code(&self) -> &'static str {
        match self {
            RegistryError::DuplicateModelVersion(..) => "duplicate-model-version",
            RegistryError::UnknownModel(_) => "unknown-model",
            RegistryError::BadQuery => "bad-query",
            RegistryError::Invalid(_) => "invalid-descriptor",
        }
    }
}

/// A learning sample waiting for the next update cycle.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contribution {
    pub token: TokenId,
    pub contributor: NodeId,
    pub objective: String,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone)]
pub struct Registry {
    models: BTreeMap<ModelId, BTreeMap<Version, ModelDescriptor>>,
    learning: BTreeMap<ModelId, Vec<Contribution>>,
    learning_cycle: usize,
    pub schemas: SchemaCatalog,
}

impl Default for Registry {
    fn default() -> Self {
        Registry::new(1)
    }
}

impl Registry {
    /// `learning_cycle` contributions trigger one version bump; zero is treated as one.
    pub fn new(learning_cycle: usize) -> Self {
        Registry {
            models: BTreeMap::new(),
            learning: BTreeMap::new(),
            learning_cycle: learning_cycle.max(1),
            schemas: SchemaCatalog::default(),
        }
    }

    pub fn learning_cycle(&self) -> usize {
        self.learning_cycle
    }

    pub fn set_learning_cycle(&mut self, n: usize) {
        self.learning_cycle = n.max(1);
    }

    pub fn insert(&mut self, d: ModelDescriptor) -> Result<ModelId, RegistryError> {
        d.validate()?;
        let versions = self.models.entry(d.model_id.clone()).or_default();
        if versions.contains_key(&d.version) {
            return Err(RegistryError::DuplicateModelVersion(d.model_id.clone(), d.version));
        }
        let id = d.model_id.clone();
        versions.insert(d.version, d);
        Ok(id)
    }

    pub fn latest(&self, id: &ModelId) -> Option<&ModelDescriptor> {
        self.models.get(id).and_then(|v| v.values().next_back())
    }

    pub fn latest_by_name(&self, id: &str) -> Option<&ModelDescriptor> {
        ModelId::new(id).ok().and_then(|m| self.latest(&m))
    }

    pub fn versions(&self, id: &ModelId) -> Vec<Version> {
        self.models.get(id).map(|v| v.keys().copied().collect()).unwrap_or_default()
    }

    pub fn contains(&self, id: &ModelId) -> bool {
        self.models.contains_key(id)
    }

    pub fn model_ids(&self) -> impl Iterator<Item = &ModelId> {
        self.models.keys()
    }

    pub fn latest_all(&self) -> impl Iterator<Item = &ModelDescriptor> {
        self.models.values().filter_map(|v| v.values().next_back())
    }

    /// Latest versions covering `required`, ordered by hint match, latency, then id.
    pub fn query_by_capability(&self, required: &CapabilitySet, domain_hint: Option<&str>) -> Result<Vec<ModelId>, RegistryError> {
        if required.is_empty() {
            return Err(RegistryError::BadQuery);
        }
        let mut hits: Vec<&ModelDescriptor> = self.latest_all().filter(|d| d.capabilities.covers(required)).collect();
        hits.sort_by_key(|d| {
            let hint_miss = !domain_hint.is_some_and(|h| d.domains.iter().any(|x| x == h));
            (hint_miss, d.performance.latency_ticks, d.model_id.clone())
        });
        Ok(hits.into_iter().map(|d| d.model_id.clone()).collect())
    }

    /// Registers a copy of the latest descriptor under the bumped version.
    pub fn bump_version(&mut self, id: &ModelId, part: VersionPart) -> Result<Version, RegistryError> {
        let mut next = self
            .latest(id)
            .cloned()
            .ok_or_else(|| RegistryError::UnknownModel(id.to_string()))?;
        next.version = next.version.bumped(part);
        let v = next.version;
        self.insert(next)?;
        Ok(v)
    }

    pub fn contribute(&mut self, model: &ModelId, c: Contribution) -> Result<usize, RegistryError> {
        if !self.contains(model) {
            return Err(RegistryError::UnknownModel(model.to_string()));
        }
        let buf = self.learning.entry(model.clone()).or_default();
        buf.push(c);
        Ok(buf.len())
    }

    pub fn buffered(&self, model: &ModelId) -> usize {
        self.learning.get(model).map_or(0, Vec::len)
    }

    /// Removes every full batch, in model-id order.
    pub fn take_ready_batches(&mut self) -> Vec<(ModelId, Vec<Contribution>)> {
        let cycle = self.learning_cycle;
        let mut out = Vec::new();
        for (id, buf) in self.learning.iter_mut() {
            if buf.len() >= cycle {
                out.push((id.clone(), buf.drain(..cycle).collect()));
            }
        }
        out
    }
}
