//! Version adapters synthesized from declared schema mappings.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::fabric::envelope::RESERVED_KEYS;
use crate::fabric::MessageEnvelope;
use crate::registry::{MappingStep, Version};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct AdapterSpec {
    pub from_version: Version,
    pub to_version: Version,
    pub field_renames: BTreeMap<String, String>,
    pub defaults_for_new_fields: BTreeMap<String, String>,
    pub dropped_fields: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum SynthesisError {
    #[error("no field schema declared for major {0}")]
    MissingSchema(u64),
    #[error("rename source `{0}` does not exist in the source schema")]
    UnknownRenameSource(String),
    #[error("field `{0}` is both renamed and dropped")]
    RenamedAndDropped(String),
    #[error("dropped field `{0}` does not exist in the source schema")]
    UnknownDroppedField(String),
}

/// Composes a chain of mapping steps into one adapter over the first step's schema.
pub fn synthesize(from_version: Version, to_version: Version, steps: &[MappingStep<'_>]) -> Result<AdapterSpec, SynthesisError> {
    let Some(first) = steps.first() else {
        return Ok(AdapterSpec {
            from_version,
            to_version,
            field_renames: BTreeMap::new(),
            defaults_for_new_fields: BTreeMap::new(),
            dropped_fields: Vec::new(),
        });
    };
    let origin = first.from_fields.ok_or(SynthesisError::MissingSchema(first.from_major))?;
    // current name -> original name (None for fields introduced by defaults)
    let mut live: BTreeMap<String, Option<String>> = origin.iter().map(|f| (f.clone(), Some(f.clone()))).collect();
    let mut defaults: BTreeMap<String, String> = BTreeMap::new();
    let mut dropped: BTreeSet<String> = BTreeSet::new();

    for step in steps {
        let m = step.mapping;
        for src in m.renames.keys() {
            if !live.contains_key(src) {
                return Err(SynthesisError::UnknownRenameSource(src.clone()));
            }
            if m.dropped.contains(src) {
                return Err(SynthesisError::RenamedAndDropped(src.clone()));
            }
        }
        for d in &m.dropped {
            if !live.contains_key(d) {
                return Err(SynthesisError::UnknownDroppedField(d.clone()));
            }
        }
        let mut moved: Vec<(String, Option<String>)> = Vec::new();
        for (src, dst) in &m.renames {
            let orig = live.remove(src).expect("checked above");
            if orig.is_none() {
                if let Some(v) = defaults.remove(src) {
                    defaults.insert(dst.clone(), v);
                }
            }
            moved.push((dst.clone(), orig));
        }
        live.extend(moved);
        for d in &m.dropped {
            match live.remove(d).expect("checked above") {
                Some(orig) => {
                    dropped.insert(orig);
                }
                None => {
                    defaults.remove(d);
                }
            }
        }
        for (path, value) in &m.defaults {
            if !live.contains_key(path) {
                live.insert(path.clone(), None);
                defaults.insert(path.clone(), value.clone());
            }
        }
    }

    let field_renames = live
        .iter()
        .filter_map(|(cur, orig)| match orig {
            Some(o) if o != cur => Some((o.clone(), cur.clone())),
            _ => None,
        })
        .collect();
    let overlap = defaults.keys().find(|k| dropped.contains(*k)).cloned();
    if let Some(k) = overlap {
        return Err(SynthesisError::RenamedAndDropped(k));
    }
    Ok(AdapterSpec {
        from_version,
        to_version,
        field_renames,
        defaults_for_new_fields: defaults,
        dropped_fields: dropped.into_iter().collect(),
    })
}

impl AdapterSpec {
    pub fn validate(&self, from_schema: &BTreeSet<String>) -> Result<(), SynthesisError> {
        for src in self.field_renames.keys() {
            if !from_schema.contains(src) {
                return Err(SynthesisError::UnknownRenameSource(src.clone()));
            }
            if self.dropped_fields.contains(src) {
                return Err(SynthesisError::RenamedAndDropped(src.clone()));
            }
        }
        Ok(())
    }

    /// Rewrites the envelope's non-reserved metadata fields; the payload is left untouched.
    pub fn apply(&self, envelope: &MessageEnvelope) -> MessageEnvelope {
        let mut out = envelope.clone();
        let meta = &mut out.metadata;
        let mut moved = Vec::new();
        for (src, dst) in &self.field_renames {
            if RESERVED_KEYS.contains(&src.as_str()) {
                continue;
            }
            if let Some(v) = meta.remove(src) {
                moved.push((dst.clone(), v));
            }
        }
        meta.extend(moved);
        for d in &self.dropped_fields {
            if !RESERVED_KEYS.contains(&d.as_str()) {
                meta.remove(d);
            }
        }
        for (path, value) in &self.defaults_for_new_fields {
            meta.entry(path.clone()).or_insert_with(|| value.to_string());
        }
        out
    }
}
