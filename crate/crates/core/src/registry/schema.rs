//! Per-major field schemas and declared mappings between them.

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct SchemaMapping {
    pub renames: BTreeMap<String, String>,
    pub defaults: BTreeMap<String, String>,
    pub dropped: Vec<String>,
}

impl SchemaMapping {
    pub fn rename(mut self, from: &str, to: &str) -> Self {
        self.renames.insert(from.to_string(), to.to_string());
        self
    }

    pub fn default_value(mut self, path: &str, value: &str) -> Self {
        self.defaults.insert(path.to_string(), value.to_string());
        self
    }

    pub fn drop_field(mut self, path: &str) -> Self {
        self.dropped.push(path.to_string());
        self
    }
}

/// One hop of a migration path.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MappingStep<'a> {
    pub from_major: u64,
    pub to_major: u64,
    pub from_fields: Option<&'a BTreeSet<String>>,
    pub mapping: &'a SchemaMapping,
}

#[derive(Debug, Clone, Default)]
pub struct SchemaCatalog {
    schemas: BTreeMap<(String, u64), BTreeSet<String>>,
    mappings: BTreeMap<(String, u64, u64), SchemaMapping>,
}

impl SchemaCatalog {
    pub fn declare_schema(&mut self, model_type: &str, major: u64, fields: &[&str]) {
        self.schemas.insert(
            (model_type.to_string(), major),
            fields.iter().map(|f| f.to_string()).collect(),
        );
    }

    pub fn declare_mapping(&mut self, model_type: &str, from_major: u64, to_major: u64, mapping: SchemaMapping) {
        self.mappings.insert((model_type.to_string(), from_major, to_major), mapping);
    }

    pub fn schema(&self, model_type: &str, major: u64) -> Option<&BTreeSet<String>> {
        self.schemas.get(&(model_type.to_string(), major))
    }

    /// Shortest chain of declared mappings from one major to another, ties broken by lower majors first.
    pub fn chain(&self, model_type: &str, from: u64, to: u64) -> Option<Vec<MappingStep<'_>>> {
        if from == to {
            return Some(Vec::new());
        }
        let mut prev: BTreeMap<u64, u64> = BTreeMap::new();
        let mut queue = VecDeque::from([from]);
        let mut seen = BTreeSet::from([from]);
        while let Some(cur) = queue.pop_front() {
            if cur == to {
                break;
            }
            for (_, _, next) in self.mappings.keys().filter(|(t, f, _)| t == model_type && *f == cur) {
                if seen.insert(*next) {
                    prev.insert(*next, cur);
                    queue.push_back(*next);
                }
            }
        }
        if !seen.contains(&to) {
            return None;
        }
        let mut majors = alloc::vec![to];
        let mut cur = to;
        while cur != from {
            cur = prev[&cur];
            majors.push(cur);
        }
        majors.reverse();
        Some(
            majors
                .windows(2)
                .map(|w| MappingStep {
                    from_major: w[0],
                    to_major: w[1],
                    from_fields: self.schema(model_type, w[0]),
                    mapping: &self.mappings[&(model_type.to_string(), w[0], w[1])],
                })
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn transitive_chain() {
        let mut c = SchemaCatalog::default();
        c.declare_mapping("gpt", 1, 2, SchemaMapping::default());
        c.declare_mapping("gpt", 2, 3, SchemaMapping::default());
        c.declare_mapping("gpt", 1, 3, SchemaMapping::default().drop_field("x"));
        let direct = c.chain("gpt", 1, 3).unwrap();
        assert_eq!(direct.len(), 1);
        assert_eq!(c.chain("gpt", 2, 3).unwrap().len(), 1);
        assert!(c.chain("gpt", 3, 1).is_none());
        assert!(c.chain("other", 1, 2).is_none());
        assert!(c.chain("gpt", 2, 2).unwrap().is_empty());
    }
}
