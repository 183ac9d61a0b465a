use alloc::string::String;
use alloc::vec::Vec;
use core::fmt;

use crate::ids::is_segment;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum TopicScope {
    /// Flow private to one application and the nodes it grants.
    Application,
    Shared,
}

/// Hierarchical topic path such as `nwdaf/traffic/load`.
#[derive(Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TopicId {
    name: String,
    scope: TopicScope,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("invalid topic name `{0}`")]
pub struct InvalidTopic(pub String);

impl TopicId {
    pub fn new(name: impl Into<String>, scope: TopicScope) -> Result<Self, InvalidTopic> {
        let name = name.into();
        if valid_topic_name(&name) {
            Ok(TopicId { name, scope })
        } else {
            Err(InvalidTopic(name))
        }
    }

    pub fn shared(name: impl Into<String>) -> Result<Self, InvalidTopic> {
        Self::new(name, TopicScope::Shared)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn scope(&self) -> TopicScope {
        self.scope
    }

    pub fn segments(&self) -> impl Iterator<Item = &str> {
        self.name.split('/')
    }
}

impl fmt::Debug for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({:?})", self.name, self.scope)
    }
}

impl fmt::Display for TopicId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

pub fn valid_topic_name(name: &str) -> bool {
    !name.is_empty() && name.split('/').all(is_segment)
}

/// Joins already-valid segments into a topic path.
pub fn topic_path(parts: &[&str]) -> String {
    let v: Vec<&str> = parts.to_vec();
    v.join("/")
}
