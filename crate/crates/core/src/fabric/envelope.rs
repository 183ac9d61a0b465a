use alloc::collections::BTreeMap;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use super::topic::TopicId;
use crate::ids::MessageId;

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

pub const KEY_KIND: &str = "kind";
pub const KEY_SESSION: &str = "session";
pub const KEY_ORIGIN: &str = "origin-node";
pub const KEY_MODEL: &str = "model-id";
pub const KEY_TAGS: &str = "semantic-tags";
pub const KEY_LOCALITY: &str = "locality-hint";

pub const REQUIRED_KEYS: [&str; 3] = [KEY_KIND, KEY_SESSION, KEY_ORIGIN];
pub const RESERVED_KEYS: [&str; 6] = [KEY_KIND, KEY_SESSION, KEY_ORIGIN, KEY_MODEL, KEY_TAGS, KEY_LOCALITY];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum MessageKind {
    Data,
    Prompt,
    InferenceResult,
    ModelUpdate,
    Control,
}

impl MessageKind {
    pub const ALL: [MessageKind; 5] = [
        MessageKind::Data,
        MessageKind::Prompt,
        MessageKind::InferenceResult,
        MessageKind::ModelUpdate,
        MessageKind::Control,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            MessageKind::Data => "data",
            MessageKind::Prompt => "prompt",
            MessageKind::InferenceResult => "inference-result",
            MessageKind::ModelUpdate => "model-update",
            MessageKind::Control => "control",
        }
    }
}

impl fmt::Display for MessageKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for MessageKind {
    type Err = ();
    fn from_str(s: &str) -> Result<Self, ()> {
        MessageKind::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or(())
    }
}

/// Message before the fabric stamps it with an id and logical time.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outgoing {
    pub topic: String,
    pub payload: Vec<u8>,
    pub metadata: BTreeMap<String, String>,
}

impl Outgoing {
    pub fn new(topic: impl Into<String>, kind: MessageKind, session: &str, origin: &str) -> Self {
        let mut metadata = BTreeMap::new();
        metadata.insert(KEY_KIND.to_string(), kind.as_str().to_string());
        metadata.insert(KEY_SESSION.to_string(), session.to_string());
        metadata.insert(KEY_ORIGIN.to_string(), origin.to_string());
        Outgoing {
            topic: topic.into(),
            payload: Vec::new(),
            metadata,
        }
    }

    pub fn payload(mut self, payload: impl Into<Vec<u8>>) -> Self {
        self.payload = payload.into();
        self
    }

    pub fn meta(mut self, key: &str, value: impl Into<String>) -> Self {
        self.metadata.insert(key.to_string(), value.into());
        self
    }
}

/// Addressed, metadata-bearing unit of fabric traffic.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct MessageEnvelope {
    pub id: MessageId,
    pub topic: TopicId,
    pub payload: Vec<u8>,
    pub metadata: BTreeMap<String, String>,
    pub logical_time: u64,
}

impl MessageEnvelope {
    pub fn meta(&self, key: &str) -> Option<&str> {
        self.metadata.get(key).map(String::as_str)
    }

    pub fn kind(&self) -> Option<MessageKind> {
        self.meta(KEY_KIND).and_then(|k| k.parse().ok())
    }

    pub fn session(&self) -> Option<&str> {
        self.meta(KEY_SESSION)
    }

    pub fn origin(&self) -> Option<&str> {
        self.meta(KEY_ORIGIN)
    }

    pub fn payload_str(&self) -> Option<&str> {
        core::str::from_utf8(&self.payload).ok()
    }

    /// Re-addresses this envelope's content as a new outgoing message.
    pub fn to_outgoing(&self, topic: impl Into<String>) -> Outgoing {
        Outgoing {
            topic: topic.into(),
            payload: self.payload.clone(),
            metadata: self.metadata.clone(),
        }
    }
}

/// Returns the first required key that is absent or malformed.
pub fn check_metadata(metadata: &BTreeMap<String, String>) -> Result<MessageKind, &'static str> {
    for key in REQUIRED_KEYS {
        match metadata.get(key) {
            Some(v) if !v.is_empty() => {}
            _ => return Err(key),
        }
    }
    metadata[KEY_KIND].parse().map_err(|_| KEY_KIND)
}
