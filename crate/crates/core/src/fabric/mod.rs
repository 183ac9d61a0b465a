//! Message-oriented interconnect: request/reply, durable pub/sub and one-shot
//! request-notify delivery with semantic selectors and a full audit trail.
//!
//! The fabric is a single-owner state machine driven by a monotone logical
//! clock. Thread-safe sharing is layered on top by the std companion crate.

pub mod audit;
pub mod backend;
pub mod envelope;
pub mod selector;
pub mod token;
pub mod topic;

use alloc::collections::{BTreeMap, BTreeSet, VecDeque};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

pub use audit::{AuditFilter, AuditLog, AuditOp, AuditRecord, Outcome};
pub use backend::{BackendError, BackendProfile, BackendTable, Guarantee, InteractionSpec};
pub use envelope::{MessageEnvelope, MessageKind, Outgoing};
pub use selector::{Selector, SelectorSyntax, TagOp, TagPredicate};
pub use token::{CompletionToken, TokenState};
pub use topic::{TopicId, TopicScope};

use crate::ids::{MessageId, ModelId, NodeId, SubscriptionId};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum DeliveryMode {
    Durable,
    OneShot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize), serde(rename_all = "kebab-case"))]
pub enum SubscriptionKind {
    Data,
    Inference,
    Learning,
    ModelUpdate,
    SemanticsAware,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubscriptionRequest {
    pub selector: String,
    pub mode: DeliveryMode,
    pub kind: SubscriptionKind,
    pub subscriber: NodeId,
    pub params: BTreeMap<String, String>,
}

impl SubscriptionRequest {
    pub fn durable(selector: &str, subscriber: &NodeId) -> Self {
        SubscriptionRequest {
            selector: selector.to_string(),
            mode: DeliveryMode::Durable,
            kind: SubscriptionKind::Data,
            subscriber: subscriber.clone(),
            params: BTreeMap::new(),
        }
    }

    pub fn one_shot(selector: &str, subscriber: &NodeId) -> Self {
        SubscriptionRequest {
            mode: DeliveryMode::OneShot,
            ..Self::durable(selector, subscriber)
        }
    }

    pub fn kind(mut self, kind: SubscriptionKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn param(mut self, key: &str, value: impl Into<String>) -> Self {
        self.params.insert(key.to_string(), value.into());
        self
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Subscription {
    pub id: SubscriptionId,
    pub selector: Selector,
    pub mode: DeliveryMode,
    pub kind: SubscriptionKind,
    pub subscriber: NodeId,
    pub params: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Delivery {
    pub subscription: SubscriptionId,
    pub envelope: MessageEnvelope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Published {
    pub id: MessageId,
    pub logical_time: u64,
    pub delivered: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum FabricError {
    #[error("unknown topic `{0}`")]
    UnknownTopic(String),
    #[error("invalid metadata: missing or malformed `{0}`")]
    InvalidMetadata(String),
    #[error(transparent)]
    SelectorSyntax(#[from] SelectorSyntax),
    #[error("unknown node `{0}`")]
    UnknownNode(String),
    #[error("unknown subscription {0}")]
    UnknownSubscription(SubscriptionId),
    #[error("topic `{0}` already exists with a different scope")]
    ScopeConflict(String),
    #[error("node `{node}` is not a member of application topic `{topic}`")]
    ScopeViolation { topic: String, node: String },
}

impl FabricError {
    pub fn code(&self) -> &'static str {
        match self {
            FabricError::UnknownTopic(_) => "unknown-topic",
            FabricError::InvalidMetadata(_) => "invalid-metadata",
            FabricError::SelectorSyntax(_) => "selector-syntax",
            FabricError::UnknownNode(_) => "unknown-node",
            FabricError::UnknownSubscription(_) => "unknown-subscription",
            FabricError::ScopeConflict(_) => "scope-conflict",
            FabricError::ScopeViolation { .. } => "scope-violation",
        }
    }
}

/// One line of the replay journal: every audit record plus a summary of
/// every accepted envelope.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum JournalEntry {
    Audit {
        record: AuditRecord,
        note: Option<String>,
    },
    Envelope {
        logical_time: u64,
        id: MessageId,
        topic: String,
        kind: MessageKind,
        origin: String,
        model: Option<String>,
    },
    Note {
        logical_time: u64,
        actor: String,
        text: String,
    },
}

#[derive(Debug, Clone)]
struct TopicEntry {
    id: TopicId,
    members: BTreeSet<NodeId>,
}

#[derive(Debug, Clone, Default)]
pub struct Fabric {
    clock: u64,
    next_message: u64,
    next_subscription: u64,
    topics: BTreeMap<String, TopicEntry>,
    nodes: BTreeSet<NodeId>,
    subscriptions: BTreeMap<SubscriptionId, Subscription>,
    inboxes: BTreeMap<NodeId, VecDeque<Delivery>>,
    audit: AuditLog,
    journal: Vec<JournalEntry>,
}

impl Fabric {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> u64 {
        self.clock
    }

    /// Starts a new operation and returns its logical time.
    pub fn advance(&mut self) -> u64 {
        self.clock += 1;
        self.clock
    }

    pub fn register_node(&mut self, node: NodeId) -> bool {
        self.nodes.insert(node)
    }

    pub fn is_registered(&self, node: &NodeId) -> bool {
        self.nodes.contains(node)
    }

    pub fn nodes(&self) -> impl Iterator<Item = &NodeId> {
        self.nodes.iter()
    }

    /// Creating an existing topic with the same scope is a no-op; scope is fixed at creation.
    pub fn create_topic(&mut self, topic: TopicId, owner: Option<&NodeId>) -> Result<TopicId, FabricError> {
        if let Some(existing) = self.topics.get(topic.name()) {
            if existing.id.scope() != topic.scope() {
                return Err(FabricError::ScopeConflict(topic.name().to_string()));
            }
            return Ok(existing.id.clone());
        }
        let mut members = BTreeSet::new();
        if let Some(o) = owner {
            members.insert(o.clone());
        }
        self.topics.insert(
            topic.name().to_string(),
            TopicEntry {
                id: topic.clone(),
                members,
            },
        );
        Ok(topic)
    }

    /// Shared topic, created on first use. Panics on an invalid name.
    pub fn ensure_shared(&mut self, name: &str) -> TopicId {
        let id = TopicId::shared(name).expect("topic name built from validated segments");
        self.create_topic(id, None).expect("shared topic scope")
    }

    pub fn grant(&mut self, topic: &str, node: &NodeId) -> Result<(), FabricError> {
        let entry = self
            .topics
            .get_mut(topic)
            .ok_or_else(|| FabricError::UnknownTopic(topic.to_string()))?;
        entry.members.insert(node.clone());
        Ok(())
    }

    pub fn topic(&self, name: &str) -> Option<&TopicId> {
        self.topics.get(name).map(|e| &e.id)
    }

    /// Every topic, in name order.
    pub fn topics(&self) -> impl Iterator<Item = &TopicId> {
        self.topics.values().map(|e| &e.id)
    }

    fn may_see(&self, entry: &TopicEntry, node: &str) -> bool {
        entry.id.scope() == TopicScope::Shared || entry.members.iter().any(|m| m.as_str() == node)
    }

    pub fn publish(&mut self, msg: Outgoing) -> Result<Published, FabricError> {
        let now = self.advance();
        let actor = msg
            .metadata
            .get(envelope::KEY_ORIGIN)
            .cloned()
            .unwrap_or_else(|| "unknown".to_string());
        let model = msg
            .metadata
            .get(envelope::KEY_MODEL)
            .and_then(|m| ModelId::new(m.clone()).ok());
        let checked = self.check_publish(&msg, &actor);
        let (kind, entry) = match checked {
            Ok(v) => v,
            Err(e) => {
                self.record(now, AuditOp::Publish, &actor, None, model, Outcome::error(e.code()), None);
                return Err(e);
            }
        };
        let id = MessageId(self.next_message);
        self.next_message += 1;
        let envelope = MessageEnvelope {
            id,
            topic: entry.id.clone(),
            payload: msg.payload,
            metadata: msg.metadata,
            logical_time: now,
        };
        self.record(now, AuditOp::Publish, &actor, Some(id), model.clone(), Outcome::Ok, None);
        self.journal.push(JournalEntry::Envelope {
            logical_time: now,
            id,
            topic: envelope.topic.name().to_string(),
            kind,
            origin: actor.clone(),
            model: model.as_ref().map(|m| m.to_string()),
        });

        let matched: Vec<SubscriptionId> = self
            .subscriptions
            .values()
            .filter(|s| self.may_see(&entry, s.subscriber.as_str()) && s.selector.matches(&envelope))
            .map(|s| s.id)
            .collect();
        for sid in &matched {
            let sub = &self.subscriptions[sid];
            let subscriber = sub.subscriber.clone();
            let one_shot = sub.mode == DeliveryMode::OneShot;
            self.inboxes.entry(subscriber.clone()).or_default().push_back(Delivery {
                subscription: *sid,
                envelope: envelope.clone(),
            });
            self.record(now, AuditOp::Deliver, subscriber.as_str(), Some(id), model.clone(), Outcome::Ok, None);
            if one_shot {
                self.subscriptions.remove(sid);
            }
        }
        Ok(Published {
            id,
            logical_time: now,
            delivered: matched.len(),
        })
    }

    fn check_publish(&self, msg: &Outgoing, actor: &str) -> Result<(MessageKind, TopicEntry), FabricError> {
        let entry = self
            .topics
            .get(&msg.topic)
            .ok_or_else(|| FabricError::UnknownTopic(msg.topic.clone()))?;
        let kind = envelope::check_metadata(&msg.metadata)
            .map_err(|k| FabricError::InvalidMetadata(k.to_string()))?;
        if !self.may_see(entry, actor) {
            return Err(FabricError::ScopeViolation {
                topic: msg.topic.clone(),
                node: actor.to_string(),
            });
        }
        Ok((kind, entry.clone()))
    }

    pub fn subscribe(&mut self, req: SubscriptionRequest) -> Result<SubscriptionId, FabricError> {
        let now = self.advance();
        let actor = req.subscriber.to_string();
        let parsed = Selector::parse(&req.selector).map_err(FabricError::from).and_then(|sel| {
            if self.nodes.contains(&req.subscriber) {
                Ok(sel)
            } else {
                Err(FabricError::UnknownNode(actor.clone()))
            }
        });
        let selector = match parsed {
            Ok(s) => s,
            Err(e) => {
                self.record(now, AuditOp::Subscribe, &actor, None, None, Outcome::error(e.code()), None);
                return Err(e);
            }
        };
        let id = SubscriptionId(self.next_subscription);
        self.next_subscription += 1;
        self.subscriptions.insert(
            id,
            Subscription {
                id,
                selector,
                mode: req.mode,
                kind: req.kind,
                subscriber: req.subscriber,
                params: req.params,
            },
        );
        self.record(now, AuditOp::Subscribe, &actor, None, None, Outcome::Ok, Some(id.to_string()));
        Ok(id)
    }

    pub fn unsubscribe(&mut self, id: SubscriptionId, actor: &NodeId) -> Result<(), FabricError> {
        let now = self.advance();
        match self.subscriptions.get(&id) {
            Some(s) if s.subscriber == *actor => {
                self.subscriptions.remove(&id);
                self.record(now, AuditOp::Unsubscribe, actor.as_str(), None, None, Outcome::Ok, Some(id.to_string()));
                Ok(())
            }
            _ => {
                let e = FabricError::UnknownSubscription(id);
                self.record(now, AuditOp::Unsubscribe, actor.as_str(), None, None, Outcome::error(e.code()), None);
                Err(e)
            }
        }
    }

    pub fn subscription(&self, id: SubscriptionId) -> Option<&Subscription> {
        self.subscriptions.get(&id)
    }

    pub fn subscriptions(&self) -> impl Iterator<Item = &Subscription> {
        self.subscriptions.values()
    }

    /// Takes every pending delivery for `node`, in arrival order.
    pub fn drain(&mut self, node: &NodeId) -> Vec<Delivery> {
        self.inboxes.remove(node).map(Vec::from).unwrap_or_default()
    }

    /// Takes only the deliveries made through `sub`.
    pub fn drain_subscription(&mut self, node: &NodeId, sub: SubscriptionId) -> Vec<Delivery> {
        let Some(inbox) = self.inboxes.get_mut(node) else {
            return Vec::new();
        };
        let (taken, kept): (Vec<Delivery>, Vec<Delivery>) = inbox.drain(..).partition(|d| d.subscription == sub);
        *inbox = kept.into();
        taken
    }

    pub fn pending(&self, node: &NodeId) -> usize {
        self.inboxes.get(node).map_or(0, VecDeque::len)
    }

    /// Appends an audit record at the current logical time.
    pub fn audit(
        &mut self,
        op: AuditOp,
        actor: &str,
        message_id: Option<MessageId>,
        model_id: Option<ModelId>,
        outcome: Outcome,
        note: Option<String>,
    ) -> u64 {
        let now = self.clock;
        self.record(now, op, actor, message_id, model_id, outcome, note)
    }

    #[allow(clippy::too_many_arguments)]
    fn record(
        &mut self,
        now: u64,
        op: AuditOp,
        actor: &str,
        message_id: Option<MessageId>,
        model_id: Option<ModelId>,
        outcome: Outcome,
        note: Option<String>,
    ) -> u64 {
        let record = self.audit.append(now, op, actor, message_id, model_id, outcome).clone();
        let seq = record.seq;
        self.journal.push(JournalEntry::Audit { record, note });
        seq
    }

    /// Journal-only annotation; not an audit record.
    pub fn note(&mut self, actor: &str, text: impl Into<String>) {
        self.journal.push(JournalEntry::Note {
            logical_time: self.clock,
            actor: actor.to_string(),
            text: text.into(),
        });
    }

    pub fn audit_query(&self, filter: &AuditFilter) -> Vec<AuditRecord> {
        self.audit.query(filter)
    }

    pub fn audit_log(&self) -> &AuditLog {
        &self.audit
    }

    pub fn journal(&self) -> &[JournalEntry] {
        &self.journal
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(s: &str) -> NodeId {
        NodeId::new(s).unwrap()
    }

    fn fabric_with(nodes: &[&str], topics: &[&str]) -> Fabric {
        let mut f = Fabric::new();
        for n in nodes {
            f.register_node(node(n));
        }
        for t in topics {
            f.ensure_shared(t);
        }
        f
    }

    fn data(topic: &str) -> Outgoing {
        Outgoing::new(topic, MessageKind::Data, "s-1", "sensor-1").payload(b"42".as_slice())
    }

    #[test]
    fn publish_without_subscribers() {
        let mut f = fabric_with(&[], &["farm/soil/arid"]);
        let p = f.publish(data("farm/soil/arid")).unwrap();
        assert_eq!(p.delivered, 0);
        assert_eq!(f.audit_query(&AuditFilter::default()).len(), 1);
        assert_eq!(f.audit_query(&AuditFilter::op(AuditOp::Publish)).len(), 1);
    }

    #[test]
    fn two_durable_subscribers() {
        let mut f = fabric_with(&["app-1", "app-2"], &["farm/soil/arid"]);
        f.subscribe(SubscriptionRequest::durable("farm/soil/**", &node("app-1"))).unwrap();
        f.subscribe(SubscriptionRequest::durable("farm/*/arid[kind=data]", &node("app-2"))).unwrap();
        f.subscribe(SubscriptionRequest::durable("farm/water/**", &node("app-2"))).unwrap();
        let p = f.publish(data("farm/soil/arid")).unwrap();
        assert_eq!(p.delivered, 2);
        assert_eq!(f.audit_query(&AuditFilter::op(AuditOp::Publish)).len(), 1);
        assert_eq!(f.audit_query(&AuditFilter::op(AuditOp::Deliver)).len(), 2);
    }

    #[test]
    fn one_shot_delivers_once() {
        let mut f = fabric_with(&["app-1"], &["results/x"]);
        let sid = f.subscribe(SubscriptionRequest::one_shot("results/**", &node("app-1"))).unwrap();
        assert_eq!(f.publish(data("results/x")).unwrap().delivered, 1);
        assert_eq!(f.publish(data("results/x")).unwrap().delivered, 0);
        assert!(f.subscription(sid).is_none());
        assert_eq!(f.drain(&node("app-1")).len(), 1);
    }

    #[test]
    fn publish_errors_are_audited() {
        let mut f = fabric_with(&[], &["a"]);
        assert_eq!(f.publish(data("b")), Err(FabricError::UnknownTopic("b".into())));
        let mut m = data("a");
        m.metadata.remove("session");
        assert_eq!(f.publish(m), Err(FabricError::InvalidMetadata("session".into())));
        let bad_kind = data("a").meta("kind", "gossip");
        assert_eq!(f.publish(bad_kind), Err(FabricError::InvalidMetadata("kind".into())));
        let recs = f.audit_query(&AuditFilter::op(AuditOp::Publish));
        assert_eq!(recs.len(), 3);
        assert!(recs.iter().all(|r| !r.outcome.is_ok()));
    }

    #[test]
    fn subscribe_errors() {
        let mut f = fabric_with(&["app-1"], &[]);
        assert!(matches!(
            f.subscribe(SubscriptionRequest::durable("soil/[", &node("app-1"))),
            Err(FabricError::SelectorSyntax(_))
        ));
        assert_eq!(
            f.subscribe(SubscriptionRequest::durable("soil/**", &node("ghost"))),
            Err(FabricError::UnknownNode("ghost".into()))
        );
        assert!(f.subscribe(SubscriptionRequest::durable("farm/soil/**", &node("app-1"))).is_ok());
    }

    #[test]
    fn delivered_envelope_is_exactly_what_was_published() {
        let mut f = fabric_with(&["app-1"], &["a/b"]);
        f.subscribe(SubscriptionRequest::durable("a/**", &node("app-1"))).unwrap();
        let msg = data("a/b").meta("semantic-tags", "soil");
        f.publish(msg.clone()).unwrap();
        let d = f.drain(&node("app-1")).pop().unwrap();
        assert_eq!(d.envelope.metadata, msg.metadata);
        assert_eq!(d.envelope.payload, msg.payload);
    }

    #[test]
    fn application_scope_is_enforced() {
        let mut f = fabric_with(&["app-1", "app-2", "sensor-1"], &[]);
        let t = TopicId::new("farm/private", TopicScope::Application).unwrap();
        f.create_topic(t.clone(), Some(&node("app-1"))).unwrap();
        f.subscribe(SubscriptionRequest::durable("farm/**", &node("app-1"))).unwrap();
        f.subscribe(SubscriptionRequest::durable("farm/**", &node("app-2"))).unwrap();
        assert!(matches!(f.publish(data("farm/private")), Err(FabricError::ScopeViolation { .. })));
        f.grant("farm/private", &node("sensor-1")).unwrap();
        assert_eq!(f.publish(data("farm/private")).unwrap().delivered, 1);
        assert_eq!(
            f.create_topic(TopicId::shared("farm/private").unwrap(), None),
            Err(FabricError::ScopeConflict("farm/private".into()))
        );
    }

    #[test]
    fn unsubscribe_requires_owner() {
        let mut f = fabric_with(&["app-1", "app-2"], &["a"]);
        let sid = f.subscribe(SubscriptionRequest::durable("a", &node("app-1"))).unwrap();
        assert!(f.unsubscribe(sid, &node("app-2")).is_err());
        f.unsubscribe(sid, &node("app-1")).unwrap();
        assert_eq!(f.publish(data("a")).unwrap().delivered, 0);
    }

    #[test]
    fn drain_subscription_keeps_others() {
        let mut f = fabric_with(&["app-1"], &["a", "b"]);
        let sa = f.subscribe(SubscriptionRequest::durable("a", &node("app-1"))).unwrap();
        f.subscribe(SubscriptionRequest::durable("b", &node("app-1"))).unwrap();
        f.publish(data("a")).unwrap();
        f.publish(data("b")).unwrap();
        assert_eq!(f.drain_subscription(&node("app-1"), sa).len(), 1);
        assert_eq!(f.pending(&node("app-1")), 1);
    }
}
