//! Fabric delivery properties with an independent selector oracle.

use std::collections::BTreeMap;

use interconnect_core::fabric::envelope::KEY_ORIGIN;
use interconnect_core::fabric::{
    AuditOp, Fabric, MessageEnvelope, MessageKind, Outgoing, Selector, SubscriptionRequest, TopicId,
};
use interconnect_core::ids::SubscriptionId;
use interconnect_core::{MessageId, NodeId};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;

pub const TOPICS: [&str; 6] = ["a/x", "a/y", "b/x", "a/x/z", "b/y/z", "a"];
const SEGMENTS: [&str; 5] = ["a", "b", "x", "y", "z"];
const TIERS: [&str; 3] = ["gold", "silver", "gold-plus"];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Seg {
    Lit(&'static str),
    One,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Op {
    Eq,
    Neq,
    Prefix,
}

/// Structured selector; rendered to text for the fabric, read directly by the oracle.
#[derive(Debug, Clone)]
pub struct Sel {
    pub segs: Vec<Seg>,
    pub rest: bool,
    pub preds: Vec<(&'static str, Op, &'static str)>,
}

impl Sel {
    pub fn text(&self) -> String {
        let mut parts: Vec<String> = self
            .segs
            .iter()
            .map(|s| match s {
                Seg::Lit(l) => l.to_string(),
                Seg::One => "*".into(),
            })
            .collect();
        if self.rest {
            parts.push("**".into());
        }
        let mut s = parts.join("/");
        if !self.preds.is_empty() {
            let p: Vec<String> = self
                .preds
                .iter()
                .map(|(k, op, v)| {
                    let sym = match op {
                        Op::Eq => "=",
                        Op::Neq => "!=",
                        Op::Prefix => "^=",
                    };
                    format!("{k}{sym}{v}")
                })
                .collect();
            s.push('[');
            s.push_str(&p.join(","));
            s.push(']');
        }
        s
    }

    pub fn oracle(&self, topic: &str, meta: &BTreeMap<String, String>) -> bool {
        let t: Vec<&str> = topic.split('/').collect();
        let topic_ok = if self.rest {
            t.len() >= self.segs.len() && glob_prefix(&self.segs, &t[..self.segs.len()])
        } else {
            t.len() == self.segs.len() && glob_prefix(&self.segs, &t)
        };
        topic_ok
            && self.preds.iter().all(|(k, op, v)| match (op, meta.get(*k)) {
                (Op::Eq, Some(x)) => x == v,
                (Op::Neq, Some(x)) => x != v,
                (Op::Prefix, Some(x)) => x.starts_with(v),
                (Op::Neq, None) => true,
                (_, None) => false,
            })
    }
}

fn glob_prefix(segs: &[Seg], topic: &[&str]) -> bool {
    segs.iter().zip(topic).all(|(s, t)| match s {
        Seg::Lit(l) => l == t,
        Seg::One => true,
    })
}

pub fn sel_strategy() -> impl Strategy<Value = Sel> {
    let seg = prop_oneof![3 => prop::sample::select(&SEGMENTS[..]).prop_map(Seg::Lit), 1 => Just(Seg::One)];
    let op = prop_oneof![Just(Op::Eq), Just(Op::Neq), Just(Op::Prefix)];
    let pred = (prop::sample::select(&["tier", "zone"][..]), op, prop::sample::select(&["gold", "z1", "g", "silver"][..]));
    (prop::collection::vec(seg, 0..4), any::<bool>(), prop::collection::vec(pred, 0..3))
        .prop_filter("pattern must be non-empty", |(s, r, _)| !s.is_empty() || *r)
        .prop_map(|(segs, rest, preds)| Sel { segs, rest, preds })
}

/// One publication: topic index and optional tier/zone tags.
#[derive(Debug, Clone)]
pub struct Pub {
    pub topic: &'static str,
    pub tier: Option<&'static str>,
    pub zone: Option<&'static str>,
}

impl Pub {
    pub fn meta(&self, origin: &str) -> BTreeMap<String, String> {
        let mut m = Outgoing::new(self.topic, MessageKind::Data, "prop", origin).metadata;
        if let Some(t) = self.tier {
            m.insert("tier".into(), t.into());
        }
        if let Some(z) = self.zone {
            m.insert("zone".into(), z.into());
        }
        m
    }

    fn outgoing(&self, origin: &str) -> Outgoing {
        Outgoing {
            topic: self.topic.to_string(),
            payload: Vec::new(),
            metadata: self.meta(origin),
        }
    }
}

pub fn pub_strategy() -> impl Strategy<Value = Pub> {
    (
        prop::sample::select(&TOPICS[..]),
        prop::option::of(prop::sample::select(&TIERS[..])),
        prop::option::of(prop::sample::select(&["z1", "z2"][..])),
    )
        .prop_map(|(topic, tier, zone)| Pub { topic, tier, zone })
}

fn node(s: &str) -> NodeId {
    NodeId::new(s).unwrap()
}

fn fabric() -> Fabric {
    let mut f = Fabric::new();
    for t in TOPICS {
        f.ensure_shared(t);
    }
    for n in ["pub", "sub", "late"] {
        f.register_node(node(n));
    }
    f
}

fn delivers_to(f: &Fabric, actor: &str) -> Vec<MessageId> {
    f.audit_log()
        .records()
        .iter()
        .filter(|r| r.op == AuditOp::Deliver && r.actor == actor)
        .filter_map(|r| r.message_id)
        .collect()
}

/// A one-shot subscription delivers the first matching message and nothing after.
pub fn one_shot_exactly_once((sel, pubs): (Sel, Vec<Pub>)) -> Result<(), TestCaseError> {
    let mut f = fabric();
    let sub = node("sub");
    let sid = f.subscribe(SubscriptionRequest::one_shot(&sel.text(), &sub)).map_err(|e| TestCaseError::fail(e.to_string()))?;
    let mut first = None;
    for p in &pubs {
        let id = f.publish(p.outgoing("pub")).unwrap().id;
        if first.is_none() && sel.oracle(p.topic, &p.meta("pub")) {
            first = Some(id);
        }
    }
    let got: Vec<MessageId> = f.drain(&sub).into_iter().map(|d| d.envelope.id).collect();
    prop_assert_eq!(&got, &first.into_iter().collect::<Vec<_>>());
    prop_assert_eq!(delivers_to(&f, "sub"), got);
    prop_assert_eq!(f.subscription(sid).is_some(), first.is_none());
    Ok(())
}

#[derive(Debug, Clone)]
pub enum Step {
    Publish(Pub),
    Drain,
    LateJoin,
}

pub fn step_strategy() -> impl Strategy<Value = Step> {
    prop_oneof![6 => pub_strategy().prop_map(Step::Publish), 2 => Just(Step::Drain), 1 => Just(Step::LateJoin)]
}

/// Durable subscribers get every later match in order whenever they drain,
/// and never anything published before they subscribed.
pub fn durable_temporal_decoupling((sel, steps): (Sel, Vec<Step>)) -> Result<(), TestCaseError> {
    let mut f = fabric();
    let (sub, late) = (node("sub"), node("late"));
    f.subscribe(SubscriptionRequest::durable(&sel.text(), &sub)).unwrap();
    let mut late_sub: Option<SubscriptionId> = None;
    let (mut expect, mut expect_late) = (Vec::new(), Vec::new());
    let mut got = Vec::new();
    for s in &steps {
        match s {
            Step::Publish(p) => {
                let id = f.publish(p.outgoing("pub")).unwrap().id;
                if sel.oracle(p.topic, &p.meta("pub")) {
                    expect.push(id);
                    if late_sub.is_some() {
                        expect_late.push(id);
                    }
                }
            }
            Step::Drain => got.extend(f.drain(&sub).into_iter().map(|d| d.envelope.id)),
            Step::LateJoin => {
                if late_sub.is_none() {
                    late_sub = Some(f.subscribe(SubscriptionRequest::durable(&sel.text(), &late)).unwrap());
                }
            }
        }
    }
    got.extend(f.drain(&sub).into_iter().map(|d| d.envelope.id));
    prop_assert_eq!(got, expect);
    let got_late: Vec<MessageId> = f.drain(&late).into_iter().map(|d| d.envelope.id).collect();
    prop_assert_eq!(got_late, expect_late);
    Ok(())
}

/// Matching depends only on selector and envelope, and agrees with the oracle.
pub fn selector_purity((sel, p, noise): (Sel, Pub, Vec<Pub>)) -> Result<(), TestCaseError> {
    let text = sel.text();
    let a = Selector::parse(&text).map_err(|e| TestCaseError::fail(format!("{text}: {e}")))?;
    let b: Selector = text.parse().unwrap();
    prop_assert_eq!(&a, &b);
    prop_assert_eq!(a.to_string(), text.clone());
    let env = MessageEnvelope {
        id: MessageId(7),
        topic: TopicId::shared(p.topic).unwrap(),
        payload: Vec::new(),
        metadata: p.meta("pub"),
        logical_time: 3,
    };
    let first = a.matches(&env);
    prop_assert_eq!(first, sel.oracle(p.topic, &env.metadata));
    // Fabric traffic in between must not change the verdict.
    let mut f = fabric();
    f.subscribe(SubscriptionRequest::durable(&text, &node("sub"))).unwrap();
    for n in &noise {
        f.publish(n.outgoing("pub")).unwrap();
    }
    prop_assert_eq!(a.matches(&env), first);
    prop_assert_eq!(b.matches(&env.clone()), first);
    Ok(())
}

#[derive(Debug, Clone)]
pub enum AuditStep {
    Publish(Pub),
    PublishUnknownTopic,
    PublishNoOrigin(Pub),
    Subscribe(Sel, bool),
    SubscribeBad,
    Unsubscribe(u64),
    Drain,
}

pub fn audit_step_strategy() -> impl Strategy<Value = AuditStep> {
    prop_oneof![
        5 => pub_strategy().prop_map(AuditStep::Publish),
        1 => Just(AuditStep::PublishUnknownTopic),
        1 => pub_strategy().prop_map(AuditStep::PublishNoOrigin),
        2 => (sel_strategy(), any::<bool>()).prop_map(|(s, o)| AuditStep::Subscribe(s, o)),
        1 => Just(AuditStep::SubscribeBad),
        1 => (0u64..6).prop_map(AuditStep::Unsubscribe),
        1 => Just(AuditStep::Drain),
    ]
}

/// Every fabric operation leaves exactly the audit records it should, densely
/// numbered and in time order.
pub fn audit_completeness(steps: Vec<AuditStep>) -> Result<(), TestCaseError> {
    let mut f = fabric();
    let sub = node("sub");
    let mut expected = 0usize;
    let mut delivered = 0usize;
    let mut published = Vec::new();
    for s in steps {
        let before = f.audit_log().records().len();
        let now_before = f.now();
        let added = match s {
            AuditStep::Publish(p) => {
                let r = f.publish(p.outgoing("pub")).unwrap();
                published.push(r.id);
                delivered += r.delivered;
                1 + r.delivered
            }
            AuditStep::PublishUnknownTopic => {
                prop_assert!(f.publish(Outgoing::new("nowhere", MessageKind::Data, "s", "pub")).is_err());
                1
            }
            AuditStep::PublishNoOrigin(p) => {
                let mut o = p.outgoing("pub");
                o.metadata.remove(KEY_ORIGIN);
                prop_assert!(f.publish(o).is_err());
                1
            }
            AuditStep::Subscribe(sel, one) => {
                let req = if one { SubscriptionRequest::one_shot(&sel.text(), &sub) } else { SubscriptionRequest::durable(&sel.text(), &sub) };
                f.subscribe(req).unwrap();
                1
            }
            AuditStep::SubscribeBad => {
                prop_assert!(f.subscribe(SubscriptionRequest::durable("a/**/x", &sub)).is_err());
                1
            }
            AuditStep::Unsubscribe(n) => {
                let _ = f.unsubscribe(SubscriptionId(n), &sub);
                1
            }
            AuditStep::Drain => {
                f.drain(&sub);
                0
            }
        };
        expected += added;
        let recs = &f.audit_log().records()[before..];
        prop_assert_eq!(recs.len(), added);
        if added > 0 {
            prop_assert_eq!(f.now(), now_before + 1);
            prop_assert!(recs.iter().all(|r| r.logical_time == f.now()));
        }
    }
    let recs = f.audit_log().records();
    prop_assert_eq!(recs.len(), expected);
    for (i, r) in recs.iter().enumerate() {
        prop_assert_eq!(r.seq, i as u64);
        if i > 0 {
            prop_assert!(recs[i - 1].logical_time <= r.logical_time);
        }
    }
    let ok_publishes: Vec<MessageId> = recs
        .iter()
        .filter(|r| r.op == AuditOp::Publish && r.outcome.is_ok())
        .filter_map(|r| r.message_id)
        .collect();
    prop_assert_eq!(ok_publishes, published);
    prop_assert_eq!(recs.iter().filter(|r| r.op == AuditOp::Deliver).count(), delivered);
    Ok(())
}

pub fn one_shot_input() -> impl Strategy<Value = (Sel, Vec<Pub>)> {
    (sel_strategy(), prop::collection::vec(pub_strategy(), 0..12))
}

pub fn durable_input() -> impl Strategy<Value = (Sel, Vec<Step>)> {
    (sel_strategy(), prop::collection::vec(step_strategy(), 0..20))
}

pub fn purity_input() -> impl Strategy<Value = (Sel, Pub, Vec<Pub>)> {
    (sel_strategy(), pub_strategy(), prop::collection::vec(pub_strategy(), 0..4))
}

pub fn audit_input() -> impl Strategy<Value = Vec<AuditStep>> {
    prop::collection::vec(audit_step_strategy(), 0..20)
}
