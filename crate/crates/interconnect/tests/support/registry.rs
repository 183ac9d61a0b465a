//! Descriptor document generation and a brute-force capability query oracle.

use interconnect::descriptor::{parse_descriptor, serialize_descriptor};
use interconnect_core::registry::{CapabilitySet, ModelDescriptor, Registry};
use proptest::prelude::*;
use proptest::test_runner::TestCaseError;
use serde_json::{json, Map, Value};

pub const IDS: [&str; 6] = ["ran-gpt", "nwdaf-lm", "soil-net", "ric-planner", "edge-vlm", "agri-lm"];
pub const CAPS: [&str; 7] = [
    "traffic-prediction",
    "qos-tuning",
    "summarization",
    "irrigation-advice",
    "model-orchestration",
    "downlink-load",
    "gradient-opt",
];
pub const DOMAINS: [&str; 4] = ["ran", "core", "agri", "edge"];

fn word() -> impl Strategy<Value = String> {
    "[a-z][a-z0-9 ._-]{0,8}"
}

fn capability() -> impl Strategy<Value = (usize, Value)> {
    (
        0..CAPS.len(),
        prop::option::of(prop::collection::btree_map("[a-z]{1,5}", word(), 0..3)),
        prop::option::of(word()),
    )
        .prop_map(|(i, params, extra)| {
            let name = CAPS[i];
            let v = match (params, extra) {
                (None, None) => Value::String(name.into()),
                (p, e) => {
                    let mut o = Map::new();
                    o.insert("name".into(), name.into());
                    if let Some(p) = p {
                        o.insert("params".into(), json!(p));
                    }
                    if let Some(e) = e {
                        o.insert("vendorTag".into(), e.into());
                    }
                    Value::Object(o)
                }
            };
            (i, v)
        })
}

fn scalar() -> impl Strategy<Value = Value> {
    prop_oneof![
        word().prop_map(Value::String),
        (0u32..10_000).prop_map(|n| json!(n)),
        (-1000i32..1000, 1u32..1000).prop_map(|(a, b)| json!(a as f64 / b as f64)),
        any::<bool>().prop_map(Value::Bool),
    ]
}

/// A valid descriptor document exercising every optional section.
pub fn document() -> impl Strategy<Value = Value> {
    let caps = prop::collection::vec(capability(), 1..5).prop_map(|v| {
        let mut seen = std::collections::BTreeSet::new();
        v.into_iter().filter(|(i, _)| seen.insert(*i)).map(|(_, c)| c).collect::<Vec<_>>()
    });
    (
        (0..IDS.len(), (0u64..3, 0u64..4, 0u64..3), word(), word()),
        (caps, prop::sample::subsequence(&DOMAINS[..], 0..=3), prop::array::uniform4(1u64..60)),
        prop::option::of(prop::collection::btree_map("[a-z_]{1,8}", scalar(), 0..4)),
        prop::option::of((prop::collection::vec(word(), 0..3), word())),
        prop::option::of(prop::collection::vec(word(), 0..3)),
        prop::option::of(prop::sample::select(&["foundation", "specialized", "hybrid", "controller"][..])),
        prop::option::of((word(), scalar())),
    )
        .prop_map(|((id, (ma, mi, pa), family, label), (caps, domains, perf), hyper, security, custom, category, extra)| {
            let mut arch = json!({"family": family, "parameterScaleLabel": label});
            if let Some(c) = custom {
                arch["customElements"] = json!(c);
            }
            let mut doc = json!({
                "modelId": IDS[id],
                "modelType": "gpt",
                "version": format!("{ma}.{mi}.{pa}"),
                "architecture": arch,
                "capabilities": caps,
                "domains": domains,
                "performance": {
                    "rateLimitPerTick": perf[0],
                    "latencyTicks": perf[1],
                    "throughputPerTick": perf[2],
                    "maxConcurrent": perf[3],
                },
            });
            if let Some(h) = hyper {
                doc["hyperparameters"] = json!(h);
            }
            if let Some((auth, policy)) = security {
                doc["security"] = json!({"authMethods": auth, "encryption": ["tls1.3"], "privacyPolicy": policy});
            }
            if let Some(c) = category {
                doc["category"] = json!(c);
            }
            if let Some((v, s)) = extra {
                doc["vendorNote"] = json!(v);
                doc["performance"]["burst"] = s;
            }
            doc
        })
}

/// parse ∘ serialize ∘ parse equals parse, and serialization is a fixed point.
pub fn round_trip(doc: &Value) -> Result<ModelDescriptor, TestCaseError> {
    let text = serde_json::to_vec(doc).unwrap();
    let d1 = parse_descriptor(&text).map_err(|e| TestCaseError::fail(format!("{e}: {doc}")))?;
    let s1 = serialize_descriptor(&d1);
    let d2 = parse_descriptor(s1.as_bytes()).map_err(|e| TestCaseError::fail(format!("reparse {e}: {s1}")))?;
    prop_assert_eq!(&d1, &d2);
    prop_assert_eq!(serialize_descriptor(&d2), s1);
    Ok(d1)
}

/// Latest version per id, filtered and ordered by a plain scan.
pub fn brute_force(all: &[ModelDescriptor], required: &[&str], hint: Option<&str>) -> Vec<String> {
    let mut latest: Vec<&ModelDescriptor> = Vec::new();
    for d in all {
        match latest.iter_mut().find(|l| l.model_id == d.model_id) {
            Some(l) if l.version < d.version => *l = d,
            Some(_) => {}
            None => latest.push(d),
        }
    }
    let mut hits: Vec<(bool, u64, String)> = latest
        .into_iter()
        .filter(|d| required.iter().all(|r| d.capabilities.iter().any(|c| c.name == *r)))
        .map(|d| {
            let miss = match hint {
                Some(h) => !d.domains.iter().any(|x| x == h),
                None => true,
            };
            (miss, d.performance.latency_ticks, d.model_id.to_string())
        })
        .collect();
    hits.sort();
    hits.into_iter().map(|h| h.2).collect()
}

pub type Query = (Vec<&'static str>, Option<&'static str>);

pub fn query_matches(docs: &[Value], queries: &[Query]) -> Result<(), TestCaseError> {
    let mut reg = Registry::default();
    let mut inserted = Vec::new();
    for doc in docs {
        let d = round_trip(doc)?;
        if reg.insert(d.clone()).is_ok() {
            inserted.push(d);
        }
    }
    for (req, hint) in queries {
        let got: Vec<String> = reg
            .query_by_capability(&CapabilitySet::of(req), *hint)
            .unwrap()
            .into_iter()
            .map(|m| m.to_string())
            .collect();
        prop_assert_eq!(got, brute_force(&inserted, req, *hint), "query {:?} hint {:?}", req, hint);
    }
    Ok(())
}

pub fn query() -> impl Strategy<Value = Query> {
    (prop::sample::subsequence(&CAPS[..], 1..=2), prop::option::of(prop::sample::select(&DOMAINS[..])))
}

pub fn corpus() -> impl Strategy<Value = (Vec<Value>, Vec<Query>)> {
    (prop::collection::vec(document(), 1..12), prop::collection::vec(query(), 1..6))
}
