//! Exhaustive small-scope model check of the negotiation state machine.

use interconnect_core::negotiation::run_to_completion;
use interconnect_core::negotiation::{NegotiationPlan, NegotiationSession, Phase, UnitTable};
use interconnect_core::registry::{Capability, CapabilitySet, ModelDescriptor, SchemaCatalog, SchemaMapping, Version};
use interconnect_core::ids::SessionId;
use interconnect_core::{ModelId, Rational};

pub const METRIC: &str = "load";
pub const CAPABILITIES: [&str; 4] = [METRIC, "forecast", "qos-tuning", "gradient-opt"];
/// `(unit, lo, hi)`; at most three distinct units.
pub const SCALES: [(&str, i128, i128); 5] = [
    ("percent", 0, 100),
    ("percent", 0, 50),
    ("fraction", 0, 1),
    ("celsius", -40, 85),
    ("celsius", 0, 40),
];
/// Value of one unit in the dimensionless base, or `None` for a unit of its own dimension.
fn to_fraction(unit: &str) -> Option<Rational> {
    match unit {
        "percent" => Some(Rational::new(1, 100)),
        "fraction" => Some(Rational::ONE),
        _ => None,
    }
}

#[derive(Debug, Clone)]
pub struct Peer {
    pub caps: Vec<&'static str>,
    pub scale: Option<(&'static str, i128, i128)>,
    pub major: u64,
}

impl Peer {
    fn descriptor(&self, id: &str) -> ModelDescriptor {
        let mut set = CapabilitySet::new();
        for c in &self.caps {
            let mut cap = Capability::named(c);
            if *c == METRIC {
                if let Some((u, lo, hi)) = self.scale {
                    cap = cap.with_param("scale", &format!("{u}:{lo}..{hi}"));
                }
            }
            set.insert(cap);
        }
        ModelDescriptor::new(ModelId::new(id).unwrap(), "gpt", Version::new(self.major, 0, 0), set, &["ran"])
    }
}

pub fn peers() -> Vec<Peer> {
    let mut out = Vec::new();
    for mask in 1u8..16 {
        let caps: Vec<&str> = (0..4).filter(|i| mask & (1 << i) != 0).map(|i| CAPABILITIES[i]).collect();
        let scales: Vec<Option<(&str, i128, i128)>> =
            if caps.contains(&METRIC) { SCALES.iter().copied().map(Some).collect() } else { vec![None] };
        for s in scales {
            for major in 1..=3 {
                out.push(Peer { caps: caps.clone(), scale: s, major });
            }
        }
    }
    out
}

fn catalog() -> SchemaCatalog {
    let mut c = SchemaCatalog::default();
    c.declare_schema("gpt", 1, &["cell", "pred"]);
    c.declare_schema("gpt", 2, &["cell", "prediction", "confidence"]);
    c.declare_mapping("gpt", 1, 2, SchemaMapping::default().rename("pred", "prediction").default_value("confidence", "1"));
    c
}

fn run(a: &ModelDescriptor, b: &ModelDescriptor, plan: &NegotiationPlan<'_>, units: &UnitTable) -> NegotiationSession {
    let mut s = NegotiationSession::open(SessionId(0), a.clone(), b.clone(), "check", 0);
    let mut t = 0;
    run_to_completion(&mut s, plan, units, &mut || {
        t += 1;
        t
    });
    s
}

#[derive(Debug, Default)]
pub struct Report {
    pub sessions: usize,
    pub agreed: usize,
    pub scaled: usize,
    pub violations: usize,
    pub counterexamples: Vec<String>,
}

fn samples(lo: Rational, hi: Rational) -> Vec<Rational> {
    let w = hi - lo;
    vec![lo, hi, lo + w / Rational::integer(2), lo + w / Rational::integer(3), lo + w * Rational::new(7, 9)]
}

fn check_one(pa: &Peer, pb: &Peer, a: &ModelDescriptor, b: &ModelDescriptor, s: &NegotiationSession, rev: &NegotiationSession) -> Vec<String> {
    let mut bad = Vec::new();
    let t = s.transcript();
    for w in t.windows(2) {
        if w[1].phase < w[0].phase || w[0].phase == Phase::Failed {
            bad.push(format!("phase regression {:?} -> {:?}", w[0].phase, w[1].phase));
        }
    }
    if !s.is_terminal() {
        bad.push(format!("non-terminal {:?}", s.phase()));
    }
    if s.phase() == Phase::Agreed && s.agreed_capabilities.is_empty() {
        bad.push("agreed with no capabilities".into());
    }
    if (s.phase(), &s.agreed_capabilities, &s.agreed_scale, s.verdict, &s.adapter)
        != (rev.phase(), &rev.agreed_capabilities, &rev.agreed_scale, rev.verdict, &rev.adapter)
    {
        bad.push("asymmetric outcome".into());
    }
    if let Some(c) = &s.agreed_scale {
        let (Some(sa), Some(sb)) = (pa.scale, pb.scale) else {
            bad.push("scale without declarations".into());
            return bad;
        };
        // Oracle: hull of the endpoints converted by hand into the canonical unit.
        let conv = |(u, lo, hi): (&str, i128, i128)| -> (Rational, Rational) {
            let f = if c.unit == "fraction" { to_fraction(u).unwrap() } else { Rational::ONE };
            (Rational::integer(lo) * f, Rational::integer(hi) * f)
        };
        let ((alo, ahi), (blo, bhi)) = (conv(sa), conv(sb));
        if (c.lo, c.hi) != (alo.min(blo), ahi.max(bhi)) {
            bad.push(format!("canonical range {}..{}", c.lo, c.hi));
        }
        for (d, (_, lo, hi)) in [(a, sa), (b, sb)] {
            let (lo, hi) = (Rational::integer(lo), Rational::integer(hi));
            let id = &d.model_id;
            if c.to_canonical(id, lo) != Some(c.lo) || c.to_canonical(id, hi) != Some(c.hi) {
                bad.push(format!("{id} endpoints do not land on canonical range"));
            }
            for v in samples(lo, hi) {
                let back = c.to_canonical(id, v).and_then(|x| c.from_canonical(id, x));
                if back != Some(v) {
                    bad.push(format!("{id} round trip {v} -> {back:?}"));
                }
            }
        }
    }
    bad
}

/// Every ordered pair of peers under every plan option.
pub fn enumerate() -> Report {
    let units = UnitTable::default();
    let cat = catalog();
    let plans = [
        NegotiationPlan { metric: None, catalog: None },
        NegotiationPlan { metric: Some(METRIC.into()), catalog: None },
        NegotiationPlan { metric: None, catalog: Some(&cat) },
        NegotiationPlan { metric: Some(METRIC.into()), catalog: Some(&cat) },
    ];
    let all = peers();
    let mut r = Report::default();
    for pa in &all {
        let a = pa.descriptor("peer-a");
        for pb in &all {
            let b = pb.descriptor("peer-b");
            for plan in &plans {
                let s = run(&a, &b, plan, &units);
                let rev = run(&b, &a, plan, &units);
                r.sessions += 1;
                r.agreed += usize::from(s.phase() == Phase::Agreed);
                r.scaled += usize::from(s.agreed_scale.is_some());
                for e in check_one(pa, pb, &a, &b, &s, &rev) {
                    r.violations += 1;
                    if r.counterexamples.len() < 20 {
                        r.counterexamples.push(format!("{pa:?} / {pb:?} metric={:?}: {e}", plan.metric));
                    }
                }
            }
        }
    }
    r
}
