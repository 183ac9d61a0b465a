//! The registered scenario set. Each run builds a fresh world, drives it
//! through a fixed script and returns the journal as a trace plus checks.

use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use super::node::{NodeKind, NodeSpec, ADMISSION_RATE};
use super::trace::{self, TraceLine};
use super::World;
use crate::broker::{MockPlanner, PlanStatus, TaskPlan};
use crate::fabric::envelope::{KEY_LOCALITY, KEY_MODEL, KEY_SESSION};
use crate::fabric::{AuditOp, AuditRecord, JournalEntry, MessageEnvelope, MessageKind, Outgoing, SubscriptionKind, SubscriptionRequest, TokenState};
use crate::guard::Guard;
use crate::ids::{ModelId, NodeId, SessionId, TokenId};
use crate::interconnect::{IcError, Interconnect, NegotiateOptions, KEY_CAPABILITY};
use crate::mapek::{LoopConfig, LoopReport, ManagingLoop, MapekError, DEFAULT_ID};
use crate::negotiation::{NegotiationSession, Phase};
use crate::rational::Rational;
use crate::registry::{Capability, CapabilitySet, ModelDescriptor, Registry, SchemaMapping, Version};


pub const SCENARIOS: [&str; 10] = [
    "fig7-decompose",
    "fig9-nwdaf-pair",
    "fig10-oran-pair",
    "fig11-capability-mismatch",
    "fig12-scale",
    "fig13-ossification",
    "fig16-codegen",
    "mapek-congestion",
    "agri-inference",
    "agri-learning",
];

const RUNNER: &str = "scenario";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct ScenarioRun {
    pub name: String,
    pub seed: u64,
    pub trace: Vec<TraceLine>,
    pub checks: Vec<Check>,
    pub sessions: Vec<NegotiationSession>,
    pub plans: Vec<TaskPlan>,
    pub loop_report: Option<LoopReport>,
    pub audit: Vec<AuditRecord>,
}

impl ScenarioRun {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, name: &str) -> Option<&Check> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn render_trace(&self) -> String {
        trace::render(&self.trace)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ScenarioError {
    #[error("unknown scenario `{0}`")]
    UnknownScenario(String),
    #[error("scenario step failed: {0}")]
    Step(#[from] IcError),
    #[error("managing loop failed: {0}")]
    Loop(#[from] MapekError),
}

impl ScenarioError {
    pub fn code(&self) -> &'static str {
        match self {
            ScenarioError::UnknownScenario(_) => "unknown-scenario",
            ScenarioError::Step(e) => e.code(),
            ScenarioError::Loop(e) => e.code(),
        }
    }
}

pub fn run_scenario(name: &str, seed: u64) -> Result<ScenarioRun, ScenarioError> {
    let s = match name {
        "fig7-decompose" => fig7(seed),
        "fig9-nwdaf-pair" => fig9(seed),
        "fig10-oran-pair" => fig10(seed),
        "fig11-capability-mismatch" => fig11(seed),
        "fig12-scale" => fig12(seed),
        "fig13-ossification" => fig13(seed),
        "fig16-codegen" => fig16(seed),
        "mapek-congestion" => mapek_congestion(seed),
        "agri-inference" => agri_inference(seed),
        "agri-learning" => agri_learning(seed),
        _ => return Err(ScenarioError::UnknownScenario(name.to_string())),
    }?;
    s.finish(name, seed)
}

struct Stage {
    world: World,
    checks: Vec<Check>,
    sessions: Vec<SessionId>,
    loop_report: Option<LoopReport>,
}

fn q(s: &str) -> Rational {
    s.parse().expect("scenario constants are valid rationals")
}

fn id(s: &str) -> ModelId {
    ModelId::new(s).expect("scenario ids are valid")
}

fn descriptor(model: &str, ty: &str, v: (u64, u64, u64), caps: CapabilitySet, domain: &str) -> ModelDescriptor {
    ModelDescriptor::new(id(model), ty, Version::new(v.0, v.1, v.2), caps, &[domain])
}

impl Stage {
    fn new(seed: u64, registry: Registry) -> Self {
        let mut ic = Interconnect::new(registry, Guard::default());
        ic.broker = crate::broker::Broker::new(alloc::boxed::Box::new(MockPlanner::new(seed)));
        ic.fabric.register_node(NodeId::new(RUNNER).expect("valid"));
        Stage {
            world: World::new(ic, seed),
            checks: Vec::new(),
            sessions: Vec::new(),
            loop_report: None,
        }
    }

    fn ic(&mut self) -> &mut Interconnect {
        &mut self.world.ic
    }

    fn model(&mut self, d: ModelDescriptor) -> Result<ModelId, IcError> {
        self.ic().register_model(d)
    }

    fn node(&mut self, spec: NodeSpec) -> Result<NodeId, IcError> {
        self.world.spawn_node(spec)
    }

    fn check(&mut self, name: &str, passed: bool, detail: impl Into<String>) {
        let detail = detail.into();
        let verdict = if passed { "pass" } else { "fail" };
        self.ic().fabric.note(RUNNER, format!("check {name} {verdict}: {detail}"));
        self.checks.push(Check {
            name: name.to_string(),
            passed,
            detail,
        });
    }

    fn negotiate(&mut self, a: &str, b: &str, context: &str, opts: &NegotiateOptions) -> Result<SessionId, IcError> {
        let sid = self.ic().negotiate(&id(a), &id(b), context, opts)?;
        self.sessions.push(sid);
        Ok(sid)
    }

    fn session(&self, sid: SessionId) -> &NegotiationSession {
        self.world.ic.session(sid).expect("session recorded")
    }

    fn outcome_line(&mut self, sid: SessionId) {
        let s = self.session(sid);
        let caps: Vec<&str> = s.agreed_capabilities.names().collect();
        let text = format!("outcome {sid} {} capabilities={}", s.phase(), caps.join(","));
        self.ic().fabric.note(RUNNER, text);
    }

    /// Publishes `payload` on `topic` as `origin` and returns the accepted envelope.
    fn sample(&mut self, topic: &str, origin: &str, session: &str, payload: &str, meta: &[(&str, &str)]) -> Result<MessageEnvelope, IcError> {
        let ic = self.ic();
        ic.fabric.ensure_shared(topic);
        let tap = ic.register_node(RUNNER);
        let sub = ic.fabric.subscribe(SubscriptionRequest::one_shot(topic, &tap))?;
        let mut msg = Outgoing::new(topic, MessageKind::Data, session, origin).payload(payload.to_string());
        for (k, v) in meta {
            msg = msg.meta(k, *v);
        }
        ic.publish(msg)?;
        Ok(ic.fabric.drain_subscription(&tap, sub).remove(0).envelope)
    }

    fn finish(self, name: &str, seed: u64) -> Result<ScenarioRun, ScenarioError> {
        let ic = &self.world.ic;
        Ok(ScenarioRun {
            name: name.to_string(),
            seed,
            trace: trace::from_journal(ic.fabric.journal()),
            checks: self.checks,
            sessions: self.sessions.iter().filter_map(|s| ic.session(*s).cloned()).collect(),
            plans: ic.broker.plans().cloned().collect(),
            loop_report: self.loop_report,
            audit: ic.fabric.audit_log().records().to_vec(),
        })
    }
}

fn count_envelopes(ic: &Interconnect, topic: &str, kind: MessageKind) -> usize {
    ic.fabric
        .journal()
        .iter()
        .filter(|e| matches!(e, JournalEntry::Envelope { topic: t, kind: k, .. } if t == topic && *k == kind))
        .count()
}

fn meta(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn fig7(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    s.model(descriptor(
        "analytics-gpt",
        "gpt",
        (1, 0, 0),
        CapabilitySet::of(&["comparative-analysis", "summarization"]),
        "ran",
    ))?;
    s.node(NodeSpec::new("edge-host", NodeKind::ModelHost).hosting("analytics-gpt"))?;
    s.node(NodeSpec::new("cell-1", NodeKind::UeGen).load(q("0.6")))?;
    s.node(NodeSpec::new("cell-2", NodeKind::UeGen).load(q("0.7")))?;
    let app = s.ic().register_node("ops-app");
    let req = SubscriptionRequest::durable("telemetry/*/load", &app)
        .kind(SubscriptionKind::Inference)
        .param("prompt", "Compare the load of every cell");
    s.ic().subscribe(req)?;
    s.world.step(1)?;

    let ic = s.ic();
    let plan = ic.broker.plans().next().cloned();
    let delivered = ic.drain(&app);
    let results = delivered
        .iter()
        .filter(|d| d.envelope.kind() == Some(MessageKind::InferenceResult))
        .count();
    let shape = plan
        .as_ref()
        .map(|p| p.tasks.iter().map(|t| t.kind.as_str()).collect::<Vec<_>>().join(","))
        .unwrap_or_default();
    s.check(
        "decomposed",
        shape == "ingest,ingest,infer,aggregate",
        format!("tasks={shape}"),
    );
    s.check("one-result", results == 1, format!("results={results}"));
    Ok(s)
}

fn fig9(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    s.model(descriptor(
        "nwdaf-gpt-1",
        "nwdaf-gpt",
        (1, 0, 0),
        CapabilitySet::of(&["anomaly-detection", "network-optimization", "traffic-prediction"]),
        "nwdaf",
    ))?;
    s.model(descriptor(
        "nwdaf-gpt-2",
        "nwdaf-gpt",
        (1, 2, 0),
        CapabilitySet::of(&["load-balancing", "network-optimization"]),
        "nwdaf",
    ))?;
    s.node(NodeSpec::new("nwdaf-1", NodeKind::Nwdaf).hosting("nwdaf-gpt-1"))?;
    s.node(NodeSpec::new("nwdaf-2", NodeKind::Nwdaf).hosting("nwdaf-gpt-2"))?;
    let sid = s.negotiate("nwdaf-gpt-1", "nwdaf-gpt-2", "network optimization", &NegotiateOptions::default())?;
    s.outcome_line(sid);

    let data = s.sample("analytics/nwdaf-1/kpi", "nwdaf-1", &sid.to_string(), "slice-a latency rising", &[])?;
    let tok = s.ic().participate_inference(
        &data,
        &meta(&[
            (KEY_SESSION, &sid.to_string()),
            (KEY_CAPABILITY, "network-optimization"),
            (KEY_LOCALITY, "nwdaf-2"),
        ]),
    )?;
    let n1 = NodeId::new("nwdaf-1").expect("valid");
    let topic = s.ic().result_topic(tok).expect("token topic").name().to_string();
    s.ic().fabric.subscribe(SubscriptionRequest::one_shot(&topic, &n1)).map_err(IcError::from)?;
    s.ic().pump()?;

    let phase = s.session(sid).phase();
    s.check("agreed", phase == Phase::Agreed, format!("phase={phase}"));
    let state = token_state(s.ic(), tok);
    let got = s.ic().drain(&n1).len();
    s.check("answered", state == Some(TokenState::Notified) && got == 1, format!("token={state:?} delivered={got}"));
    Ok(s)
}

fn token_state(ic: &Interconnect, tok: TokenId) -> Option<TokenState> {
    ic.token(tok).map(|t| t.state())
}

fn fig10(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    s.model(descriptor(
        "xapp-gpt",
        "oran-gpt",
        (2, 0, 0),
        CapabilitySet::of(&["qos-tuning", "resource-allocation", "spectrum-efficiency"]),
        "oran",
    ))?;
    s.model(descriptor(
        "rapp-gpt",
        "oran-gpt",
        (2, 1, 0),
        CapabilitySet::of(&["policy-guidance", "qos-tuning", "resource-allocation"]),
        "oran",
    ))?;
    let near = s.node(NodeSpec::new("near-rt-ric", NodeKind::Ric).hosting("xapp-gpt"))?;
    s.node(NodeSpec::new("non-rt-ric", NodeKind::Ric).hosting("rapp-gpt"))?;
    let sid = s.negotiate("xapp-gpt", "rapp-gpt", "spectrum efficiency and QoS", &NegotiateOptions::default())?;
    s.outcome_line(sid);
    let agreed = s.session(sid).agreed_capabilities.clone();

    let control = Outgoing::new(format!("control/{near}"), MessageKind::Control, &sid.to_string(), "non-rt-ric")
        .meta("knob", "prb-share")
        .meta("value", "3/4");
    s.ic().publish(control)?;
    s.ic().pump()?;

    let names: Vec<&str> = agreed.names().collect();
    let phase = s.session(sid).phase();
    s.check(
        "agreed",
        phase == Phase::Agreed && names == ["qos-tuning", "resource-allocation"],
        format!("phase={phase} capabilities={}", names.join(",")),
    );
    let share = s.world.ic.network.get(&near).and_then(|n| n.knob("prb-share"));
    s.check("prb-share-applied", share == Some(q("3/4")), format!("prb-share={share:?}"));
    Ok(s)
}

fn fig11(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    s.model(descriptor(
        "ran-gpt-a",
        "ran-gpt",
        (1, 0, 0),
        CapabilitySet::of(&["reinforcement-scheduling", "standard-gradient-optimization"]),
        "ran",
    ))?;
    s.model(descriptor(
        "ran-gpt-b",
        "ran-gpt",
        (1, 3, 0),
        CapabilitySet::of(&["evolutionary-search", "standard-gradient-optimization"]),
        "ran",
    ))?;
    let sid = s.negotiate("ran-gpt-a", "ran-gpt-b", "RAN optimization", &NegotiateOptions::default())?;
    s.outcome_line(sid);
    let sess = s.session(sid);
    let phase = sess.phase();
    let names: Vec<String> = sess.agreed_capabilities.names().map(str::to_string).collect();
    s.check(
        "agreed-on-shared",
        phase == Phase::Agreed && names == ["standard-gradient-optimization"],
        format!("phase={phase} capabilities={}", names.join(",")),
    );
    Ok(s)
}

fn scaled(model: &str, decl: &str) -> ModelDescriptor {
    let caps: CapabilitySet = [
        Capability::named("downlink-load").with_param("scale", decl),
        Capability::named("traffic-steering"),
    ]
    .into_iter()
    .collect();
    descriptor(model, "oran-gpt", (1, 0, 0), caps, "oran")
}

fn fig12(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    s.model(scaled("du-gpt", "percent:0..100"))?;
    s.model(scaled("cu-gpt", "fraction:0..1"))?;
    let opts = NegotiateOptions {
        metric: Some("downlink-load".into()),
        adapters: false,
    };
    let sid = s.negotiate("du-gpt", "cu-gpt", "downlink traffic load", &opts)?;
    s.outcome_line(sid);
    let sess = s.session(sid).clone();
    let phase = sess.phase();
    s.check("agreed", phase == Phase::Agreed, format!("phase={phase}"));
    let (du, cu) = (id("du-gpt"), id("cu-gpt"));
    let detail = match &sess.agreed_scale {
        Some(c) => {
            let raw = Rational::integer(75);
            let canonical = c.to_canonical(&du, raw);
            let peer_view = canonical.and_then(|v| c.from_canonical(&cu, v));
            let back = canonical.and_then(|v| c.from_canonical(&du, v));
            let ok = canonical == Some(q("3/4")) && peer_view == Some(q("3/4")) && back == Some(raw);
            let text = format!("unit={} 75 percent -> {canonical:?} -> {back:?}", c.unit);
            s.ic().fabric.note(RUNNER, format!("scale {text}"));
            (ok, text)
        }
        None => (false, "no agreed scale".to_string()),
    };
    s.check("scale-round-trip", detail.0, detail.1);
    Ok(s)
}

fn fig13(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    {
        let cat = &mut s.ic().registry.schemas;
        cat.declare_schema("nwdaf-gpt", 1, &["cell", "traffic_pred"]);
        cat.declare_schema("nwdaf-gpt", 2, &["cell", "confidence", "trafficPrediction"]);
        cat.declare_mapping(
            "nwdaf-gpt",
            1,
            2,
            SchemaMapping::default()
                .rename("traffic_pred", "trafficPrediction")
                .default_value("confidence", "1"),
        );
    }
    let caps = CapabilitySet::of(&["traffic-analytics"]);
    s.model(descriptor("nwdaf-legacy", "nwdaf-gpt", (1, 4, 0), caps.clone(), "nwdaf"))?;
    s.model(descriptor("nwdaf-next", "nwdaf-gpt", (2, 0, 0), caps, "nwdaf"))?;
    let without = s.negotiate("nwdaf-legacy", "nwdaf-next", "traffic analytics", &NegotiateOptions::default())?;
    s.outcome_line(without);
    let opts = NegotiateOptions {
        metric: None,
        adapters: true,
    };
    let with = s.negotiate("nwdaf-legacy", "nwdaf-next", "traffic analytics", &opts)?;
    s.outcome_line(with);

    let (p1, p2) = (s.session(without).phase(), s.session(with).phase());
    s.check("failed-without-adapter", p1 == Phase::Failed, format!("phase={p1}"));
    s.check("agreed-with-adapter", p2 == Phase::Agreed, format!("phase={p2}"));

    let Some(adapter) = s.session(with).adapter.clone() else {
        s.check("adapted-envelope", false, "no adapter");
        return Ok(s);
    };
    s.ic().register_node("nwdaf-a");
    let legacy = s.sample(
        "analytics/nwdaf-a/traffic",
        "nwdaf-a",
        &with.to_string(),
        "cell-7 forecast",
        &[(KEY_MODEL, "nwdaf-legacy"), ("cell", "cell-7"), ("traffic_pred", "high")],
    )?;
    let adapted = adapter.apply(&legacy);
    let ok = adapted.meta("trafficPrediction") == Some("high")
        && adapted.meta("confidence") == Some("1")
        && adapted.meta("traffic_pred").is_none();
    s.ic().fabric.ensure_shared("analytics/nwdaf-b/traffic");
    s.ic().publish(adapted.to_outgoing("analytics/nwdaf-b/traffic"))?;
    s.check("adapted-envelope", ok, format!("trafficPrediction={:?}", adapted.meta("trafficPrediction")));
    Ok(s)
}

fn fig16(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    s.node(NodeSpec::new("cell-1", NodeKind::UeGen).load(q("0.95")).knob("rate-limit", q("1")))?;
    s.node(NodeSpec::new("nwdaf-1", NodeKind::Nwdaf))?;
    s.node(NodeSpec::new("nwdaf-2", NodeKind::Nwdaf))?;
    let n1 = NodeId::new("nwdaf-1").expect("valid");
    let req = SubscriptionRequest::durable("telemetry/cell-1/load", &n1)
        .kind(SubscriptionKind::Inference)
        .param("prompt", "Write a tool that turns cell-1 load insights into a rate-limit configuration");
    s.ic().subscribe(req)?;
    s.world.step(1)?;

    let ic = &s.world.ic;
    let order: Vec<&'static str> = ic
        .fabric
        .journal()
        .iter()
        .filter_map(|e| match e {
            JournalEntry::Audit { record, note } if record.op == AuditOp::Sandbox && record.outcome.is_ok() => Some("sandbox"),
            JournalEntry::Audit { record, note: Some(n) } if record.op == AuditOp::Execute && n.starts_with("deploy ") => {
                Some("deploy")
            }
            JournalEntry::Envelope { kind: MessageKind::InferenceResult, .. } => Some("result"),
            _ => None,
        })
        .collect();
    let ok = order == ["sandbox", "deploy", "result"];
    let accepted = ic.broker.results().iter().all(|r| r.status == PlanStatus::Completed);
    let got = s.ic().drain(&n1).len();
    s.check("sandbox-deploy-result", ok && accepted, format!("order={}", order.join(",")));
    s.check("insight-delivered", got == 1, format!("delivered={got}"));
    Ok(s)
}

fn mapek_congestion(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    let cell = s.node(NodeSpec::new("cell-1", NodeKind::UeGen).load(q("0.95")))?;
    let cfg = LoopConfig::default();
    let mut l = ManagingLoop::new(s.ic(), DEFAULT_ID, cfg.clone())?;
    s.world.step(cfg.window as u64)?;
    let report = l.run_loop(&mut s.world, 10)?;
    let u = s.world.ic.network.get(&cell).and_then(|n| n.utilization());
    let adm = s.world.ic.network.get(&cell).and_then(|n| n.knob(ADMISSION_RATE));
    s.check(
        "converged",
        report.converged_at == Some(2),
        format!("converged_at={:?} iterations={}", report.converged_at, report.iterations.len()),
    );
    s.check(
        "below-threshold",
        u.is_some_and(|u| u <= cfg.theta),
        format!("utilization={} admission-rate={}", fmt_opt(u), fmt_opt(adm)),
    );
    s.loop_report = Some(report);
    Ok(s)
}

fn fmt_opt(v: Option<Rational>) -> String {
    v.map_or_else(|| "-".to_string(), |r| r.to_string())
}

fn agri_inference(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::default());
    s.model(descriptor(
        "agri-gpt",
        "gpt",
        (1, 0, 0),
        CapabilitySet::of(&["irrigation-advice", "yield-prediction"]),
        "agriculture",
    ))?;
    s.node(NodeSpec::new("farm-edge", NodeKind::ModelHost).hosting("agri-gpt"))?;
    s.ic().register_node("soil-probe");
    let topic = "farm/field-1/soil-moisture";
    s.ic().fabric.ensure_shared(topic);
    let app = s.ic().register_node("agritech-app");
    let req = SubscriptionRequest::durable(topic, &app)
        .kind(SubscriptionKind::Inference)
        .param("prompt", "Recommend irrigation for field 1 from soil moisture");
    s.ic().subscribe(req)?;
    let batches = ["0.31", "0.27", "0.22"];
    for m in batches {
        let msg = Outgoing::new(topic, MessageKind::Data, "field-1", "soil-probe").payload(format!("moisture={m}"));
        s.ic().publish(msg)?;
        s.ic().pump()?;
    }
    let result_topic = s.ic().broker.plans().next().map(|p| p.result_topic.clone()).unwrap_or_default();
    let produced = count_envelopes(s.ic(), &result_topic, MessageKind::InferenceResult);
    let got = s.ic().drain(&app).len();
    s.check(
        "one-result-per-batch",
        produced == batches.len() && got == batches.len(),
        format!("batches={} results={produced} delivered={got}", batches.len()),
    );
    Ok(s)
}

fn agri_learning(seed: u64) -> Result<Stage, ScenarioError> {
    let mut s = Stage::new(seed, Registry::new(3));
    s.model(descriptor(
        "crop-yield",
        "gpt",
        (1, 0, 0),
        CapabilitySet::of(&["learning", "yield-prediction"]),
        "agriculture",
    ))?;
    let farms = ["farm-1", "farm-2", "farm-3"];
    let mut tokens = Vec::new();
    for f in farms {
        let node = s.ic().register_node(f);
        let sel = "registry/crop-yield";
        s.ic().fabric.ensure_shared(sel);
        s.ic()
            .subscribe(SubscriptionRequest::durable(sel, &node).kind(SubscriptionKind::ModelUpdate))?;
        let data = s.sample(
            &format!("farm/{f}/harvest"),
            f,
            "season-1",
            &format!("{f} yield observations"),
            &[(KEY_MODEL, "crop-yield")],
        )?;
        tokens.push(s.ic().participate_learning(&data, "improve yield prediction")?);
        s.ic().pump()?;
    }
    let versions = s.ic().registry.versions(&id("crop-yield"));
    let bumps = versions.len().saturating_sub(1);
    let latest = versions.last().map(|v| v.to_string()).unwrap_or_default();
    s.check("one-version-bump", bumps == 1, format!("versions={bumps} latest={latest}"));
    let notified = tokens
        .iter()
        .filter(|t| token_state(s.ic(), **t) == Some(TokenState::Notified))
        .count();
    s.check("all-notified", notified == tokens.len(), format!("notified={notified}/{}", tokens.len()));
    let updates: usize = farms
        .iter()
        .map(|f| {
            let n = NodeId::new(*f).expect("valid");
            s.ic()
                .drain(&n)
                .iter()
                .filter(|d| d.envelope.kind() == Some(MessageKind::ModelUpdate) && d.envelope.meta("version") == Some(&latest))
                .count()
        })
        .sum();
    s.check("farms-see-update", updates == farms.len(), format!("updates={updates}"));
    Ok(s)
}
