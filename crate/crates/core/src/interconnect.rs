//! The assembled interconnect: fabric, registry, negotiator, broker and guard
//! over one simulated network, driven by a deterministic scheduler.

use alloc::boxed::Box;
use alloc::collections::BTreeMap;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::broker::{self, Broker, BrokerError};
use crate::fabric::envelope::{KEY_LOCALITY, KEY_MODEL, KEY_SESSION};
use crate::fabric::{
    AuditOp, CompletionToken, Delivery, Fabric, FabricError, MessageEnvelope, MessageKind, Outcome, Outgoing,
    Published, SubscriptionKind, SubscriptionRequest, TokenState, TopicId,
};
use crate::guard::{
    ConsensusResult, Decision, DeploymentRecord, Guard, GuardError, GuardedProgram, HitlTicket, Invariant,
    SandboxVerdict,
};
use crate::ids::{is_segment, DeploymentId, ModelId, NodeId, SessionId, SubscriptionId, TicketId, TokenId};
use crate::negotiation::{CompatVerdict, NegotiationError, NegotiationSession, Phase, UnitTable};
use crate::registry::{CapabilitySet, Contribution, ModelDescriptor, Registry, RegistryError, Version, VersionPart};
use crate::simnet::node::{KnobError, NetworkState, NodeKind, SimNode};
use crate::rational::Rational;

pub const SYSTEM: &str = "interconnect";
pub const REGISTRY: &str = "registry";
pub const GUARD: &str = "guard";

/// Capability requested when session metadata names none.
pub const DEFAULT_CAPABILITY: &str = "inference";
pub const LEARNING_CAPABILITY: &str = "learning";
pub const KEY_CAPABILITY: &str = "capability";
pub const KEY_TOKEN: &str = "token";
pub const KEY_KNOB: &str = "knob";
pub const KEY_VALUE: &str = "value";
pub const KEY_PHASE: &str = "phase";
pub const KEY_VERSION: &str = "version";
pub const KEY_DOMAIN: &str = "domain";

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum IcError {
    #[error(transparent)]
    Fabric(#[from] FabricError),
    #[error(transparent)]
    Registry(#[from] RegistryError),
    #[error(transparent)]
    Negotiation(#[from] NegotiationError),
    #[error(transparent)]
    Guard(#[from] GuardError),
    #[error(transparent)]
    Broker(#[from] BrokerError),
    #[error("no eligible model for capability `{0}`")]
    NoEligibleModel(String),
    #[error("learning objective is empty")]
    EmptyObjective,
    #[error("node `{0}` already exists")]
    DuplicateNode(String),
    #[error("unknown token {0}")]
    UnknownToken(TokenId),
    #[error("unknown negotiation session {0}")]
    UnknownSession(SessionId),
    #[error(transparent)]
    Knob(Box<KnobError>),
}

impl From<KnobError> for IcError {
    fn from(e: KnobError) -> Self {
        IcError::Knob(Box::new(e))
    }
}

impl IcError {
    pub fn code(&self) -> &'static str {
        match self {
            IcError::Fabric(e) => e.code(),
            IcError::Registry(e) => e.code(),
            IcError::Negotiation(e) => e.code(),
            IcError::Guard(e) => e.code(),
            IcError::Broker(e) => e.code(),
            IcError::NoEligibleModel(_) => "no-eligible-model",
            IcError::EmptyObjective => "empty-objective",
            IcError::DuplicateNode(_) => "duplicate-node",
            IcError::UnknownToken(_) => "unknown-token",
            IcError::UnknownSession(_) => "unknown-session",
            IcError::Knob(k) => match **k {
                KnobError::UnknownKnob { .. } => "unknown-knob",
                KnobError::OutOfRange { .. } => "knob-range",
            },
        }
    }
}

fn sys(name: &str) -> NodeId {
    NodeId::new(name).expect("system node ids are valid segments")
}

#[derive(Debug, Clone)]
pub struct TokenEntry {
    pub token: CompletionToken,
    pub owner: String,
    pub model: Option<ModelId>,
    pub result: Option<Vec<u8>>,
}

#[derive(Debug, Clone, Copy)]
struct NodeSubs {
    control: SubscriptionId,
    inference: Option<SubscriptionId>,
}

/// What a negotiation run should cover beyond capabilities and versions.
#[derive(Debug, Clone, Default)]
pub struct NegotiateOptions {
    pub metric: Option<String>,
    pub adapters: bool,
}

pub struct Interconnect {
    pub fabric: Fabric,
    pub registry: Registry,
    pub guard: Guard,
    pub broker: Broker,
    pub network: NetworkState,
    pub units: UnitTable,
    tokens: BTreeMap<TokenId, TokenEntry>,
    sessions: BTreeMap<SessionId, NegotiationSession>,
    handlers: BTreeMap<NodeId, NodeSubs>,
    next_token: u64,
    next_session: u64,
}

impl Default for Interconnect {
    fn default() -> Self {
        Interconnect::new(Registry::default(), Guard::default())
    }
}

impl Interconnect {
    pub fn new(registry: Registry, guard: Guard) -> Self {
        let mut fabric = Fabric::new();
        for n in [SYSTEM, REGISTRY, GUARD, broker::BROKER] {
            fabric.register_node(sys(n));
        }
        Interconnect {
            fabric,
            registry,
            guard,
            broker: Broker::default(),
            network: NetworkState::default(),
            units: UnitTable::default(),
            tokens: BTreeMap::new(),
            sessions: BTreeMap::new(),
            handlers: BTreeMap::new(),
            next_token: 0,
            next_session: 0,
        }
    }

    /// Registers a plain fabric participant with no simulated state.
    pub fn register_node(&mut self, id: &str) -> NodeId {
        let id = NodeId::new(id).expect("valid node id");
        self.fabric.register_node(id.clone());
        id
    }

    /// Adds a simulated node; it listens for control messages and, when it
    /// hosts models, for inference requests.
    pub fn add_node(&mut self, node: SimNode) -> Result<NodeId, IcError> {
        let id = node.id.clone();
        if self.network.get(&id).is_some() || self.fabric.is_registered(&id) {
            return Err(IcError::DuplicateNode(id.to_string()));
        }
        let hosts = node.kind == NodeKind::ModelHost || !node.hosted_models.is_empty();
        self.network.insert(node);
        self.fabric.register_node(id.clone());
        let control_topic = format!("control/{id}");
        self.fabric.ensure_shared(&control_topic);
        let control = self.fabric.subscribe(SubscriptionRequest::durable(&control_topic, &id))?;
        let inference = if hosts {
            let t = format!("inference/{id}");
            self.fabric.ensure_shared(&t);
            Some(self.fabric.subscribe(SubscriptionRequest::durable(&t, &id))?)
        } else {
            None
        };
        self.handlers.insert(id.clone(), NodeSubs { control, inference });
        Ok(id)
    }

    pub fn publish(&mut self, msg: Outgoing) -> Result<Published, IcError> {
        Ok(self.fabric.publish(msg)?)
    }

    /// Fabric subscribe; inference subscriptions additionally get a task plan
    /// whose result topic replaces the requested selector.
    pub fn subscribe(&mut self, req: SubscriptionRequest) -> Result<SubscriptionId, IcError> {
        if req.kind != SubscriptionKind::Inference {
            return Ok(self.fabric.subscribe(req)?);
        }
        let plan_id = broker::on_inference_subscription(self, &req)?;
        let result = self.broker.plan(plan_id).expect("plan just created").result_topic.clone();
        let bound = SubscriptionRequest {
            selector: result,
            ..req
        }
        .param("plan", plan_id.to_string());
        Ok(self.fabric.subscribe(bound)?)
    }

    pub fn drain(&mut self, node: &NodeId) -> Vec<Delivery> {
        self.fabric.drain(node)
    }

    fn new_token(&mut self, topic: &str, owner: &str, model: Option<ModelId>) -> TokenId {
        self.next_token += 1;
        let id = TokenId(self.next_token);
        let t = self.fabric.ensure_shared(topic);
        self.tokens.insert(
            id,
            TokenEntry {
                token: CompletionToken::new(id, t),
                owner: owner.to_string(),
                model,
                result: None,
            },
        );
        id
    }

    pub fn token(&self, id: TokenId) -> Option<&CompletionToken> {
        self.tokens.get(&id).map(|e| &e.token)
    }

    pub fn token_entry(&self, id: TokenId) -> Option<&TokenEntry> {
        self.tokens.get(&id)
    }

    pub fn tokens(&self) -> impl Iterator<Item = &TokenEntry> {
        self.tokens.values()
    }

    /// Routes `data` to a registry-selected model host; the caller never names the model.
    pub fn participate_inference(
        &mut self,
        data: &MessageEnvelope,
        session_meta: &BTreeMap<String, String>,
    ) -> Result<TokenId, IcError> {
        self.fabric.advance();
        let actor = data.origin().unwrap_or("unknown").to_string();
        let routed = self.route_inference(data, session_meta);
        let (model, host, session, capability) = match routed {
            Ok(r) => r,
            Err(e) => {
                self.fabric
                    .audit(AuditOp::ParticipateInference, &actor, Some(data.id), None, Outcome::error(e.code()), None);
                return Err(e);
            }
        };
        let token = self.new_token(&format!("results/tok-{}", self.next_token + 1), &actor, Some(model.clone()));
        self.fabric.audit(
            AuditOp::ParticipateInference,
            &actor,
            Some(data.id),
            Some(model.clone()),
            Outcome::Ok,
            Some(format!("{token} via {host}")),
        );
        let request = data
            .to_outgoing(format!("inference/{host}"))
            .meta(crate::fabric::envelope::KEY_KIND, MessageKind::Prompt.as_str())
            .meta(KEY_SESSION, session)
            .meta(crate::fabric::envelope::KEY_ORIGIN, SYSTEM)
            .meta(KEY_MODEL, model.as_str())
            .meta(KEY_CAPABILITY, capability)
            .meta(KEY_TOKEN, token.to_string());
        self.fabric.publish(request)?;
        Ok(token)
    }

    fn route_inference(
        &self,
        data: &MessageEnvelope,
        meta: &BTreeMap<String, String>,
    ) -> Result<(ModelId, NodeId, String, String), IcError> {
        if data.kind() != Some(MessageKind::Data) {
            return Err(FabricError::InvalidMetadata("kind".into()).into());
        }
        let session = meta
            .get(KEY_SESSION)
            .filter(|s| !s.is_empty())
            .ok_or_else(|| FabricError::InvalidMetadata(KEY_SESSION.into()))?
            .clone();
        let capability = meta.get(KEY_CAPABILITY).map_or(DEFAULT_CAPABILITY, String::as_str).to_string();
        let domain = meta.get(KEY_DOMAIN).map(String::as_str);
        let models = self.registry.query_by_capability(&CapabilitySet::of(&[&capability]), domain)?;
        let hint = meta.get(KEY_LOCALITY).map(String::as_str).or_else(|| data.meta(KEY_LOCALITY));
        let mut first = None;
        for m in &models {
            for host in self.network.hosts_of(m) {
                if hint == Some(host.id.as_str()) {
                    return Ok((m.clone(), host.id.clone(), session, capability));
                }
                first.get_or_insert((m.clone(), host.id.clone()));
            }
        }
        let (m, h) = first.ok_or_else(|| IcError::NoEligibleModel(capability.clone()))?;
        Ok((m, h, session, capability))
    }

    /// Buffers `data` for the target model's next update cycle.
    pub fn participate_learning(&mut self, data: &MessageEnvelope, objective: &str) -> Result<TokenId, IcError> {
        self.fabric.advance();
        let actor = data.origin().unwrap_or("unknown").to_string();
        let target = self.learning_target(data, objective);
        let model = match target {
            Ok(m) => m,
            Err(e) => {
                self.fabric
                    .audit(AuditOp::ParticipateLearning, &actor, Some(data.id), None, Outcome::error(e.code()), None);
                return Err(e);
            }
        };
        let token = self.new_token(&format!("registry/{model}"), &actor, Some(model.clone()));
        let contributor = NodeId::new(actor.clone()).unwrap_or_else(|_| sys(SYSTEM));
        self.registry.contribute(
            &model,
            Contribution {
                token,
                contributor,
                objective: objective.to_string(),
                payload: data.payload.clone(),
            },
        )?;
        self.fabric.audit(
            AuditOp::ParticipateLearning,
            &actor,
            Some(data.id),
            Some(model),
            Outcome::Ok,
            Some(token.to_string()),
        );
        Ok(token)
    }

    fn learning_target(&self, data: &MessageEnvelope, objective: &str) -> Result<ModelId, IcError> {
        if data.kind() != Some(MessageKind::Data) {
            return Err(FabricError::InvalidMetadata("kind".into()).into());
        }
        if objective.trim().is_empty() {
            return Err(IcError::EmptyObjective);
        }
        if let Some(named) = data.meta(KEY_MODEL) {
            return self
                .registry
                .latest_by_name(named)
                .map(|d| d.model_id.clone())
                .ok_or_else(|| IcError::NoEligibleModel(named.to_string()));
        }
        self.registry
            .query_by_capability(&CapabilitySet::of(&[LEARNING_CAPABILITY]), None)?
            .into_iter()
            .next()
            .ok_or_else(|| IcError::NoEligibleModel(LEARNING_CAPABILITY.into()))
    }

    fn publish_model_update(&mut self, id: &ModelId, version: Version) -> Result<Published, IcError> {
        let topic = format!("registry/{id}");
        self.fabric.ensure_shared(&topic);
        let msg = Outgoing::new(topic, MessageKind::ModelUpdate, &format!("{id}@{version}"), REGISTRY)
            .meta(KEY_MODEL, id.as_str())
            .meta(KEY_VERSION, version.to_string())
            .payload(version.to_string());
        Ok(self.fabric.publish(msg)?)
    }

    pub fn register_model(&mut self, d: ModelDescriptor) -> Result<ModelId, IcError> {
        let v = d.version;
        let id = self.registry.insert(d)?;
        self.publish_model_update(&id, v)?;
        Ok(id)
    }

    pub fn bump_model(&mut self, id: &ModelId, part: VersionPart) -> Result<Version, IcError> {
        let v = self.registry.bump_version(id, part)?;
        self.publish_model_update(id, v)?;
        Ok(v)
    }

    /// Runs node handlers, model hosts, learning cycles and the broker until quiescent.
    pub fn pump(&mut self) -> Result<(), IcError> {
        loop {
            let mut progressed = self.pump_control();
            progressed |= self.pump_hosts()?;
            progressed |= self.pump_learning()?;
            progressed |= broker::pump_plans(self)?;
            if !progressed {
                return Ok(());
            }
        }
    }

    fn pump_control(&mut self) -> bool {
        let mut any = false;
        let handlers: Vec<(NodeId, NodeSubs)> = self.handlers.iter().map(|(k, v)| (k.clone(), *v)).collect();
        for (node, subs) in handlers {
            for d in self.fabric.drain_subscription(&node, subs.control) {
                any = true;
                let env = d.envelope;
                let (Some(knob), Some(value)) = (env.meta(KEY_KNOB), env.meta(KEY_VALUE).and_then(|v| v.parse::<Rational>().ok())) else {
                    self.fabric.note(node.as_str(), format!("ignored control {}", env.id));
                    continue;
                };
                let knob = knob.to_string();
                let applied = self.network.get_mut(&node).map(|n| n.set_knob(&knob, value));
                let text = match applied {
                    Some(Ok(())) => format!("applied {knob}={value} from {}", env.id),
                    Some(Err(e)) => format!("refused {knob}={value} from {}: {e}", env.id),
                    None => format!("no such node for {}", env.id),
                };
                self.fabric.note(node.as_str(), text);
            }
        }
        any
    }

    /// Model hosts answer pending inference requests in node-id order.
    pub fn pump_hosts(&mut self) -> Result<bool, IcError> {
        let mut any = false;
        let hosts: Vec<(NodeId, SubscriptionId)> = self
            .handlers
            .iter()
            .filter_map(|(k, v)| v.inference.map(|s| (k.clone(), s)))
            .collect();
        for (host, sub) in hosts {
            for d in self.fabric.drain_subscription(&host, sub) {
                any = true;
                self.answer(&host, &d.envelope)?;
            }
        }
        Ok(any)
    }

    fn answer(&mut self, host: &NodeId, req: &MessageEnvelope) -> Result<(), IcError> {
        let Some(token) = req.meta(KEY_TOKEN).and_then(TokenId::parse) else {
            self.fabric.note(host.as_str(), format!("request {} has no token", req.id));
            return Ok(());
        };
        let faulty = self.network.get(host).is_none_or(|n| n.faulty);
        let Some(entry) = self.tokens.get(&token) else {
            return Err(IcError::UnknownToken(token));
        };
        if !entry.token.is_pending() {
            return Ok(());
        }
        if faulty {
            self.fabric.note(host.as_str(), format!("{token} failed: model-error"));
            let entry = self.tokens.get_mut(&token).expect("present");
            let _ = entry.token.fail("model-error");
            return Ok(());
        }
        let model = req.meta(KEY_MODEL).unwrap_or("-").to_string();
        let version = self
            .registry
            .latest_by_name(&model)
            .map(|d| d.version.to_string())
            .unwrap_or_else(|| "?".into());
        let capability = req.meta(KEY_CAPABILITY).unwrap_or(DEFAULT_CAPABILITY);
        let body = format!("{capability}[{model}@{version}]({})", req.payload_str().unwrap_or("<binary>"));
        let topic = entry.token.result_topic.name().to_string();
        let msg = Outgoing::new(topic, MessageKind::InferenceResult, req.session().unwrap_or("-"), host.as_str())
            .meta(KEY_MODEL, model)
            .meta(KEY_TOKEN, token.to_string())
            .payload(body.clone());
        self.fabric.publish(msg)?;
        let entry = self.tokens.get_mut(&token).expect("present");
        let _ = entry.token.notify();
        entry.result = Some(body.into_bytes());
        Ok(())
    }

    fn pump_learning(&mut self) -> Result<bool, IcError> {
        let batches = self.registry.take_ready_batches();
        let any = !batches.is_empty();
        for (model, batch) in batches {
            let v = self.bump_model(&model, VersionPart::Minor)?;
            for c in batch {
                if let Some(e) = self.tokens.get_mut(&c.token) {
                    let _ = e.token.notify();
                    e.result = Some(v.to_string().into_bytes());
                }
            }
        }
        Ok(any)
    }

    /// Opens a session between the latest versions of `a` and `b` and runs it
    /// to a terminal phase, publishing each phase on `negotiation/<session>`.
    pub fn negotiate(&mut self, a: &ModelId, b: &ModelId, context: &str, opts: &NegotiateOptions) -> Result<SessionId, IcError> {
        let da = self.registry.latest(a).cloned().ok_or_else(|| RegistryError::UnknownModel(a.to_string()))?;
        let db = self.registry.latest(b).cloned().ok_or_else(|| RegistryError::UnknownModel(b.to_string()))?;
        self.next_session += 1;
        let sid = SessionId(self.next_session);
        let topic = format!("negotiation/{sid}");
        self.fabric.ensure_shared(&topic);
        let t = self.fabric.advance();
        let mut session = NegotiationSession::open(sid, da, db, context, t);
        self.neg_record(&session, "open", Ok(()))?;

        let t = self.fabric.advance();
        let r = session.intersect_capabilities(t).map(|_| ());
        self.neg_record(&session, "intersect-capabilities", r)?;
        if let (false, Some(metric)) = (session.is_terminal(), &opts.metric) {
            let t = self.fabric.advance();
            let r = session.negotiate_scale(metric, &self.units, t).map(|_| ());
            self.neg_record(&session, "negotiate-scale", r)?;
        }
        if !session.is_terminal() {
            let t = self.fabric.advance();
            let catalog = opts.adapters.then_some(&self.registry.schemas);
            let r = session.check_version_compat(catalog, t);
            let verdict = r.as_ref().ok().copied();
            self.neg_record(&session, "check-version", r.map(|_| ()))?;
            let t = self.fabric.advance();
            match verdict {
                Some(CompatVerdict::RequiresAdapter) => {
                    let r = session.build_adapter(&self.registry.schemas, t).map(|_| ());
                    self.neg_record(&session, "build-adapter", r)?;
                }
                Some(_) => {
                    let r = session.conclude(t).map(|_| ());
                    self.neg_record(&session, "conclude", r)?;
                }
                None => {}
            }
        }
        self.sessions.insert(sid, session);
        Ok(sid)
    }

    fn neg_record(&mut self, s: &NegotiationSession, step: &str, r: Result<(), NegotiationError>) -> Result<(), IcError> {
        let outcome = match &r {
            Ok(()) => Outcome::Ok,
            Err(e) => Outcome::error(e.code()),
        };
        let entry = s.transcript().last().expect("open writes a transcript entry");
        self.fabric.audit(
            AuditOp::Negotiate,
            SYSTEM,
            None,
            Some(s.peer_a.model_id.clone()),
            outcome,
            Some(format!("{} {step} -> {}", s.session_id, s.phase())),
        );
        let msg = Outgoing::new(format!("negotiation/{}", s.session_id), MessageKind::Control, &s.session_id.to_string(), SYSTEM)
            .meta(KEY_PHASE, s.phase().to_string())
            .payload(entry.detail.clone());
        self.fabric.publish(msg)?;
        Ok(())
    }

    pub fn session(&self, id: SessionId) -> Option<&NegotiationSession> {
        self.sessions.get(&id)
    }

    pub fn session_phase(&self, id: SessionId) -> Result<Phase, IcError> {
        self.sessions.get(&id).map(|s| s.phase()).ok_or(IcError::UnknownSession(id))
    }

    /// Sandbox run against a copy of the live network.
    pub fn sandbox(&mut self, p: &GuardedProgram, invariants: &[Invariant]) -> Result<SandboxVerdict, IcError> {
        self.fabric.advance();
        let v = self.guard.sandbox_run(p, invariants, &self.network);
        let outcome = match &v.reason {
            None => Outcome::Ok,
            Some(r) => Outcome::Error(r.to_string()),
        };
        let author = if is_segment(&p.author) { p.author.as_str() } else { GUARD };
        self.fabric.audit(AuditOp::Sandbox, author, None, None, outcome, Some(p.program_id.clone()));
        self.flush_feedback()?;
        Ok(v)
    }

    pub fn deploy(&mut self, p: &GuardedProgram, target: &NodeId) -> Result<DeploymentRecord, IcError> {
        self.fabric.advance();
        match self.guard.deploy(p, target, &mut self.network) {
            Ok(rec) => {
                self.fabric.audit(
                    AuditOp::Execute,
                    GUARD,
                    None,
                    None,
                    Outcome::Ok,
                    Some(format!("deploy {} {} on {target}", rec.deployment_id, p.program_id)),
                );
                Ok(rec)
            }
            Err(e) => {
                self.fabric.audit(AuditOp::Execute, GUARD, None, None, Outcome::error(e.code()), Some(format!("deploy {}", p.program_id)));
                Err(e.into())
            }
        }
    }

    pub fn rollback(&mut self, id: DeploymentId) -> Result<DeploymentRecord, IcError> {
        self.fabric.advance();
        let r = self.guard.rollback(id, &mut self.network);
        let outcome = match &r {
            Ok(_) => Outcome::Ok,
            Err(e) => Outcome::error(e.code()),
        };
        self.fabric.audit(AuditOp::Rollback, GUARD, None, None, outcome, Some(id.to_string()));
        Ok(r?)
    }

    pub fn consensus(&mut self, outputs: &[GuardedProgram]) -> Result<ConsensusResult, IcError> {
        self.fabric.advance();
        let r = self.guard.consensus_check(outputs)?;
        self.fabric.note(GUARD, format!("consensus agreement {}", r.agreement));
        self.flush_feedback()?;
        Ok(r)
    }

    pub fn hitl_resolve(&mut self, id: TicketId, decision: Decision, note: &str) -> Result<HitlTicket, IcError> {
        self.fabric.advance();
        let r = self.guard.resolve(id, decision, note);
        let outcome = match &r {
            Ok(_) => Outcome::Ok,
            Err(e) => Outcome::error(e.code()),
        };
        self.fabric.audit(AuditOp::HitlResolve, GUARD, None, None, outcome, Some(id.to_string()));
        Ok(r?)
    }

    fn flush_feedback(&mut self) -> Result<(), IcError> {
        for f in self.guard.take_feedback() {
            if !is_segment(&f.author) {
                self.fabric.note(GUARD, format!("feedback for unroutable author: {}", f.text));
                continue;
            }
            let topic = f.topic();
            self.fabric.ensure_shared(&topic);
            let msg = Outgoing::new(topic, MessageKind::Prompt, &f.program_id, GUARD).payload(f.text);
            self.fabric.publish(msg)?;
        }
        Ok(())
    }

    /// Tokens still waiting, in id order.
    pub fn pending_tokens(&self) -> Vec<TokenId> {
        self.tokens
            .values()
            .filter(|e| e.token.state() == TokenState::Pending)
            .map(|e| e.token.token)
            .collect()
    }

    pub fn result_topic(&self, id: TokenId) -> Option<&TopicId> {
        self.tokens.get(&id).map(|e| &e.token.result_topic)
    }
}
