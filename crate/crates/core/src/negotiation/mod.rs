//! Pairwise interoperability protocol between model-bearing nodes.
//!
//! A session walks `Opened → CapabilitiesExchanged → [ScaleAligned] →
//! VersionChecked → Agreed`, and may drop to `Failed` from any phase. Every
//! transition appends to an ordered transcript.

pub mod adapter;
pub mod scale;

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use core::fmt;

pub use adapter::{synthesize, AdapterSpec, SynthesisError};
pub use scale::{canonical_unit, AffineTransform, CanonicalScale, ScaleDecl, UnitTable};

use crate::ids::{ModelId, SessionId};
use crate::registry::{Capability, CapabilitySet, ModelDescriptor, SchemaCatalog};

#[cfg(feature = "serde")]
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum Phase {
    Opened,
    CapabilitiesExchanged,
    ScaleAligned,
    VersionChecked,
    Agreed,
    Failed,
}

impl fmt::Display for Phase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub enum CompatVerdict {
    Compatible,
    RequiresAdapter,
    Incompatible,
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct TranscriptEntry {
    pub phase: Phase,
    pub logical_time: u64,
    pub detail: String,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum NegotiationError {
    #[error("operation requires phase {expected}, session is {actual}")]
    WrongPhase { expected: Phase, actual: Phase },
    #[error("negotiation failed: peers share no capability")]
    EmptyIntersection,
    #[error("peer `{peer}` declares no usable scale for `{metric}`")]
    MissingScaleDeclaration { peer: ModelId, metric: String },
    #[error("units `{0}` and `{1}` are not convertible")]
    NonOverlappingSemantics(String, String),
    #[error("adapter synthesis failed: {0}")]
    AdapterSynthesisFailed(String),
}

impl NegotiationError {
    pub fn code(&self) -> &'static str {
        match self {
            NegotiationError::WrongPhase { .. } => "wrong-phase",
            NegotiationError::EmptyIntersection => "empty-intersection",
            NegotiationError::MissingScaleDeclaration { .. } => "missing-scale",
            NegotiationError::NonOverlappingSemantics(..) => "non-overlapping-semantics",
            NegotiationError::AdapterSynthesisFailed(_) => "adapter-synthesis-failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(Serialize, Deserialize))]
pub struct NegotiationSession {
    pub session_id: SessionId,
    pub peer_a: ModelDescriptor,
    pub peer_b: ModelDescriptor,
    pub context: String,
    phase: Phase,
    pub agreed_capabilities: CapabilitySet,
    pub agreed_scale: Option<CanonicalScale>,
    pub verdict: Option<CompatVerdict>,
    pub adapter: Option<AdapterSpec>,
    transcript: Vec<TranscriptEntry>,
}

impl NegotiationSession {
    pub fn open(session_id: SessionId, a: ModelDescriptor, b: ModelDescriptor, context: &str, now: u64) -> Self {
        let detail = format!(
            "context={context}; peers={}@{},{}@{}",
            a.model_id, a.version, b.model_id, b.version
        );
        let mut s = NegotiationSession {
            session_id,
            peer_a: a,
            peer_b: b,
            context: context.to_string(),
            phase: Phase::Opened,
            agreed_capabilities: CapabilitySet::new(),
            agreed_scale: None,
            verdict: None,
            adapter: None,
            transcript: Vec::new(),
        };
        s.push(Phase::Opened, now, detail);
        s
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn transcript(&self) -> &[TranscriptEntry] {
        &self.transcript
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.phase, Phase::Agreed | Phase::Failed)
    }

    fn push(&mut self, phase: Phase, now: u64, detail: String) {
        debug_assert!(phase >= self.phase || phase == Phase::Failed);
        self.phase = phase;
        self.transcript.push(TranscriptEntry {
            phase,
            logical_time: now,
            detail,
        });
    }

    fn fail(&mut self, now: u64, err: NegotiationError) -> NegotiationError {
        self.push(Phase::Failed, now, format!("{}: {}", err.code(), err));
        err
    }

    fn expect(&self, expected: Phase) -> Result<(), NegotiationError> {
        if self.phase == expected {
            Ok(())
        } else {
            Err(NegotiationError::WrongPhase {
                expected,
                actual: self.phase,
            })
        }
    }

    /// Peer whose parameters win ties; chosen symmetrically.
    fn primary(&self) -> (&ModelDescriptor, &ModelDescriptor) {
        let ka = (&self.peer_a.model_id, self.peer_a.version);
        let kb = (&self.peer_b.model_id, self.peer_b.version);
        if ka <= kb {
            (&self.peer_a, &self.peer_b)
        } else {
            (&self.peer_b, &self.peer_a)
        }
    }

    /// Capability equality is by name; differing params are noted, not failed on.
    pub fn intersect_capabilities(&mut self, now: u64) -> Result<&CapabilitySet, NegotiationError> {
        self.expect(Phase::Opened)?;
        let (p, q) = self.primary();
        let mut agreed = CapabilitySet::new();
        let mut mismatched = Vec::new();
        for cap in p.capabilities.iter() {
            if let Some(other) = q.capabilities.get(&cap.name) {
                if other.params != cap.params {
                    mismatched.push(cap.name.clone());
                }
                agreed.insert(Capability {
                    name: cap.name.clone(),
                    params: cap.params.clone(),
                });
            }
        }
        if agreed.is_empty() {
            return Err(self.fail(now, NegotiationError::EmptyIntersection));
        }
        let names: Vec<&str> = agreed.names().collect();
        let mut detail = format!("agreed={}", names.join(","));
        if !mismatched.is_empty() {
            detail.push_str(&format!("; param-mismatch={}", mismatched.join(",")));
        }
        self.agreed_capabilities = agreed;
        self.push(Phase::CapabilitiesExchanged, now, detail);
        Ok(&self.agreed_capabilities)
    }

    pub fn negotiate_scale(&mut self, metric: &str, units: &UnitTable, now: u64) -> Result<&CanonicalScale, NegotiationError> {
        self.expect(Phase::CapabilitiesExchanged)?;
        let decl = |d: &ModelDescriptor| {
            d.capabilities
                .get(metric)
                .and_then(|c| c.params.get("scale"))
                .and_then(|s| ScaleDecl::parse(s))
        };
        let da = match decl(&self.peer_a) {
            Some(d) => d,
            None => {
                let e = NegotiationError::MissingScaleDeclaration {
                    peer: self.peer_a.model_id.clone(),
                    metric: metric.to_string(),
                };
                return Err(self.fail(now, e));
            }
        };
        let db = match decl(&self.peer_b) {
            Some(d) => d,
            None => {
                let e = NegotiationError::MissingScaleDeclaration {
                    peer: self.peer_b.model_id.clone(),
                    metric: metric.to_string(),
                };
                return Err(self.fail(now, e));
            }
        };
        let aligned = CanonicalScale::align(
            metric,
            units,
            (&self.peer_a.model_id, &da),
            (&self.peer_b.model_id, &db),
        );
        let Some(c) = aligned else {
            let e = NegotiationError::NonOverlappingSemantics(da.unit, db.unit);
            return Err(self.fail(now, e));
        };
        let mut detail = format!("metric={metric}; unit={}; range={}..{}", c.unit, c.lo, c.hi);
        for (peer, t) in &c.conversions {
            detail.push_str(&format!("; {peer}: a={} b={}", t.a, t.b));
        }
        self.agreed_scale = Some(c);
        self.push(Phase::ScaleAligned, now, detail);
        Ok(self.agreed_scale.as_ref().expect("just set"))
    }

    fn older_newer(&self) -> (&ModelDescriptor, &ModelDescriptor) {
        if self.peer_a.version <= self.peer_b.version {
            (&self.peer_a, &self.peer_b)
        } else {
            (&self.peer_b, &self.peer_a)
        }
    }

    /// `catalog = None` disables adapters, so any major mismatch is incompatible.
    pub fn check_version_compat(&mut self, catalog: Option<&SchemaCatalog>, now: u64) -> Result<CompatVerdict, NegotiationError> {
        if !matches!(self.phase, Phase::CapabilitiesExchanged | Phase::ScaleAligned) {
            return Err(NegotiationError::WrongPhase {
                expected: Phase::ScaleAligned,
                actual: self.phase,
            });
        }
        let (old, new) = self.older_newer();
        let verdict = if old.version.major == new.version.major {
            CompatVerdict::Compatible
        } else if catalog
            .and_then(|c| c.chain(&old.model_type, old.version.major, new.version.major))
            .is_some()
        {
            CompatVerdict::RequiresAdapter
        } else {
            CompatVerdict::Incompatible
        };
        let detail = format!("verdict={verdict:?}; from={} to={}", old.version, new.version);
        self.verdict = Some(verdict);
        self.push(Phase::VersionChecked, now, detail);
        Ok(verdict)
    }

    pub fn build_adapter(&mut self, catalog: &SchemaCatalog, now: u64) -> Result<&AdapterSpec, NegotiationError> {
        self.expect(Phase::VersionChecked)?;
        if self.verdict != Some(CompatVerdict::RequiresAdapter) {
            return Err(NegotiationError::AdapterSynthesisFailed("verdict does not require an adapter".into()));
        }
        let (old, new) = self.older_newer();
        let (from, to, ty) = (old.version, new.version, old.model_type.clone());
        let steps = catalog.chain(&ty, from.major, to.major);
        let result = match steps {
            Some(steps) => synthesize(from, to, &steps).map_err(|e| NegotiationError::AdapterSynthesisFailed(e.to_string())),
            None => Err(NegotiationError::AdapterSynthesisFailed("no mapping chain".into())),
        };
        match result {
            Ok(spec) => {
                let detail = format!(
                    "adapter {}->{}; renames={}; defaults={}; dropped={}",
                    spec.from_version,
                    spec.to_version,
                    spec.field_renames.len(),
                    spec.defaults_for_new_fields.len(),
                    spec.dropped_fields.len()
                );
                self.adapter = Some(spec);
                self.push(Phase::Agreed, now, detail);
                Ok(self.adapter.as_ref().expect("just set"))
            }
            Err(e) => Err(self.fail(now, e)),
        }
    }

    /// Closes a version-checked session that needs no adapter.
    pub fn conclude(&mut self, now: u64) -> Result<Phase, NegotiationError> {
        self.expect(Phase::VersionChecked)?;
        match self.verdict {
            Some(CompatVerdict::Compatible) => {
                let names: Vec<&str> = self.agreed_capabilities.names().collect();
                let detail = format!("agreed on {}", names.join(","));
                self.push(Phase::Agreed, now, detail);
            }
            Some(CompatVerdict::Incompatible) => {
                self.push(Phase::Failed, now, "incompatible versions".to_string());
            }
            _ => {
                return Err(NegotiationError::WrongPhase {
                    expected: Phase::Agreed,
                    actual: self.phase,
                })
            }
        }
        Ok(self.phase)
    }
}

/// Options for running a session end to end.
#[derive(Debug, Clone, Default)]
pub struct NegotiationPlan<'a> {
    pub metric: Option<String>,
    pub catalog: Option<&'a SchemaCatalog>,
}

/// Drives a session to a terminal phase; `clock` supplies logical times.
pub fn run_to_completion(
    session: &mut NegotiationSession,
    plan: &NegotiationPlan<'_>,
    units: &UnitTable,
    clock: &mut dyn FnMut() -> u64,
) -> Phase {
    if session.phase() == Phase::Opened && session.intersect_capabilities(clock()).is_err() {
        return session.phase();
    }
    if let Some(metric) = &plan.metric {
        if session.negotiate_scale(metric, units, clock()).is_err() {
            return session.phase();
        }
    }
    match session.check_version_compat(plan.catalog, clock()) {
        Ok(CompatVerdict::RequiresAdapter) => {
            let catalog = plan.catalog.expect("adapter verdict implies a catalog");
            let _ = session.build_adapter(catalog, clock());
        }
        Ok(_) => {
            let _ = session.conclude(clock());
        }
        Err(_) => {}
    }
    session.phase()
}
