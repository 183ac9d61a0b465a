//! Tick-driven world around an [`Interconnect`].

use alloc::format;
use alloc::string::ToString;
use alloc::vec::Vec;

use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use super::node::{NodeKind, NodeSpec, SimNode};
use crate::fabric::{MessageKind, Outgoing};
use crate::ids::NodeId;
use crate::interconnect::{IcError, Interconnect};
use crate::rational::Rational;

pub const TELEMETRY_SESSION: &str = "telemetry";

pub fn telemetry_topic(node: &NodeId) -> alloc::string::String {
    format!("telemetry/{node}/load")
}

pub struct World {
    pub ic: Interconnect,
    seed: u64,
    tick: u64,
    rng: ChaCha8Rng,
    /// Peak relative noise applied to published load samples.
    jitter: Option<Rational>,
    emitted: u64,
}

impl World {
    pub fn new(ic: Interconnect, seed: u64) -> Self {
        World {
            ic,
            seed,
            tick: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
            jitter: None,
            emitted: 0,
        }
    }

    pub fn with_jitter(mut self, amplitude: Rational) -> Self {
        self.jitter = Some(amplitude);
        self
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    /// Telemetry envelopes published since creation.
    pub fn emitted(&self) -> u64 {
        self.emitted
    }

    pub fn spawn_node(&mut self, spec: NodeSpec) -> Result<NodeId, IcError> {
        let node = SimNode::from_spec(spec)?;
        if node.kind == NodeKind::UeGen {
            self.ic.fabric.ensure_shared(&telemetry_topic(&node.id));
        }
        self.ic.add_node(node)
    }

    /// Runs `ticks` ticks; each one steps node queues in id order, publishes
    /// one load sample per generator, then pumps the interconnect.
    pub fn step(&mut self, ticks: u64) -> Result<u64, IcError> {
        for _ in 0..ticks {
            self.tick += 1;
            let mut samples = Vec::new();
            for n in self.ic.network.nodes_mut() {
                n.step_queue();
                if n.kind == NodeKind::UeGen {
                    if let Some(u) = n.utilization() {
                        samples.push((n.id.clone(), u));
                    }
                }
            }
            for (id, u) in samples {
                let value = self.noisy(u);
                let msg = Outgoing::new(telemetry_topic(&id), MessageKind::Data, TELEMETRY_SESSION, id.as_str())
                    .meta("tick", self.tick.to_string())
                    .payload(value.to_string());
                self.ic.publish(msg)?;
                self.emitted += 1;
            }
            self.ic.pump()?;
        }
        Ok(ticks)
    }

    fn noisy(&mut self, u: Rational) -> Rational {
        let Some(amp) = self.jitter else {
            return u;
        };
        let r = Rational::new(i128::from(self.rng.next_u32() % 2001) - 1000, 1000);
        u * (Rational::ONE + amp * r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fabric::SubscriptionRequest;

    fn q(s: &str) -> Rational {
        s.parse().unwrap()
    }

    fn world() -> World {
        World::new(Interconnect::default(), 7)
    }

    #[test]
    fn constant_generator() {
        let mut w = world();
        let id = w.spawn_node(NodeSpec::new("cell-1", NodeKind::UeGen).load(q("0.5"))).unwrap();
        let probe = w.ic.register_node("probe");
        w.ic.subscribe(SubscriptionRequest::durable("telemetry/**", &probe)).unwrap();
        assert_eq!(w.step(10).unwrap(), 10);
        let got = w.ic.drain(&probe);
        assert_eq!(got.len(), 10);
        assert!(got.iter().all(|d| d.envelope.payload_str() == Some("1/2") && d.envelope.origin() == Some(id.as_str())));
    }

    #[test]
    fn zero_step_publishes_nothing() {
        let mut w = world();
        w.spawn_node(NodeSpec::new("cell-1", NodeKind::UeGen).load(q("0.5"))).unwrap();
        let before = w.ic.fabric.journal().len();
        assert_eq!(w.step(0).unwrap(), 0);
        assert_eq!(w.ic.fabric.journal().len(), before);
        assert_eq!(w.emitted(), 0);
    }

    #[test]
    fn duplicate_node() {
        let mut w = world();
        w.spawn_node(NodeSpec::new("cell-1", NodeKind::UeGen)).unwrap();
        let e = w.spawn_node(NodeSpec::new("cell-1", NodeKind::Ric)).unwrap_err();
        assert_eq!(e.code(), "duplicate-node");
    }

    #[test]
    fn jitter_is_seeded() {
        let run = |seed| {
            let mut w = World::new(Interconnect::default(), seed).with_jitter(q("0.1"));
            w.spawn_node(NodeSpec::new("cell-1", NodeKind::UeGen).load(q("0.5"))).unwrap();
            let probe = w.ic.register_node("probe");
            w.ic.subscribe(SubscriptionRequest::durable("telemetry/**", &probe)).unwrap();
            w.step(5).unwrap();
            w.ic.drain(&probe).into_iter().map(|d| d.envelope.payload).collect::<Vec<_>>()
        };
        assert_eq!(run(1), run(1));
        assert_ne!(run(1), run(2));
    }
}
