//! Deterministic simulated network and scenario runner.

pub mod node;
pub mod scenarios;
pub mod trace;
pub mod world;

pub use node::{KnobError, KnobSpec, LoadModel, NetworkState, NodeKind, NodeSpec, SimNode, ADMISSION_RATE, RATE_LIMIT};
pub use world::{telemetry_topic, World};
pub use scenarios::{run_scenario, Check, ScenarioError, ScenarioRun, SCENARIOS};
