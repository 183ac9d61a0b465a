#![cfg_attr(not(test), no_std)]

extern crate alloc;

pub mod broker;
pub mod fabric;
pub mod guard;
pub mod hash;
pub mod ids;
pub mod interconnect;
pub mod mapek;
pub mod negotiation;
pub mod rational;
pub mod registry;
pub mod simnet;

pub use ids::{MessageId, ModelId, NodeId};
pub use interconnect::{IcError, Interconnect};
pub use rational::Rational;
