//! Property checks shared by this crate's suites and the acceptance harness.
#![allow(dead_code)]

pub mod guard;
pub mod negotiation;
pub mod pubsub;
