//! Std companion to `interconnect-core`: file formats, exports and host glue.

pub mod auditlog;
pub mod descriptor;
pub mod export;
pub mod shared;
pub mod tickets;
pub mod tracefile;

pub use interconnect_core as core;
