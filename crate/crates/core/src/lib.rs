//! Cycle-accurate simulator of a multi-link AXI network-on-chip.

pub mod cli;
pub mod config;
pub mod endpoints;
pub mod engine;
pub mod fabric;
pub mod metrics;
pub mod ni;
pub mod protocol;
pub mod router;
pub mod workload;
