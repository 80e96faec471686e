//! Streaming diagnostics engine for network-operation anomalies.
//!
//! Flow records are bucketed into fixed windows, turned into four feature
//! streams (IP count, IPX count, utilization, bytes/sec), normalized against
//! a learned per-time-slot baseline, pushed through a Takagi-Sugeno fuzzy
//! rule system, and mapped onto graded, rate-limited alerts (IGNORE / LOG /
//! EMAIL / SMS). A survey mode learns the segment's baseline and a
//! vertex-displacement tuner adapts the intensity membership functions to
//! the segment's normal pattern.

pub mod alerting;
pub mod baseline;
pub mod config;
pub mod fuzzy;
pub mod ingest;
pub mod pipeline;
pub mod report;
pub mod rulebook;
pub mod simgen;
pub mod tuner;
