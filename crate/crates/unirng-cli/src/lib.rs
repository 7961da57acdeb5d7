//! Harness behind the `unirng` binary: reproducible reports, uniformity
//! audits (exact and sampled), asymptotic experiments, and the self-test
//! suite. The binary itself is a thin argument-parsing layer over these
//! modules, which keeps every behavior unit-testable.

pub mod asymptotics;
pub mod report;
pub mod selftest;
pub mod stats;
pub mod uniformity;
