//! Experiment harness for the batch container auction: seeded workloads,
//! batch versus FCFS runs, batch-length and price-spread sweeps, and tidy
//! CSV or JSON result tables.

// `!(x > 0.0)` is the NaN-rejecting form used for validation throughout.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod output;
