//! Per-segment frequency and quantile summaries built to be combined.
//!
//! Data is split into atomic segments (time buckets or cube cells), each
//! segment gets a small summary, and queries add up summary estimates.
//! Interval workloads use cooperative summaries that cancel each other's
//! accumulated error; cube workloads use PPS samples whose sizes and biases
//! are tuned for a query workload.

// `!(x >= 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod coop;
pub mod cube;
pub mod error;
pub mod ingest;
pub mod model;
pub mod pps;
pub mod query;
pub mod rng;
pub mod summarize;

pub use error::{Error, Result};
pub use model::{QueryFunction, Record, Segment, Summary, SummaryMethod, Value, ValueDomain, WeightedStore};
