//! Evaluation harness: synthetic data, error measurement, interval and
//! cube benchmarks, and the adversarial lower-bound stream.

pub mod adversarial;
pub mod cube;
pub mod gen;
pub mod interval;
pub mod measure;
pub mod report;
pub mod suite;
