//! Cooperative summaries for interval queries.
//!
//! Summaries inside one block of `k_T` consecutive segments share a prefix
//! error tracker: the signed difference between the true and estimated
//! frequency (or rank) of every value, accumulated since the block start.
//! Each new summary spends its slots where that accumulated error is worst,
//! so errors of neighbouring summaries cancel instead of adding up.

mod freq;
mod quant;

pub use freq::{coop_freq_summarize, FreqTracker};
pub use quant::{coop_quant_summarize, RankTracker};

use crate::error::{Error, Result};
use crate::model::{Segment, Value};

/// How the heavy-hitter threshold `h` of a frequency summary is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ThresholdMode {
    /// `h = |D| / s`.
    Naive,
    /// Minimal threshold after exact-storing local heavy hitters.
    CalcT,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CoopConfig {
    pub size: usize,
    /// Local accuracy slack `r >= 1`: each summary may be off by `r * h`.
    pub slack: f64,
    /// Block length `k_T`; trackers reset at multiples of it.
    pub max_interval: u64,
    /// Upper bound on segment weight used to scale the quantile loss.
    /// `None` takes twice the weight of the first non-empty segment.
    pub max_segment_weight: Option<f64>,
    pub threshold: ThresholdMode,
}

impl CoopConfig {
    pub fn new(size: usize, max_interval: u64) -> Self {
        CoopConfig {
            size,
            slack: 1.0,
            max_interval,
            max_segment_weight: None,
            threshold: ThresholdMode::CalcT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.size == 0 {
            return Err(Error::config("summary size must be at least 1"));
        }
        if !(self.slack >= 1.0) {
            return Err(Error::config("slack r must be >= 1"));
        }
        if self.max_interval == 0 {
            return Err(Error::config("k_T must be at least 1"));
        }
        if let Some(n) = self.max_segment_weight {
            if !(n > 0.0) {
                return Err(Error::config("n_max must be positive"));
            }
        }
        Ok(())
    }

    /// Cost scale `alpha = s / (sqrt(k_T) * n_max)` for the quantile loss.
    pub fn quant_alpha(&self, n_max: f64) -> f64 {
        self.size as f64 / ((self.max_interval as f64).sqrt() * n_max)
    }
}

/// Contiguous run of sorted values holding exactly `|D| / s` weight.
#[derive(Clone, Debug, PartialEq)]
pub struct Chunk {
    /// `(value, weight inside this chunk)`, sorted by value.
    pub entries: Vec<(Value, f64)>,
}

impl Chunk {
    pub fn weight(&self) -> f64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn min(&self) -> Option<Value> {
        self.entries.first().map(|e| e.0)
    }

    pub fn max(&self) -> Option<Value> {
        self.entries.last().map(|e| e.0)
    }
}

/// Splits a segment into `s` chunks of equal weight in value order. A value
/// whose count straddles a boundary contributes its overlap to both chunks.
/// Empty segments yield no chunks.
pub fn partition_sorted_chunks(segment: &Segment, s: usize) -> Result<Vec<Chunk>> {
    if s == 0 {
        return Err(Error::config("chunk count must be at least 1"));
    }
    if segment.is_empty() {
        return Ok(Vec::new());
    }
    // Work in units of 1/s so every boundary is an integer.
    let cap = segment.total() as u128;
    let scale = s as f64;
    let mut chunks = Vec::with_capacity(s);
    let mut current = Vec::new();
    let mut room = cap;
    for &(v, c) in segment.entries() {
        let mut left = c as u128 * s as u128;
        while left > 0 {
            let take = left.min(room);
            current.push((v, take as f64 / scale));
            left -= take;
            room -= take;
            if room == 0 {
                chunks.push(Chunk {
                    entries: std::mem::take(&mut current),
                });
                room = cap;
            }
        }
    }
    debug_assert!(current.is_empty());
    debug_assert_eq!(chunks.len(), s);
    Ok(chunks)
}
