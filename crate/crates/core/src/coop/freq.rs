use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap, HashSet};

use ordered_float::OrderedFloat;

use super::{CoopConfig, ThresholdMode};
use crate::error::Result;
use crate::model::{Segment, Summary, SummaryMethod, Value};
use crate::pps::calc_t;

/// Running prefix undercount `eps(x) = f_Pre(x) - f_hat_Pre(x)` per value.
///
/// Only values with positive error sit in the priority order, which is
/// all the greedy compensation step ever looks at.
#[derive(Clone, Debug)]
pub struct FreqTracker {
    max_interval: u64,
    block: Option<u64>,
    errors: HashMap<Value, f64>,
    order: BTreeSet<(Reverse<OrderedFloat<f64>>, Value)>,
}

impl FreqTracker {
    pub fn new(max_interval: u64) -> Self {
        FreqTracker {
            max_interval: max_interval.max(1),
            block: None,
            errors: HashMap::new(),
            order: BTreeSet::new(),
        }
    }

    /// Positions the tracker at segment `index`, clearing it if the index
    /// starts a new block.
    pub fn enter(&mut self, index: u64) {
        let block = index / self.max_interval;
        if self.block != Some(block) {
            self.reset();
            self.block = Some(block);
        }
    }

    pub fn reset(&mut self) {
        self.errors.clear();
        self.order.clear();
    }

    pub fn error(&self, x: Value) -> f64 {
        self.errors.get(&x).copied().unwrap_or(0.0)
    }

    /// Every value seen in the current block with its error.
    pub fn errors(&self) -> impl Iterator<Item = (Value, f64)> + '_ {
        self.errors.iter().map(|(&v, &e)| (v, e))
    }

    pub fn universe_len(&self) -> usize {
        self.errors.len()
    }

    pub fn max_abs_error(&self) -> f64 {
        self.errors.values().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// `sum_x exp(alpha * eps(x))` over the current universe.
    pub fn loss(&self, alpha: f64) -> f64 {
        self.errors.values().map(|e| (alpha * e).exp()).sum()
    }

    fn add(&mut self, x: Value, delta: f64) {
        let old = self.errors.entry(x).or_insert(0.0);
        if *old > 0.0 {
            self.order.remove(&(Reverse(OrderedFloat(*old)), x));
        }
        *old += delta;
        if *old > 0.0 {
            self.order.insert((Reverse(OrderedFloat(*old)), x));
        }
    }

    /// Adds the segment's exact counts and subtracts the summary's estimates.
    pub fn advance(&mut self, segment: &Segment, summary: &Summary) {
        for &(x, c) in segment.entries() {
            self.add(x, c as f64);
        }
        for &(x, w) in summary.entries() {
            self.add(x, -w);
        }
    }
}

/// Builds a cooperative frequency summary for the segment at `index`.
pub fn coop_freq_summarize(
    segment: &Segment,
    index: u64,
    config: &CoopConfig,
    tracker: &mut FreqTracker,
) -> Result<Summary> {
    config.validate()?;
    tracker.enter(index);
    let s = config.size;
    let h = match config.threshold {
        ThresholdMode::Naive => segment.total() as f64 / s as f64,
        ThresholdMode::CalcT => calc_t(segment, s)?,
    };

    for &(x, c) in segment.entries() {
        tracker.add(x, c as f64);
    }

    let mut entries = Vec::with_capacity(s);
    let mut heavy = HashSet::new();
    if segment.total() > 0 {
        for &(x, c) in segment.entries() {
            if c as f64 >= h && entries.len() < s {
                entries.push((x, c as f64));
                heavy.insert(x);
            }
        }
    }
    for &(x, w) in &entries {
        tracker.add(x, -w);
    }

    let cap = config.slack * h;
    let mut picks = Vec::new();
    for &(Reverse(OrderedFloat(eps)), x) in &tracker.order {
        if entries.len() + picks.len() >= s || cap <= 0.0 {
            break;
        }
        if heavy.contains(&x) {
            continue;
        }
        picks.push((x, cap.min(eps)));
    }
    for &(x, w) in &picks {
        tracker.add(x, -w);
    }
    entries.extend(picks);

    Ok(Summary::new(entries, s, SummaryMethod::CoopFreq, segment.domain()).with_threshold(h))
}
