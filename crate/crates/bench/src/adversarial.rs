//! Adaptive stream that forces any size-`s` counter summary strategy to
//! accumulate an error of `h` within `2^(h+1)` segments.
//!
//! Stage 0 feeds `2^h` segments of fresh values. Stage `j` feeds `2^(h-j)`
//! segments built from the values with the largest running undercount
//! (total fed minus total stored). A strategy storing `s` of every `2s`
//! values leaves half of each stage behind, so the undercount of the
//! survivors grows by one per stage.

use std::cmp::Reverse;
use std::collections::{BTreeSet, HashMap};

use ordered_float::OrderedFloat as Key;
use segsum::baselines::{truncation_summarize, usample_summarize};
use segsum::coop::{coop_freq_summarize, CoopConfig, FreqTracker};
use segsum::pps::pps_summarize;
use segsum::rng;
use segsum::{QueryFunction, Result, Segment, Summary, Value, ValueDomain};

/// A per-segment summarizer that sees segments in stream order.
pub trait CounterSummarizer {
    fn name(&self) -> &str;
    fn summarize(&mut self, index: u64, segment: &Segment) -> Result<Summary>;
}

pub struct TruncationCounter {
    pub size: usize,
}

impl CounterSummarizer for TruncationCounter {
    fn name(&self) -> &str {
        "truncation"
    }

    fn summarize(&mut self, _: u64, segment: &Segment) -> Result<Summary> {
        truncation_summarize(segment, self.size, QueryFunction::Frequency)
    }
}

pub struct CoopCounter {
    config: CoopConfig,
    tracker: FreqTracker,
}

impl CoopCounter {
    pub fn new(size: usize) -> Self {
        // One block covers the whole stream.
        let config = CoopConfig::new(size, u64::MAX / 2);
        CoopCounter {
            tracker: FreqTracker::new(config.max_interval),
            config,
        }
    }
}

impl CounterSummarizer for CoopCounter {
    fn name(&self) -> &str {
        "coop-freq"
    }

    fn summarize(&mut self, index: u64, segment: &Segment) -> Result<Summary> {
        coop_freq_summarize(segment, index, &self.config, &mut self.tracker)
    }
}

pub struct PpsCounter {
    pub size: usize,
    pub rng: rng::Rng,
}

impl CounterSummarizer for PpsCounter {
    fn name(&self) -> &str {
        "pps"
    }

    fn summarize(&mut self, _: u64, segment: &Segment) -> Result<Summary> {
        pps_summarize(segment, self.size, 0.0, &mut self.rng)
    }
}

pub struct USampleCounter {
    pub size: usize,
    pub rng: rng::Rng,
}

impl CounterSummarizer for USampleCounter {
    fn name(&self) -> &str {
        "usample"
    }

    fn summarize(&mut self, _: u64, segment: &Segment) -> Result<Summary> {
        usample_summarize(segment, self.size, &mut self.rng)
    }
}

/// Stores everything; ignores the size limit. The control case.
pub struct ExactCounter;

impl CounterSummarizer for ExactCounter {
    fn name(&self) -> &str {
        "exact"
    }

    fn summarize(&mut self, _: u64, segment: &Segment) -> Result<Summary> {
        Ok(Summary::exact(segment))
    }
}

/// Every size-`s` counter strategy shipped with the library.
pub fn builtin_counters(size: usize, seed: u64) -> Vec<Box<dyn CounterSummarizer>> {
    vec![
        Box::new(TruncationCounter { size }),
        Box::new(CoopCounter::new(size)),
        Box::new(PpsCounter {
            size,
            rng: rng::stream_rng(seed, 0),
        }),
        Box::new(USampleCounter {
            size,
            rng: rng::stream_rng(seed, 1),
        }),
    ]
}

#[derive(Clone, Debug, PartialEq)]
pub struct Transcript {
    pub strategy: String,
    /// Values fed in each segment.
    pub segments: Vec<Vec<Value>>,
    /// Largest `|fed - stored|` over all values after the last segment.
    pub max_error: f64,
    /// Largest `fed - stored` after the last segment.
    pub max_undercount: f64,
}

/// Runs the adaptive construction against one strategy.
pub fn gen_adversarial(strategy: &mut dyn CounterSummarizer, size: usize, h_target: u32) -> Result<Transcript> {
    let width = 2 * size.max(1);
    let total_segments = 1u64 << (h_target + 1);
    let mut under: HashMap<Value, f64> = HashMap::new();
    // Largest undercount first, ties by smaller id.
    let mut order: BTreeSet<(Reverse<Key<f64>>, Value)> = BTreeSet::new();
    let mut next_fresh = 0u64;
    let mut segments = Vec::new();
    let mut index = 0u64;
    let mut stage = 0u32;
    while index < total_segments {
        let in_stage = if stage <= h_target {
            1u64 << (h_target - stage)
        } else {
            1
        };
        let mut used: BTreeSet<Value> = BTreeSet::new();
        for _ in 0..in_stage {
            if index == total_segments {
                break;
            }
            let mut pick: Vec<Value> = Vec::with_capacity(width);
            if stage > 0 {
                for &(Reverse(Key(u)), v) in &order {
                    if pick.len() == width || u <= 0.0 {
                        break;
                    }
                    if !used.contains(&v) {
                        pick.push(v);
                    }
                }
            }
            while pick.len() < width {
                pick.push(Value::from_id(next_fresh));
                next_fresh += 1;
            }
            used.extend(pick.iter().copied());
            let seg = Segment::from_values(pick.iter().copied(), ValueDomain::Categorical);
            let summary = strategy.summarize(index, &seg)?;
            let mut delta: HashMap<Value, f64> = pick.iter().map(|&v| (v, 1.0)).collect();
            for &(v, w) in summary.entries() {
                *delta.entry(v).or_insert(0.0) -= w;
            }
            for (v, d) in delta {
                let u = under.entry(v).or_insert(0.0);
                order.remove(&(Reverse(Key(*u)), v));
                *u += d;
                order.insert((Reverse(Key(*u)), v));
            }
            segments.push(pick);
            index += 1;
        }
        stage += 1;
    }
    let max_error = under.values().fold(0.0f64, |m, u| m.max(u.abs()));
    let max_undercount = under.values().fold(0.0f64, |m, &u| m.max(u));
    Ok(Transcript {
        strategy: strategy.name().to_string(),
        segments,
        max_error,
        max_undercount,
    })
}
