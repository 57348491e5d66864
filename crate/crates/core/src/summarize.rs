//! Whole-store summarization for interval data.

use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{truncation_summarize, usample_summarize};
use crate::coop::{coop_freq_summarize, coop_quant_summarize, CoopConfig, FreqTracker, RankTracker};
use crate::error::{Error, Result};
use crate::ingest::{Layout, SegmentStore, Store, SummaryStore};
use crate::model::{QueryFunction, Segment, Summary};
use crate::pps::pps_summarize;
use crate::rng;

/// Per-segment summarizers for interval stores.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum IntervalMethod {
    /// Cooperative summaries: frequency or quantile flavour by query kind.
    Coop,
    Pps,
    Truncation,
    USample,
    Exact,
}

impl IntervalMethod {
    pub const ALL: [IntervalMethod; 5] = [
        IntervalMethod::Coop,
        IntervalMethod::Pps,
        IntervalMethod::Truncation,
        IntervalMethod::USample,
        IntervalMethod::Exact,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            IntervalMethod::Coop => "coop",
            IntervalMethod::Pps => "pps",
            IntervalMethod::Truncation => "truncation",
            IntervalMethod::USample => "usample",
            IntervalMethod::Exact => "exact",
        }
    }
}

impl FromStr for IntervalMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "coop" | "storyboard" | "coop-freq" | "coop-quant" => Ok(IntervalMethod::Coop),
            "pps" => Ok(IntervalMethod::Pps),
            "truncation" => Ok(IntervalMethod::Truncation),
            "usample" => Ok(IntervalMethod::USample),
            "exact" => Ok(IntervalMethod::Exact),
            other => Err(Error::config(format!("unknown interval method `{other}`"))),
        }
    }
}

/// Summarizes `segments`, where `segments[i]` is absolute segment
/// `first + i`. Cooperative summaries run block by block with one tracker
/// per block; blocks and all other methods run in parallel. Randomized
/// methods draw from a stream keyed by the absolute segment index.
pub fn summarize_segments(
    segments: &[Segment],
    first: u64,
    method: IntervalMethod,
    config: &CoopConfig,
    kind: QueryFunction,
    seed: u64,
) -> Result<Vec<Summary>> {
    config.validate()?;
    let s = config.size;
    if method != IntervalMethod::Coop {
        return segments
            .par_iter()
            .enumerate()
            .map(|(i, seg)| {
                let index = first + i as u64;
                match method {
                    IntervalMethod::Pps => pps_summarize(seg, s, 0.0, &mut rng::stream_rng(seed, index)),
                    IntervalMethod::Truncation => truncation_summarize(seg, s, kind),
                    IntervalMethod::USample => usample_summarize(seg, s, &mut rng::stream_rng(seed, index)),
                    IntervalMethod::Exact => Ok(Summary::exact(seg)),
                    IntervalMethod::Coop => unreachable!(),
                }
            })
            .collect();
    }
    let kt = config.max_interval;
    let end = first + segments.len() as u64;
    let blocks: Vec<(u64, u64)> = (first / kt..end.div_ceil(kt))
        .map(|b| ((b * kt).max(first), ((b + 1) * kt).min(end)))
        .collect();
    let parts = blocks
        .par_iter()
        .map(|&(a, b)| {
            let slice = &segments[(a - first) as usize..(b - first) as usize];
            match kind {
                QueryFunction::Frequency => {
                    let mut tracker = FreqTracker::new(kt);
                    slice
                        .iter()
                        .zip(a..)
                        .map(|(seg, i)| coop_freq_summarize(seg, i, config, &mut tracker))
                        .collect::<Result<Vec<_>>>()
                }
                QueryFunction::Rank => {
                    let mut tracker = RankTracker::new(kt);
                    slice
                        .iter()
                        .zip(a..)
                        .map(|(seg, i)| coop_quant_summarize(seg, i, config, &mut tracker))
                        .collect::<Result<Vec<_>>>()
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(parts.into_iter().flatten().collect())
}

/// Summarizes every segment of an interval store. The store's `k_T` and
/// summary size override the ones in `config`.
pub fn summarize_interval_store(
    store: &SegmentStore,
    method: IntervalMethod,
    config: &CoopConfig,
    seed: u64,
) -> Result<SummaryStore> {
    let Layout::Interval { first, items } = &store.layout else {
        return Err(Error::config("interval summarization needs an interval store"));
    };
    let config = CoopConfig {
        size: store.config.summary_size,
        max_interval: store.config.max_interval,
        ..config.clone()
    };
    let summaries = summarize_segments(items, *first, method, &config, store.config.query_kind, seed)?;
    let mut meta = store.meta.clone();
    meta.insert("method".into(), method.as_str().into());
    meta.insert("seed".into(), seed.to_string());
    meta.insert("slack".into(), config.slack.to_string());
    Ok(Store {
        config: store.config.clone(),
        dictionaries: store.dictionaries.clone(),
        layout: Layout::Interval {
            first: *first,
            items: summaries,
        },
        meta,
    })
}
