//! Reference summarizers: truncation, uniform samples, count-min sketches,
//! the dyadic hierarchy, and size allocations for uniform samples.

mod cms;
mod hierarchy;

pub use cms::{cms_dims_for_space, CountMin};
pub use hierarchy::{hierarchy_plan, HierarchyStore};

use rand::Rng;

use crate::coop::partition_sorted_chunks;
use crate::cube::allocate_by_weights;
use crate::error::{Error, Result};
use crate::model::{QueryFunction, Segment, Summary, SummaryMethod, Value};

/// The best single-segment summary of size `s`: the top `s` exact counts
/// for frequencies, or `s` evenly spaced values of weight `|D| / s` for
/// ranks. Segments with at most `s` distinct values are kept exactly.
pub fn truncation_summarize(segment: &Segment, s: usize, kind: QueryFunction) -> Result<Summary> {
    if s == 0 {
        return Err(Error::config("summary size must be at least 1"));
    }
    let domain = segment.domain();
    if segment.len() <= s {
        let entries = segment.entries().iter().map(|&(v, c)| (v, c as f64)).collect();
        return Ok(Summary::new(entries, s, SummaryMethod::Truncation, domain));
    }
    let entries = match kind {
        QueryFunction::Frequency => {
            let mut by_count: Vec<(Value, u64)> = segment.entries().to_vec();
            by_count.sort_by(|a, b| b.1.cmp(&a.1).then(a.0.cmp(&b.0)));
            by_count.truncate(s);
            by_count.into_iter().map(|(v, c)| (v, c as f64)).collect()
        }
        QueryFunction::Rank => {
            let h = segment.total() as f64 / s as f64;
            partition_sorted_chunks(segment, s)?
                .iter()
                .map(|chunk| {
                    // Weighted median of the chunk.
                    let mut acc = 0.0;
                    let half = chunk.weight() / 2.0;
                    let mid = chunk
                        .entries
                        .iter()
                        .find(|e| {
                            acc += e.1;
                            acc >= half
                        })
                        .or(chunk.entries.last())
                        .expect("chunks are non-empty");
                    (mid.0, h)
                })
                .collect()
        }
    };
    Ok(Summary::new(entries, s, SummaryMethod::Truncation, domain))
}

/// `s` records drawn uniformly without replacement, each standing for
/// `|D| / s` records.
pub fn usample_summarize<R: Rng + ?Sized>(segment: &Segment, s: usize, rng: &mut R) -> Result<Summary> {
    let domain = segment.domain();
    let n = segment.total() as usize;
    if s == 0 || n == 0 {
        return Ok(Summary::empty(s, SummaryMethod::USample, domain));
    }
    let take = s.min(n);
    let w = n as f64 / take as f64;
    let mut picks = rand::seq::index::sample(rng, n, take).into_vec();
    picks.sort_unstable();
    let mut entries: Vec<(Value, f64)> = Vec::new();
    let mut cum = 0usize;
    let mut it = segment.entries().iter();
    let mut cur = it.next();
    for p in picks {
        while let Some(&(_, c)) = cur {
            if p < cum + c as usize {
                break;
            }
            cum += c as usize;
            cur = it.next();
        }
        let v = cur.expect("pick inside the segment").0;
        match entries.last_mut() {
            Some(last) if last.0 == v => last.1 += w,
            _ => entries.push((v, w)),
        }
    }
    Ok(Summary::new(entries, s, SummaryMethod::USample, domain))
}

/// Sizes proportional to segment weight.
pub fn prop_allocate(weights: &[f64], total: usize, min: usize) -> Result<Vec<usize>> {
    allocate_by_weights(weights, total, min)
}

/// Workload-aware sizes for uniform samples. A uniform sample's count
/// estimate has variance proportional to `n_i^2 / s_i`, so minimizing the
/// workload average gives `s_i` proportional to `sqrt(a_i)`.
pub fn strat_allocate(scores: &[f64], total: usize, min: usize) -> Result<Vec<usize>> {
    let w: Vec<f64> = scores.iter().map(|a| a.sqrt()).collect();
    allocate_by_weights(&w, total, min)
}
