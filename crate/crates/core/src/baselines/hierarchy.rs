use rayon::prelude::*;

use super::truncation_summarize;
use crate::error::{Error, Result};
use crate::model::{QueryFunction, Segment, Summary, Value, WeightedStore};

/// Truncation summaries over aligned blocks of `b^i` segments for layers
/// `i = 0..=ceil(log_b k_T)`. Layer `i` summaries get `b^i * s_0` slots with
/// `s_0 = s / layers`, so storage per base segment matches `s`.
#[derive(Clone, Debug)]
pub struct HierarchyStore {
    base: u64,
    first: u64,
    end: u64,
    base_size: f64,
    /// `layers[i][j]` summarizes absolute segments `[j b^i, (j+1) b^i)`
    /// offset by `block_offset[i]`.
    layers: Vec<Vec<Summary>>,
    block_offset: Vec<u64>,
}

fn layer_count(base: u64, max_interval: u64) -> usize {
    let mut layers = 1;
    let mut span = 1u64;
    while span < max_interval {
        span = span.saturating_mul(base);
        layers += 1;
    }
    layers
}

impl HierarchyStore {
    /// `segments[i]` is absolute segment `first + i`.
    pub fn build(
        segments: &[Segment],
        first: u64,
        s: usize,
        base: u64,
        max_interval: u64,
        kind: QueryFunction,
    ) -> Result<Self> {
        if base < 2 {
            return Err(Error::config("hierarchy base must be at least 2"));
        }
        if s == 0 {
            return Err(Error::config("summary size must be at least 1"));
        }
        let domain = segments
            .first()
            .map(|s| s.domain())
            .unwrap_or(crate::model::ValueDomain::Categorical);
        let n_layers = layer_count(base, max_interval.max(1));
        let base_size = s as f64 / n_layers as f64;
        let end = first + segments.len() as u64;
        let mut layers = Vec::with_capacity(n_layers);
        let mut block_offset = Vec::with_capacity(n_layers);
        let mut span = 1u64;
        for _ in 0..n_layers {
            let lo = first / span;
            let hi = end.div_ceil(span);
            let size = ((span as f64 * base_size).round() as usize).max(1);
            let blocks: Vec<u64> = (lo..hi).collect();
            let summaries = blocks
                .par_iter()
                .map(|&j| {
                    let a = (j * span).max(first);
                    let b = ((j + 1) * span).min(end);
                    let parts = &segments[(a - first) as usize..(b - first) as usize];
                    let merged = if parts.len() == 1 {
                        parts[0].clone()
                    } else {
                        Segment::union(parts, domain)
                    };
                    truncation_summarize(&merged, size, kind)
                })
                .collect::<Result<Vec<_>>>()?;
            layers.push(summaries);
            block_offset.push(lo);
            span = span.saturating_mul(base);
        }
        Ok(HierarchyStore {
            base,
            first,
            end,
            base_size,
            layers,
            block_offset,
        })
    }

    pub fn layers(&self) -> usize {
        self.layers.len()
    }

    pub fn base_size(&self) -> f64 {
        self.base_size
    }

    /// Total stored entries across every layer.
    pub fn stored_entries(&self) -> usize {
        self.layers.iter().flatten().map(Summary::len).sum()
    }

    pub fn summary(&self, layer: usize, block: u64) -> Option<&Summary> {
        let off = block.checked_sub(*self.block_offset.get(layer)?)?;
        self.layers[layer].get(off as usize)
    }

    /// Sum of the estimates of the blocks covering `[t0, t1)`.
    pub fn estimate(&self, t0: u64, t1: u64, g: QueryFunction, x: Value) -> Result<f64> {
        if t0 < self.first || t1 > self.end {
            return Err(Error::InvalidInterval {
                t0,
                t1,
                reason: format!("outside stored segments [{}, {})", self.first, self.end),
            });
        }
        let mut total = 0.0;
        for (layer, block) in hierarchy_plan(t0, t1, self.base, self.layers.len())? {
            let s = self
                .summary(layer, block)
                .ok_or_else(|| Error::MissingSummary(format!("layer {layer} block {block}")))?;
            total += g.eval(s, x)?;
        }
        Ok(total)
    }

    /// Estimate for every probe in one pass over the plan.
    pub fn estimate_many(&self, t0: u64, t1: u64, g: QueryFunction, xs: &[Value]) -> Result<Vec<f64>> {
        let mut out = vec![0.0; xs.len()];
        for (layer, block) in hierarchy_plan(t0, t1, self.base, self.layers.len())? {
            let s = self
                .summary(layer, block)
                .ok_or_else(|| Error::MissingSummary(format!("layer {layer} block {block}")))?;
            for (o, &x) in out.iter_mut().zip(xs) {
                *o += match g {
                    QueryFunction::Frequency => s.frequency(x),
                    QueryFunction::Rank => s.rank(x)?,
                };
            }
        }
        Ok(out)
    }
}

/// Greedy cover of `[t0, t1)` by disjoint aligned blocks, returned as
/// `(layer, block index)` with block `j` of layer `i` spanning
/// `[j b^i, (j+1) b^i)`.
pub fn hierarchy_plan(t0: u64, t1: u64, base: u64, layers: usize) -> Result<Vec<(usize, u64)>> {
    if t0 >= t1 {
        return Err(Error::InvalidInterval {
            t0,
            t1,
            reason: "empty interval".into(),
        });
    }
    let mut plan = Vec::new();
    let mut pos = t0;
    while pos < t1 {
        let mut layer = 0;
        let mut span = 1u64;
        while layer + 1 < layers {
            let next = span * base;
            if !pos.is_multiple_of(next) || pos + next > t1 {
                break;
            }
            span = next;
            layer += 1;
        }
        plan.push((layer, pos / span));
        pos += span;
    }
    Ok(plan)
}
