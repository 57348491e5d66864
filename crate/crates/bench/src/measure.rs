//! Probe sets and the relative error metric.

use rand::seq::index::sample;
use segsum::rng;
use segsum::{QueryFunction, Result, Segment, Value, WeightedStore};

pub const PROBES: usize = 200;

/// Frequency probes: `count` distinct values drawn uniformly from the
/// distinct values of `global`. Rank probes: values at `count` equally
/// spaced quantile positions of `global`. Fewer distinct values than
/// `count` means every value is a probe.
pub fn probe_set(global: &Segment, kind: QueryFunction, count: usize, seed: u64) -> Vec<Value> {
    let entries = global.entries();
    if entries.len() <= count {
        return entries.iter().map(|e| e.0).collect();
    }
    match kind {
        QueryFunction::Frequency => {
            let mut idx = sample(&mut rng::seeded(seed), entries.len(), count).into_vec();
            idx.sort_unstable();
            idx.into_iter().map(|i| entries[i].0).collect()
        }
        QueryFunction::Rank => {
            let total = global.total() as f64;
            let mut out = Vec::with_capacity(count);
            let mut cum = 0u64;
            let mut it = entries.iter();
            let mut cur = it.next();
            for i in 0..count {
                let target = (i as f64 + 0.5) / count as f64 * total;
                while let Some(&(v, c)) = cur {
                    if (cum + c) as f64 >= target {
                        out.push(v);
                        break;
                    }
                    cum += c;
                    cur = it.next();
                }
            }
            out.dedup();
            out
        }
    }
}

/// Exact `g` of each probe over a set of segments.
pub fn truth<'a, I>(segments: I, g: QueryFunction, probes: &[Value]) -> Result<Vec<f64>>
where
    I: IntoIterator<Item = &'a Segment>,
{
    let mut out = vec![0.0; probes.len()];
    for seg in segments {
        for (o, &x) in out.iter_mut().zip(probes) {
            *o += g.eval(seg, x)?;
        }
    }
    Ok(out)
}

/// `max_x |estimate(x) - truth(x)| / |Q|`; zero for an empty query.
pub fn relative_error(truth: &[f64], estimate: &[f64], query_weight: f64) -> f64 {
    if query_weight <= 0.0 {
        return 0.0;
    }
    truth
        .iter()
        .zip(estimate)
        .map(|(t, e)| (t - e).abs())
        .fold(0.0, f64::max)
        / query_weight
}

/// One error measurement.
#[derive(Clone, Debug, PartialEq)]
pub struct ErrorReport {
    pub method: String,
    pub query: String,
    pub rel_error: f64,
    pub probes: usize,
    pub seed: u64,
    pub wall_ms: f64,
}

/// Error of `estimate` (aligned with `probes`) against the segments the
/// query covers. `|Q|` always comes from those segments.
pub fn measure_error(truth_segments: &[&Segment], estimate: &[f64], g: QueryFunction, probes: &[Value]) -> Result<f64> {
    let t = truth(truth_segments.iter().copied(), g, probes)?;
    let q: f64 = truth_segments.iter().map(|s| s.total_weight()).sum();
    Ok(relative_error(&t, estimate, q))
}

/// Mean and sample standard deviation.
pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    if xs.is_empty() {
        return (0.0, 0.0);
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = if xs.len() > 1 {
        xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}
