//! Probability-proportional-to-size summaries.
//!
//! A value with (bias-reduced) count `d` is kept with probability
//! `min(1, d / h)`. Light values that survive carry the proxy weight `h`;
//! heavy values keep their count. Pair aggregation turns the fractional
//! probabilities into a sample of fixed size `s` or `s - 1`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::{Segment, Summary, SummaryMethod, Value};

/// Smallest threshold `h` such that exact-storing the values above it and
/// sampling the rest at rate `1 / h` fills at most `s` slots in expectation.
pub fn calc_t(segment: &Segment, s: usize) -> Result<f64> {
    let weights: Vec<f64> = segment.entries().iter().map(|e| e.1 as f64).collect();
    calc_t_weights(&weights, s)
}

/// [`calc_t`] over arbitrary non-negative weights.
pub fn calc_t_weights(weights: &[f64], s: usize) -> Result<f64> {
    if s == 0 {
        return Err(Error::config("summary size must be at least 1"));
    }
    let mut w: Vec<f64> = weights.iter().copied().filter(|&x| x > 0.0).collect();
    w.sort_by(|a, b| b.total_cmp(a));
    // Summing from the small end keeps the remainders accurate.
    let mut rest = vec![0.0; w.len() + 1];
    for i in (0..w.len()).rev() {
        rest[i] = rest[i + 1] + w[i];
    }
    let mut h = rest[0] / s as f64;
    let mut k = 0;
    while k < w.len() && k + 1 < s && w[k] > h {
        k += 1;
        h = rest[k] / (s - k) as f64;
    }
    Ok(h)
}

/// Transforms two inclusion probabilities so that at least one becomes 0
/// or 1, preserving their sum and each expectation.
pub fn pair_agg<R: Rng + ?Sized>(pi: f64, pj: f64, rng: &mut R) -> (f64, f64) {
    let sum = pi + pj;
    if sum <= 0.0 {
        return (0.0, 0.0);
    }
    if sum < 1.0 {
        if rng.random::<f64>() < pi / sum {
            (sum, 0.0)
        } else {
            (0.0, sum)
        }
    } else {
        let slack = 2.0 - sum;
        if slack <= 0.0 {
            return (1.0, 1.0);
        }
        if rng.random::<f64>() < (1.0 - pj) / slack {
            (1.0, sum - 1.0)
        } else {
            (sum - 1.0, 1.0)
        }
    }
}

/// Inclusion probabilities for one segment before any randomness.
#[derive(Clone, Debug, PartialEq)]
pub struct PpsPlan {
    pub threshold: f64,
    pub bias: f64,
    /// `(value, reduced count, inclusion probability)` in value order.
    pub items: Vec<(Value, f64, f64)>,
}

impl PpsPlan {
    pub fn new(segment: &Segment, s: usize, bias: f64) -> Result<Self> {
        if !(bias >= 0.0) || !bias.is_finite() {
            return Err(Error::config(format!("bias must be a finite value >= 0, got {bias}")));
        }
        let reduced: Vec<(Value, f64)> = segment
            .entries()
            .iter()
            .map(|&(v, c)| (v, c as f64 - bias))
            .filter(|e| e.1 > 0.0)
            .collect();
        let weights: Vec<f64> = reduced.iter().map(|e| e.1).collect();
        let h = calc_t_weights(&weights, s)?;
        let items = reduced
            .into_iter()
            .map(|(v, d)| (v, d, if d >= h { 1.0 } else { d / h }))
            .collect();
        Ok(PpsPlan {
            threshold: h,
            bias,
            items,
        })
    }

    pub fn expected_size(&self) -> f64 {
        self.items.iter().map(|e| e.2).sum()
    }

    /// Draws one sample. Fractional probabilities are paired in value
    /// order; a single leftover is settled with a coin flip.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<(Value, f64)> {
        let mut p: Vec<f64> = self.items.iter().map(|e| e.2).collect();
        let fractional = |x: f64| x > 0.0 && x < 1.0;
        let mut pending: Option<usize> = None;
        for j in 0..p.len() {
            if !fractional(p[j]) {
                continue;
            }
            match pending {
                None => pending = Some(j),
                Some(i) => {
                    let (a, b) = pair_agg(p[i], p[j], rng);
                    p[i] = a;
                    p[j] = b;
                    pending = if fractional(a) {
                        Some(i)
                    } else if fractional(b) {
                        Some(j)
                    } else {
                        None
                    };
                }
            }
        }
        if let Some(i) = pending {
            p[i] = if rng.random::<f64>() < p[i] { 1.0 } else { 0.0 };
        }
        let h = self.threshold;
        self.items
            .iter()
            .zip(&p)
            .filter(|(_, &q)| q >= 1.0)
            .map(|(&(v, d, _), _)| (v, if d >= h { d } else { h } + self.bias))
            .collect()
    }
}

/// Builds a PPS summary of size `s` (or `s - 1`) with per-value bias `bias`.
pub fn pps_summarize<R: Rng + ?Sized>(segment: &Segment, s: usize, bias: f64, rng: &mut R) -> Result<Summary> {
    let plan = PpsPlan::new(segment, s, bias)?;
    let entries = plan.sample(rng);
    Ok(Summary::new(entries, s, SummaryMethod::Pps, segment.domain())
        .with_threshold(plan.threshold)
        .with_bias(bias))
}
