use std::cell::OnceCell;
use std::cmp::Reverse;
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::str::FromStr;

use ordered_float::OrderedFloat;
use rand::Rng;

use crate::error::{Error, Result};
use crate::model::Value;
use crate::rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum AccumulatorKind {
    Exact,
    SpaceSaving,
    Pps,
}

impl AccumulatorKind {
    pub fn as_str(self) -> &'static str {
        match self {
            AccumulatorKind::Exact => "exact",
            AccumulatorKind::SpaceSaving => "spacesaving",
            AccumulatorKind::Pps => "pps",
        }
    }
}

impl FromStr for AccumulatorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(AccumulatorKind::Exact),
            "spacesaving" | "space-saving" | "ss" => Ok(AccumulatorKind::SpaceSaving),
            "pps" | "varopt" => Ok(AccumulatorKind::Pps),
            other => Err(Error::config(format!("unknown accumulator `{other}`"))),
        }
    }
}

/// Weighted Space Saving: `cap` monitored values; a new value evicts the
/// smallest counter and inherits its count.
#[derive(Clone, Debug)]
pub struct SpaceSaving {
    cap: usize,
    counts: HashMap<Value, f64>,
    order: BTreeSet<(OrderedFloat<f64>, Value)>,
    total: f64,
}

impl SpaceSaving {
    pub fn new(cap: usize) -> Result<Self> {
        if cap == 0 {
            return Err(Error::config("accumulator capacity must be at least 1"));
        }
        Ok(SpaceSaving {
            cap,
            counts: HashMap::new(),
            order: BTreeSet::new(),
            total: 0.0,
        })
    }

    fn add(&mut self, x: Value, w: f64) {
        self.total += w;
        if let Some(c) = self.counts.get_mut(&x) {
            self.order.remove(&(OrderedFloat(*c), x));
            *c += w;
            self.order.insert((OrderedFloat(*c), x));
            return;
        }
        let base = if self.counts.len() < self.cap {
            0.0
        } else {
            let (OrderedFloat(c), y) = self.order.pop_first().expect("full sketch");
            self.counts.remove(&y);
            c
        };
        self.counts.insert(x, base + w);
        self.order.insert((OrderedFloat(base + w), x));
    }

    /// Smallest monitored count; bounds every estimate's error.
    pub fn min_count(&self) -> f64 {
        if self.counts.len() < self.cap {
            0.0
        } else {
            self.order.first().map(|e| e.0 .0).unwrap_or(0.0)
        }
    }
}

/// Streaming VarOpt sample of at most `cap` weighted items. Items heavier
/// than the threshold `tau` keep their weight; the rest stand for `tau`.
/// Each arrival beyond capacity drops one item with the same marginals as
/// pair aggregation.
#[derive(Clone, Debug)]
pub struct StreamingPps {
    cap: usize,
    large: BinaryHeap<Reverse<(OrderedFloat<f64>, u64, Value)>>,
    small: Vec<Value>,
    tau: f64,
    seq: u64,
    total: f64,
    rng: rng::Rng,
}

impl StreamingPps {
    pub fn new(cap: usize, seed: u64) -> Result<Self> {
        if cap == 0 {
            return Err(Error::config("accumulator capacity must be at least 1"));
        }
        Ok(StreamingPps {
            cap,
            large: BinaryHeap::new(),
            small: Vec::new(),
            tau: 0.0,
            seq: 0,
            total: 0.0,
            rng: rng::seeded(seed),
        })
    }

    pub fn threshold(&self) -> f64 {
        self.tau
    }

    fn push_large(&mut self, x: Value, w: f64) {
        self.seq += 1;
        self.large.push(Reverse((OrderedFloat(w), self.seq, x)));
    }

    fn add(&mut self, x: Value, w: f64) {
        if w <= 0.0 {
            return;
        }
        self.total += w;
        if self.large.len() + self.small.len() < self.cap {
            if w > self.tau {
                self.push_large(x, w);
            } else {
                // Below threshold only once the sample has been full, and
                // then it is never short again.
                self.push_large(x, w);
            }
            return;
        }
        let mut fresh: Vec<(Value, f64)> = Vec::new();
        let mut weight = self.tau * self.small.len() as f64;
        if w > self.tau {
            self.push_large(x, w);
        } else {
            fresh.push((x, w));
            weight += w;
        }
        loop {
            let count = self.small.len() + fresh.len();
            let Some(Reverse((OrderedFloat(min), _, _))) = self.large.peek().copied() else {
                break;
            };
            if count >= 2 && weight < (count - 1) as f64 * min {
                break;
            }
            let Reverse((OrderedFloat(mw), _, mx)) = self.large.pop().expect("peeked");
            fresh.push((mx, mw));
            weight += mw;
        }
        let count = self.small.len() + fresh.len();
        let tau = weight / (count - 1) as f64;
        let mut r: f64 = self.rng.random();
        let mut dropped = None;
        for (i, &(_, wi)) in fresh.iter().enumerate() {
            r -= 1.0 - wi / tau;
            if r < 0.0 {
                dropped = Some(i);
                break;
            }
        }
        match dropped {
            Some(i) => {
                fresh.swap_remove(i);
            }
            None => {
                if self.small.is_empty() {
                    // Rounding left no mass for the small pool; drop the
                    // lightest fresh item instead.
                    let i = fresh
                        .iter()
                        .enumerate()
                        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1))
                        .map(|e| e.0)
                        .expect("at least two candidates");
                    fresh.swap_remove(i);
                } else {
                    let i = self.rng.random_range(0..self.small.len());
                    self.small.swap_remove(i);
                }
            }
        }
        self.small.extend(fresh.into_iter().map(|e| e.0));
        self.tau = tau;
    }

    fn entries(&self) -> Vec<(Value, f64)> {
        self.large
            .iter()
            .map(|Reverse((w, _, x))| (*x, w.0))
            .chain(self.small.iter().map(|&x| (x, self.tau)))
            .collect()
    }

    pub fn len(&self) -> usize {
        self.large.len() + self.small.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

// One accumulator lives per query, so the size spread is harmless.
#[allow(clippy::large_enum_variant)]
#[derive(Clone, Debug)]
enum Inner {
    Exact(BTreeMap<Value, f64>),
    SpaceSaving(SpaceSaving),
    Pps(StreamingPps),
}

/// Query-time combiner of `(value, weight)` pairs from many summaries.
#[derive(Clone, Debug)]
pub struct Accumulator {
    inner: Inner,
    total: f64,
    sorted: OnceCell<Vec<(Value, f64)>>,
}

impl Accumulator {
    pub fn exact() -> Self {
        Self::wrap(Inner::Exact(BTreeMap::new()))
    }

    pub fn space_saving(cap: usize) -> Result<Self> {
        Ok(Self::wrap(Inner::SpaceSaving(SpaceSaving::new(cap)?)))
    }

    pub fn streaming_pps(cap: usize, seed: u64) -> Result<Self> {
        Ok(Self::wrap(Inner::Pps(StreamingPps::new(cap, seed)?)))
    }

    pub fn new(kind: AccumulatorKind, cap: usize, seed: u64) -> Result<Self> {
        match kind {
            AccumulatorKind::Exact => Ok(Self::exact()),
            AccumulatorKind::SpaceSaving => Self::space_saving(cap),
            AccumulatorKind::Pps => Self::streaming_pps(cap, seed),
        }
    }

    fn wrap(inner: Inner) -> Self {
        Accumulator {
            inner,
            total: 0.0,
            sorted: OnceCell::new(),
        }
    }

    pub fn kind(&self) -> AccumulatorKind {
        match self.inner {
            Inner::Exact(_) => AccumulatorKind::Exact,
            Inner::SpaceSaving(_) => AccumulatorKind::SpaceSaving,
            Inner::Pps(_) => AccumulatorKind::Pps,
        }
    }

    pub fn is_bounded(&self) -> bool {
        self.kind() != AccumulatorKind::Exact
    }

    /// Adds weight `w` to value `x`. Only the exact variant takes negative
    /// weight.
    pub fn add(&mut self, x: Value, w: f64) -> Result<()> {
        if w < 0.0 && self.is_bounded() {
            return Err(Error::NegativeWeight);
        }
        if w == 0.0 {
            return Ok(());
        }
        self.sorted = OnceCell::new();
        self.total += w;
        match &mut self.inner {
            Inner::Exact(m) => *m.entry(x).or_insert(0.0) += w,
            Inner::SpaceSaving(s) => s.add(x, w),
            Inner::Pps(p) => p.add(x, w),
        }
        Ok(())
    }

    pub fn add_all(&mut self, entries: &[(Value, f64)], coef: f64) -> Result<()> {
        for &(x, w) in entries {
            self.add(x, coef * w)?;
        }
        Ok(())
    }

    pub fn total(&self) -> f64 {
        self.total
    }

    /// Stored `(value, weight)` pairs merged by value, in value order.
    pub fn sorted_entries(&self) -> &[(Value, f64)] {
        self.sorted.get_or_init(|| {
            let mut out: Vec<(Value, f64)> = match &self.inner {
                Inner::Exact(m) => m.iter().map(|(&v, &w)| (v, w)).collect(),
                Inner::SpaceSaving(s) => s.counts.iter().map(|(&v, &w)| (v, w)).collect(),
                Inner::Pps(p) => p.entries(),
            };
            out.sort_by_key(|e| e.0);
            out.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
            out
        })
    }

    /// Number of stored items (samples count separately even when they
    /// share a value).
    pub fn stored(&self) -> usize {
        match &self.inner {
            Inner::Exact(m) => m.len(),
            Inner::SpaceSaving(s) => s.counts.len(),
            Inner::Pps(p) => p.len(),
        }
    }

    pub fn frequency(&self, x: Value) -> f64 {
        match &self.inner {
            Inner::Exact(m) => m.get(&x).copied().unwrap_or(0.0),
            Inner::SpaceSaving(s) => s.counts.get(&x).copied().unwrap_or(0.0),
            Inner::Pps(_) => {
                let e = self.sorted_entries();
                e.binary_search_by_key(&x, |e| e.0).map(|i| e[i].1).unwrap_or(0.0)
            }
        }
    }

    pub fn rank(&self, x: Value) -> f64 {
        let e = self.sorted_entries();
        let end = e.partition_point(|e| e.0 <= x);
        e[..end].iter().map(|e| e.1).sum()
    }

    /// Error guarantee of the bounded variants: Space Saving estimates are
    /// within its smallest counter of the truth.
    pub fn error_bound(&self) -> Option<f64> {
        match &self.inner {
            Inner::Exact(_) => Some(0.0),
            Inner::SpaceSaving(s) => Some(s.min_count()),
            Inner::Pps(p) => Some(p.threshold()),
        }
    }
}

/// Positive and negative contributions kept apart so bounded sketches
/// never see a deletion; reads subtract.
#[derive(Clone, Debug)]
pub struct SignedAccumulator {
    pub positive: Accumulator,
    pub negative: Accumulator,
}

impl SignedAccumulator {
    pub fn new(kind: AccumulatorKind, cap: usize, seed: u64) -> Result<Self> {
        Ok(SignedAccumulator {
            positive: Accumulator::new(kind, cap, seed)?,
            negative: Accumulator::new(kind, cap, seed ^ 0x9e37_79b9_7f4a_7c15)?,
        })
    }

    pub fn add(&mut self, x: Value, w: f64) -> Result<()> {
        if w >= 0.0 {
            self.positive.add(x, w)
        } else {
            self.negative.add(x, -w)
        }
    }

    pub fn frequency(&self, x: Value) -> f64 {
        self.positive.frequency(x) - self.negative.frequency(x)
    }

    pub fn rank(&self, x: Value) -> f64 {
        self.positive.rank(x) - self.negative.rank(x)
    }

    pub fn total(&self) -> f64 {
        self.positive.total() - self.negative.total()
    }
}

/// Smallest stored value whose accumulated rank reaches `q` of the total.
pub fn quantile(acc: &Accumulator, q: f64) -> Result<Value> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::config(format!("quantile {q} outside [0, 1]")));
    }
    let entries = acc.sorted_entries();
    if entries.is_empty() {
        return Err(Error::EmptyAccumulator);
    }
    let total: f64 = entries.iter().map(|e| e.1).sum();
    let target = q * total - 1e-9 * total.abs();
    let mut cum = 0.0;
    for &(v, w) in entries {
        cum += w;
        if cum >= target {
            return Ok(v);
        }
    }
    Ok(entries.last().expect("non-empty").0)
}

/// The `k` heaviest values, heaviest first, ties by value.
pub fn heavy_hitters(acc: &Accumulator, k: usize) -> Result<Vec<(Value, f64)>> {
    if k == 0 {
        return Err(Error::config("top_k must be at least 1"));
    }
    let mut entries = acc.sorted_entries().to_vec();
    entries.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    entries.truncate(k);
    Ok(entries)
}
