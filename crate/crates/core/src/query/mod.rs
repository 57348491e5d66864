//! Query planning and evaluation over stored summaries.

mod accumulator;

pub use accumulator::{
    heavy_hitters, quantile, Accumulator, AccumulatorKind, SignedAccumulator, SpaceSaving, StreamingPps,
};

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::ingest::{CubeKey, Mode, Store};
use crate::model::{QueryFunction, Segment, Summary, Value, WeightedStore};

/// Segment payloads whose stored pairs can be replayed into an accumulator.
pub trait StoredPairs: WeightedStore {
    fn for_each_pair(&self, f: &mut dyn FnMut(Value, f64));
}

impl StoredPairs for Summary {
    fn for_each_pair(&self, f: &mut dyn FnMut(Value, f64)) {
        for &(v, w) in self.entries() {
            f(v, w);
        }
    }
}

impl StoredPairs for Segment {
    fn for_each_pair(&self, f: &mut dyn FnMut(Value, f64)) {
        for &(v, c) in self.entries() {
            f(v, c as f64);
        }
    }
}

/// Signed combination of block prefixes `Pre_t`, where `Pre_t` covers the
/// segments from the start of `t`'s `k_T`-aligned block through `t`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct IntervalPlan {
    pub max_interval: u64,
    pub terms: Vec<(u64, i32)>,
    /// Segment range `[a, b)` the plan answers.
    pub segments: (u64, u64),
}

impl IntervalPlan {
    /// Segments summed by `Pre_t`.
    pub fn prefix_range(&self, t: u64) -> (u64, u64) {
        (t - t % self.max_interval, t + 1)
    }

    /// Net coefficient of every segment touched by any term; segments with
    /// a zero net coefficient are dropped.
    pub fn net_coefficients(&self) -> Vec<(u64, i32)> {
        let mut net: BTreeMap<u64, i32> = BTreeMap::new();
        for &(t, c) in &self.terms {
            let (lo, hi) = self.prefix_range(t);
            for i in lo..hi {
                *net.entry(i).or_insert(0) += c;
            }
        }
        net.into_iter().filter(|e| e.1 != 0).collect()
    }
}

/// Plan over segment indices `[a, b)`: per touched block, a `+Pre` at its
/// last covered segment and a `-Pre` before `a` when `a` is mid-block.
/// Any length is accepted; `decompose_interval` enforces the `k_T` cap.
pub fn decompose_segments(a: u64, b: u64, max_interval: u64) -> Result<IntervalPlan> {
    if a >= b {
        return Err(Error::InvalidInterval {
            t0: a,
            t1: b,
            reason: "empty interval".into(),
        });
    }
    if max_interval == 0 {
        return Err(Error::config("max interval must be at least 1"));
    }
    let mut terms = Vec::with_capacity(3);
    for blk in a / max_interval..=(b - 1) / max_interval {
        let start = blk * max_interval;
        terms.push(((b - 1).min(start + max_interval - 1), 1));
        if a > start {
            terms.push((a - 1, -1));
        }
    }
    Ok(IntervalPlan {
        max_interval,
        terms,
        segments: (a, b),
    })
}

/// Plan for the time interval `[t0, t1)`; both ends must be multiples of
/// the segment length `tg`.
pub fn decompose_interval(t0: u64, t1: u64, tg: u64, max_interval: u64) -> Result<IntervalPlan> {
    if tg == 0 {
        return Err(Error::config("time resolution must be at least 1"));
    }
    if !t0.is_multiple_of(tg) || !t1.is_multiple_of(tg) {
        return Err(Error::InvalidInterval {
            t0,
            t1,
            reason: format!("ends must be multiples of the segment length {tg}"),
        });
    }
    let len = (t1.saturating_sub(t0)) / tg;
    if len > max_interval {
        return Err(Error::InvalidInterval {
            t0,
            t1,
            reason: format!("spans {len} segments, more than k_T = {max_interval}"),
        });
    }
    decompose_segments(t0 / tg, t1 / tg, max_interval).map_err(|e| match e {
        Error::InvalidInterval { reason, .. } => Error::InvalidInterval { t0, t1, reason },
        other => other,
    })
}

fn interval_segment<T>(store: &Store<T>, i: u64) -> Result<Option<&T>> {
    let (first, end) = store
        .interval_range()
        .ok_or_else(|| Error::config("interval query against a cube store"))?;
    if i >= end {
        return Err(Error::MissingSummary(format!(
            "segment {i} is past the stored range [{first}, {end})"
        )));
    }
    // Segments before the first record are empty.
    Ok(i.checked_sub(first)
        .and_then(|o| store.interval_items().and_then(|v| v.get(o as usize))))
}

/// Point estimate `sum_c c * g_Pre(x)` evaluated through net segment
/// coefficients, so cancelled prefixes cost nothing.
pub fn interval_estimate<T: WeightedStore>(
    store: &Store<T>,
    plan: &IntervalPlan,
    g: QueryFunction,
    x: Value,
) -> Result<f64> {
    let mut total = 0.0;
    for (i, c) in plan.net_coefficients() {
        if let Some(s) = interval_segment(store, i)? {
            total += c as f64 * g.eval(s, x)?;
        }
    }
    Ok(total)
}

/// Same estimate built literally, one prefix at a time.
pub fn interval_estimate_by_prefix<T: WeightedStore>(
    store: &Store<T>,
    plan: &IntervalPlan,
    g: QueryFunction,
    x: Value,
) -> Result<f64> {
    let mut total = 0.0;
    for &(t, c) in &plan.terms {
        let (lo, hi) = plan.prefix_range(t);
        let mut pre = 0.0;
        for i in lo..hi {
            if let Some(s) = interval_segment(store, i)? {
                pre += g.eval(s, x)?;
            }
        }
        total += c as f64 * pre;
    }
    Ok(total)
}

/// Accumulates the plan's segments into `acc`. Net coefficients are all
/// `+1` for a well-formed plan, so bounded accumulators apply.
pub fn accumulate_interval<T: StoredPairs>(store: &Store<T>, plan: &IntervalPlan, acc: &mut Accumulator) -> Result<()> {
    for (i, c) in plan.net_coefficients() {
        if let Some(s) = interval_segment(store, i)? {
            accumulate_terms(s, c as f64, acc)?;
        }
    }
    Ok(())
}

/// Accumulates each prefix term with its sign into a two-sided combiner.
pub fn accumulate_interval_signed<T: StoredPairs>(
    store: &Store<T>,
    plan: &IntervalPlan,
    acc: &mut SignedAccumulator,
) -> Result<()> {
    for &(t, c) in &plan.terms {
        let (lo, hi) = plan.prefix_range(t);
        for i in lo..hi {
            if let Some(s) = interval_segment(store, i)? {
                let mut err = Ok(());
                s.for_each_pair(&mut |v, w| {
                    if err.is_ok() {
                        err = acc.add(v, c as f64 * w);
                    }
                });
                err?;
            }
        }
    }
    Ok(())
}

/// Adds `coef` times every stored pair of one payload.
pub fn accumulate_terms<T: StoredPairs + ?Sized>(payload: &T, coef: f64, acc: &mut Accumulator) -> Result<()> {
    if coef < 0.0 && acc.is_bounded() {
        return Err(Error::NegativeWeight);
    }
    let mut err = Ok(());
    payload.for_each_pair(&mut |v, w| {
        if err.is_ok() {
            err = acc.add(v, coef * w);
        }
    });
    err
}

/// Per-dimension filter: `None` leaves a dimension free.
pub type CubeFilter = Vec<Option<u32>>;

/// Resolves `(dimension name, value name)` pairs against the store's
/// dictionaries.
pub fn cube_filter<T>(store: &Store<T>, filters: &[(String, String)]) -> Result<CubeFilter> {
    let mut out = vec![None; store.config.dims.len()];
    for (dim, value) in filters {
        let d = store.dim_index(dim)?;
        let id = store
            .dictionaries
            .dim_value_id(d, value)
            .ok_or_else(|| Error::UnknownValue(format!("{dim}={value}")))?;
        out[d] = Some(id);
    }
    Ok(out)
}

/// Keys of the cube cells matching every constrained dimension.
pub fn select_cube_segments<'a, T>(store: &'a Store<T>, filter: &[Option<u32>]) -> Result<Vec<&'a CubeKey>> {
    let items = store
        .cube_items()
        .ok_or_else(|| Error::config("cube query against an interval store"))?;
    if filter.len() != store.config.dims.len() {
        return Err(Error::config(format!(
            "filter has {} dimensions, store has {}",
            filter.len(),
            store.config.dims.len()
        )));
    }
    Ok(items
        .keys()
        .filter(|k| k.iter().zip(filter).all(|(v, f)| f.is_none_or(|f| f == *v)))
        .collect())
}

pub fn cube_estimate<T: WeightedStore>(
    store: &Store<T>,
    filter: &[Option<u32>],
    g: QueryFunction,
    x: Value,
) -> Result<f64> {
    let items = store.cube_items().expect("checked by select");
    let mut total = 0.0;
    for k in select_cube_segments(store, filter)? {
        total += g.eval(&items[k], x)?;
    }
    Ok(total)
}

pub fn accumulate_cube<T: StoredPairs>(store: &Store<T>, filter: &[Option<u32>], acc: &mut Accumulator) -> Result<()> {
    let keys = select_cube_segments(store, filter)?;
    let items = store.cube_items().expect("checked by select");
    for k in keys {
        accumulate_terms(&items[k], 1.0, acc)?;
    }
    Ok(())
}

/// Which segments a query covers.
#[derive(Clone, Debug, PartialEq)]
pub enum QueryTarget {
    /// Time interval `[t0, t1)`.
    Interval { t0: u64, t1: u64 },
    /// `(dimension, value)` filters.
    Cube { filters: Vec<(String, String)> },
}

#[derive(Clone, Debug, PartialEq)]
pub enum QueryOp {
    Frequency(Value),
    Rank(Value),
    Quantile(f64),
    TopK(usize),
}

#[derive(Clone, Debug, PartialEq)]
pub struct QuerySpec {
    pub target: QueryTarget,
    pub op: QueryOp,
    pub accumulator: AccumulatorKind,
    /// Capacity of bounded accumulators.
    pub capacity: usize,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub enum QueryAnswer {
    Estimate(f64),
    Value(Value),
    Top(Vec<(Value, f64)>),
}

/// Runs one query against a summary (or exact segment) store.
pub fn execute<T: StoredPairs>(store: &Store<T>, spec: &QuerySpec) -> Result<QueryAnswer> {
    let mut acc = Accumulator::new(spec.accumulator, spec.capacity, spec.seed)?;
    let plan = match (&spec.target, store.mode()) {
        (QueryTarget::Interval { t0, t1 }, Mode::Interval) => Some(decompose_interval(
            *t0,
            *t1,
            store.config.time_resolution,
            store.config.max_interval,
        )?),
        (QueryTarget::Cube { .. }, Mode::Cube) => None,
        (QueryTarget::Interval { .. }, Mode::Cube) => return Err(Error::config("interval query against a cube store")),
        (QueryTarget::Cube { .. }, Mode::Interval) => {
            return Err(Error::config("cube query against an interval store"))
        }
    };
    let filter = match &spec.target {
        QueryTarget::Cube { filters } => Some(cube_filter(store, filters)?),
        QueryTarget::Interval { .. } => None,
    };
    let point = |g: QueryFunction, x: Value| -> Result<f64> {
        match (&plan, &filter) {
            (Some(p), _) => interval_estimate(store, p, g, x),
            (None, Some(f)) => cube_estimate(store, f, g, x),
            (None, None) => unreachable!("target resolved above"),
        }
    };
    match spec.op {
        QueryOp::Frequency(x) => Ok(QueryAnswer::Estimate(point(QueryFunction::Frequency, x)?)),
        QueryOp::Rank(x) => Ok(QueryAnswer::Estimate(point(QueryFunction::Rank, x)?)),
        QueryOp::Quantile(_) | QueryOp::TopK(_) => {
            match (&plan, &filter) {
                (Some(p), _) => accumulate_interval(store, p, &mut acc)?,
                (None, Some(f)) => accumulate_cube(store, f, &mut acc)?,
                (None, None) => unreachable!("target resolved above"),
            }
            match spec.op {
                QueryOp::Quantile(q) => Ok(QueryAnswer::Value(quantile(&acc, q)?)),
                QueryOp::TopK(k) => Ok(QueryAnswer::Top(heavy_hitters(&acc, k)?)),
                _ => unreachable!(),
            }
        }
    }
}
