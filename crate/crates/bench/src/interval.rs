//! Interval workloads: build every method over one segment sequence, then
//! measure random aligned intervals of each length.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::Rng;
use rayon::prelude::*;
use segsum::baselines::{cms_dims_for_space, CountMin, HierarchyStore};
use segsum::coop::CoopConfig;
use segsum::query::{accumulate_terms, decompose_segments, Accumulator, AccumulatorKind};
use segsum::rng;
use segsum::summarize::{summarize_segments, IntervalMethod};
use segsum::{Error, QueryFunction, Result, Segment, Summary, Value, ValueDomain, WeightedStore};

use crate::measure::{mean_std, probe_set, relative_error, truth, PROBES};
use crate::report::Row;

/// Interval baselines and the cooperative method.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Method {
    Summary(IntervalMethod),
    Hierarchy(u64),
    Cms,
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Summary(m) => f.write_str(m.as_str()),
            Method::Hierarchy(b) => write!(f, "hierarchy:{b}"),
            Method::Cms => f.write_str("cms"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s == "cms" {
            return Ok(Method::Cms);
        }
        if let Some(rest) = s.strip_prefix("hierarchy") {
            let base = match rest.strip_prefix(':') {
                Some(b) => b
                    .parse()
                    .map_err(|_| Error::InvalidConfig(format!("bad hierarchy base `{b}`")))?,
                None if rest.is_empty() => 2,
                None => return Err(Error::InvalidConfig(format!("unknown method `{s}`"))),
            };
            return Ok(Method::Hierarchy(base));
        }
        s.parse().map(Method::Summary)
    }
}

/// One method built over every segment.
pub enum Built {
    Summaries(Vec<Summary>),
    Hierarchy(HierarchyStore),
    Cms(Vec<CountMin>),
}

pub fn build(
    method: Method,
    segments: &[Segment],
    config: &CoopConfig,
    kind: QueryFunction,
    seed: u64,
) -> Result<Built> {
    match method {
        Method::Summary(m) => summarize_segments(segments, 0, m, config, kind, seed).map(Built::Summaries),
        Method::Hierarchy(b) => {
            HierarchyStore::build(segments, 0, config.size, b, config.max_interval, kind).map(Built::Hierarchy)
        }
        Method::Cms => {
            if kind != QueryFunction::Frequency {
                return Err(Error::InvalidConfig("count-min answers frequency queries only".into()));
            }
            let (w, d) = cms_dims_for_space(config.size);
            let template = CountMin::new(w, d, &mut rng::seeded(seed))?;
            Ok(Built::Cms(
                segments
                    .par_iter()
                    .map(|seg| {
                        let mut c = template.empty_like();
                        for &(x, n) in seg.entries() {
                            c.update(x, n as f64);
                        }
                        c
                    })
                    .collect(),
            ))
        }
    }
}

impl Built {
    /// Estimates of every probe over segments `[a, b)`. Summaries go through
    /// the prefix plan of the query engine.
    pub fn estimate(&self, a: u64, b: u64, max_interval: u64, g: QueryFunction, probes: &[Value]) -> Result<Vec<f64>> {
        match self {
            Built::Summaries(sums) => {
                let plan = decompose_segments(a, b, max_interval)?;
                let mut out = vec![0.0; probes.len()];
                for (i, c) in plan.net_coefficients() {
                    let s = &sums[i as usize];
                    for (o, &x) in out.iter_mut().zip(probes) {
                        *o += c as f64 * g.eval(s, x)?;
                    }
                }
                Ok(out)
            }
            Built::Hierarchy(h) => h.estimate_many(a, b, g, probes),
            Built::Cms(sketches) => {
                let mut merged = sketches[a as usize].clone();
                for c in &sketches[a as usize + 1..b as usize] {
                    merged.merge(c)?;
                }
                Ok(probes.iter().map(|&x| merged.query(x)).collect())
            }
        }
    }

    /// Stored entries (or sketch cells) across all segments.
    pub fn space(&self) -> usize {
        match self {
            Built::Summaries(s) => s.iter().map(Summary::len).sum(),
            Built::Hierarchy(h) => h.stored_entries(),
            Built::Cms(c) => c.iter().map(|c| c.width() * c.depth()).sum(),
        }
    }
}

#[derive(Clone, Debug)]
pub struct SweepConfig {
    pub dataset: String,
    pub kind: QueryFunction,
    pub size: usize,
    pub max_interval: u64,
    pub lengths: Vec<u64>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub seed: u64,
}

impl SweepConfig {
    /// Lengths `1, 2, 4, ..., k_T / 2`.
    pub fn doubling_lengths(max_interval: u64) -> Vec<u64> {
        let mut out = vec![1];
        while out.last().unwrap() * 2 <= max_interval / 2 {
            out.push(out.last().unwrap() * 2);
        }
        out
    }
}

/// Random interval `[a, a + k)` for trial `trial`, uniform over all aligned
/// start positions.
pub fn sample_interval(segments: usize, k: u64, seed: u64, trial: u64) -> (u64, u64) {
    let mut r = rng::stream_rng(seed, (k << 32) ^ trial);
    let a = r.random_range(0..=segments as u64 - k);
    (a, a + k)
}

/// Per-length error tables for every configured method.
pub struct SweepResult {
    pub rows: Vec<Row>,
    /// `errors[m][l][trial]` for method `m` and length index `l`.
    pub errors: Vec<Vec<Vec<f64>>>,
}

impl SweepResult {
    pub fn mean(&self, method: usize, length: usize) -> f64 {
        mean_std(&self.errors[method][length]).0
    }
}

pub fn run_interval_sweep(segments: &[Segment], cfg: &SweepConfig) -> Result<SweepResult> {
    let coop = CoopConfig::new(cfg.size, cfg.max_interval);
    let global = Segment::union(
        segments,
        segments.first().map_or(ValueDomain::Categorical, |s| s.domain()),
    );
    let probes = probe_set(&global, cfg.kind, PROBES, cfg.seed);
    let mut built = Vec::with_capacity(cfg.methods.len());
    let mut build_ms = Vec::with_capacity(cfg.methods.len());
    for &m in &cfg.methods {
        let t = Instant::now();
        built.push(build(m, segments, &coop, cfg.kind, cfg.seed)?);
        build_ms.push(t.elapsed().as_secs_f64() * 1e3);
    }
    let mut errors = vec![vec![Vec::new(); cfg.lengths.len()]; cfg.methods.len()];
    let mut rows = Vec::new();
    for (li, &k) in cfg.lengths.iter().enumerate() {
        if k as usize > segments.len() {
            return Err(Error::InvalidConfig(format!(
                "interval length {k} exceeds {} segments",
                segments.len()
            )));
        }
        let t = Instant::now();
        let per_trial: Vec<Vec<f64>> = (0..cfg.trials as u64)
            .into_par_iter()
            .map(|trial| {
                let (a, b) = sample_interval(segments.len(), k, cfg.seed, trial);
                let span = &segments[a as usize..b as usize];
                let exact = truth(span, cfg.kind, &probes)?;
                let q: f64 = span.iter().map(|s| s.total_weight()).sum();
                built
                    .iter()
                    .map(|m| {
                        let est = m.estimate(a, b, cfg.max_interval, cfg.kind, &probes)?;
                        Ok(relative_error(&exact, &est, q))
                    })
                    .collect()
            })
            .collect::<Result<_>>()?;
        let ms = t.elapsed().as_secs_f64() * 1e3;
        for (mi, m) in cfg.methods.iter().enumerate() {
            errors[mi][li] = per_trial.iter().map(|t| t[mi]).collect();
            let (mean, std) = mean_std(&errors[mi][li]);
            rows.push(Row {
                dataset: cfg.dataset.clone(),
                method: m.to_string(),
                query_type: cfg.kind.as_str().into(),
                k_or_filters: k.to_string(),
                mean_err: mean,
                std_err: std,
                trials: cfg.trials,
                seed: cfg.seed,
                ms: ms / cfg.methods.len() as f64 + build_ms[mi],
            });
        }
    }
    Ok(SweepResult { rows, errors })
}

/// Accumulator error at one interval length: the mean over trials of the
/// largest probe difference between a bounded accumulator and exact
/// accumulation, relative to `|Q|`, next to the summaries' own error.
#[derive(Clone, Debug, PartialEq)]
pub struct AccumulatorPoint {
    pub capacity: usize,
    pub accumulator_err: f64,
    pub summary_err: f64,
}

pub fn run_accumulator_sweep(
    segments: &[Segment],
    cfg: &SweepConfig,
    length: u64,
    kind: AccumulatorKind,
    capacities: &[usize],
) -> Result<Vec<AccumulatorPoint>> {
    let coop = CoopConfig::new(cfg.size, cfg.max_interval);
    let global = Segment::union(
        segments,
        segments.first().map_or(ValueDomain::Categorical, |s| s.domain()),
    );
    let probes = probe_set(&global, cfg.kind, PROBES, cfg.seed);
    let sums = summarize_segments(segments, 0, IntervalMethod::Coop, &coop, cfg.kind, cfg.seed)?;
    let per_trial: Vec<(f64, Vec<f64>)> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let (a, b) = sample_interval(segments.len(), length, cfg.seed, trial);
            let span = &segments[a as usize..b as usize];
            let exact = truth(span, cfg.kind, &probes)?;
            let q: f64 = span.iter().map(|s| s.total_weight()).sum();
            let plan = decompose_segments(a, b, cfg.max_interval)?;
            let fill = |acc: &mut Accumulator| -> Result<Vec<f64>> {
                for (i, c) in plan.net_coefficients() {
                    accumulate_terms(&sums[i as usize], c as f64, acc)?;
                }
                Ok(probes
                    .iter()
                    .map(|&x| match cfg.kind {
                        QueryFunction::Frequency => acc.frequency(x),
                        QueryFunction::Rank => acc.rank(x),
                    })
                    .collect())
            };
            let base = fill(&mut Accumulator::exact())?;
            let summary_err = relative_error(&exact, &base, q);
            let acc_errs = capacities
                .iter()
                .map(|&cap| {
                    let mut acc = Accumulator::new(kind, cap, rng::stream_rng(cfg.seed, trial).random())?;
                    let est = fill(&mut acc)?;
                    Ok(relative_error(&base, &est, q))
                })
                .collect::<Result<Vec<_>>>()?;
            Ok((summary_err, acc_errs))
        })
        .collect::<Result<_>>()?;
    let summary_err = mean_std(&per_trial.iter().map(|t| t.0).collect::<Vec<_>>()).0;
    Ok(capacities
        .iter()
        .enumerate()
        .map(|(ci, &capacity)| AccumulatorPoint {
            capacity,
            accumulator_err: mean_std(&per_trial.iter().map(|t| t.1[ci]).collect::<Vec<_>>()).0,
            summary_err,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gen::{gen_segments, ValueDist};

    #[test]
    fn method_names() {
        assert_eq!("hierarchy:4".parse::<Method>().unwrap(), Method::Hierarchy(4));
        assert_eq!("hierarchy".parse::<Method>().unwrap(), Method::Hierarchy(2));
        assert_eq!("coop".parse::<Method>().unwrap(), Method::Summary(IntervalMethod::Coop));
        assert_eq!("cms".parse::<Method>().unwrap(), Method::Cms);
        assert!("hierarchyx".parse::<Method>().is_err());
        assert_eq!(Method::Hierarchy(8).to_string(), "hierarchy:8");
    }

    #[test]
    fn doubling() {
        assert_eq!(SweepConfig::doubling_lengths(16), vec![1, 2, 4, 8]);
        assert_eq!(SweepConfig::doubling_lengths(1), vec![1]);
    }

    #[test]
    fn length_one_respects_local_bounds() {
        let segs = gen_segments(ValueDist::zipf(), 32, 512, 1).unwrap();
        let cfg = SweepConfig {
            dataset: "zipf".into(),
            kind: QueryFunction::Frequency,
            size: 16,
            max_interval: 16,
            lengths: vec![1, 4],
            trials: 20,
            methods: vec![
                Method::Summary(IntervalMethod::Coop),
                Method::Summary(IntervalMethod::Truncation),
                Method::Summary(IntervalMethod::Pps),
                Method::Summary(IntervalMethod::Exact),
                Method::Hierarchy(2),
                Method::Cms,
            ],
            seed: 3,
        };
        let res = run_interval_sweep(&segs, &cfg).unwrap();
        assert_eq!(res.rows.len(), 12);
        for m in 0..3 {
            assert!(res.errors[m][0].iter().all(|&e| e <= 1.0 / 16.0 + 1e-12));
        }
        assert!(res.errors[3].iter().flatten().all(|&e| e == 0.0));
        let again = run_interval_sweep(&segs, &cfg).unwrap();
        assert_eq!(res.errors, again.errors);
    }

    #[test]
    fn equal_space_across_methods() {
        let segs = gen_segments(ValueDist::zipf(), 64, 4096, 2).unwrap();
        let coop = CoopConfig::new(64, 64);
        let space = |m| build(m, &segs, &coop, QueryFunction::Frequency, 0).unwrap().space() as f64;
        let base = space(Method::Summary(IntervalMethod::Truncation));
        assert_eq!(base, 64.0 * 64.0);
        for m in [Method::Summary(IntervalMethod::Coop), Method::Cms] {
            assert!((space(m) - base).abs() <= 0.01 * base, "{m}");
        }
    }
}
