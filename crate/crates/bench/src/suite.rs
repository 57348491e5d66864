//! Figure suites: each writes one `fig_*.csv` file.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use segsum::cube::CubeMethod;
use segsum::query::AccumulatorKind;
use segsum::summarize::IntervalMethod;
use segsum::{Error, QueryFunction, Result, Segment};

use crate::cube::{cube_store, run_cube_bench, CubeBenchConfig};
use crate::gen::{gen_records, gen_segments, GenSpec, ValueDist};
use crate::interval::{run_accumulator_sweep, run_interval_sweep, Method, SweepConfig};
use crate::report::{write_rows_to, Row};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Suite {
    IntervalFreq,
    IntervalQuant,
    Cube,
    Accumulator,
    Lesion,
    SizeSweep,
    KtSweep,
    HierarchyBase,
}

impl Suite {
    pub const ALL: [Suite; 8] = [
        Suite::IntervalFreq,
        Suite::IntervalQuant,
        Suite::Cube,
        Suite::Accumulator,
        Suite::Lesion,
        Suite::SizeSweep,
        Suite::KtSweep,
        Suite::HierarchyBase,
    ];

    pub fn file_name(self) -> &'static str {
        match self {
            Suite::IntervalFreq => "fig_interval_freq.csv",
            Suite::IntervalQuant => "fig_interval_quant.csv",
            Suite::Cube => "fig_cube.csv",
            Suite::Accumulator => "fig_accumulator.csv",
            Suite::Lesion => "fig_lesion.csv",
            Suite::SizeSweep => "fig_size_sweep.csv",
            Suite::KtSweep => "fig_kT_sweep.csv",
            Suite::HierarchyBase => "fig_hierarchy_base.csv",
        }
    }

    pub fn name(self) -> &'static str {
        let f = self.file_name();
        &f[4..f.len() - 4]
    }
}

impl FromStr for Suite {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Suite::ALL
            .into_iter()
            .find(|x| x.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::InvalidConfig(format!("unknown bench suite `{s}`")))
    }
}

/// Scale and seed of a benchmark run. Defaults are the desk-scale setup:
/// `10^6` records over 1024 segments with `s = 64` and `k_T = 1024`, and a
/// four-dimensional cube of about `10^4` cells with `S_T = 5 * 10^4`.
#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub records: usize,
    pub segments: usize,
    pub size: usize,
    pub max_interval: u64,
    pub trials: usize,
    pub cube_records: usize,
    pub total_space: usize,
    pub workload_p: f64,
    pub queries: usize,
    pub seed: u64,
    /// Replaces the method list of the interval comparison suites.
    pub interval_methods: Option<Vec<Method>>,
    /// Replaces the method list of the cube comparison suite.
    pub cube_methods: Option<Vec<CubeMethod>>,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            records: 1_000_000,
            segments: 1024,
            size: 64,
            max_interval: 1024,
            trials: 100,
            cube_records: 1_000_000,
            total_space: 50_000,
            workload_p: 0.2,
            queries: 10_000,
            seed: 0,
            interval_methods: None,
            cube_methods: None,
        }
    }
}

impl BenchConfig {
    fn per_segment(&self) -> usize {
        self.records.div_ceil(self.segments)
    }

    pub fn interval_segments(&self, dist: ValueDist) -> Result<Vec<Segment>> {
        gen_segments(dist, self.segments, self.per_segment(), self.seed)
    }

    fn sweep(&self, dist: ValueDist, kind: QueryFunction, methods: Vec<Method>) -> SweepConfig {
        SweepConfig {
            dataset: dist.name().into(),
            kind,
            size: self.size,
            max_interval: self.max_interval,
            lengths: SweepConfig::doubling_lengths(self.max_interval),
            trials: self.trials,
            methods,
            seed: self.seed,
        }
    }

    fn interval_methods(&self, kind: QueryFunction) -> Vec<Method> {
        match &self.interval_methods {
            // Count-Min only answers frequencies.
            Some(m) => m
                .iter()
                .copied()
                .filter(|&m| kind == QueryFunction::Frequency || m != Method::Cms)
                .collect(),
            None => interval_methods(kind),
        }
    }

    fn cube_bench(&self, methods: Vec<CubeMethod>) -> CubeBenchConfig {
        let mut c = CubeBenchConfig::desk(methods, self.seed);
        c.total_space = self.total_space;
        c.train.p = self.workload_p;
        c.eval.p = self.workload_p;
        c.train.samples = self.queries;
        c.eval.samples = self.queries;
        c
    }
}

fn summary(m: IntervalMethod) -> Method {
    Method::Summary(m)
}

pub fn interval_methods(kind: QueryFunction) -> Vec<Method> {
    let mut m = vec![
        summary(IntervalMethod::Coop),
        summary(IntervalMethod::Truncation),
        summary(IntervalMethod::Pps),
        summary(IntervalMethod::USample),
        Method::Hierarchy(2),
    ];
    if kind == QueryFunction::Frequency {
        m.push(Method::Cms);
    }
    m
}

pub const LESION_METHODS: [CubeMethod; 4] = [
    CubeMethod::Storyboard,
    CubeMethod::NoSize,
    CubeMethod::NoBias,
    CubeMethod::NoPps,
];

pub const CUBE_METHODS: [CubeMethod; 6] = [
    CubeMethod::Storyboard,
    CubeMethod::EqualPps,
    CubeMethod::Truncation,
    CubeMethod::USample,
    CubeMethod::USampleProp,
    CubeMethod::Strat,
];

pub const ACCUMULATOR_CAPACITIES: [usize; 4] = [100, 1_000, 10_000, 100_000];

/// Produces the rows of one suite.
pub fn run_suite(suite: Suite, cfg: &BenchConfig) -> Result<Vec<Row>> {
    let zipf = ValueDist::zipf();
    let freq = QueryFunction::Frequency;
    let rank = QueryFunction::Rank;
    match suite {
        Suite::IntervalFreq => {
            let segs = cfg.interval_segments(zipf)?;
            Ok(run_interval_sweep(&segs, &cfg.sweep(zipf, freq, cfg.interval_methods(freq)))?.rows)
        }
        Suite::IntervalQuant => {
            let d = ValueDist::Uniform;
            let segs = cfg.interval_segments(d)?;
            Ok(run_interval_sweep(&segs, &cfg.sweep(d, rank, cfg.interval_methods(rank)))?.rows)
        }
        Suite::Cube | Suite::Lesion => {
            let spec = GenSpec::cube(cfg.cube_records, cfg.seed);
            let store = cube_store(&gen_records(&spec)?, &spec.dims, freq)?;
            let methods = if suite == Suite::Cube {
                cfg.cube_methods.clone().unwrap_or_else(|| CUBE_METHODS.to_vec())
            } else {
                LESION_METHODS.to_vec()
            };
            Ok(run_cube_bench(&store, &cfg.cube_bench(methods))?.rows)
        }
        Suite::Accumulator => {
            let mut rows = Vec::new();
            let length = cfg.max_interval / 2;
            for (dist, kind, acc) in [
                (zipf, freq, AccumulatorKind::SpaceSaving),
                (ValueDist::Uniform, rank, AccumulatorKind::Pps),
            ] {
                let segs = cfg.interval_segments(dist)?;
                let sweep = cfg.sweep(dist, kind, vec![]);
                let points = run_accumulator_sweep(&segs, &sweep, length, acc, &ACCUMULATOR_CAPACITIES)?;
                for p in &points {
                    rows.push(Row {
                        dataset: dist.name().into(),
                        method: format!("{}:{}", acc.as_str(), p.capacity),
                        query_type: kind.as_str().into(),
                        k_or_filters: length.to_string(),
                        mean_err: p.accumulator_err,
                        std_err: 0.0,
                        trials: cfg.trials,
                        seed: cfg.seed,
                        ms: 0.0,
                    });
                }
                rows.push(Row {
                    dataset: dist.name().into(),
                    method: "summaries".into(),
                    query_type: kind.as_str().into(),
                    k_or_filters: length.to_string(),
                    mean_err: points.first().map_or(0.0, |p| p.summary_err),
                    std_err: 0.0,
                    trials: cfg.trials,
                    seed: cfg.seed,
                    ms: 0.0,
                });
            }
            Ok(rows)
        }
        Suite::SizeSweep => {
            let segs = cfg.interval_segments(zipf)?;
            let mut rows = Vec::new();
            for s in [16, 32, 64, 128, 256] {
                let mut sweep = cfg.sweep(zipf, freq, cfg.interval_methods(freq));
                sweep.size = s;
                sweep.lengths = vec![cfg.max_interval / 2];
                for mut r in run_interval_sweep(&segs, &sweep)?.rows {
                    r.k_or_filters = format!("s={s}");
                    rows.push(r);
                }
            }
            Ok(rows)
        }
        Suite::KtSweep => {
            let segs = cfg.interval_segments(zipf)?;
            let mut rows = Vec::new();
            let mut kt = 16;
            while kt <= cfg.max_interval.max(16) && kt as usize <= segs.len() {
                let mut sweep = cfg.sweep(zipf, freq, vec![summary(IntervalMethod::Coop), Method::Hierarchy(2)]);
                sweep.max_interval = kt;
                sweep.lengths = vec![kt / 2];
                for mut r in run_interval_sweep(&segs, &sweep)?.rows {
                    r.k_or_filters = format!("kT={kt}");
                    rows.push(r);
                }
                kt *= 4;
            }
            Ok(rows)
        }
        Suite::HierarchyBase => {
            let segs = cfg.interval_segments(zipf)?;
            let methods = [2, 4, 8, 16].into_iter().map(Method::Hierarchy).collect();
            Ok(run_interval_sweep(&segs, &cfg.sweep(zipf, freq, methods))?.rows)
        }
    }
}

const META: &str = "\
intervals: start positions drawn uniformly over every aligned position with room for the length
probes: 200 distinct values (frequency) or 200 equally spaced quantiles (rank) of the whole dataset
strat: workload-aware uniform-sample sizes from the variance-minimizing rule s_i ~ sqrt(a_i)
quantile baseline: truncation summaries stand in for a mergeable quantile sketch
cube scoring: an independent workload sample from the same distribution as the optimizer's
";

/// Runs `suites` and writes their CSV files under `out`.
pub fn run(suites: &[Suite], cfg: &BenchConfig, out: &Path) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out)?;
    let mut written = Vec::new();
    for &s in suites {
        let rows = run_suite(s, cfg)?;
        let path = out.join(s.file_name());
        write_rows_to(&rows, &path)?;
        written.push(path);
    }
    let meta = out.join("bench_meta.txt");
    fs::write(&meta, format!("{META}config: {cfg:?}\n"))?;
    written.push(meta);
    Ok(written)
}
