//! Cube workloads: build each method's summaries, then score a fresh
//! sample of workload queries.

use std::collections::BTreeMap;
use std::time::Instant;

use rayon::prelude::*;
use segsum::cube::{build_cube, sample_workload, CubeBuildConfig, CubeIndex, CubeMethod, CubeQuery, WorkloadSpec};
use segsum::ingest::{partition_by_cube, DatasetConfig, Dictionaries, Mode, SegmentStore};
use segsum::{QueryFunction, Record, Result, Segment, Value};

use crate::gen::dim_value_name;
use crate::measure::{probe_set, relative_error, PROBES};
use crate::report::Row;

/// In-memory cube store over generated records with `dims[d]` values in
/// dimension `d`.
pub fn cube_store(records: &[Record], dims: &[u64], kind: QueryFunction) -> Result<SegmentStore> {
    let config = DatasetConfig {
        mode: Mode::Cube,
        query_kind: kind,
        dims: (0..dims.len()).map(|d| format!("d{d}")).collect(),
        ..DatasetConfig::default()
    };
    let dicts = Dictionaries {
        values: Vec::new(),
        dims: dims
            .iter()
            .enumerate()
            .map(|(d, &c)| (0..c as u32).map(|v| dim_value_name(d, v)).collect())
            .collect(),
    };
    partition_by_cube(records, &config, dicts)
}

#[derive(Clone, Debug)]
pub struct CubeBenchConfig {
    pub dataset: String,
    pub kind: QueryFunction,
    pub total_space: usize,
    pub min_size: usize,
    /// Workload sample the optimizer sees.
    pub train: WorkloadSpec,
    /// Independent sample the methods are scored on.
    pub eval: WorkloadSpec,
    pub methods: Vec<CubeMethod>,
    pub seed: u64,
}

impl CubeBenchConfig {
    /// `S_T = 5 * 10^4`, `p = 0.2`, 10,000 training and evaluation queries.
    pub fn desk(methods: Vec<CubeMethod>, seed: u64) -> Self {
        CubeBenchConfig {
            dataset: "zipf-cube".into(),
            kind: QueryFunction::Frequency,
            total_space: 50_000,
            min_size: 1,
            train: WorkloadSpec {
                seed,
                ..WorkloadSpec::default()
            },
            eval: WorkloadSpec {
                seed: seed.wrapping_add(1),
                ..WorkloadSpec::default()
            },
            methods,
            seed,
        }
    }
}

pub struct CubeBenchResult {
    pub rows: Vec<Row>,
    /// Workload-weighted mean error per method, in config order.
    pub mean: Vec<f64>,
}

/// `g` of each probe over a bag of weighted entries.
fn evaluate(mut entries: Vec<(Value, f64)>, g: QueryFunction, probes: &[Value]) -> Vec<f64> {
    entries.sort_unstable_by_key(|e| e.0);
    let mut cum = Vec::with_capacity(entries.len());
    let mut acc = 0.0;
    for e in &entries {
        acc += e.1;
        cum.push(acc);
    }
    let upto = |end: usize| if end == 0 { 0.0 } else { cum[end - 1] };
    probes
        .iter()
        .map(|&x| {
            let le = entries.partition_point(|e| e.0 <= x);
            match g {
                QueryFunction::Rank => upto(le),
                QueryFunction::Frequency => upto(le) - upto(entries.partition_point(|e| e.0 < x)),
            }
        })
        .collect()
}

fn weighted_mean_std(pairs: &[(f64, f64)]) -> (f64, f64) {
    let w: f64 = pairs.iter().map(|p| p.1).sum();
    if w == 0.0 {
        return (0.0, 0.0);
    }
    let mean = pairs.iter().map(|p| p.0 * p.1).sum::<f64>() / w;
    let var = pairs.iter().map(|p| (p.0 - mean).powi(2) * p.1).sum::<f64>() / w;
    (mean, var.sqrt())
}

pub fn run_cube_bench(store: &SegmentStore, cfg: &CubeBenchConfig) -> Result<CubeBenchResult> {
    let index = CubeIndex::new(store)?;
    let cells: Vec<&Segment> = store.cube_items().expect("indexed above").values().collect();
    let global = Segment::union(cells.iter().copied(), store.config.domain());
    let probes = probe_set(&global, cfg.kind, PROBES, cfg.seed);
    let workload = sample_workload(&cfg.eval, &index)?;
    let queries: &[CubeQuery] = &workload.queries;
    let truths: Vec<Vec<f64>> = queries
        .par_iter()
        .map(|q| {
            let entries = q
                .segments
                .iter()
                .flat_map(|&i| cells[i].entries().iter().map(|&(v, c)| (v, c as f64)))
                .collect();
            evaluate(entries, cfg.kind, &probes)
        })
        .collect();

    let mut rows = Vec::new();
    let mut mean = Vec::new();
    for &method in &cfg.methods {
        let t = Instant::now();
        let build = CubeBuildConfig {
            method,
            workload: cfg.train.clone(),
            total_space: cfg.total_space,
            min_size: cfg.min_size,
            seed: cfg.seed,
            query_kind: cfg.kind,
        };
        let (summaries, _) = build_cube(store, &build)?;
        let sums: Vec<_> = summaries.cube_items().expect("cube store").values().collect();
        let errs: Vec<f64> = queries
            .par_iter()
            .zip(&truths)
            .map(|(q, truth)| {
                let entries = q
                    .segments
                    .iter()
                    .flat_map(|&i| sums[i].entries().iter().copied())
                    .collect();
                relative_error(truth, &evaluate(entries, cfg.kind, &probes), q.weight)
            })
            .collect();
        let ms = t.elapsed().as_secs_f64() * 1e3;
        let mut by_filters: BTreeMap<usize, Vec<(f64, f64)>> = BTreeMap::new();
        let mut all = Vec::with_capacity(queries.len());
        for (q, &e) in queries.iter().zip(&errs) {
            let w = q.multiplicity as f64;
            all.push((e, w));
            by_filters
                .entry(q.filter.iter().filter(|f| f.is_some()).count())
                .or_default()
                .push((e, w));
        }
        let mut push = |label: String, pairs: &[(f64, f64)]| {
            let (m, s) = weighted_mean_std(pairs);
            rows.push(Row {
                dataset: cfg.dataset.clone(),
                method: method.as_str().into(),
                query_type: cfg.kind.as_str().into(),
                k_or_filters: label,
                mean_err: m,
                std_err: s,
                trials: pairs.iter().map(|p| p.1 as usize).sum(),
                seed: cfg.seed,
                ms,
            });
            m
        };
        mean.push(push("all".into(), &all));
        for (f, pairs) in &by_filters {
            push(f.to_string(), pairs);
        }
    }
    Ok(CubeBenchResult { rows, mean })
}
