//! Workload-aware PPS summaries for data cubes.
//!
//! Sizes follow the closed-form minimizer of the workload mean squared
//! relative error bound, and frequency summaries additionally get per-cell
//! biases that trade a little bias for less sampling variance on the
//! whole-cube aggregate.

mod alloc;
mod bias;
mod workload;

pub use alloc::{allocate_by_weights, allocate_sizes, allocation_scores, continuous_allocation, round_preserving_sum};
pub use bias::{bias_objective, effective_weight, optimize_biases, BiasSolution};
pub use workload::{sample_workload, CubeIndex, CubeQuery, WorkloadSample, WorkloadSpec};

use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::baselines::{prop_allocate, strat_allocate, truncation_summarize, usample_summarize};
use crate::error::{Error, Result};
use crate::ingest::{CubeKey, Layout, SegmentStore, Store, SummaryStore};
use crate::model::{QueryFunction, Segment, Summary, SummaryMethod};
use crate::pps::pps_summarize;
use crate::rng;

/// Cube construction strategies: the full optimizer, its lesions, and
/// the equal or workload-agnostic baselines.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum CubeMethod {
    /// Optimized sizes, optimized biases, PPS.
    Storyboard,
    /// Equal sizes with optimized biases.
    NoSize,
    /// Optimized sizes without bias.
    NoBias,
    /// Optimized sizes with uniform samples in place of PPS.
    NoPps,
    /// Equal sizes, no bias, PPS.
    EqualPps,
    /// Equal sizes, top counts or evenly spaced values.
    Truncation,
    /// Equal-size uniform samples.
    USample,
    /// Uniform samples sized proportionally to cell weight.
    USampleProp,
    /// Uniform samples with workload-optimal sizes.
    Strat,
}

impl CubeMethod {
    pub const ALL: [CubeMethod; 9] = [
        CubeMethod::Storyboard,
        CubeMethod::NoSize,
        CubeMethod::NoBias,
        CubeMethod::NoPps,
        CubeMethod::EqualPps,
        CubeMethod::Truncation,
        CubeMethod::USample,
        CubeMethod::USampleProp,
        CubeMethod::Strat,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            CubeMethod::Storyboard => "storyboard",
            CubeMethod::NoSize => "storyboard-no-size",
            CubeMethod::NoBias => "storyboard-no-bias",
            CubeMethod::NoPps => "storyboard-no-pps",
            CubeMethod::EqualPps => "pps",
            CubeMethod::Truncation => "truncation",
            CubeMethod::USample => "usample",
            CubeMethod::USampleProp => "usample-prop",
            CubeMethod::Strat => "strat",
        }
    }

    fn uses_workload(self) -> bool {
        matches!(
            self,
            CubeMethod::Storyboard | CubeMethod::NoBias | CubeMethod::NoPps | CubeMethod::Strat
        )
    }

    fn uses_bias(self) -> bool {
        matches!(self, CubeMethod::Storyboard | CubeMethod::NoSize)
    }
}

impl FromStr for CubeMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let m = match s {
            "storyboard" | "sb" | "coop" => CubeMethod::Storyboard,
            "storyboard-no-size" | "no-size" => CubeMethod::NoSize,
            "storyboard-no-bias" | "no-bias" => CubeMethod::NoBias,
            "storyboard-no-pps" | "no-pps" => CubeMethod::NoPps,
            "pps" => CubeMethod::EqualPps,
            "truncation" => CubeMethod::Truncation,
            "usample" => CubeMethod::USample,
            "usample-prop" => CubeMethod::USampleProp,
            "strat" => CubeMethod::Strat,
            other => return Err(Error::config(format!("unknown cube method `{other}`"))),
        };
        Ok(m)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CubeBuildConfig {
    pub method: CubeMethod,
    pub workload: WorkloadSpec,
    pub total_space: usize,
    pub min_size: usize,
    pub seed: u64,
    pub query_kind: QueryFunction,
}

/// Per-cell plan: scores, sizes and biases, in cube key order.
#[derive(Clone, Debug, PartialEq)]
pub struct Allocation {
    pub keys: Vec<CubeKey>,
    pub weights: Vec<f64>,
    pub scores: Vec<f64>,
    pub sizes: Vec<usize>,
    pub biases: Vec<f64>,
    /// Bias objective at the chosen biases, when biases were optimized.
    pub objective: Option<f64>,
    pub converged: bool,
}

impl Allocation {
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let err = |e: csv::Error| Error::Csv(e.to_string());
        w.write_record(["segment", "n", "alpha", "s", "b"]).map_err(err)?;
        for i in 0..self.keys.len() {
            let key: Vec<String> = self.keys[i].iter().map(|d| d.to_string()).collect();
            w.write_record([
                key.join("|"),
                self.weights[i].to_string(),
                self.scores[i].to_string(),
                self.sizes[i].to_string(),
                self.biases[i].to_string(),
            ])
            .map_err(err)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Computes sizes and biases without building summaries.
pub fn plan_cube(store: &SegmentStore, index: &CubeIndex, config: &CubeBuildConfig) -> Result<Allocation> {
    let items = store
        .cube_items()
        .ok_or_else(|| Error::config("cube construction needs a cube-mode store"))?;
    let m = index.len();
    let total = config.total_space;
    if (config.min_size as u128) * (m as u128) > total as u128 {
        return Err(Error::InfeasibleBudget(format!(
            "{m} segments at s_min = {} need {} slots, budget is {total}",
            config.min_size,
            config.min_size as u128 * m as u128
        )));
    }
    let scores = if config.method.uses_workload() {
        let sample = sample_workload(&config.workload, index)?;
        allocation_scores(&index.weights, &sample)
    } else {
        vec![0.0; m]
    };
    let sizes = match config.method {
        CubeMethod::Storyboard | CubeMethod::NoBias | CubeMethod::NoPps => {
            allocate_sizes(&scores, total, config.min_size)?
        }
        CubeMethod::Strat => strat_allocate(&scores, total, config.min_size)?,
        CubeMethod::USampleProp => prop_allocate(&index.weights, total, config.min_size)?,
        CubeMethod::NoSize | CubeMethod::EqualPps | CubeMethod::Truncation | CubeMethod::USample => {
            allocate_by_weights(&vec![1.0; m], total, config.min_size)?
        }
    };
    let (biases, objective, converged) = if config.method.uses_bias() && config.query_kind == QueryFunction::Frequency {
        let segs: Vec<&Segment> = items.values().collect();
        let sol = optimize_biases(&segs, &sizes)?;
        if !sol.converged {
            log::warn!("bias optimization stopped before convergence");
        }
        (sol.biases, Some(sol.objective), sol.converged)
    } else {
        (vec![0.0; m], None, true)
    };
    Ok(Allocation {
        keys: index.keys.clone(),
        weights: index.weights.clone(),
        scores,
        sizes,
        biases,
        objective,
        converged,
    })
}

fn summarize_cell(
    method: CubeMethod,
    kind: QueryFunction,
    segment: &Segment,
    size: usize,
    bias: f64,
    rng: &mut rng::Rng,
) -> Result<Summary> {
    if size == 0 {
        let tag = match method {
            CubeMethod::Truncation => SummaryMethod::Truncation,
            CubeMethod::NoPps | CubeMethod::USample | CubeMethod::USampleProp | CubeMethod::Strat => {
                SummaryMethod::USample
            }
            _ => SummaryMethod::Pps,
        };
        return Ok(Summary::empty(0, tag, segment.domain()));
    }
    match method {
        CubeMethod::Storyboard | CubeMethod::NoSize | CubeMethod::NoBias | CubeMethod::EqualPps => {
            pps_summarize(segment, size, bias, rng)
        }
        CubeMethod::Truncation => truncation_summarize(segment, size, kind),
        CubeMethod::NoPps | CubeMethod::USample | CubeMethod::USampleProp | CubeMethod::Strat => {
            usample_summarize(segment, size, rng)
        }
    }
}

/// Builds summaries for a planned allocation. Cell `i` draws from its own
/// random stream, so output does not depend on thread scheduling.
pub fn build_from_allocation(
    store: &SegmentStore,
    allocation: &Allocation,
    method: CubeMethod,
    kind: QueryFunction,
    seed: u64,
) -> Result<SummaryStore> {
    let items = store
        .cube_items()
        .ok_or_else(|| Error::config("cube construction needs a cube-mode store"))?;
    let cells: Vec<(&CubeKey, &Segment)> = items.iter().collect();
    let summaries = cells
        .par_iter()
        .enumerate()
        .map(|(i, (key, seg))| {
            let mut r = rng::stream_rng(seed, i as u64);
            let s = summarize_cell(method, kind, seg, allocation.sizes[i], allocation.biases[i], &mut r)?;
            Ok(((*key).clone(), s))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut meta = store.meta.clone();
    meta.insert("method".into(), method.as_str().into());
    meta.insert(
        "cube.total_space".into(),
        allocation.sizes.iter().sum::<usize>().to_string(),
    );
    if let Some(j) = allocation.objective {
        meta.insert("cube.bias_objective".into(), j.to_string());
    }
    Ok(Store {
        config: store.config.clone(),
        dictionaries: store.dictionaries.clone(),
        layout: Layout::Cube {
            items: summaries.into_iter().collect(),
        },
        meta,
    })
}

/// Plans and builds a cube summary store.
pub fn build_cube(store: &SegmentStore, config: &CubeBuildConfig) -> Result<(SummaryStore, Allocation)> {
    let index = CubeIndex::new(store)?;
    let allocation = plan_cube(store, &index, config)?;
    let out = build_from_allocation(store, &allocation, config.method, config.query_kind, config.seed)?;
    Ok((out, allocation))
}
