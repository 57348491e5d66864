use std::collections::{BTreeMap, HashMap};

use rand::Rng;

use crate::error::{Error, Result};
use crate::ingest::{CubeKey, SegmentStore};
use crate::rng;

/// Random cube queries: each dimension is filtered independently with
/// probability `p`, on a value drawn uniformly from the observed values.
#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSpec {
    pub p: f64,
    pub samples: usize,
    pub seed: u64,
    /// Per-dimension overrides of `p`.
    pub dim_p: Vec<Option<f64>>,
    /// Redraws for a query that matches no segment before it is dropped.
    pub max_retries: usize,
}

impl Default for WorkloadSpec {
    fn default() -> Self {
        WorkloadSpec {
            p: 0.2,
            samples: 10_000,
            seed: 0,
            dim_p: Vec::new(),
            max_retries: 100,
        }
    }
}

impl WorkloadSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |p: f64| (0.0..=1.0).contains(&p);
        if !ok(self.p) || self.dim_p.iter().flatten().any(|&p| !ok(p)) {
            return Err(Error::config("workload inclusion probabilities must lie in [0, 1]"));
        }
        if self.samples == 0 {
            return Err(Error::config("workload sample count must be at least 1"));
        }
        Ok(())
    }

    pub fn dim_probability(&self, dim: usize) -> f64 {
        self.dim_p.get(dim).copied().flatten().unwrap_or(self.p)
    }
}

/// Inverted index from dimension values to cube cells, in key order.
#[derive(Clone, Debug)]
pub struct CubeIndex {
    pub keys: Vec<CubeKey>,
    /// Total weight `n_i` of each cell.
    pub weights: Vec<f64>,
    postings: Vec<HashMap<u32, Vec<usize>>>,
    observed: Vec<Vec<u32>>,
}

impl CubeIndex {
    pub fn new(store: &SegmentStore) -> Result<Self> {
        let items = store
            .cube_items()
            .ok_or_else(|| Error::config("cube operations need a cube-mode store"))?;
        let dims = store.config.dims.len();
        let mut postings: Vec<HashMap<u32, Vec<usize>>> = vec![HashMap::new(); dims];
        let mut keys = Vec::with_capacity(items.len());
        let mut weights = Vec::with_capacity(items.len());
        for (i, (key, seg)) in items.iter().enumerate() {
            if key.len() != dims {
                return Err(Error::config(format!(
                    "cube key has {} dimensions, expected {dims}",
                    key.len()
                )));
            }
            for (d, &v) in key.iter().enumerate() {
                postings[d].entry(v).or_default().push(i);
            }
            keys.push(key.clone());
            weights.push(seg.total() as f64);
        }
        let observed = postings
            .iter()
            .map(|m| {
                let mut vs: Vec<u32> = m.keys().copied().collect();
                vs.sort_unstable();
                vs
            })
            .collect();
        Ok(CubeIndex {
            keys,
            weights,
            postings,
            observed,
        })
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    pub fn dims(&self) -> usize {
        self.postings.len()
    }

    pub fn observed(&self, dim: usize) -> &[u32] {
        &self.observed[dim]
    }

    /// Cells matching every `Some` entry of `filter`, in key order.
    pub fn matching(&self, filter: &[Option<u32>]) -> Vec<usize> {
        let mut lists: Vec<&[usize]> = Vec::new();
        for (d, f) in filter.iter().enumerate() {
            if let Some(v) = f {
                match self.postings[d].get(v) {
                    Some(list) => lists.push(list),
                    None => return Vec::new(),
                }
            }
        }
        if lists.is_empty() {
            return (0..self.len()).collect();
        }
        lists.sort_by_key(|l| l.len());
        let mut out: Vec<usize> = lists[0].to_vec();
        for other in &lists[1..] {
            out.retain(|i| other.binary_search(i).is_ok());
        }
        out
    }
}

/// One distinct sampled query.
#[derive(Clone, Debug, PartialEq)]
pub struct CubeQuery {
    pub filter: Vec<Option<u32>>,
    pub segments: Vec<usize>,
    /// `|Q|`: total weight of the matched cells.
    pub weight: f64,
    pub multiplicity: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct WorkloadSample {
    pub queries: Vec<CubeQuery>,
    /// Number of draws; `q_z = multiplicity / draws`.
    pub draws: usize,
}

impl WorkloadSample {
    pub fn probability(&self, q: &CubeQuery) -> f64 {
        q.multiplicity as f64 / self.draws as f64
    }
}

/// Draws `spec.samples` queries and merges duplicates.
pub fn sample_workload(spec: &WorkloadSpec, index: &CubeIndex) -> Result<WorkloadSample> {
    spec.validate()?;
    if index.is_empty() {
        return Err(Error::config("cannot sample a workload over an empty cube"));
    }
    let mut rng = rng::seeded(spec.seed);
    let mut counts: BTreeMap<Vec<Option<u32>>, (usize, Vec<usize>)> = BTreeMap::new();
    for _ in 0..spec.samples {
        for _ in 0..=spec.max_retries {
            let filter: Vec<Option<u32>> = (0..index.dims())
                .map(|d| {
                    let p = spec.dim_probability(d);
                    // Draw both numbers every time so streams stay aligned.
                    let include = rng.random::<f64>() < p;
                    let obs = index.observed(d);
                    let pick = rng.random_range(0..obs.len().max(1));
                    if include && !obs.is_empty() {
                        Some(obs[pick])
                    } else {
                        None
                    }
                })
                .collect();
            if let Some(entry) = counts.get_mut(&filter) {
                entry.0 += 1;
                break;
            }
            let segs = index.matching(&filter);
            if !segs.is_empty() {
                counts.insert(filter, (1, segs));
                break;
            }
        }
    }
    let queries = counts
        .into_iter()
        .map(|(filter, (multiplicity, segments))| {
            let weight = segments.iter().map(|&i| index.weights[i]).sum();
            CubeQuery {
                filter,
                segments,
                weight,
                multiplicity,
            }
        })
        .collect();
    Ok(WorkloadSample {
        queries,
        draws: spec.samples,
    })
}
