//! Partitioning records into atomic segments, and the on-disk store.

mod csv_input;
mod persist;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

pub use csv_input::{read_csv, CsvLayout, Dataset};
pub use persist::{load_segments, load_summaries, save_segments, save_summaries, STORE_VERSION};

use crate::error::{Error, Result};
use crate::model::{QueryFunction, Record, Segment, Summary, Value, ValueDomain};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Interval,
    Cube,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Interval => "interval",
            Mode::Cube => "cube",
        }
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "interval" => Ok(Mode::Interval),
            "cube" => Ok(Mode::Cube),
            other => Err(Error::config(format!("unknown mode `{other}`"))),
        }
    }
}

/// Dataset-wide settings fixed at ingest.
#[derive(Clone, Debug, PartialEq)]
pub struct DatasetConfig {
    pub mode: Mode,
    pub query_kind: QueryFunction,
    /// Width of one interval segment in time units.
    pub time_resolution: u64,
    /// Longest supported interval, in segments; also the prefix reset period.
    pub max_interval: u64,
    pub dims: Vec<String>,
    /// Per-summary size for interval summaries.
    pub summary_size: usize,
    /// Total summary budget for cube summaries.
    pub total_space: u64,
    pub min_size: usize,
    pub seed: u64,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        DatasetConfig {
            mode: Mode::Interval,
            query_kind: QueryFunction::Frequency,
            time_resolution: 1,
            max_interval: 1024,
            dims: Vec::new(),
            summary_size: 64,
            total_space: 50_000,
            min_size: 1,
            seed: 0,
        }
    }
}

impl DatasetConfig {
    pub fn domain(&self) -> ValueDomain {
        match self.query_kind {
            QueryFunction::Frequency => ValueDomain::Categorical,
            QueryFunction::Rank => ValueDomain::Ordinal,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.time_resolution == 0 {
            return Err(Error::config("time resolution T_G must be positive"));
        }
        if self.max_interval == 0 {
            return Err(Error::config("k_T must be at least 1"));
        }
        if self.summary_size == 0 {
            return Err(Error::config("summary size s must be at least 1"));
        }
        if self.min_size > self.summary_size {
            return Err(Error::config(format!(
                "s_min ({}) exceeds s ({})",
                self.min_size, self.summary_size
            )));
        }
        Ok(())
    }
}

/// Interned dimension-value vector identifying one cube cell.
pub type CubeKey = Vec<u32>;

#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum SegmentKey {
    Interval(u64),
    Cube(CubeKey),
}

impl fmt::Display for SegmentKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SegmentKey::Interval(i) => write!(f, "{i}"),
            SegmentKey::Cube(k) => {
                let parts: Vec<String> = k.iter().map(|d| d.to_string()).collect();
                write!(f, "{}", parts.join("|"))
            }
        }
    }
}

/// String dictionaries for interned ids.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Dictionaries {
    /// Categorical value names by id; empty for ordinal data.
    pub values: Vec<String>,
    /// Per-dimension value names by id.
    pub dims: Vec<Vec<String>>,
}

impl Dictionaries {
    pub fn value_id(&self, name: &str) -> Option<Value> {
        self.values
            .binary_search_by(|v| v.as_str().cmp(name))
            .ok()
            .map(|i| Value::from_id(i as u64))
    }

    pub fn dim_value_id(&self, dim: usize, name: &str) -> Option<u32> {
        self.dims
            .get(dim)?
            .binary_search_by(|v| v.as_str().cmp(name))
            .ok()
            .map(|i| i as u32)
    }

    pub fn value_name(&self, domain: ValueDomain, v: Value) -> String {
        match domain {
            ValueDomain::Ordinal => format!("{}", v.to_f64()),
            ValueDomain::Categorical => self
                .values
                .get(v.id() as usize)
                .cloned()
                .unwrap_or_else(|| format!("#{}", v.id())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Layout<T> {
    /// Dense run of segments starting at absolute index `first`.
    Interval {
        first: u64,
        items: Vec<T>,
    },
    Cube {
        items: BTreeMap<CubeKey, T>,
    },
}

/// A partitioned dataset, either of exact segments or of their summaries.
#[derive(Clone, Debug, PartialEq)]
pub struct Store<T> {
    pub config: DatasetConfig,
    pub dictionaries: Dictionaries,
    pub layout: Layout<T>,
    /// Free-form manifest entries (method, allocation notes, ...).
    pub meta: BTreeMap<String, String>,
}

pub type SegmentStore = Store<Segment>;
pub type SummaryStore = Store<Summary>;

impl<T> Store<T> {
    pub fn len(&self) -> usize {
        match &self.layout {
            Layout::Interval { items, .. } => items.len(),
            Layout::Cube { items } => items.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn mode(&self) -> Mode {
        match self.layout {
            Layout::Interval { .. } => Mode::Interval,
            Layout::Cube { .. } => Mode::Cube,
        }
    }

    pub fn iter(&self) -> Box<dyn Iterator<Item = (SegmentKey, &T)> + '_> {
        match &self.layout {
            Layout::Interval { first, items } => Box::new(
                items
                    .iter()
                    .enumerate()
                    .map(move |(i, t)| (SegmentKey::Interval(first + i as u64), t)),
            ),
            Layout::Cube { items } => Box::new(items.iter().map(|(k, t)| (SegmentKey::Cube(k.clone()), t))),
        }
    }

    pub fn get(&self, key: &SegmentKey) -> Option<&T> {
        match (key, &self.layout) {
            (SegmentKey::Interval(i), Layout::Interval { first, items }) => {
                i.checked_sub(*first).and_then(|off| items.get(off as usize))
            }
            (SegmentKey::Cube(k), Layout::Cube { items }) => items.get(k),
            _ => None,
        }
    }

    /// Absolute index range `[first, end)` covered by an interval store.
    pub fn interval_range(&self) -> Option<(u64, u64)> {
        match &self.layout {
            Layout::Interval { first, items } => Some((*first, first + items.len() as u64)),
            Layout::Cube { .. } => None,
        }
    }

    pub fn interval_items(&self) -> Option<&[T]> {
        match &self.layout {
            Layout::Interval { items, .. } => Some(items),
            Layout::Cube { .. } => None,
        }
    }

    pub fn cube_items(&self) -> Option<&BTreeMap<CubeKey, T>> {
        match &self.layout {
            Layout::Cube { items } => Some(items),
            Layout::Interval { .. } => None,
        }
    }

    /// Same shape and metadata, new per-segment payload.
    pub fn map<U, F>(&self, mut f: F) -> Store<U>
    where
        F: FnMut(&SegmentKey, &T) -> U,
    {
        let layout = match &self.layout {
            Layout::Interval { first, items } => Layout::Interval {
                first: *first,
                items: items
                    .iter()
                    .enumerate()
                    .map(|(i, t)| f(&SegmentKey::Interval(first + i as u64), t))
                    .collect(),
            },
            Layout::Cube { items } => Layout::Cube {
                items: items
                    .iter()
                    .map(|(k, t)| (k.clone(), f(&SegmentKey::Cube(k.clone()), t)))
                    .collect(),
            },
        };
        Store {
            config: self.config.clone(),
            dictionaries: self.dictionaries.clone(),
            layout,
            meta: self.meta.clone(),
        }
    }

    pub fn try_map<U, F>(&self, mut f: F) -> Result<Store<U>>
    where
        F: FnMut(&SegmentKey, &T) -> Result<U>,
    {
        let layout = match &self.layout {
            Layout::Interval { first, items } => Layout::Interval {
                first: *first,
                items: items
                    .iter()
                    .enumerate()
                    .map(|(i, t)| f(&SegmentKey::Interval(first + i as u64), t))
                    .collect::<Result<_>>()?,
            },
            Layout::Cube { items } => Layout::Cube {
                items: items
                    .iter()
                    .map(|(k, t)| Ok((k.clone(), f(&SegmentKey::Cube(k.clone()), t)?)))
                    .collect::<Result<_>>()?,
            },
        };
        Ok(Store {
            config: self.config.clone(),
            dictionaries: self.dictionaries.clone(),
            layout,
            meta: self.meta.clone(),
        })
    }

    /// Index of a named dimension.
    pub fn dim_index(&self, name: &str) -> Result<usize> {
        self.config
            .dims
            .iter()
            .position(|d| d == name)
            .ok_or_else(|| Error::UnknownDimension(name.to_string()))
    }
}

impl SegmentStore {
    pub fn total_records(&self) -> u64 {
        self.iter().map(|(_, s)| s.total()).sum()
    }
}

/// Segment index `floor(t / T_G)` for every record. Empty segments between
/// the first and last occupied index are kept.
pub fn partition_by_time(
    records: &[Record],
    config: &DatasetConfig,
    dictionaries: Dictionaries,
) -> Result<SegmentStore> {
    config.validate()?;
    let tg = config.time_resolution;
    let mut indexed = Vec::with_capacity(records.len());
    for r in records {
        let t = r.time.ok_or_else(|| Error::MissingField("timestamp".into()))?;
        if t < 0 {
            return Err(Error::NegativeTimestamp(t));
        }
        indexed.push((t as u64 / tg, r.value));
    }
    let (first, items) = match (indexed.iter().map(|e| e.0).min(), indexed.iter().map(|e| e.0).max()) {
        (Some(lo), Some(hi)) => {
            let mut buckets: Vec<Vec<Value>> = vec![Vec::new(); (hi - lo + 1) as usize];
            for (i, v) in indexed {
                buckets[(i - lo) as usize].push(v);
            }
            let domain = config.domain();
            let items = buckets.into_iter().map(|b| Segment::from_values(b, domain)).collect();
            (lo, items)
        }
        _ => (0, Vec::new()),
    };
    Ok(Store {
        config: DatasetConfig {
            mode: Mode::Interval,
            ..config.clone()
        },
        dictionaries,
        layout: Layout::Interval { first, items },
        meta: BTreeMap::new(),
    })
}

/// One segment per observed combination of all dimension values.
pub fn partition_by_cube(
    records: &[Record],
    config: &DatasetConfig,
    dictionaries: Dictionaries,
) -> Result<SegmentStore> {
    config.validate()?;
    let m = config.dims.len();
    let mut cells: BTreeMap<CubeKey, Vec<Value>> = BTreeMap::new();
    for r in records {
        if r.dims.len() != m {
            return Err(Error::MissingField(format!(
                "dimension values (expected {m}, found {})",
                r.dims.len()
            )));
        }
        cells.entry(r.dims.clone()).or_default().push(r.value);
    }
    let domain = config.domain();
    let items = cells
        .into_iter()
        .map(|(k, vals)| (k, Segment::from_values(vals, domain)))
        .collect();
    Ok(Store {
        config: DatasetConfig {
            mode: Mode::Cube,
            ..config.clone()
        },
        dictionaries,
        layout: Layout::Cube { items },
        meta: BTreeMap::new(),
    })
}

/// Dispatches on `config.mode`.
pub fn partition(records: &[Record], config: &DatasetConfig, dictionaries: Dictionaries) -> Result<SegmentStore> {
    match config.mode {
        Mode::Interval => partition_by_time(records, config, dictionaries),
        Mode::Cube => partition_by_cube(records, config, dictionaries),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(value: u64, time: i64) -> Record {
        Record {
            value: Value::from_id(value),
            time: Some(time),
            dims: vec![],
        }
    }

    fn interval_config(tg: u64) -> DatasetConfig {
        DatasetConfig {
            time_resolution: tg,
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn time_partition_groups_by_floor() {
        let records = [rec(1, 0), rec(2, 4), rec(3, 5)];
        let store = partition_by_time(&records, &interval_config(5), Dictionaries::default()).unwrap();
        let segs = store.interval_items().unwrap();
        assert_eq!(segs.len(), 2);
        assert_eq!(segs[0].total(), 2);
        assert_eq!(segs[1].total(), 1);
        assert_eq!(segs[1].count(Value::from_id(3)), 1);
    }

    #[test]
    fn empty_input_gives_empty_store() {
        let store = partition_by_time(&[], &interval_config(5), Dictionaries::default()).unwrap();
        assert!(store.is_empty());
    }

    #[test]
    fn uniform_times_give_equal_segments() {
        let records: Vec<Record> = (0..100).map(|t| rec(t as u64 % 7, t)).collect();
        let store = partition_by_time(&records, &interval_config(10), Dictionaries::default()).unwrap();
        let segs = store.interval_items().unwrap();
        assert_eq!(segs.len(), 10);
        assert!(segs.iter().all(|s| s.total() == 10));
        assert_eq!(store.total_records(), 100);
    }

    #[test]
    fn gaps_are_materialized_and_offset_kept() {
        let records = [rec(1, 20), rec(1, 45)];
        let store = partition_by_time(&records, &interval_config(10), Dictionaries::default()).unwrap();
        assert_eq!(store.interval_range(), Some((2, 5)));
        assert!(store.get(&SegmentKey::Interval(3)).unwrap().is_empty());
    }

    #[test]
    fn negative_and_missing_timestamps_rejected() {
        let err = partition_by_time(&[rec(1, -3)], &interval_config(5), Dictionaries::default());
        assert!(matches!(err, Err(Error::NegativeTimestamp(-3))));
        let missing = Record {
            value: Value::from_id(1),
            time: None,
            dims: vec![],
        };
        assert!(partition_by_time(&[missing], &interval_config(5), Dictionaries::default()).is_err());
    }

    fn cube_rec(dims: &[u32]) -> Record {
        Record {
            value: Value::from_id(0),
            time: None,
            dims: dims.to_vec(),
        }
    }

    fn cube_config(m: usize) -> DatasetConfig {
        DatasetConfig {
            mode: Mode::Cube,
            dims: (0..m).map(|i| format!("d{i}")).collect(),
            ..DatasetConfig::default()
        }
    }

    #[test]
    fn cube_partition_one_segment_per_combination() {
        let records = [cube_rec(&[0, 0]), cube_rec(&[0, 0]), cube_rec(&[0, 1])];
        let store = partition_by_cube(&records, &cube_config(2), Dictionaries::default()).unwrap();
        let weights: Vec<u64> = store.iter().map(|(_, s)| s.total()).collect();
        assert_eq!(weights, vec![2, 1]);

        let single = partition_by_cube(&[cube_rec(&[3, 1])], &cube_config(2), Dictionaries::default()).unwrap();
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn dense_cube_has_v_to_the_m_cells() {
        let v = 3u32;
        let mut records = Vec::new();
        for a in 0..v {
            for b in 0..v {
                for c in 0..v {
                    for d in 0..v {
                        records.push(cube_rec(&[a, b, c, d]));
                    }
                }
            }
        }
        let store = partition_by_cube(&records, &cube_config(4), Dictionaries::default()).unwrap();
        assert_eq!(store.len(), 81);
        assert_eq!(store.total_records(), 81);
    }

    #[test]
    fn cube_records_need_every_dimension() {
        assert!(partition_by_cube(&[cube_rec(&[1])], &cube_config(2), Dictionaries::default()).is_err());
    }
}
