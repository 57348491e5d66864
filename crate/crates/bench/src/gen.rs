//! Seeded synthetic datasets.

use std::io::Write;
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Zipf};
use segsum::rng;
use segsum::{Error, Record, Result, Segment, Value, ValueDomain};

pub const ZIPF_EXPONENT: f64 = 1.1;
pub const ZIPF_SUPPORT: u64 = 100_000;

/// Value distribution of a synthetic column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ValueDist {
    /// Categorical ranks `1..=support`, `Pr(j)` proportional to `j^-exponent`.
    Zipf { support: u64, exponent: f64 },
    /// Continuous `U[0, 1]`.
    Uniform,
}

impl ValueDist {
    pub fn zipf() -> Self {
        ValueDist::Zipf {
            support: ZIPF_SUPPORT,
            exponent: ZIPF_EXPONENT,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            ValueDist::Zipf { .. } => "zipf",
            ValueDist::Uniform => "uniform",
        }
    }

    pub fn domain(&self) -> ValueDomain {
        match self {
            ValueDist::Zipf { .. } => ValueDomain::Categorical,
            ValueDist::Uniform => ValueDomain::Ordinal,
        }
    }
}

impl FromStr for ValueDist {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "zipf" => Ok(ValueDist::zipf()),
            "uniform" => Ok(ValueDist::Uniform),
            other => Err(Error::InvalidConfig(format!("unknown distribution `{other}`"))),
        }
    }
}

fn zipf(support: u64, exponent: f64) -> Result<Zipf<f64>> {
    Zipf::new(support as f64, exponent).map_err(|e| Error::InvalidConfig(format!("zipf: {e}")))
}

/// `n` values; Zipf ranks map to ids `rank - 1`.
pub fn gen_values(dist: ValueDist, n: usize, seed: u64) -> Result<Vec<Value>> {
    let mut r = rng::seeded(seed);
    match dist {
        ValueDist::Zipf { support, exponent } => {
            let z = zipf(support, exponent)?;
            Ok((0..n).map(|_| Value::from_id(z.sample(&mut r) as u64 - 1)).collect())
        }
        ValueDist::Uniform => (0..n).map(|_| Value::from_f64(r.random::<f64>())).collect(),
    }
}

/// Consecutive runs of `per_segment` values as segments.
pub fn segments_from_values(values: &[Value], per_segment: usize, domain: ValueDomain) -> Vec<Segment> {
    values
        .chunks(per_segment.max(1))
        .map(|c| Segment::from_values(c.iter().copied(), domain))
        .collect()
}

/// `segments` segments of `per_segment` values each.
pub fn gen_segments(dist: ValueDist, segments: usize, per_segment: usize, seed: u64) -> Result<Vec<Segment>> {
    let values = gen_values(dist, segments * per_segment, seed)?;
    Ok(segments_from_values(&values, per_segment, dist.domain()))
}

/// Synthetic dataset description for record generation.
#[derive(Clone, Debug, PartialEq)]
pub struct GenSpec {
    pub dist: ValueDist,
    pub n: usize,
    /// Cardinality of each dimension; dimension values are Zipf-skewed.
    pub dims: Vec<u64>,
    pub seed: u64,
}

impl GenSpec {
    /// Four skewed dimensions of ten values each: about `10^4` cells.
    pub fn cube(n: usize, seed: u64) -> Self {
        GenSpec {
            dist: ValueDist::zipf(),
            n,
            dims: vec![10; 4],
            seed,
        }
    }
}

/// Records with `time = index` and one Zipf-distributed id per dimension.
pub fn gen_records(spec: &GenSpec) -> Result<Vec<Record>> {
    if spec.n == 0 {
        return Err(Error::InvalidConfig("n must be at least 1".into()));
    }
    let values = gen_values(spec.dist, spec.n, spec.seed)?;
    let mut r = rng::stream_rng(spec.seed, 1);
    let dims: Vec<Zipf<f64>> = spec
        .dims
        .iter()
        .map(|&c| zipf(c, ZIPF_EXPONENT))
        .collect::<Result<_>>()?;
    Ok(values
        .into_iter()
        .enumerate()
        .map(|(i, value)| Record {
            value,
            time: Some(i as i64),
            dims: dims.iter().map(|z| z.sample(&mut r) as u32 - 1).collect(),
        })
        .collect())
}

/// Name of id `v` in dimension `d`; zero padding keeps string order equal
/// to id order.
pub fn dim_value_name(d: usize, v: u32) -> String {
    format!("d{d}_{v:04}")
}

/// CSV with columns `time,value[,d0,d1,...]`. Zipf values are written as
/// their integer rank, so they load either as categories or as numbers.
/// Dimension values go through [`dim_value_name`].
pub fn write_records<W: Write>(records: &[Record], dist: ValueDist, out: W) -> Result<()> {
    let err = |e: csv::Error| Error::Csv(e.to_string());
    let mut w = csv::Writer::from_writer(out);
    let width = records.first().map_or(0, |r| r.dims.len());
    let mut header = vec!["time".to_string(), "value".to_string()];
    header.extend((0..width).map(|d| format!("d{d}")));
    w.write_record(&header).map_err(err)?;
    for r in records {
        let mut row = vec![
            r.time.unwrap_or_default().to_string(),
            match dist {
                ValueDist::Zipf { .. } => (r.value.id() + 1).to_string(),
                ValueDist::Uniform => r.value.to_f64().to_string(),
            },
        ];
        row.extend(r.dims.iter().enumerate().map(|(d, &v)| dim_value_name(d, v)));
        w.write_record(&row).map_err(err)?;
    }
    w.flush()?;
    Ok(())
}
