//! Records, segments, summaries and the two query functions.
//!
//! Every value is a [`Value`]: a 64-bit key. Categorical values are interned
//! to dense ids; ordinal values are `f64`s mapped through an order-preserving
//! bit transform, so comparing keys compares the underlying numbers.

use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Value(u64);

impl Value {
    pub const fn from_id(id: u64) -> Self {
        Value(id)
    }

    pub const fn id(self) -> u64 {
        self.0
    }

    /// Encodes a float so that `u64` order matches IEEE total order.
    /// `-0.0` is folded onto `0.0`.
    pub fn from_f64(x: f64) -> Result<Self> {
        if x.is_nan() {
            return Err(Error::NanValue);
        }
        let x = if x == 0.0 { 0.0 } else { x };
        let bits = x.to_bits();
        let key = if bits >> 63 == 1 { !bits } else { bits | (1 << 63) };
        Ok(Value(key))
    }

    pub fn to_f64(self) -> f64 {
        let bits = if self.0 >> 63 == 1 {
            self.0 & !(1 << 63)
        } else {
            !self.0
        };
        f64::from_bits(bits)
    }
}

impl fmt::Debug for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Value({})", self.0)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum ValueDomain {
    /// Interned ids; only frequency queries are meaningful.
    Categorical,
    /// Order-preserving float keys; both query functions apply.
    Ordinal,
}

impl ValueDomain {
    pub fn as_str(self) -> &'static str {
        match self {
            ValueDomain::Categorical => "categorical",
            ValueDomain::Ordinal => "ordinal",
        }
    }
}

impl FromStr for ValueDomain {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "categorical" => Ok(ValueDomain::Categorical),
            "ordinal" => Ok(ValueDomain::Ordinal),
            other => Err(Error::config(format!("unknown value domain `{other}`"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum QueryFunction {
    Frequency,
    Rank,
}

impl QueryFunction {
    pub fn as_str(self) -> &'static str {
        match self {
            QueryFunction::Frequency => "frequency",
            QueryFunction::Rank => "rank",
        }
    }

    pub fn eval<S: WeightedStore + ?Sized>(self, store: &S, x: Value) -> Result<f64> {
        match self {
            QueryFunction::Frequency => Ok(store.frequency(x)),
            QueryFunction::Rank => store.rank(x),
        }
    }
}

impl FromStr for QueryFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "frequency" | "freq" => Ok(QueryFunction::Frequency),
            "rank" | "quantile" | "quant" => Ok(QueryFunction::Rank),
            other => Err(Error::config(format!("unknown query function `{other}`"))),
        }
    }
}

/// Anything that can answer frequency and rank point queries.
pub trait WeightedStore {
    fn domain(&self) -> ValueDomain;

    /// Total weight stored against exactly `x`.
    fn frequency(&self, x: Value) -> f64;

    /// Total weight stored against values `<= x`.
    fn rank(&self, x: Value) -> Result<f64>;

    fn total_weight(&self) -> f64;
}

/// One input record.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub value: Value,
    pub time: Option<i64>,
    /// Interned dimension values, one per dataset dimension.
    pub dims: Vec<u32>,
}

/// Exact value counts for one atomic partition of the data.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Segment {
    entries: Vec<(Value, u64)>,
    total: u64,
    domain: ValueDomain,
}

impl Segment {
    pub fn empty(domain: ValueDomain) -> Self {
        Segment {
            entries: Vec::new(),
            total: 0,
            domain,
        }
    }

    /// Builds a segment from `(value, count)` pairs in any order. Duplicate
    /// values are summed and zero counts dropped.
    pub fn from_counts<I>(counts: I, domain: ValueDomain) -> Self
    where
        I: IntoIterator<Item = (Value, u64)>,
    {
        let mut entries: Vec<(Value, u64)> = counts.into_iter().filter(|e| e.1 > 0).collect();
        entries.sort_unstable_by_key(|e| e.0);
        entries.dedup_by(|next, kept| {
            if next.0 == kept.0 {
                kept.1 += next.1;
                true
            } else {
                false
            }
        });
        let total = entries.iter().map(|e| e.1).sum();
        Segment { entries, total, domain }
    }

    pub fn from_values<I>(values: I, domain: ValueDomain) -> Self
    where
        I: IntoIterator<Item = Value>,
    {
        Self::from_counts(values.into_iter().map(|v| (v, 1)), domain)
    }

    /// Union of several segments (counts add).
    pub fn union<'a, I>(segments: I, domain: ValueDomain) -> Self
    where
        I: IntoIterator<Item = &'a Segment>,
    {
        Self::from_counts(segments.into_iter().flat_map(|s| s.entries.iter().copied()), domain)
    }

    /// Entries sorted by value, values unique, counts positive.
    pub fn entries(&self) -> &[(Value, u64)] {
        &self.entries
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn domain(&self) -> ValueDomain {
        self.domain
    }

    pub fn count(&self, x: Value) -> u64 {
        match self.entries.binary_search_by_key(&x, |e| e.0) {
            Ok(i) => self.entries[i].1,
            Err(_) => 0,
        }
    }

    pub fn count_le(&self, x: Value) -> u64 {
        let end = self.entries.partition_point(|e| e.0 <= x);
        self.entries[..end].iter().map(|e| e.1).sum()
    }

    pub fn max_count(&self) -> u64 {
        self.entries.iter().map(|e| e.1).max().unwrap_or(0)
    }
}

impl WeightedStore for Segment {
    fn domain(&self) -> ValueDomain {
        self.domain
    }

    fn frequency(&self, x: Value) -> f64 {
        self.count(x) as f64
    }

    fn rank(&self, x: Value) -> Result<f64> {
        if self.domain == ValueDomain::Categorical {
            return Err(Error::UnorderedDomain);
        }
        Ok(self.count_le(x) as f64)
    }

    fn total_weight(&self) -> f64 {
        self.total as f64
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SummaryMethod {
    CoopFreq,
    CoopQuant,
    Pps,
    Truncation,
    USample,
    Exact,
}

impl SummaryMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            SummaryMethod::CoopFreq => "coop-freq",
            SummaryMethod::CoopQuant => "coop-quant",
            SummaryMethod::Pps => "pps",
            SummaryMethod::Truncation => "truncation",
            SummaryMethod::USample => "usample",
            SummaryMethod::Exact => "exact",
        }
    }
}

impl FromStr for SummaryMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "coop-freq" => SummaryMethod::CoopFreq,
            "coop-quant" => SummaryMethod::CoopQuant,
            "pps" => SummaryMethod::Pps,
            "truncation" => SummaryMethod::Truncation,
            "usample" => SummaryMethod::USample,
            "exact" => SummaryMethod::Exact,
            other => return Err(Error::config(format!("unknown summary method `{other}`"))),
        })
    }
}

/// A compact proxy for a segment: `(value, weight)` pairs.
///
/// Entries are kept sorted by value; the same value may appear more than
/// once, in which case its weights add.
#[derive(Clone, Debug, PartialEq)]
pub struct Summary {
    entries: Vec<(Value, f64)>,
    cumulative: Vec<f64>,
    size_budget: usize,
    method: SummaryMethod,
    threshold: Option<f64>,
    bias: Option<f64>,
    domain: ValueDomain,
}

impl Summary {
    pub fn new(mut entries: Vec<(Value, f64)>, size_budget: usize, method: SummaryMethod, domain: ValueDomain) -> Self {
        debug_assert!(entries.iter().all(|e| e.1 >= 0.0 && e.1.is_finite()));
        entries.sort_by_key(|e| e.0);
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .map(|e| {
                acc += e.1;
                acc
            })
            .collect();
        Summary {
            entries,
            cumulative,
            size_budget,
            method,
            threshold: None,
            bias: None,
            domain,
        }
    }

    pub fn empty(size_budget: usize, method: SummaryMethod, domain: ValueDomain) -> Self {
        Self::new(Vec::new(), size_budget, method, domain)
    }

    /// The segment itself, as a summary with zero error.
    pub fn exact(segment: &Segment) -> Self {
        Self::new(
            segment.entries().iter().map(|&(v, c)| (v, c as f64)).collect(),
            segment.len(),
            SummaryMethod::Exact,
            segment.domain(),
        )
    }

    pub fn with_threshold(mut self, h: f64) -> Self {
        self.threshold = Some(h);
        self
    }

    pub fn with_bias(mut self, b: f64) -> Self {
        self.bias = Some(b);
        self
    }

    pub fn entries(&self) -> &[(Value, f64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn size_budget(&self) -> usize {
        self.size_budget
    }

    pub fn method(&self) -> SummaryMethod {
        self.method
    }

    pub fn threshold(&self) -> Option<f64> {
        self.threshold
    }

    pub fn bias(&self) -> Option<f64> {
        self.bias
    }

    pub fn domain(&self) -> ValueDomain {
        self.domain
    }

    fn weight_le(&self, x: Value) -> f64 {
        let end = self.entries.partition_point(|e| e.0 <= x);
        if end == 0 {
            0.0
        } else {
            self.cumulative[end - 1]
        }
    }
}

impl WeightedStore for Summary {
    fn domain(&self) -> ValueDomain {
        self.domain
    }

    fn frequency(&self, x: Value) -> f64 {
        let start = self.entries.partition_point(|e| e.0 < x);
        self.entries[start..].iter().take_while(|e| e.0 == x).map(|e| e.1).sum()
    }

    fn rank(&self, x: Value) -> Result<f64> {
        if self.domain == ValueDomain::Categorical {
            return Err(Error::UnorderedDomain);
        }
        Ok(self.weight_le(x))
    }

    fn total_weight(&self) -> f64 {
        self.cumulative.last().copied().unwrap_or(0.0)
    }
}

/// Largest absolute difference between `summary` and `segment` under `g`,
/// over every value that can change either step function.
pub fn max_local_error(segment: &Segment, summary: &Summary, g: QueryFunction) -> Result<f64> {
    let mut probes: Vec<Value> = segment
        .entries()
        .iter()
        .map(|e| e.0)
        .chain(summary.entries().iter().map(|e| e.0))
        .collect();
    probes.sort_unstable();
    probes.dedup();
    let mut worst = 0.0f64;
    for x in probes {
        let err = (g.eval(segment, x)? - g.eval(summary, x)?).abs();
        worst = worst.max(err);
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn v(id: u64) -> Value {
        Value::from_id(id)
    }

    #[test]
    fn segment_frequency_lookup() {
        let seg = Segment::from_counts([(v(1), 3), (v(2), 1)], ValueDomain::Categorical);
        assert_eq!(QueryFunction::Frequency.eval(&seg, v(1)).unwrap(), 3.0);
        assert_eq!(QueryFunction::Frequency.eval(&seg, v(9)).unwrap(), 0.0);
    }

    #[test]
    fn summary_frequency_sums_matching_entries() {
        let s = Summary::new(
            vec![(v(1), 4.0), (v(1), 1.0)],
            2,
            SummaryMethod::Exact,
            ValueDomain::Categorical,
        );
        assert_eq!(s.frequency(v(1)), 5.0);
        assert_eq!(s.frequency(v(2)), 0.0);
    }

    #[test]
    fn rank_is_inclusive() {
        let one = Value::from_f64(1.0).unwrap();
        let four = Value::from_f64(4.0).unwrap();
        let five = Value::from_f64(5.0).unwrap();
        let seg = Segment::from_counts([(one, 2), (five, 3)], ValueDomain::Ordinal);
        assert_eq!(seg.rank(four).unwrap(), 2.0);
        assert_eq!(seg.rank(five).unwrap(), 5.0);

        let nine = Value::from_f64(9.0).unwrap();
        let zero = Value::from_f64(0.0).unwrap();
        let s = Summary::new(
            vec![(one, 2.5), (nine, 2.5)],
            2,
            SummaryMethod::Exact,
            ValueDomain::Ordinal,
        );
        assert_eq!(s.rank(zero).unwrap(), 0.0);
    }

    #[test]
    fn rank_on_categorical_is_a_domain_error() {
        let seg = Segment::from_counts([(v(1), 2)], ValueDomain::Categorical);
        assert!(matches!(seg.rank(v(1)), Err(Error::UnorderedDomain)));
    }

    #[test]
    fn float_keys_preserve_order() {
        let xs = [-1e300, -3.5, -0.0, 0.0, 1e-300, 2.0, 7.25, f64::INFINITY];
        let keys: Vec<Value> = xs.iter().map(|&x| Value::from_f64(x).unwrap()).collect();
        for w in keys.windows(2) {
            assert!(w[0] <= w[1]);
        }
        for &x in &xs {
            assert_eq!(Value::from_f64(x).unwrap().to_f64(), if x == 0.0 { 0.0 } else { x });
        }
        assert!(Value::from_f64(f64::NAN).is_err());
    }

    #[test]
    fn duplicate_counts_merge() {
        let seg = Segment::from_counts([(v(2), 1), (v(1), 2), (v(2), 4), (v(3), 0)], ValueDomain::Categorical);
        assert_eq!(seg.entries(), &[(v(1), 2), (v(2), 5)]);
        assert_eq!(seg.total(), 7);
    }

    proptest::proptest! {
        #[test]
        fn rank_monotone_and_frequencies_sum(counts in proptest::collection::vec((0u64..50, 1u64..20), 0..40)) {
            let seg = Segment::from_counts(counts.iter().map(|&(x, c)| (v(x), c)), ValueDomain::Ordinal);
            let mut prev = 0.0;
            for x in 0..51 {
                let r = seg.rank(v(x)).unwrap();
                proptest::prop_assert!(r >= prev);
                prev = r;
            }
            proptest::prop_assert_eq!(prev, seg.total_weight());
            let sum: f64 = seg.entries().iter().map(|e| seg.frequency(e.0)).sum();
            proptest::prop_assert_eq!(sum, seg.total_weight());
        }
    }
}
