use rayon::prelude::*;

use super::{partition_sorted_chunks, Chunk, CoopConfig};
use crate::error::{Error, Result};
use crate::model::{Segment, Summary, SummaryMethod, Value, ValueDomain};

/// Running prefix rank error `eps(y) = r_Pre(y) - r_hat_Pre(y)` over the
/// sorted universe of values seen in the current block.
#[derive(Clone, Debug)]
pub struct RankTracker {
    max_interval: u64,
    block: Option<u64>,
    universe: Vec<Value>,
    errors: Vec<f64>,
    spare_universe: Vec<Value>,
    spare_errors: Vec<f64>,
    n_max: Option<f64>,
}

impl RankTracker {
    pub fn new(max_interval: u64) -> Self {
        RankTracker {
            max_interval: max_interval.max(1),
            block: None,
            universe: Vec::new(),
            errors: Vec::new(),
            spare_universe: Vec::new(),
            spare_errors: Vec::new(),
            n_max: None,
        }
    }

    pub fn enter(&mut self, index: u64) {
        let block = index / self.max_interval;
        if self.block != Some(block) {
            self.reset();
            self.block = Some(block);
        }
    }

    pub fn reset(&mut self) {
        self.universe.clear();
        self.errors.clear();
    }

    /// The rank error is a step function; between universe points it equals
    /// the error at the closest point below.
    pub fn error(&self, x: Value) -> f64 {
        match self.universe.partition_point(|&u| u <= x) {
            0 => 0.0,
            i => self.errors[i - 1],
        }
    }

    pub fn universe(&self) -> &[Value] {
        &self.universe
    }

    pub fn errors(&self) -> &[f64] {
        &self.errors
    }

    pub fn max_abs_error(&self) -> f64 {
        self.errors.iter().fold(0.0, |m, e| m.max(e.abs()))
    }

    /// `sum_y cosh(alpha * eps(y))` over the current universe.
    pub fn loss(&self, alpha: f64) -> f64 {
        self.errors.iter().map(|e| (alpha * e).cosh()).sum()
    }

    /// Adds step weights: every universe point `y` gains the total weight of
    /// steps at values `<= y`. New step values join the universe.
    fn apply(&mut self, steps: &[(Value, f64)]) {
        debug_assert!(steps.windows(2).all(|w| w[0].0 <= w[1].0));
        let mut uni = std::mem::take(&mut self.spare_universe);
        let mut errs = std::mem::take(&mut self.spare_errors);
        uni.clear();
        errs.clear();
        uni.reserve(self.universe.len() + steps.len());
        errs.reserve(self.universe.len() + steps.len());
        let (mut i, mut j) = (0, 0);
        let (mut base, mut acc) = (0.0, 0.0);
        while i < self.universe.len() || j < steps.len() {
            let v = match (self.universe.get(i), steps.get(j)) {
                (Some(&u), Some(&(w, _))) => u.min(w),
                (Some(&u), None) => u,
                (None, Some(&(w, _))) => w,
                (None, None) => unreachable!(),
            };
            if self.universe.get(i) == Some(&v) {
                base = self.errors[i];
                i += 1;
            }
            while j < steps.len() && steps[j].0 == v {
                acc += steps[j].1;
                j += 1;
            }
            uni.push(v);
            errs.push(base + acc);
        }
        self.spare_universe = std::mem::replace(&mut self.universe, uni);
        self.spare_errors = std::mem::replace(&mut self.errors, errs);
    }

    /// Adds the segment's exact ranks and subtracts the summary's estimates.
    pub fn advance(&mut self, segment: &Segment, summary: &Summary) {
        let mut steps: Vec<(Value, f64)> = segment
            .entries()
            .iter()
            .map(|&(v, c)| (v, c as f64))
            .chain(summary.entries().iter().map(|&(v, w)| (v, -w)))
            .collect();
        steps.sort_by_key(|e| e.0);
        self.apply(&steps);
    }
}

/// Picks the representative of chunk `j`. Only universe points inside
/// `[min, max)` of the chunk are affected by the choice; `shift` is the
/// weight already removed from them by earlier chunks.
fn choose(chunk: &Chunk, universe: &[Value], errors: &[f64], shift: f64, h: f64, alpha: f64) -> Value {
    let lo = chunk.min().expect("chunks are non-empty");
    let hi = chunk.max().expect("chunks are non-empty");
    if lo == hi {
        return lo;
    }
    let a = universe.partition_point(|&u| u < lo);
    let b = universe.partition_point(|&u| u < hi);
    let xs: Vec<f64> = errors[a..b].iter().map(|e| alpha * (e - shift)).collect();
    let ah = alpha * h;
    // Only comparisons matter, so rescale every term by exp(-m).
    let m = xs.iter().fold(0.0f64, |m, &x| m.max(x.abs()).max((x - ah).abs()));
    let (down, up) = ((-ah).exp(), ah.exp());
    let mut kept = Vec::with_capacity(xs.len());
    let mut lowered = Vec::with_capacity(xs.len());
    for &x in &xs {
        let (p, q) = ((x - m).exp(), (-x - m).exp());
        kept.push(p + q);
        lowered.push(p * down + q * up);
    }
    let n = xs.len();
    let mut suffix = vec![0.0; n + 1];
    for k in (0..n).rev() {
        suffix[k] = suffix[k + 1] + lowered[k];
    }
    let mut best = (f64::INFINITY, lo);
    let mut prefix = 0.0;
    let mut k = 0;
    let mut last = None;
    for &(z, _) in &chunk.entries {
        if last == Some(z) {
            continue;
        }
        last = Some(z);
        while k < n && universe[a + k] < z {
            prefix += kept[k];
            k += 1;
        }
        let loss = prefix + suffix[k];
        if loss < best.0 {
            best = (loss, z);
        }
    }
    best.1
}

/// Builds a cooperative quantile summary for the segment at `index`.
pub fn coop_quant_summarize(
    segment: &Segment,
    index: u64,
    config: &CoopConfig,
    tracker: &mut RankTracker,
) -> Result<Summary> {
    config.validate()?;
    if segment.domain() != ValueDomain::Ordinal {
        return Err(Error::UnorderedDomain);
    }
    tracker.enter(index);
    let s = config.size;
    if segment.is_empty() {
        return Ok(Summary::empty(s, SummaryMethod::CoopQuant, segment.domain()).with_threshold(0.0));
    }
    let h = segment.total() as f64 / s as f64;
    let n_max = match config.max_segment_weight.or(tracker.n_max) {
        Some(n) => n,
        None => {
            let n = 2.0 * segment.total() as f64;
            tracker.n_max = Some(n);
            n
        }
    };
    let alpha = config.quant_alpha(n_max);

    let chunks = partition_sorted_chunks(segment, s)?;
    let steps: Vec<(Value, f64)> = segment.entries().iter().map(|&(v, c)| (v, c as f64)).collect();
    tracker.apply(&steps);

    let (universe, errors) = (&tracker.universe, &tracker.errors);
    let reps: Vec<Value> = chunks
        .par_iter()
        .enumerate()
        .map(|(j, c)| choose(c, universe, errors, h * j as f64, h, alpha))
        .collect();

    let mut entries: Vec<(Value, f64)> = Vec::with_capacity(s);
    for &z in &reps {
        match entries.last_mut() {
            Some(last) if last.0 == z => last.1 += h,
            _ => entries.push((z, h)),
        }
    }
    let steps: Vec<(Value, f64)> = entries.iter().map(|&(v, w)| (v, -w)).collect();
    tracker.apply(&steps);

    Ok(Summary::new(entries, s, SummaryMethod::CoopQuant, segment.domain()).with_threshold(h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{max_local_error, QueryFunction};
    use crate::rng;
    use rand::Rng;

    fn v(id: u64) -> Value {
        Value::from_id(id)
    }

    fn seg(counts: &[(u64, u64)]) -> Segment {
        Segment::from_counts(counts.iter().map(|&(x, c)| (v(x), c)), ValueDomain::Ordinal)
    }

    #[test]
    fn eight_values_four_slots() {
        let d = seg(&(1..=8).map(|x| (x, 1)).collect::<Vec<_>>());
        let mut t = RankTracker::new(16);
        let s = coop_quant_summarize(&d, 0, &CoopConfig::new(4, 16), &mut t).unwrap();
        assert_eq!(s.len(), 4);
        assert!(s.entries().iter().all(|e| e.1 == 2.0));
        assert!(max_local_error(&d, &s, QueryFunction::Rank).unwrap() <= 2.0);
    }

    #[test]
    fn single_chunk_matches_brute_force() {
        let mut rng = rng::seeded(3);
        let cfg = CoopConfig {
            max_segment_weight: Some(60.0),
            ..CoopConfig::new(1, 4)
        };
        let mut t = RankTracker::new(4);
        for i in 0..4 {
            let d = Segment::from_values((0..30).map(|_| v(rng.random_range(0..40))), ValueDomain::Ordinal);
            let mut probe = t.clone();
            probe.enter(i);
            let steps: Vec<(Value, f64)> = d.entries().iter().map(|&(x, c)| (x, c as f64)).collect();
            probe.apply(&steps);
            let alpha = cfg.quant_alpha(60.0);
            let h = d.total() as f64;
            let loss = |z: Value| -> f64 {
                probe
                    .universe()
                    .iter()
                    .zip(probe.errors())
                    .map(|(&y, &e)| (alpha * (e - if y >= z { h } else { 0.0 })).cosh())
                    .sum()
            };
            let best = d.entries().iter().map(|e| loss(e.0)).fold(f64::INFINITY, f64::min);
            let s = coop_quant_summarize(&d, i, &cfg, &mut t).unwrap();
            assert_eq!(s.len(), 1);
            let chosen = loss(s.entries()[0].0);
            assert!(chosen <= best * (1.0 + 1e-12), "{chosen} vs {best}");
        }
    }

    #[test]
    fn advance_semantics() {
        let mut t = RankTracker::new(4);
        t.enter(0);
        let d = seg(&[(1, 2), (4, 1)]);
        t.advance(&d, &Summary::exact(&d));
        assert_eq!(t.max_abs_error(), 0.0);
        t.advance(
            &seg(&[(2, 2)]),
            &Summary::empty(1, SummaryMethod::CoopQuant, ValueDomain::Ordinal),
        );
        assert_eq!(t.error(v(1)), 0.0);
        assert_eq!(t.error(v(2)), 2.0);
        assert_eq!(t.error(v(9)), 2.0);
        t.enter(4);
        assert_eq!(t.max_abs_error(), 0.0);
    }

    #[test]
    fn new_values_inherit_predecessor_error() {
        let mut t = RankTracker::new(8);
        t.enter(0);
        t.advance(
            &seg(&[(10, 3)]),
            &Summary::empty(1, SummaryMethod::CoopQuant, ValueDomain::Ordinal),
        );
        t.advance(
            &seg(&[(20, 1), (5, 1)]),
            &Summary::empty(1, SummaryMethod::CoopQuant, ValueDomain::Ordinal),
        );
        assert_eq!(t.universe(), &[v(5), v(10), v(20)]);
        assert_eq!(t.errors(), &[1.0, 4.0, 5.0]);
    }

    #[test]
    fn identical_segments_stay_within_corollary_bound() {
        let (k, n, s) = (16u64, 256u64, 8usize);
        let mut rng = rng::seeded(11);
        let d = Segment::from_values((0..n).map(|_| v(rng.random_range(0..1000))), ValueDomain::Ordinal);
        let cfg = CoopConfig {
            max_segment_weight: Some(n as f64),
            ..CoopConfig::new(s, k)
        };
        let mut t = RankTracker::new(k);
        for i in 0..k {
            coop_quant_summarize(&d, i, &cfg, &mut t).unwrap();
        }
        let u = t.universe().len() as f64;
        let bound = n as f64 / (2.0 * s as f64) * ((k as f64).sqrt() + 2.0 * (2.0 * u).ln());
        assert!(t.max_abs_error() <= bound);
    }

    #[test]
    fn categorical_segment_is_rejected() {
        let d = Segment::from_counts([(v(1), 1)], ValueDomain::Categorical);
        let mut t = RankTracker::new(4);
        assert!(coop_quant_summarize(&d, 0, &CoopConfig::new(2, 4), &mut t).is_err());
    }

    proptest::proptest! {
        #[test]
        fn local_bound_and_loss_growth(
            segs in proptest::collection::vec(
                proptest::collection::vec((0u64..50, 1u64..10), 1..30), 1..10),
            s in 1usize..8,
        ) {
            let cfg = CoopConfig { max_segment_weight: Some(300.0), ..CoopConfig::new(s, 64) };
            let alpha = cfg.quant_alpha(300.0);
            let mut t = RankTracker::new(64);
            for (i, counts) in segs.iter().enumerate() {
                let d = seg(counts);
                // Previous loss over the enlarged universe: new points carry
                // their predecessor's error.
                let mut before = t.clone();
                before.enter(i as u64);
                let zeros: Vec<(Value, f64)> = d.entries().iter().map(|e| (e.0, 0.0)).collect();
                before.apply(&zeros);
                let prev = before.loss(alpha);
                let sum = coop_quant_summarize(&d, i as u64, &cfg, &mut t).unwrap();
                let h = d.total() as f64 / s as f64;
                let err = max_local_error(&d, &sum, QueryFunction::Rank).unwrap();
                proptest::prop_assert!(err <= h * (1.0 + 1e-12));
                let bound = prev * (alpha * alpha * h * h / 2.0).exp();
                proptest::prop_assert!(t.loss(alpha) <= bound * (1.0 + 1e-9));
            }
        }
    }
}
