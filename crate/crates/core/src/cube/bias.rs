use crate::error::{Error, Result};
use crate::model::Segment;

/// `n[b] = sum_x (d(x) - b)^+`: the weight left after subtracting `b` from
/// every distinct value.
pub fn effective_weight(segment: &Segment, b: f64) -> f64 {
    segment.entries().iter().map(|e| (e.1 as f64 - b).max(0.0)).sum()
}

/// Counts of one segment in ascending order with suffix sums, so `n[b]`
/// costs a binary search.
#[derive(Clone, Debug)]
struct Profile {
    sorted: Vec<f64>,
    suffix: Vec<f64>,
    size: f64,
}

impl Profile {
    fn new(segment: &Segment, size: usize) -> Self {
        let mut sorted: Vec<f64> = segment.entries().iter().map(|e| e.1 as f64).collect();
        sorted.sort_by(f64::total_cmp);
        let mut suffix = vec![0.0; sorted.len() + 1];
        for i in (0..sorted.len()).rev() {
            suffix[i] = suffix[i + 1] + sorted[i];
        }
        Profile {
            sorted,
            suffix,
            size: size as f64,
        }
    }

    fn max(&self) -> f64 {
        self.sorted.last().copied().unwrap_or(0.0)
    }

    /// `(k, S)`: number and sum of counts strictly above `b`.
    fn above(&self, b: f64) -> (f64, f64) {
        let j = self.sorted.partition_point(|&d| d <= b);
        ((self.sorted.len() - j) as f64, self.suffix[j])
    }

    fn weight(&self, b: f64) -> f64 {
        let (k, s) = self.above(b);
        (s - k * b).max(0.0)
    }

    /// Variance term `n[b]^2 / (4 s^2)`.
    fn variance(&self, b: f64) -> f64 {
        let n = self.weight(b);
        if n == 0.0 {
            0.0
        } else if self.size == 0.0 {
            f64::INFINITY
        } else {
            n * n / (4.0 * self.size * self.size)
        }
    }

    /// Minus the right derivative of the variance term.
    fn slope(&self, b: f64) -> f64 {
        let (k, s) = self.above(b);
        k * (s - k * b).max(0.0) / (2.0 * self.size * self.size)
    }

    /// Minimizer of `variance(b) + lambda * b` over `b >= 0`.
    fn best_response(&self, lambda: f64) -> f64 {
        if self.size == 0.0 {
            return self.max();
        }
        if self.slope(0.0) <= lambda {
            return 0.0;
        }
        // Breakpoints 0, d_1, ..., d_m; slope is non-increasing along them.
        let m = self.sorted.len();
        let at = |j: usize| if j == 0 { 0.0 } else { self.sorted[j - 1] };
        let (mut lo, mut hi) = (0usize, m);
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            if self.slope(at(mid)) > lambda {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let (k, s) = self.above(at(lo));
        let b = (s - 2.0 * self.size * self.size * lambda / k) / k;
        b.clamp(at(lo), at(hi))
    }
}

/// `J(b) = (sum_i b_i)^2 + sum_i n_i[b_i]^2 / (4 s_i^2)`: squared bias plus
/// sampling variance of the whole-cube estimate.
pub fn bias_objective(segments: &[&Segment], sizes: &[usize], biases: &[f64]) -> f64 {
    let total: f64 = biases.iter().sum();
    let var: f64 = segments
        .iter()
        .zip(sizes)
        .zip(biases)
        .map(|((seg, &s), &b)| Profile::new(seg, s).variance(b))
        .sum();
    total * total + var
}

#[derive(Clone, Debug, PartialEq)]
pub struct BiasSolution {
    pub biases: Vec<f64>,
    pub objective: f64,
    pub converged: bool,
}

/// Exact minimizer of [`bias_objective`].
///
/// At the optimum every `b_i` minimizes its own variance term plus
/// `lambda * b_i` with `lambda = 2 * sum_j b_j`. Each such one-dimensional
/// problem is piecewise quadratic and solved in closed form, and `lambda`
/// is found by bisection on that fixed point.
pub fn optimize_biases(segments: &[&Segment], sizes: &[usize]) -> Result<BiasSolution> {
    if segments.len() != sizes.len() {
        return Err(Error::config("one size per segment is required"));
    }
    let profiles: Vec<Profile> = segments
        .iter()
        .zip(sizes)
        .map(|(seg, &s)| Profile::new(seg, s))
        .collect();
    let respond = |lambda: f64| -> Vec<f64> { profiles.iter().map(|p| p.best_response(lambda)).collect() };
    let gap = |lambda: f64| lambda - 2.0 * respond(lambda).iter().sum::<f64>();

    let mut lo = 0.0;
    let mut hi = 2.0 * profiles.iter().map(Profile::max).sum::<f64>();
    let mut converged = gap(lo) >= 0.0;
    if converged {
        hi = lo;
    }
    for _ in 0..200 {
        if converged {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            converged = true;
            break;
        }
        if gap(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo <= 1e-15 * hi {
            converged = true;
        }
    }
    let objective_of = |b: &[f64]| -> f64 {
        let t: f64 = b.iter().sum();
        t * t + profiles.iter().zip(b).map(|(p, &x)| p.variance(x)).sum::<f64>()
    };
    // Either end of the final bracket is optimal to rounding; keep the better.
    let candidates = [respond(lo), respond(hi), vec![0.0; profiles.len()]];
    let (biases, objective) = candidates
        .into_iter()
        .map(|b| {
            let j = objective_of(&b);
            (b, j)
        })
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("three candidates");
    Ok(BiasSolution {
        biases,
        objective,
        converged,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{Value, ValueDomain};

    fn seg(counts: &[u64]) -> Segment {
        Segment::from_counts(
            counts.iter().enumerate().map(|(i, &c)| (Value::from_id(i as u64), c)),
            ValueDomain::Categorical,
        )
    }

    #[test]
    fn effective_weight_examples() {
        let d = seg(&[3, 1]);
        assert_eq!(effective_weight(&d, 0.0), 4.0);
        assert_eq!(effective_weight(&d, 1.0), 2.0);
        assert_eq!(effective_weight(&d, 3.0), 0.0);
        assert_eq!(effective_weight(&d, 7.0), 0.0);
    }

    #[test]
    fn single_value_segments() {
        let segs = [seg(&[40]), seg(&[17])];
        let refs: Vec<&Segment> = segs.iter().collect();
        let sol = optimize_biases(&refs, &[1, 1]).unwrap();
        // The variance term is the n^2 / 4s^2 bound, which does not know a
        // lone value is stored exactly, so some bias still lowers J.
        assert!(sol.objective <= bias_objective(&refs, &[1, 1], &[0.0, 0.0]));
        // Stationarity 2B = (40 - b1) / 2 holds for the interior b1; the
        // smaller segment sits at b2 = 0 since 2B >= 17 / 2 there.
        assert!((sol.biases[0] - 8.0).abs() < 1e-6, "{:?}", sol.biases);
        assert!(sol.biases[1].abs() < 1e-6, "{:?}", sol.biases);
    }

    #[test]
    fn singletons_prefer_bias_one() {
        let segs = [seg(&[1; 100])];
        let refs: Vec<&Segment> = segs.iter().collect();
        assert_eq!(bias_objective(&refs, &[1], &[0.0]), 2500.0);
        assert_eq!(bias_objective(&refs, &[1], &[1.0]), 1.0);
        let sol = optimize_biases(&refs, &[1]).unwrap();
        assert!(sol.converged);
        assert!((sol.biases[0] - 1.0).abs() < 0.05, "{:?}", sol.biases);
        assert!(sol.objective <= 1.0);
    }

    proptest::proptest! {
        #[test]
        fn beats_zero_and_every_coordinate_grid_point(
            segs in proptest::collection::vec(proptest::collection::vec(1u64..30, 1..20), 1..6),
            sizes in proptest::collection::vec(1usize..6, 6),
        ) {
            let segs: Vec<Segment> = segs.iter().map(|c| seg(c)).collect();
            let refs: Vec<&Segment> = segs.iter().collect();
            let sizes = &sizes[..refs.len()];
            let sol = optimize_biases(&refs, sizes).unwrap();
            let j0 = bias_objective(&refs, sizes, &vec![0.0; refs.len()]);
            let j = bias_objective(&refs, sizes, &sol.biases);
            proptest::prop_assert!((j - sol.objective).abs() <= 1e-9 * j.max(1.0));
            proptest::prop_assert!(j <= j0);
            for i in 0..refs.len() {
                let top = refs[i].max_count() as f64;
                for g in 0..=200 {
                    let mut b = sol.biases.clone();
                    b[i] = top * g as f64 / 200.0;
                    let jg = bias_objective(&refs, sizes, &b);
                    proptest::prop_assert!(j <= jg + 1e-6 * jg.abs().max(1e-12), "i={} g={} {} > {}", i, g, j, jg);
                }
            }
        }

        #[test]
        fn objective_is_convex_along_segments(
            counts in proptest::collection::vec(1u64..30, 1..20),
            size in 1usize..6,
            a in 0.0f64..30.0,
            b in 0.0f64..30.0,
        ) {
            let d = seg(&counts);
            let refs = [&d];
            let f = |x: f64| bias_objective(&refs, &[size], &[x]);
            for t in 0..=10 {
                let t = t as f64 / 10.0;
                let mid = f(a + t * (b - a));
                let chord = f(a) + t * (f(b) - f(a));
                proptest::prop_assert!(mid <= chord + 1e-9 * chord.abs().max(1.0));
            }
        }
    }
}
