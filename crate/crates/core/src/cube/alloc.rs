use crate::error::{Error, Result};

use super::workload::WorkloadSample;

/// Allocation score `a_i = n_i^2 * sum_{z : i in Q_z} q_z / |Q_z|^2`.
pub fn allocation_scores(weights: &[f64], sample: &WorkloadSample) -> Vec<f64> {
    let mut acc = vec![0.0; weights.len()];
    for q in &sample.queries {
        if q.weight <= 0.0 {
            continue;
        }
        let c = sample.probability(q) / (q.weight * q.weight);
        for &i in &q.segments {
            acc[i] += c;
        }
    }
    acc.iter().zip(weights).map(|(a, n)| a * n * n).collect()
}

/// Real-valued sizes proportional to `weights` summing to `total`, with
/// every size at least `min`. Clamped entries leave the pool and the rest
/// is renormalized until nothing falls below the floor.
pub fn continuous_allocation(weights: &[f64], total: usize, min: usize) -> Result<Vec<f64>> {
    let m = weights.len();
    if weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
        return Err(Error::config("allocation weights must be finite and non-negative"));
    }
    if (min as u128) * (m as u128) > total as u128 {
        return Err(Error::InfeasibleBudget(format!(
            "{m} segments at s_min = {min} need {} slots, budget is {total}",
            min as u128 * m as u128
        )));
    }
    if m == 0 {
        return Ok(Vec::new());
    }
    let floor = min as f64;
    let mut sizes = vec![0.0; m];
    let mut free: Vec<usize> = (0..m).collect();
    let mut budget = total as f64;
    loop {
        let mass: f64 = free.iter().map(|&i| weights[i]).sum();
        if mass <= 0.0 {
            let each = budget / free.len() as f64;
            for &i in &free {
                sizes[i] = each;
            }
            break;
        }
        for &i in &free {
            sizes[i] = budget * weights[i] / mass;
        }
        let (low, high): (Vec<usize>, Vec<usize>) = free.iter().partition(|&&i| sizes[i] < floor);
        if low.is_empty() {
            break;
        }
        for &i in &low {
            sizes[i] = floor;
            budget -= floor;
        }
        free = high;
        if free.is_empty() {
            break;
        }
    }
    Ok(sizes)
}

/// Largest-remainder rounding that keeps the exact total. Ties go to the
/// lower index.
pub fn round_preserving_sum(sizes: &[f64], total: usize) -> Vec<usize> {
    let mut out: Vec<usize> = sizes.iter().map(|x| x.floor().max(0.0) as usize).collect();
    let used: usize = out.iter().sum();
    let mut order: Vec<usize> = (0..sizes.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = sizes[a] - sizes[a].floor();
        let fb = sizes[b] - sizes[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    for &i in order.iter().take(total.saturating_sub(used)) {
        out[i] += 1;
    }
    out
}

/// Integer sizes proportional to `weights`, floor `min`, summing to `total`.
pub fn allocate_by_weights(weights: &[f64], total: usize, min: usize) -> Result<Vec<usize>> {
    let sizes = continuous_allocation(weights, total, min)?;
    Ok(round_preserving_sum(&sizes, total))
}

/// Sizes minimizing `sum_i a_i / s_i^2` under `sum_i s_i = total`:
/// `s_i` proportional to `a_i^(1/3)`.
pub fn allocate_sizes(scores: &[f64], total: usize, min: usize) -> Result<Vec<usize>> {
    let w: Vec<f64> = scores.iter().map(|a| a.cbrt()).collect();
    allocate_by_weights(&w, total, min)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::workload::CubeQuery;

    #[test]
    fn whole_cube_scores() {
        let sample = WorkloadSample {
            queries: vec![CubeQuery {
                filter: vec![None],
                segments: vec![0, 1],
                weight: 300.0,
                multiplicity: 5,
            }],
            draws: 5,
        };
        let a = allocation_scores(&[100.0, 200.0, 50.0], &sample);
        assert!((a[0] - 100.0f64.powi(2) / 300.0f64.powi(2)).abs() < 1e-15);
        assert!((a[1] - 200.0f64.powi(2) / 300.0f64.powi(2)).abs() < 1e-15);
        assert_eq!(a[2], 0.0);
    }

    #[test]
    fn equal_scores_split_evenly() {
        assert_eq!(allocate_sizes(&[2.0; 4], 100, 1).unwrap(), vec![25; 4]);
    }

    #[test]
    fn cube_root_ratio() {
        let x = continuous_allocation(&[1.0, 4.0f64.cbrt()], 100, 0).unwrap();
        assert!((x[0] - 38.6488).abs() < 1e-3);
        assert!((x[1] - 61.3512).abs() < 1e-3);
        assert_eq!(allocate_sizes(&[1.0, 4.0], 100, 0).unwrap(), vec![39, 61]);
    }

    #[test]
    fn zero_score_gets_the_floor() {
        let s = allocate_sizes(&[0.0, 1.0, 1.0], 50, 8).unwrap();
        assert_eq!(s[0], 8);
        assert_eq!(s.iter().sum::<usize>(), 50);
    }

    #[test]
    fn infeasible_floor_is_rejected() {
        let err = allocate_sizes(&[1.0; 10], 50, 6).unwrap_err();
        assert!(matches!(err, Error::InfeasibleBudget(_)));
    }

    proptest::proptest! {
        #[test]
        fn sizes_sum_and_respect_floor(
            scores in proptest::collection::vec(0.0f64..100.0, 1..30),
            extra in 0usize..500,
            min in 0usize..5,
        ) {
            let total = scores.len() * min + extra;
            let s = allocate_sizes(&scores, total, min).unwrap();
            proptest::prop_assert_eq!(s.iter().sum::<usize>(), total);
            proptest::prop_assert!(s.iter().all(|&x| x >= min));
        }

        #[test]
        fn raising_a_score_never_shrinks_its_size(
            scores in proptest::collection::vec(0.1f64..100.0, 2..10),
            bump in 1.0f64..10.0,
            total in 20usize..200,
        ) {
            let base = continuous_allocation(&scores.iter().map(|a| a.cbrt()).collect::<Vec<_>>(), total, 1).unwrap();
            let mut up = scores.clone();
            up[0] *= bump;
            let raised = continuous_allocation(&up.iter().map(|a| a.cbrt()).collect::<Vec<_>>(), total, 1).unwrap();
            proptest::prop_assert!(raised[0] >= base[0] - 1e-9);
        }
    }
}
