//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! nonzero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::process::ExitCode;
use std::time::{Duration, Instant};

use rand::Rng;
use segsum::baselines::truncation_summarize;
use segsum::coop::{coop_freq_summarize, coop_quant_summarize, CoopConfig, FreqTracker, RankTracker, ThresholdMode};
use segsum::cube::{allocate_sizes, bias_objective, continuous_allocation, optimize_biases, CubeMethod};
use segsum::ingest::{partition_by_time, DatasetConfig, Dictionaries};
use segsum::model::max_local_error;
use segsum::pps::{calc_t, pair_agg, pps_summarize};
use segsum::query::{
    decompose_interval, execute, interval_estimate, AccumulatorKind, QueryAnswer, QueryOp, QuerySpec, QueryTarget,
};
use segsum::rng;
use segsum::summarize::{summarize_interval_store, IntervalMethod};
use segsum::{Error, QueryFunction, Record, Segment, Value, ValueDomain, WeightedStore};
use segsum_bench::adversarial::{builtin_counters, gen_adversarial, ExactCounter};
use segsum_bench::cube::{cube_store, run_cube_bench, CubeBenchConfig};
use segsum_bench::gen::{gen_records, gen_segments, gen_values, GenSpec, ValueDist};
use segsum_bench::interval::{run_accumulator_sweep, run_interval_sweep, Method, SweepConfig};
use segsum_bench::suite::{BenchConfig, ACCUMULATOR_CAPACITIES};

type Outcome = std::result::Result<String, String>;

/// Name, check and wall-clock budget.
type Criterion = (&'static str, fn() -> Outcome, Duration);

macro_rules! ensure {
    ($cond:expr, $($fmt:tt)+) => {
        match $cond {
            true => {}
            false => return Err(format!($($fmt)+)),
        }
    };
}

fn ok<T>(r: segsum::Result<T>) -> std::result::Result<T, String> {
    r.map_err(|e| e.to_string())
}

/// Mean and standard error of the mean.
fn mean_se(sum: f64, sum_sq: f64, n: f64) -> (f64, f64) {
    let mean = sum / n;
    let var = (sum_sq / n - mean * mean).max(0.0) * n / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// `|mean - truth| <= 3 SE`, or exact agreement when the estimate never varies.
fn within_3se(mean: f64, se: f64, truth: f64) -> bool {
    let d = (mean - truth).abs();
    if se == 0.0 {
        d <= 1e-9 * truth.abs().max(1.0)
    } else {
        d <= 3.0 * se
    }
}

fn local_bounds() -> Outcome {
    const SIZES: [usize; 3] = [16, 64, 256];
    const SLACKS: [f64; 3] = [1.0, 1.5, 2.0];
    let mut checked = 0usize;
    let mut worst: f64 = 0.0;
    for stream in 0..100u64 {
        let zipf = stream % 2 == 0;
        let dist = if zipf { ValueDist::zipf() } else { ValueDist::Uniform };
        let s = SIZES[(stream % 3) as usize];
        let slack = SLACKS[(stream / 3 % 3) as usize];
        let config = CoopConfig {
            slack,
            ..CoopConfig::new(s, 10)
        };
        let mut size_rng = rng::stream_rng(100, stream);
        let mut freq = FreqTracker::new(10);
        let mut quant = RankTracker::new(10);
        for i in 0..10u64 {
            let n = size_rng.random_range(200..5000);
            let values = ok(gen_values(dist, n, stream * 1000 + i))?;
            let seg = Segment::from_values(values, dist.domain());
            let bound = seg.total() as f64 / s as f64;
            let g = if zipf {
                QueryFunction::Frequency
            } else {
                QueryFunction::Rank
            };
            let coop = if zipf {
                ok(coop_freq_summarize(&seg, i, &config, &mut freq))?
            } else {
                ok(coop_quant_summarize(&seg, i, &config, &mut quant))?
            };
            let pps = ok(pps_summarize(&seg, s, 0.0, &mut rng::stream_rng(stream, i)))?;
            let h = ok(calc_t(&seg, s))?;
            let trunc = ok(truncation_summarize(&seg, s, g))?;
            for (name, summary, limit) in [
                ("coop", &coop, slack * bound),
                ("pps", &pps, bound.min(h)),
                ("truncation", &trunc, bound),
            ] {
                let err = ok(max_local_error(&seg, summary, g))?;
                ensure!(
                    err <= limit,
                    "{name} stream {stream} segment {i} (s={s}, r={slack}): error {err} > {limit}"
                );
                worst = worst.max(err / bound);
                checked += 1;
            }
        }
    }
    Ok(format!(
        "{checked} summaries over 1000 segments, worst error / (|D|/s) = {worst:.3}"
    ))
}

fn coop_freq_bound() -> Outcome {
    let (n, s, r) = (2048usize, 64usize, 1.5);
    let segs = ok(gen_segments(ValueDist::zipf(), 1024, n, 7))?;
    let config = CoopConfig {
        slack: r,
        threshold: ThresholdMode::Naive,
        ..CoopConfig::new(s, 1024)
    };
    let alpha = 2.0 * (s as f64 / n as f64) * (r - 1.0) / (r * r);
    let mut tracker = FreqTracker::new(1024);
    let mut seen = 0.0;
    let mut tightest: f64 = 0.0;
    for (i, seg) in segs.iter().enumerate() {
        ok(coop_freq_summarize(seg, i as u64, &config, &mut tracker))?;
        seen += seg.total() as f64;
        let bound = (1.0 + alpha * r * seen).ln() / alpha;
        let err = tracker.max_abs_error();
        ensure!(err <= bound, "segment {i}: tracker error {err} > {bound}");
        tightest = tightest.max(err / bound);
    }
    Ok(format!(
        "0 violations over 1024 segments, max error / bound = {tightest:.3}"
    ))
}

fn coop_quant_bound() -> Outcome {
    let (n, s) = (2048usize, 64usize);
    let segs = ok(gen_segments(ValueDist::Uniform, 1024, n, 8))?;
    let config = CoopConfig {
        max_segment_weight: Some(n as f64),
        ..CoopConfig::new(s, 1024)
    };
    let mut tracker = RankTracker::new(1024);
    let mut tightest: f64 = 0.0;
    for (i, seg) in segs.iter().enumerate() {
        ok(coop_quant_summarize(seg, i as u64, &config, &mut tracker))?;
        let k = (i + 1) as f64;
        let u = tracker.universe().len() as f64;
        let bound = n as f64 / (2.0 * s as f64) * (k.sqrt() + 2.0 * (2.0 * u).ln());
        let err = tracker.max_abs_error();
        ensure!(err <= bound, "k={k}: prefix rank error {err} > {bound}");
        tightest = tightest.max(err / bound);
    }
    Ok(format!(
        "0 violations over 1024 segments, max error / bound = {tightest:.3}"
    ))
}

fn interval_scaling() -> Outcome {
    let cfg = BenchConfig::default();
    let methods = vec![
        Method::Summary(IntervalMethod::Coop),
        Method::Summary(IntervalMethod::Truncation),
        Method::Hierarchy(2),
        Method::Summary(IntervalMethod::Pps),
    ];
    let mut detail = Vec::new();
    for (dist, kind) in [
        (ValueDist::zipf(), QueryFunction::Frequency),
        (ValueDist::Uniform, QueryFunction::Rank),
    ] {
        let segs = ok(cfg.interval_segments(dist))?;
        let sweep = SweepConfig {
            dataset: dist.name().into(),
            kind,
            size: cfg.size,
            max_interval: cfg.max_interval,
            lengths: vec![512],
            trials: cfg.trials,
            methods: methods.clone(),
            seed: cfg.seed,
        };
        let res = ok(run_interval_sweep(&segs, &sweep))?;
        let [coop, trunc, hier, pps] = [0, 1, 2, 3].map(|m| res.mean(m, 0));
        let line = format!(
            "{}: coop {coop:.2e} truncation {trunc:.2e} hierarchy {hier:.2e} pps {pps:.2e}",
            kind.as_str()
        );
        ensure!(coop <= 0.5 * trunc, "{line}: coop above half of truncation");
        ensure!(coop <= hier, "{line}: coop above hierarchy");
        ensure!(coop <= pps, "{line}: coop above pps");
        detail.push(line);
    }
    Ok(detail.join("; "))
}

fn pps_unbiased() -> Outcome {
    const DRAWS: u64 = 10_000;
    let s = 16;
    // 100 values, skewed counts scattered over the value order.
    let seg = Segment::from_counts(
        (0..100u64).map(|i| (Value::from_id(i * 37 % 100), 1000 / (i + 1) + 1)),
        ValueDomain::Ordinal,
    );
    let probes: Vec<Value> = seg.entries().iter().map(|e| e.0).collect();
    let mut sums = vec![[0.0f64; 4]; probes.len()];
    for d in 0..DRAWS {
        let summary = ok(pps_summarize(&seg, s, 0.0, &mut rng::stream_rng(5, d)))?;
        ensure!(
            summary.len() == s || summary.len() == s - 1,
            "draw {d}: summary size {}",
            summary.len()
        );
        for (acc, &x) in sums.iter_mut().zip(&probes) {
            let f = summary.frequency(x);
            let r = ok(summary.rank(x))?;
            acc[0] += f;
            acc[1] += f * f;
            acc[2] += r;
            acc[3] += r * r;
        }
    }
    let n = DRAWS as f64;
    let mut worst: f64 = 0.0;
    for (acc, &x) in sums.iter().zip(&probes) {
        for (g, sum, sq) in [
            (QueryFunction::Frequency, acc[0], acc[1]),
            (QueryFunction::Rank, acc[2], acc[3]),
        ] {
            let truth = ok(g.eval(&seg, x))?;
            let (mean, se) = mean_se(sum, sq, n);
            ensure!(
                within_3se(mean, se, truth),
                "{} of {x:?}: mean {mean} vs truth {truth} (SE {se})",
                g.as_str()
            );
            if se > 0.0 {
                worst = worst.max((mean - truth).abs() / se);
            }
        }
    }
    Ok(format!(
        "200 estimates over {DRAWS} draws, worst deviation {worst:.2} SE"
    ))
}

fn pair_agg_exact() -> Outcome {
    const DRAWS: usize = 10_000;
    let mut r = rng::seeded(6);
    let mut worst: f64 = 0.0;
    for i in 0..=10 {
        for j in 0..=10 {
            let (pi, pj) = (i as f64 / 10.0, j as f64 / 10.0);
            let mut s = [0.0f64; 4];
            for _ in 0..DRAWS {
                let (a, b) = pair_agg(pi, pj, &mut r);
                ensure!(
                    ((a + b) - (pi + pj)).abs() <= 1e-12,
                    "({pi}, {pj}) -> ({a}, {b}) changes the sum"
                );
                ensure!(
                    (0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b),
                    "({pi}, {pj}) -> ({a}, {b}) leaves [0, 1]"
                );
                ensure!(
                    [a, b].iter().any(|&p| p == 0.0 || p == 1.0),
                    "({pi}, {pj}) -> ({a}, {b}) settles neither item"
                );
                s[0] += a;
                s[1] += a * a;
                s[2] += b;
                s[3] += b * b;
            }
            for (p, sum, sq) in [(pi, s[0], s[1]), (pj, s[2], s[3])] {
                let (mean, se) = mean_se(sum, sq, DRAWS as f64);
                ensure!(within_3se(mean, se, p), "({pi}, {pj}): mean {mean} vs {p} (SE {se})");
                if se > 0.0 {
                    worst = worst.max((mean - p).abs() / se);
                }
            }
        }
    }
    Ok(format!("121 grid points, sums exact, worst deviation {worst:.2} SE"))
}

fn cube_optimization() -> Outcome {
    let spec = GenSpec::cube(1_000_000, 0);
    let store = ok(cube_store(
        &ok(gen_records(&spec))?,
        &spec.dims,
        QueryFunction::Frequency,
    ))?;
    let methods = vec![
        CubeMethod::Storyboard,
        CubeMethod::EqualPps,
        CubeMethod::NoSize,
        CubeMethod::NoBias,
        CubeMethod::NoPps,
    ];
    let res = ok(run_cube_bench(&store, &CubeBenchConfig::desk(methods.clone(), 0)))?;
    let full = res.mean[0];
    let line = methods
        .iter()
        .zip(&res.mean)
        .map(|(m, e)| format!("{} {e:.3e}", m.as_str()))
        .collect::<Vec<_>>()
        .join(" ");
    let line = format!("{} cells: {line}", store.len());
    ensure!(
        full <= 0.9 * res.mean[1],
        "{line}: full optimizer not 10% below equal-size pps"
    );
    for (m, &e) in methods.iter().zip(&res.mean).skip(2) {
        ensure!(
            e > full,
            "{line}: lesion {} is not worse than the full optimizer",
            m.as_str()
        );
    }
    Ok(line)
}

fn random_segment<R: Rng>(r: &mut R) -> Segment {
    let distinct = r.random_range(1..30u64);
    let heavy = r.random_range(1..200u64);
    Segment::from_counts(
        (0..distinct).map(|x| (Value::from_id(x), r.random_range(1..=heavy))),
        ValueDomain::Categorical,
    )
}

fn bias_optimizer() -> Outcome {
    let mut r = rng::seeded(8);
    let mut instances = 0;
    for inst in 0..200 {
        let m = r.random_range(1..8);
        let segs: Vec<Segment> = (0..m).map(|_| random_segment(&mut r)).collect();
        let sizes: Vec<usize> = (0..m).map(|_| r.random_range(1..12)).collect();
        let refs: Vec<&Segment> = segs.iter().collect();
        let sol = ok(optimize_biases(&refs, &sizes))?;
        let j = bias_objective(&refs, &sizes, &sol.biases);
        let j0 = bias_objective(&refs, &sizes, &vec![0.0; m]);
        ensure!(j <= j0, "instance {inst}: J(b*) = {j} > J(0) = {j0}");
        for i in 0..m {
            let top = segs[i].max_count() as f64;
            let mut b = sol.biases.clone();
            for step in 0..=200 {
                b[i] = top * step as f64 / 200.0;
                let jg = bias_objective(&refs, &sizes, &b);
                ensure!(
                    j <= jg * (1.0 + 1e-6),
                    "instance {inst}: coordinate {i} at {} gives {jg} < J(b*) = {j}",
                    b[i]
                );
            }
        }
        instances += 1;
    }
    Ok(format!("{instances} random instances, no grid point beats the solver"))
}

fn allocation() -> Outcome {
    let mut r = rng::seeded(9);
    let mut max_dev = 0i64;
    for inst in 0..300 {
        let total = r.random_range(3..=60usize);
        let scores: Vec<f64> = (0..3).map(|_| 10f64.powf(r.random_range(-3.0..3.0))).collect();
        let got = ok(allocate_sizes(&scores, total, 1))?;
        ensure!(
            got.iter().sum::<usize>() == total,
            "instance {inst}: sizes {got:?} miss S_T = {total}"
        );
        let objective = |s: &[usize]| scores.iter().zip(s).map(|(a, &s)| a / (s * s) as f64).sum::<f64>();
        let mut best = (f64::INFINITY, vec![0; 3]);
        for s0 in 1..total {
            for s1 in 1..total - s0 {
                let s = vec![s0, s1, total - s0 - s1];
                let v = objective(&s);
                if v < best.0 {
                    best = (v, s);
                }
            }
        }
        for (g, b) in got.iter().zip(&best.1) {
            let d = (*g as i64 - *b as i64).abs();
            ensure!(
                d <= 1,
                "instance {inst}: allocated {got:?}, integer optimum {:?}",
                best.1
            );
            max_dev = max_dev.max(d);
        }
        // Lagrange condition on the unclamped real-valued sizes.
        let w: Vec<f64> = scores.iter().map(|a| a.cbrt()).collect();
        let cont = ok(continuous_allocation(&w, total, 1))?;
        let ratios: Vec<f64> = scores
            .iter()
            .zip(&cont)
            .filter(|(_, &s)| s > 1.0)
            .map(|(a, s)| a / s.powi(3))
            .collect();
        if let (Some(lo), Some(hi)) = (
            ratios.iter().copied().reduce(f64::min),
            ratios.iter().copied().reduce(f64::max),
        ) {
            ensure!(
                hi <= lo * (1.0 + 1e-9),
                "instance {inst}: a_i / s_i^3 not equalized: {ratios:?}"
            );
        }
    }
    Ok(format!(
        "300 instances, max deviation from the integer optimum {max_dev}"
    ))
}

fn decomposition() -> Outcome {
    let kt = 16u64;
    let mut r = rng::seeded(10);
    let records: Vec<Record> = (0..64i64)
        .flat_map(|t| (0..20).map(move |_| t))
        .map(|t| Record {
            value: Value::from_id(r.random_range(0..40)),
            time: Some(t),
            dims: Vec::new(),
        })
        .collect();
    let config = DatasetConfig {
        query_kind: QueryFunction::Rank,
        max_interval: kt,
        summary_size: 4,
        ..DatasetConfig::default()
    };
    let store = ok(partition_by_time(&records, &config, Dictionaries::default()))?;
    let segs = store.interval_items().expect("interval store");
    let exact = ok(summarize_interval_store(
        &store,
        IntervalMethod::Exact,
        &CoopConfig::new(4, kt),
        0,
    ))?;
    let probes: Vec<Value> = (0..41).map(Value::from_id).collect();
    let mut plans = 0;
    for t0 in 0..64u64 {
        for t1 in t0 + 1..=64 {
            let plan = match decompose_interval(t0, t1, 1, kt) {
                Ok(p) => p,
                Err(Error::InvalidInterval { .. }) if t1 - t0 > kt => continue,
                Err(e) => return Err(format!("[{t0}, {t1}): {e}")),
            };
            ensure!(t1 - t0 <= kt, "[{t0}, {t1}) accepted past k_T");
            let expected: Vec<(u64, i32)> = (t0..t1).map(|i| (i, 1)).collect();
            ensure!(
                plan.net_coefficients() == expected,
                "[{t0}, {t1}): plan {:?} does not expand to the indicator",
                plan.terms
            );
            let span = Segment::union(&segs[t0 as usize..t1 as usize], ValueDomain::Ordinal);
            for &x in &probes {
                for g in [QueryFunction::Frequency, QueryFunction::Rank] {
                    let est = ok(interval_estimate(&exact, &plan, g, x))?;
                    let want = ok(g.eval(&span, x))?;
                    ensure!(est == want, "[{t0}, {t1}) {} of {x:?}: {est} vs {want}", g.as_str());
                }
            }
            for q in [0.1, 0.5, 0.9] {
                let spec = QuerySpec {
                    target: QueryTarget::Interval { t0, t1 },
                    op: QueryOp::Quantile(q),
                    accumulator: AccumulatorKind::Exact,
                    capacity: 0,
                    seed: 0,
                };
                let want = span
                    .entries()
                    .iter()
                    .find(|e| span.count_le(e.0) as f64 >= q * span.total() as f64)
                    .map(|e| e.0);
                let got = ok(execute(&exact, &spec))?;
                ensure!(
                    Some(&got) == want.map(QueryAnswer::Value).as_ref(),
                    "[{t0}, {t1}) quantile {q}: {got:?} vs {want:?}"
                );
            }
            plans += 1;
        }
    }
    Ok(format!("{plans} intervals exact; longer ones rejected"))
}

fn accumulator_sweep() -> Outcome {
    let cfg = BenchConfig::default();
    let dist = ValueDist::zipf();
    let segs = ok(cfg.interval_segments(dist))?;
    let sweep = SweepConfig {
        dataset: dist.name().into(),
        kind: QueryFunction::Frequency,
        size: 64,
        max_interval: cfg.max_interval,
        lengths: vec![512],
        trials: cfg.trials,
        methods: Vec::new(),
        seed: cfg.seed,
    };
    let points = ok(run_accumulator_sweep(
        &segs,
        &sweep,
        512,
        AccumulatorKind::SpaceSaving,
        &ACCUMULATOR_CAPACITIES,
    ))?;
    let line = points
        .iter()
        .map(|p| format!("s_A={} {:.2e}", p.capacity, p.accumulator_err))
        .collect::<Vec<_>>()
        .join(" ");
    let last = points.last().expect("capacities");
    let line = format!("{line} vs summaries {:.2e}", last.summary_err);
    ensure!(
        last.accumulator_err <= 0.1 * last.summary_err,
        "{line}: largest accumulator above 10% of summary error"
    );
    for w in points.windows(2) {
        ensure!(w[1].accumulator_err <= w[0].accumulator_err, "{line}: not monotone");
    }
    Ok(line)
}

fn adversarial() -> Outcome {
    let mut detail = Vec::new();
    for mut c in builtin_counters(4, 12) {
        let t = ok(gen_adversarial(c.as_mut(), 4, 3))?;
        ensure!(t.max_error >= 3.0, "{} reaches only {}", t.strategy, t.max_error);
        detail.push(format!("{} {}", t.strategy, t.max_error));
    }
    let control = ok(gen_adversarial(&mut ExactCounter, 4, 3))?;
    ensure!(
        control.max_error == 0.0,
        "exact control drifted to {}",
        control.max_error
    );
    Ok(format!("{}; exact control 0", detail.join(" ")))
}

fn main() -> ExitCode {
    let criteria: [Criterion; 12] = [
        ("local error bounds", local_bounds, Duration::from_secs(60)),
        (
            "coop frequency tracker bound",
            coop_freq_bound,
            Duration::from_secs(120),
        ),
        ("coop quantile tracker bound", coop_quant_bound, Duration::MAX),
        ("interval error scaling", interval_scaling, Duration::from_secs(600)),
        ("pps unbiasedness", pps_unbiased, Duration::MAX),
        ("pair aggregation exactness", pair_agg_exact, Duration::MAX),
        ("cube optimization", cube_optimization, Duration::from_secs(900)),
        ("bias optimizer", bias_optimizer, Duration::MAX),
        ("allocation closed form", allocation, Duration::MAX),
        ("decomposition soundness", decomposition, Duration::MAX),
        ("accumulator sweep", accumulator_sweep, Duration::MAX),
        ("adversarial lower bound", adversarial, Duration::MAX),
    ];
    let mut failed = 0;
    for (i, (name, run, budget)) in criteria.into_iter().enumerate() {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        let outcome = match outcome {
            Ok(d) if elapsed > budget => Err(format!("{d}; took {elapsed:.1?}, budget {budget:.0?}")),
            o => o,
        };
        match outcome {
            Ok(d) => println!("criterion {:>2} {name}: PASS ({d}) [{elapsed:.1?}]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} {name}: FAIL ({d}) [{elapsed:.1?}]", i + 1);
            }
        }
    }
    println!("{} of 12 criteria passed", 12 - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
