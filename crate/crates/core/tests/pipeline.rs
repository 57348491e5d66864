//! Records through partitioning, summarization, the on-disk store and the
//! query engine.

use proptest::prelude::*;
use rand::Rng;
use segsum::coop::CoopConfig;
use segsum::cube::{build_cube, CubeBuildConfig, CubeMethod, WorkloadSpec};
use segsum::ingest::{
    load_segments, load_summaries, partition_by_cube, partition_by_time, save_segments, save_summaries, DatasetConfig,
    Dictionaries, Mode,
};
use segsum::model::max_local_error;
use segsum::query::{execute, AccumulatorKind, QueryAnswer, QueryOp, QuerySpec, QueryTarget};
use segsum::summarize::{summarize_interval_store, IntervalMethod};
use segsum::{rng, QueryFunction, Record, Segment, Value, ValueDomain, WeightedStore};

fn records(n: usize, seed: u64, dims: usize) -> Vec<Record> {
    let mut r = rng::seeded(seed);
    (0..n)
        .map(|i| Record {
            // Skewed ids: the minimum of two uniforms.
            value: Value::from_id(r.random_range(0..200u64).min(r.random_range(0..200u64))),
            time: Some(i as i64),
            dims: (0..dims).map(|_| r.random_range(0..3)).collect(),
        })
        .collect()
}

fn interval_config(kind: QueryFunction) -> DatasetConfig {
    DatasetConfig {
        query_kind: kind,
        time_resolution: 50,
        max_interval: 16,
        summary_size: 16,
        ..DatasetConfig::default()
    }
}

fn spec(t0: u64, t1: u64, op: QueryOp) -> QuerySpec {
    QuerySpec {
        target: QueryTarget::Interval { t0, t1 },
        op,
        accumulator: AccumulatorKind::Exact,
        capacity: 0,
        seed: 0,
    }
}

#[test]
fn stores_survive_a_disk_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let seg = partition_by_time(
        &records(4000, 1, 0),
        &interval_config(QueryFunction::Rank),
        Dictionaries::default(),
    )
    .unwrap();
    save_segments(&seg, &dir.path().join("seg")).unwrap();
    let back = load_segments(&dir.path().join("seg")).unwrap();
    assert_eq!(back.interval_items(), seg.interval_items());
    assert_eq!(back.config, seg.config);

    let sums = summarize_interval_store(&seg, IntervalMethod::Coop, &CoopConfig::new(16, 16), 4).unwrap();
    save_summaries(&sums, &dir.path().join("sum")).unwrap();
    let back = load_summaries(&dir.path().join("sum")).unwrap();
    assert_eq!(back.interval_items(), sums.interval_items());
    assert_eq!(back.meta.get("method").map(String::as_str), Some("coop"));
}

#[test]
fn coop_interval_answers_stay_within_the_local_bound() {
    let seg = partition_by_time(
        &records(8000, 2, 0),
        &interval_config(QueryFunction::Rank),
        Dictionaries::default(),
    )
    .unwrap();
    let sums = summarize_interval_store(&seg, IntervalMethod::Coop, &CoopConfig::new(16, 16), 0).unwrap();
    let items = seg.interval_items().unwrap();
    for (d, s) in items.iter().zip(sums.interval_items().unwrap()) {
        assert!(max_local_error(d, s, QueryFunction::Rank).unwrap() <= d.total() as f64 / 16.0);
    }
    // Any interval: error at most k * |D| / s, and in practice far less.
    for (a, b) in [(0u64, 16u64), (3, 19), (40, 56), (100, 101)] {
        let truth = Segment::union(&items[a as usize..b as usize], ValueDomain::Ordinal);
        let q = truth.total() as f64;
        for x in (0..200).step_by(7).map(Value::from_id) {
            let QueryAnswer::Estimate(est) = execute(&sums, &spec(a * 50, b * 50, QueryOp::Rank(x))).unwrap() else {
                panic!("rank is a point estimate");
            };
            let err = (est - truth.rank(x).unwrap()).abs();
            assert!(err <= q / 16.0, "[{a}, {b}) x={x:?}: {err}");
        }
    }
}

#[test]
fn cube_budget_and_filters() {
    let config = DatasetConfig {
        mode: Mode::Cube,
        dims: vec!["a".into(), "b".into()],
        ..DatasetConfig::default()
    };
    let dicts = Dictionaries {
        values: Vec::new(),
        dims: vec![vec!["0".into(), "1".into(), "2".into()]; 2],
    };
    let seg = partition_by_cube(&records(6000, 3, 2), &config, dicts).unwrap();
    let build = CubeBuildConfig {
        method: CubeMethod::Storyboard,
        workload: WorkloadSpec::default(),
        total_space: 90,
        min_size: 2,
        seed: 1,
        query_kind: QueryFunction::Frequency,
    };
    let (sums, alloc) = build_cube(&seg, &build).unwrap();
    assert_eq!(alloc.sizes.iter().sum::<usize>(), 90);
    assert!(alloc.sizes.iter().all(|&s| s >= 2));
    for (_, s) in sums.iter() {
        assert!(s.len() <= 90);
    }
    // Equal sizes of 200 hold every cell exactly, so filtered answers are exact.
    let (exact, _) = build_cube(
        &seg,
        &CubeBuildConfig {
            method: CubeMethod::Truncation,
            total_space: 9 * 200,
            ..build.clone()
        },
    )
    .unwrap();
    let in_filter: Vec<&Segment> = seg
        .iter()
        .filter(|(k, _)| k.to_string().starts_with("1|"))
        .map(|e| e.1)
        .collect();
    let truth = Segment::union(in_filter, ValueDomain::Categorical);
    let top_truth = truth
        .entries()
        .iter()
        .max_by_key(|e| (e.1, std::cmp::Reverse(e.0)))
        .unwrap();
    let spec = QuerySpec {
        target: QueryTarget::Cube {
            filters: vec![("a".into(), "1".into())],
        },
        op: QueryOp::TopK(1),
        accumulator: AccumulatorKind::SpaceSaving,
        capacity: 1000,
        seed: 0,
    };
    assert_eq!(
        execute(&exact, &spec).unwrap(),
        QueryAnswer::Top(vec![(top_truth.0, top_truth.1 as f64)])
    );

    let tight = CubeBuildConfig {
        total_space: 17,
        ..build
    };
    assert!(matches!(
        build_cube(&seg, &tight),
        Err(segsum::Error::InfeasibleBudget(_))
    ));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    /// Exact summaries make every interval query exact.
    #[test]
    fn exact_store_matches_ground_truth(seed in 0u64..1000, a in 0u64..60, len in 1u64..=16, x in 0u64..200) {
        let seg = partition_by_time(&records(4000, seed, 0), &interval_config(QueryFunction::Rank), Dictionaries::default())
            .unwrap();
        let exact = summarize_interval_store(&seg, IntervalMethod::Exact, &CoopConfig::new(16, 16), 0).unwrap();
        let b = (a + len).min(80);
        prop_assume!(a < b);
        let truth = Segment::union(&seg.interval_items().unwrap()[a as usize..b as usize], ValueDomain::Ordinal);
        let x = Value::from_id(x);
        let freq = execute(&exact, &spec(a * 50, b * 50, QueryOp::Frequency(x))).unwrap();
        prop_assert_eq!(freq, QueryAnswer::Estimate(truth.count(x) as f64));
        let rank = execute(&exact, &spec(a * 50, b * 50, QueryOp::Rank(x))).unwrap();
        prop_assert_eq!(rank, QueryAnswer::Estimate(truth.count_le(x) as f64));
    }
}
