mod settings;

use std::fs::File;
use std::io::{self, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use segsum::coop::{CoopConfig, ThresholdMode};
use segsum::cube::{build_cube, CubeBuildConfig, CubeMethod, WorkloadSpec};
use segsum::ingest::{
    load_segments, load_summaries, partition, read_csv, save_segments, save_summaries, CsvLayout, DatasetConfig, Mode,
    SummaryStore,
};
use segsum::query::{execute, AccumulatorKind, QueryAnswer, QueryOp, QuerySpec, QueryTarget};
use segsum::summarize::{summarize_interval_store, IntervalMethod};
use segsum::{QueryFunction, Value, ValueDomain};
use segsum_bench::gen::{gen_records, write_records, GenSpec, ValueDist};
use segsum_bench::interval::Method;
use segsum_bench::suite::{run as run_bench, BenchConfig, Suite};
use serde_json::json;

use settings::{List, Settings};

/// Mergeable per-segment summaries for interval and data-cube queries.
#[derive(Parser, Debug)]
#[command(name = "segsum", version)]
struct Cli {
    /// TOML file with defaults; `[command]` tables override top-level keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Print results as one JSON record per line.
    #[arg(long, global = true)]
    json: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Write a synthetic dataset as CSV.
    Gen(GenArgs),
    /// Partition a CSV into a segment store.
    Ingest(IngestArgs),
    /// Summarize a segment store.
    Summarize(SummarizeArgs),
    /// Answer one query from a summary store.
    Query(QueryArgs),
    /// Run benchmark suites and write their CSV reports.
    Bench(BenchArgs),
}

#[derive(Args, Debug)]
struct GenArgs {
    /// `zipf` or `uniform`.
    #[arg(long)]
    dist: Option<String>,
    /// Number of records.
    #[arg(long)]
    n: Option<usize>,
    /// Cardinality of each dimension column, e.g. `10,10,10,10`.
    #[arg(long)]
    dims: Option<List>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct IngestArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    store: Option<PathBuf>,
    /// `interval` or `cube`.
    #[arg(long)]
    mode: Option<String>,
    /// `frequency` (categorical values) or `rank` (numeric values).
    #[arg(long)]
    kind: Option<String>,
    /// Segment length in time units.
    #[arg(long)]
    tg: Option<u64>,
    /// Longest interval in segments.
    #[arg(long)]
    kt: Option<u64>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long = "s-total")]
    s_total: Option<u64>,
    #[arg(long = "s-min")]
    s_min: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Dimension columns for cube mode; all other columns by default.
    #[arg(long)]
    dims: Option<List>,
    #[arg(long = "value-column")]
    value_column: Option<String>,
    #[arg(long = "time-column")]
    time_column: Option<String>,
}

#[derive(Args, Debug)]
struct SummarizeArgs {
    /// Segment store to read.
    #[arg(long)]
    store: Option<PathBuf>,
    /// Summary store to write.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Interval: coop, pps, truncation, usample, exact. Cube: storyboard,
    /// pps, truncation, usample, usample-prop, strat and the lesions.
    #[arg(long)]
    method: Option<String>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    kt: Option<u64>,
    #[arg(long = "s-total")]
    s_total: Option<usize>,
    #[arg(long = "s-min")]
    s_min: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Workload filter probability per dimension.
    #[arg(long)]
    workload: Option<f64>,
    /// Workload queries sampled for the optimizer.
    #[arg(long)]
    queries: Option<usize>,
    /// Local accuracy slack `r` of cooperative summaries.
    #[arg(long)]
    slack: Option<f64>,
    /// `calct` or `naive` heavy-hitter threshold.
    #[arg(long)]
    threshold: Option<String>,
}

#[derive(Args, Debug)]
struct QueryArgs {
    #[arg(long)]
    store: Option<PathBuf>,
    /// `frequency`, `rank`, `quantile` or `topk`.
    #[arg(long)]
    op: Option<String>,
    /// Probe value for frequency and rank.
    #[arg(long)]
    x: Option<String>,
    /// Quantile fraction.
    #[arg(long)]
    q: Option<f64>,
    /// Number of heavy hitters.
    #[arg(long)]
    k: Option<usize>,
    /// Interval start, in time units.
    #[arg(long)]
    t0: Option<u64>,
    /// Interval end (exclusive), in time units.
    #[arg(long)]
    t1: Option<u64>,
    /// Cube filter `dim=value`; repeat for more dimensions.
    #[arg(long = "filter")]
    filters: Vec<String>,
    /// `exact`, `spacesaving` or `pps`.
    #[arg(long)]
    accumulator: Option<String>,
    /// Capacity of a bounded accumulator.
    #[arg(long)]
    sa: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args, Debug)]
struct BenchArgs {
    /// Comma-separated suites, or `all`.
    #[arg(long)]
    suite: Option<List>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Restrict comparison suites to these methods.
    #[arg(long)]
    method: Option<List>,
    #[arg(long)]
    records: Option<usize>,
    #[arg(long)]
    segments: Option<usize>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    kt: Option<u64>,
    #[arg(long)]
    trials: Option<usize>,
    #[arg(long = "cube-records")]
    cube_records: Option<usize>,
    #[arg(long = "s-total")]
    s_total: Option<usize>,
    #[arg(long)]
    workload: Option<f64>,
    #[arg(long)]
    queries: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
}

/// Prints a result either as text or as one JSON line with the settings.
struct Output<'a> {
    json: bool,
    settings: &'a Settings,
}

impl Output<'_> {
    fn emit(&self, text: &str, mut record: serde_json::Value) {
        if self.json {
            record["config"] = self.settings.to_json();
            println!("{record}");
        } else {
            self.settings.echo();
            println!("{text}");
        }
    }
}

fn path_string(p: &Path) -> String {
    p.display().to_string()
}

fn gen(cli: &Cli, a: &GenArgs) -> Result<()> {
    let mut st = Settings::load(cli.config.as_deref(), "gen")?;
    let dist: ValueDist = st.get("dist", a.dist.clone(), "zipf".to_string())?.parse()?;
    let n = st.get("n", a.n, 1_000_000)?;
    let dims = st.get("dims", a.dims.clone(), List::default())?;
    let seed = st.get("seed", a.seed, 0)?;
    let out: PathBuf = st.require("out", a.out.as_ref().map(|p| path_string(p)))?.into();
    let dims = dims
        .0
        .iter()
        .map(|d| d.parse::<u64>().with_context(|| format!("dimension cardinality `{d}`")))
        .collect::<Result<Vec<_>>>()?;
    let spec = GenSpec { dist, n, dims, seed };
    let records = gen_records(&spec)?;
    write_records(
        &records,
        dist,
        BufWriter::new(File::create(&out).with_context(|| path_string(&out))?),
    )?;
    Output {
        json: cli.json,
        settings: &st,
    }
    .emit(
        &format!("wrote {n} records to {}", out.display()),
        json!({ "command": "gen", "records": n, "out": path_string(&out) }),
    );
    Ok(())
}

fn ingest(cli: &Cli, a: &IngestArgs) -> Result<()> {
    let mut st = Settings::load(cli.config.as_deref(), "ingest")?;
    let d = DatasetConfig::default();
    let input: PathBuf = st.require("input", a.input.as_ref().map(|p| path_string(p)))?.into();
    let store: PathBuf = st.require("store", a.store.as_ref().map(|p| path_string(p)))?.into();
    let mode: Mode = st.get("mode", a.mode.clone(), "interval".into())?.parse()?;
    let kind: QueryFunction = st.get("kind", a.kind.clone(), "frequency".into())?.parse()?;
    let tg = st.get("tg", a.tg, d.time_resolution)?;
    let kt = st.get("kt", a.kt, d.max_interval)?;
    let s = st.get("s", a.s, d.summary_size)?;
    let s_total = st.get("s-total", a.s_total, d.total_space)?;
    let s_min = st.get("s-min", a.s_min, d.min_size)?;
    let seed = st.get("seed", a.seed, d.seed)?;
    let dims = st.get_opt("dims", a.dims.clone())?;
    let value_column = st.get("value-column", a.value_column.clone(), "value".into())?;
    let time_column = st.get("time-column", a.time_column.clone(), "time".into())?;

    let domain = match kind {
        QueryFunction::Frequency => ValueDomain::Categorical,
        QueryFunction::Rank => ValueDomain::Ordinal,
    };
    let layout = CsvLayout {
        value_column,
        time_column: Some(time_column),
        dim_columns: match mode {
            Mode::Interval => Some(Vec::new()),
            Mode::Cube => dims.map(|l| l.0),
        },
        domain,
    };
    let file = File::open(&input).with_context(|| format!("input not found: {}", input.display()))?;
    let data = read_csv(BufReader::new(file), &layout)?;
    let config = DatasetConfig {
        mode,
        query_kind: kind,
        time_resolution: tg,
        max_interval: kt,
        dims: data.dims.clone(),
        summary_size: s,
        total_space: s_total,
        min_size: s_min,
        seed,
    };
    let segments = partition(&data.records, &config, data.dictionaries)?;
    save_segments(&segments, &store)?;
    Output {
        json: cli.json,
        settings: &st,
    }
    .emit(
        &format!(
            "{} records in {} {} segments -> {}",
            data.records.len(),
            segments.len(),
            mode.as_str(),
            store.display()
        ),
        json!({
            "command": "ingest",
            "records": data.records.len(),
            "segments": segments.len(),
            "store": path_string(&store),
        }),
    );
    Ok(())
}

fn summarize(cli: &Cli, a: &SummarizeArgs) -> Result<()> {
    let mut st = Settings::load(cli.config.as_deref(), "summarize")?;
    let input: PathBuf = st.require("store", a.store.as_ref().map(|p| path_string(p)))?.into();
    let out: PathBuf = st.require("out", a.out.as_ref().map(|p| path_string(p)))?.into();
    let mut store = load_segments(&input)?;
    let (summaries, allocation): (SummaryStore, _) = match store.mode() {
        Mode::Interval => {
            let method: IntervalMethod = st.get("method", a.method.clone(), "coop".into())?.parse()?;
            store.config.summary_size = st.get("s", a.s, store.config.summary_size)?;
            store.config.max_interval = st.get("kt", a.kt, store.config.max_interval)?;
            let seed = st.get("seed", a.seed, store.config.seed)?;
            let slack = st.get("slack", a.slack, 1.0)?;
            let threshold = match st.get("threshold", a.threshold.clone(), "calct".into())?.as_str() {
                "calct" => ThresholdMode::CalcT,
                "naive" => ThresholdMode::Naive,
                other => bail!("unknown threshold mode `{other}` (expected calct or naive)"),
            };
            let coop = CoopConfig {
                slack,
                threshold,
                ..CoopConfig::new(store.config.summary_size, store.config.max_interval)
            };
            store.config.seed = seed;
            (summarize_interval_store(&store, method, &coop, seed)?, None)
        }
        Mode::Cube => {
            let method: CubeMethod = st.get("method", a.method.clone(), "storyboard".into())?.parse()?;
            let total_space = st.get("s-total", a.s_total, store.config.total_space as usize)?;
            let min_size = st.get("s-min", a.s_min, store.config.min_size)?;
            let seed = st.get("seed", a.seed, store.config.seed)?;
            let d = WorkloadSpec::default();
            let workload = WorkloadSpec {
                p: st.get("workload", a.workload, d.p)?,
                samples: st.get("queries", a.queries, d.samples)?,
                seed,
                ..d
            };
            let build = CubeBuildConfig {
                method,
                workload,
                total_space,
                min_size,
                seed,
                query_kind: store.config.query_kind,
            };
            store.config.total_space = total_space as u64;
            store.config.min_size = min_size;
            store.config.seed = seed;
            let (summaries, allocation) = build_cube(&store, &build)?;
            (summaries, Some(allocation))
        }
    };
    save_summaries(&summaries, &out)?;
    if let Some(a) = allocation {
        a.write_csv(BufWriter::new(File::create(out.join("allocation.csv"))?))?;
    }
    let stored: usize = summaries.iter().map(|(_, s)| s.len()).sum();
    Output {
        json: cli.json,
        settings: &st,
    }
    .emit(
        &format!(
            "{} summaries holding {stored} entries -> {}",
            summaries.len(),
            out.display()
        ),
        json!({
            "command": "summarize",
            "summaries": summaries.len(),
            "entries": stored,
            "out": path_string(&out),
        }),
    );
    Ok(())
}

fn parse_value(store: &SummaryStore, x: &str) -> Result<Value> {
    match store.config.domain() {
        ValueDomain::Categorical => store
            .dictionaries
            .value_id(x)
            .ok_or_else(|| segsum::Error::UnknownValue(x.to_string()).into()),
        ValueDomain::Ordinal => {
            let f: f64 = x.parse().with_context(|| format!("`{x}` is not a number"))?;
            Ok(Value::from_f64(f)?)
        }
    }
}

fn query(cli: &Cli, a: &QueryArgs) -> Result<()> {
    let mut st = Settings::load(cli.config.as_deref(), "query")?;
    let path: PathBuf = st.require("store", a.store.as_ref().map(|p| path_string(p)))?.into();
    let store = load_summaries(&path)?;
    let op_name = st.get("op", a.op.clone(), "quantile".into())?;
    let op = match op_name.as_str() {
        "frequency" | "freq" => QueryOp::Frequency(parse_value(&store, &st.require("x", a.x.clone())?)?),
        "rank" => QueryOp::Rank(parse_value(&store, &st.require("x", a.x.clone())?)?),
        "quantile" => QueryOp::Quantile(st.get("q", a.q, 0.5)?),
        "topk" | "heavy-hitters" => QueryOp::TopK(st.get("k", a.k, 10)?),
        other => bail!("unknown query op `{other}` (expected frequency, rank, quantile or topk)"),
    };
    let target = match store.mode() {
        Mode::Interval => QueryTarget::Interval {
            t0: st.require("t0", a.t0)?,
            t1: st.require("t1", a.t1)?,
        },
        Mode::Cube => {
            let flag = (!a.filters.is_empty()).then(|| List(a.filters.clone()));
            let filters = st
                .get("filter", flag, List::default())?
                .0
                .iter()
                .map(|f| match f.split_once('=') {
                    Some((d, v)) => Ok((d.trim().to_string(), v.trim().to_string())),
                    None => bail!("filter `{f}` is not of the form dim=value"),
                })
                .collect::<Result<Vec<_>>>()?;
            QueryTarget::Cube { filters }
        }
    };
    let accumulator: AccumulatorKind = st.get("accumulator", a.accumulator.clone(), "exact".into())?.parse()?;
    let capacity = st.get("sa", a.sa, 100_000)?;
    let seed = st.get("seed", a.seed, 0)?;
    let spec = QuerySpec {
        target,
        op,
        accumulator,
        capacity,
        seed,
    };
    let answer = execute(&store, &spec)?;
    let domain = store.config.domain();
    let name = |v: Value| store.dictionaries.value_name(domain, v);
    let (text, record) = match &answer {
        QueryAnswer::Estimate(e) => (format!("{op_name} = {e}"), json!(e)),
        QueryAnswer::Value(v) => (format!("{op_name} = {}", name(*v)), json!(name(*v))),
        QueryAnswer::Top(items) => {
            let rows: Vec<String> = items.iter().map(|(v, w)| format!("{}\t{w}", name(*v))).collect();
            let list: Vec<_> = items.iter().map(|(v, w)| json!([name(*v), w])).collect();
            (format!("value\tweight\n{}", rows.join("\n")), json!(list))
        }
    };
    Output {
        json: cli.json,
        settings: &st,
    }
    .emit(&text, json!({ "command": "query", "op": op_name, "answer": record }));
    Ok(())
}

fn bench(cli: &Cli, a: &BenchArgs) -> Result<()> {
    let mut st = Settings::load(cli.config.as_deref(), "bench")?;
    let d = BenchConfig::default();
    let suites = st.get("suite", a.suite.clone(), List(vec!["all".into()]))?;
    let suites: Vec<Suite> = if suites.0.iter().any(|s| s == "all") {
        Suite::ALL.to_vec()
    } else {
        suites.0.iter().map(|s| s.parse()).collect::<segsum::Result<_>>()?
    };
    let out: PathBuf = st
        .get("out", a.out.as_ref().map(|p| path_string(p)), "bench_out".into())?
        .into();
    let mut cfg = BenchConfig {
        records: st.get("records", a.records, d.records)?,
        segments: st.get("segments", a.segments, d.segments)?,
        size: st.get("s", a.s, d.size)?,
        max_interval: st.get("kt", a.kt, d.max_interval)?,
        trials: st.get("trials", a.trials, d.trials)?,
        cube_records: st.get("cube-records", a.cube_records, d.cube_records)?,
        total_space: st.get("s-total", a.s_total, d.total_space)?,
        workload_p: st.get("workload", a.workload, d.workload_p)?,
        queries: st.get("queries", a.queries, d.queries)?,
        seed: st.get("seed", a.seed, d.seed)?,
        ..d
    };
    if let Some(methods) = st.get_opt("method", a.method.clone())? {
        let (mut interval, mut cube) = (Vec::new(), Vec::new());
        for m in &methods.0 {
            let im = m.parse::<Method>().ok();
            let cm = m.parse::<CubeMethod>().ok();
            if im.is_none() && cm.is_none() {
                bail!("unknown bench method `{m}`");
            }
            interval.extend(im);
            cube.extend(cm);
        }
        cfg.interval_methods = (!interval.is_empty()).then_some(interval);
        cfg.cube_methods = (!cube.is_empty()).then_some(cube);
    }
    let written = run_bench(&suites, &cfg, &out)?;
    let files: Vec<String> = written.iter().map(|p| path_string(p)).collect();
    Output {
        json: cli.json,
        settings: &st,
    }
    .emit(
        &files
            .iter()
            .map(|f| format!("wrote {f}"))
            .collect::<Vec<_>>()
            .join("\n"),
        json!({ "command": "bench", "files": files }),
    );
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Gen(a) => gen(&cli, a),
        Command::Ingest(a) => ingest(&cli, a),
        Command::Summarize(a) => summarize(&cli, a),
        Command::Query(a) => query(&cli, a),
        Command::Bench(a) => bench(&cli, a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let _ = io::stdout().flush();
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
