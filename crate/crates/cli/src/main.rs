use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::parser::ValueSource;
use clap::{ArgAction, ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use dgnn_core::deps::{build_dep_graph, naive_closure, DepConfig, DepMode, DepSearch};
use dgnn_core::graph::DynGraph;
use dgnn_core::model::{apply_params, build_model, load_params, save_params, ModelConfig, ModelKind};
use dgnn_core::stream::{generate_synthetic_stream, read_stream, write_stream, GraphStream, ReadOptions, SynthConfig};
use dgnn_core::tensor::OptimizerKind;
use dgnn_core::train::{
    evaluate_stream, run_pipeline, train_stream, write_jsonl, MetricsRecord, StageSecs, Summary, TrainConfig,
    TrainMode, TrainOutput,
};
use dgnn_core::window::{adaptive_windows, fixed_windows, Window};
use serde_json::{json, Value};

/// Event-stream dynamic GNN training engine.
#[derive(Parser, Debug)]
#[command(name = "dgnn", version, about, args_override_self = true)]
struct Cli {
    #[command(flatten)]
    global: GlobalArgs,
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Args, Debug)]
struct GlobalArgs {
    /// Seed for parameter init, embeddings, negative sampling and generation.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Worker threads for parallel event execution.
    #[arg(long, global = true, default_value_t = 1)]
    workers: usize,
    /// Fixed-order gradient reduction: results do not depend on --workers.
    #[arg(long, global = true, num_args = 0..=1, default_value_t = true, default_missing_value = "true", action = ArgAction::Set)]
    deterministic: bool,
    /// Write per-epoch JSON-lines metrics plus a summary line here.
    #[arg(long, global = true, value_name = "PATH")]
    metrics_out: Option<PathBuf>,
    /// Flat `key = value` file with the same keys as the long flags.
    /// Flags given on the command line win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Zero every timing field in the metrics so identical runs produce
    /// identical output.
    #[arg(long, global = true)]
    no_timings: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a model over a stream, window by window.
    Train(TrainArgs),
    /// Generate a synthetic stream with planted locality clusters.
    Gen(GenArgs),
    /// Print dependency DAGs and chain statistics for each window.
    Deps(DepsArgs),
    /// Score a stream with saved parameters, without training.
    Eval(EvalArgs),
    /// Time the same workload with 1 vs --workers workers and with the
    /// pipeline off and on.
    Bench(BenchArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModeArg {
    Batch,
    Slide,
    Adaslide,
}

impl From<ModeArg> for TrainMode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Batch => TrainMode::Batch,
            ModeArg::Slide => TrainMode::Slide,
            ModeArg::Adaslide => TrainMode::AdaSlide,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum ModelArg {
    DyrepLite,
    DiffusionLite,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::DyrepLite => ModelKind::DyrepLite,
            ModelArg::DiffusionLite => ModelKind::DiffusionLite,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DepModeArg {
    Paper,
    Symmetric,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum DepSearchArg {
    Scan,
    Indexed,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum OptimizerArg {
    Sgd,
    Adam,
}

#[derive(Args, Debug)]
struct StreamArgs {
    /// Edge-list stream file (`u,v,t,kind[,weight]` per line).
    #[arg(long, value_name = "PATH")]
    stream: PathBuf,
    /// Warn about stream validation problems instead of failing.
    #[arg(long)]
    lenient: bool,
}

#[derive(Args, Debug)]
struct WindowArgs {
    /// Windowing policy.
    #[arg(long, value_enum, default_value = "slide")]
    mode: ModeArg,
    /// Fixed window size (batch, slide).
    #[arg(long, default_value_t = 200)]
    window: usize,
    /// Fixed window stride (slide).
    #[arg(long, default_value_t = 40)]
    stride: usize,
    /// Minimum adaptive window size.
    #[arg(long = "L", value_name = "L", default_value_t = 100)]
    min_window: usize,
    /// Maximum adaptive window size.
    #[arg(long = "H", value_name = "H", default_value_t = 300)]
    max_window: usize,
    /// Adaptive stride as a fraction of the window size.
    #[arg(long, default_value_t = 0.2)]
    stride_frac: f64,
    /// Share of an adaptive window held out for evaluation.
    #[arg(long, default_value_t = 0.2)]
    test_frac: f64,
}

#[derive(Args, Debug)]
struct ModelArgs {
    /// Reference model.
    #[arg(long, value_enum, default_value = "dyrep-lite")]
    model: ModelArg,
    /// Embedding dimension.
    #[arg(long, default_value_t = 64)]
    dim: usize,
    /// Decay of propagated updates (diffusion-lite).
    #[arg(long, default_value_t = 0.1)]
    decay: f64,
    /// Aggregate over in- and out-neighbours instead of in-neighbours only.
    #[arg(long)]
    aggregate_both: bool,
    /// Start every parameter at zero.
    #[arg(long)]
    zero_init: bool,
}

#[derive(Args, Debug)]
struct ExecArgs {
    /// Epochs per window.
    #[arg(long, default_value_t = 20)]
    epochs: usize,
    /// Negative samples per positive event.
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Optimizer.
    #[arg(long, value_enum, default_value = "sgd")]
    optimizer: OptimizerArg,
    /// Learning rate.
    #[arg(long, default_value_t = 0.05)]
    lr: f64,
    /// Hop count of captured event subgraphs.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Dependency rule.
    #[arg(long, value_enum, default_value = "paper")]
    dep_mode: DepModeArg,
    /// Dependency search strategy.
    #[arg(long, value_enum, default_value = "scan")]
    dep_search: DepSearchArg,
}

#[derive(Args, Debug)]
struct TrainArgs {
    #[command(flatten)]
    input: StreamArgs,
    #[command(flatten)]
    window: WindowArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    exec: ExecArgs,
    /// Run window determination, dependency analysis and scheduling on
    /// their own threads, overlapped with training.
    #[arg(long)]
    pipeline: bool,
    /// Save trained parameters here.
    #[arg(long, value_name = "PATH")]
    params_out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct GenArgs {
    /// Output stream file.
    #[arg(long, value_name = "PATH")]
    out: PathBuf,
    /// Number of nodes.
    #[arg(long, default_value_t = 1000)]
    nodes: usize,
    /// Number of events.
    #[arg(long, default_value_t = 5000)]
    events: usize,
    /// Shortest cluster, in events.
    #[arg(long, default_value_t = 100)]
    cluster_min: usize,
    /// Longest cluster, in events.
    #[arg(long, default_value_t = 300)]
    cluster_max: usize,
    /// Nodes per cluster pool.
    #[arg(long, default_value_t = 20)]
    pool: usize,
}

#[derive(Args, Debug)]
struct DepsArgs {
    #[command(flatten)]
    input: StreamArgs,
    #[command(flatten)]
    window: WindowArgs,
    /// Model whose update radius decides the write sets.
    #[arg(long, value_enum, default_value = "dyrep-lite")]
    model: ModelArg,
    /// Override the update radius (0: endpoints, 1: 1-hop neighbourhood).
    #[arg(long)]
    radius: Option<usize>,
    /// Hop count of captured event subgraphs.
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Dependency rule.
    #[arg(long, value_enum, default_value = "paper")]
    dep_mode: DepModeArg,
    /// Dependency search strategy.
    #[arg(long, value_enum, default_value = "scan")]
    dep_search: DepSearchArg,
    /// Also check every closure against a brute-force pairwise closure.
    #[arg(long)]
    oracle: bool,
    /// Only print statistics, no DOT.
    #[arg(long)]
    no_dot: bool,
}

#[derive(Args, Debug)]
struct EvalArgs {
    #[command(flatten)]
    input: StreamArgs,
    #[command(flatten)]
    window: WindowArgs,
    /// Parameter file written by `train --params-out`.
    #[arg(long, value_name = "PATH")]
    params: PathBuf,
    /// Aggregate over in- and out-neighbours (must match training).
    #[arg(long)]
    aggregate_both: bool,
    /// Negative samples per positive event.
    #[arg(long, default_value_t = 5)]
    negatives: usize,
    /// Hop count of captured event subgraphs.
    #[arg(long, default_value_t = 1)]
    k: usize,
}

#[derive(Args, Debug)]
struct BenchArgs {
    #[command(flatten)]
    input: StreamArgs,
    #[command(flatten)]
    window: WindowArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    exec: ExecArgs,
    /// Timed repetitions per configuration; the fastest is reported.
    #[arg(long, default_value_t = 1)]
    reps: usize,
}

enum CliError {
    /// Bad flags, config or inputs: exit 1.
    Config(String),
    /// Failure while running: exit 2.
    Runtime(String),
}

type CliResult<T = ()> = Result<T, CliError>;

fn config_err(e: impl std::fmt::Display) -> CliError {
    CliError::Config(e.to_string())
}

fn runtime_err(e: impl std::fmt::Display) -> CliError {
    CliError::Runtime(e.to_string())
}

/// Folds `--config` entries into the argument list: each key that was not
/// given on the command line is appended as `--key=value`.
fn merge_config(argv: Vec<OsString>) -> Result<Vec<OsString>, clap::Error> {
    let mut cmd = Cli::command();
    let matches = cmd.clone().try_get_matches_from(&argv)?;
    let Some(path) = matches.get_one::<PathBuf>("config") else { return Ok(argv) };
    let text = std::fs::read_to_string(path).map_err(|e| {
        cmd.error(clap::error::ErrorKind::Io, format!("cannot read config {}: {e}", path.display()))
    })?;
    let (sub_name, sub_matches) = matches.subcommand().expect("subcommand is required");
    cmd.build();
    let sub = cmd.find_subcommand(sub_name).expect("matched subcommand exists").clone();

    let mut out = argv;
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let bad = |msg: String| Cli::command().error(clap::error::ErrorKind::InvalidValue, msg);
        let Some((key, value)) = line.split_once('=') else {
            return Err(bad(format!("config line {}: expected `key = value`", lineno + 1)));
        };
        let key = key.trim();
        let value = value.trim().trim_matches('"');
        let flag = key.replace('_', "-");
        let arg = sub
            .get_arguments()
            .find(|a| a.get_long().is_some_and(|l| l == flag || l == key))
            .ok_or_else(|| bad(format!("config line {}: unknown key {key:?} for `{sub_name}`", lineno + 1)))?;
        if arg.get_id() == "config" {
            continue;
        }
        if sub_matches.value_source(arg.get_id().as_str()) == Some(ValueSource::CommandLine) {
            continue;
        }
        let long = arg.get_long().expect("matched on long name");
        if matches!(arg.get_action(), ArgAction::SetTrue) {
            match value {
                "true" => out.push(format!("--{long}").into()),
                "false" => {}
                other => return Err(bad(format!("config key {key}: expected true or false, got {other:?}"))),
            }
        } else {
            out.push(format!("--{long}={value}").into());
        }
    }
    Ok(out)
}

fn parse_cli(argv: Vec<OsString>) -> Result<Cli, clap::Error> {
    let argv = merge_config(argv)?;
    let matches: ArgMatches = Cli::command().try_get_matches_from(argv)?;
    Cli::from_arg_matches(&matches)
}

fn load_stream(input: &StreamArgs) -> CliResult<GraphStream> {
    read_stream(&input.stream, ReadOptions { lenient: input.lenient })
        .map_err(|e| config_err(format!("{}: {e}", input.stream.display())))
}

fn model_config(m: &ModelArgs, seed: u64) -> ModelConfig {
    ModelConfig {
        kind: m.model.into(),
        dim: m.dim,
        aggregate_both: m.aggregate_both,
        decay: m.decay,
        zero_init: m.zero_init,
        seed,
    }
}

fn dep_mode(m: DepModeArg) -> DepMode {
    match m {
        DepModeArg::Paper => DepMode::Paper,
        DepModeArg::Symmetric => DepMode::Symmetric,
    }
}

fn dep_search(s: DepSearchArg) -> DepSearch {
    match s {
        DepSearchArg::Scan => DepSearch::Scan,
        DepSearchArg::Indexed => DepSearch::Indexed,
    }
}

fn train_config(g: &GlobalArgs, w: &WindowArgs, x: &ExecArgs, pipeline: bool) -> CliResult<TrainConfig> {
    let optimizer = match x.optimizer {
        OptimizerArg::Sgd => OptimizerKind::Sgd { lr: x.lr },
        OptimizerArg::Adam => OptimizerKind::adam(x.lr),
    };
    if !(x.lr > 0.0 && x.lr.is_finite()) {
        return Err(config_err(format!("invalid configuration: learning rate must be positive, got {}", x.lr)));
    }
    let cfg = TrainConfig {
        mode: w.mode.into(),
        window: w.window,
        stride: w.stride,
        min_window: w.min_window,
        max_window: w.max_window,
        stride_frac: w.stride_frac,
        test_frac: w.test_frac,
        epochs: x.epochs,
        negatives: x.negatives,
        optimizer,
        workers: g.workers,
        pipeline,
        deterministic: g.deterministic,
        seed: g.seed,
        k: x.k,
        dep_mode: dep_mode(x.dep_mode),
        dep_search: dep_search(x.dep_search),
        ..TrainConfig::default()
    };
    cfg.validate().map_err(config_err)?;
    Ok(cfg)
}

fn header(command: &str, g: &GlobalArgs, body: Value) -> CliResult {
    let mut h = json!({
        "record": "config",
        "command": command,
        "seed": g.seed,
        "workers": g.workers,
        "deterministic": g.deterministic,
        "metrics_out": g.metrics_out,
    });
    if let (Value::Object(h), Value::Object(b)) = (&mut h, body) {
        h.extend(b);
    }
    println!("{h}");
    Ok(())
}

fn strip_timings(records: &mut [MetricsRecord], summary: &mut Summary) {
    for r in records.iter_mut() {
        r.stage_secs = StageSecs::default();
        r.epoch_secs = 0.0;
    }
    summary.wall_secs = 0.0;
    summary.stage_secs = StageSecs::default();
    summary.da_overlap_fraction = 0.0;
}

fn emit_metrics(g: &GlobalArgs, out: &mut TrainOutput) -> CliResult {
    if g.no_timings {
        strip_timings(&mut out.records, &mut out.summary);
    }
    if let Some(path) = &g.metrics_out {
        let file = File::create(path).map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        write_jsonl(&out.records, &out.summary, &mut w).and_then(|_| w.flush()).map_err(runtime_err)?;
    }
    println!("{}", serde_json::to_string(&out.summary).map_err(runtime_err)?);
    Ok(())
}

fn cmd_train(g: &GlobalArgs, a: &TrainArgs) -> CliResult {
    let mcfg = model_config(&a.model, g.seed);
    let cfg = train_config(g, &a.window, &a.exec, a.pipeline)?;
    let mut model = build_model(&mcfg).map_err(config_err)?;
    header("train", g, json!({ "stream": a.input.stream, "model": mcfg, "train": cfg, "params_out": a.params_out }))?;
    let stream = load_stream(&a.input)?;
    let mut out = if cfg.pipeline { run_pipeline(&stream, &mut *model, &cfg) } else { train_stream(&stream, &mut *model, &cfg) }
        .map_err(runtime_err)?;
    emit_metrics(g, &mut out)?;
    if let Some(path) = &a.params_out {
        let file = File::create(path).map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
        let mut w = BufWriter::new(file);
        save_params(&*model, &mut w).map_err(runtime_err)?;
        w.flush().map_err(runtime_err)?;
    }
    Ok(())
}

fn cmd_gen(g: &GlobalArgs, a: &GenArgs) -> CliResult {
    let cfg = SynthConfig {
        num_nodes: a.nodes,
        num_events: a.events,
        cluster_size_range: (a.cluster_min, a.cluster_max),
        cluster_node_pool: a.pool,
        seed: g.seed,
    };
    header("gen", g, json!({ "out": a.out, "synth": cfg }))?;
    let synth = generate_synthetic_stream(&cfg).map_err(config_err)?;
    let file = File::create(&a.out).map_err(|e| runtime_err(format!("{}: {e}", a.out.display())))?;
    let mut w = BufWriter::new(file);
    write_stream(&synth.stream, &mut w).and_then(|_| w.flush()).map_err(runtime_err)?;
    println!("{}", json!({ "record": "gen", "events": synth.stream.events.len(), "clusters": synth.clusters.len() }));
    Ok(())
}

fn deps_windows(stream: &GraphStream, w: &WindowArgs) -> CliResult<Vec<Window>> {
    let m = stream.events.len();
    let bad = |msg: &str| Err(config_err(format!("invalid configuration: {msg}")));
    Ok(match TrainMode::from(w.mode) {
        TrainMode::Batch | TrainMode::Slide if w.window == 0 => return bad("window must be ≥1"),
        TrainMode::Batch => fixed_windows(m, w.window, w.window),
        TrainMode::Slide if w.stride == 0 => return bad("stride must be ≥1"),
        TrainMode::Slide => fixed_windows(m, w.window, w.stride),
        TrainMode::AdaSlide if w.min_window == 0 || w.min_window > w.max_window => return bad("need 1 ≤ L ≤ H"),
        TrainMode::AdaSlide if !(w.stride_frac > 0.0 && w.stride_frac <= 1.0) => return bad("stride-frac must be in (0, 1]"),
        TrainMode::AdaSlide => adaptive_windows(&stream.events, w.min_window, w.max_window, w.stride_frac),
    })
}

fn cmd_deps(g: &GlobalArgs, a: &DepsArgs) -> CliResult {
    let kind: ModelKind = a.model.into();
    let radius = a.radius.unwrap_or(match kind {
        ModelKind::DyrepLite => 0,
        ModelKind::DiffusionLite => 1,
    });
    let dep = DepConfig { k: a.k, radius, mode: dep_mode(a.dep_mode), search: dep_search(a.dep_search) };
    if radius > 1 || radius > a.k {
        return Err(config_err(format!("invalid configuration: radius {radius} needs 0 or 1 and at most k = {}", a.k)));
    }
    header("deps", g, json!({ "stream": a.input.stream, "radius": radius, "k": a.k, "dep_mode": dep.mode, "dep_search": dep.search, "oracle": a.oracle }))?;
    let stream = load_stream(&a.input)?;
    let windows = deps_windows(&stream, &a.window)?;
    let mut graph = DynGraph::from_stream(&stream).map_err(runtime_err)?;
    let mut mismatches = 0;
    for (i, w) in windows.iter().enumerate() {
        let aw = build_dep_graph(w.events(&stream.events), &mut graph, &dep).map_err(runtime_err)?;
        let dg = &aw.graph;
        println!("# window {i} events [{}, {})", w.start, w.end);
        if !a.no_dot {
            print!("{}", dg.to_dot());
        }
        println!("chains: {}", dg.chains().len());
        println!("edges: {}", dg.num_edges());
        println!("critical_path: {}", dg.critical_path());
        println!("parallelism: {:.3}", dg.parallelism());
        if a.oracle {
            let affected: Vec<_> = (0..dg.len()).map(|j| dg.affected(j).to_vec()).collect();
            let updates: Vec<_> = (0..dg.len()).map(|j| dg.updates(j).to_vec()).collect();
            let ok = naive_closure(&affected, &updates, dep.mode) == dg.closure();
            if !ok {
                mismatches += 1;
            }
            println!("oracle: {}", if ok { "MATCH" } else { "MISMATCH" });
        }
    }
    if a.oracle {
        println!("oracle summary: {} over {} windows", if mismatches == 0 { "MATCH" } else { "MISMATCH" }, windows.len());
        if mismatches > 0 {
            return Err(runtime_err(format!("{mismatches} windows disagree with the brute-force closure")));
        }
    }
    Ok(())
}

fn cmd_eval(g: &GlobalArgs, a: &EvalArgs) -> CliResult {
    let file = File::open(&a.params).map_err(|e| config_err(format!("{}: {e}", a.params.display())))?;
    let (head, params) = load_params(std::io::BufReader::new(file)).map_err(config_err)?;
    let mcfg = ModelConfig {
        kind: head.model,
        dim: head.dim,
        aggregate_both: a.aggregate_both,
        decay: head.decay.unwrap_or(ModelConfig::default().decay),
        zero_init: false,
        seed: g.seed,
    };
    let mut model = build_model(&mcfg).map_err(config_err)?;
    apply_params(&mut *model, &params).map_err(config_err)?;
    let exec = ExecArgs {
        epochs: 1,
        negatives: a.negatives,
        optimizer: OptimizerArg::Sgd,
        lr: 0.05,
        k: a.k,
        dep_mode: DepModeArg::Paper,
        dep_search: DepSearchArg::Scan,
    };
    let cfg = train_config(g, &a.window, &exec, false)?;
    header("eval", g, json!({ "stream": a.input.stream, "params": a.params, "model": mcfg, "train": cfg }))?;
    let stream = load_stream(&a.input)?;
    let mut out = evaluate_stream(&stream, &*model, &cfg).map_err(runtime_err)?;
    emit_metrics(g, &mut out)
}

fn cmd_bench(g: &GlobalArgs, a: &BenchArgs) -> CliResult {
    let mcfg = model_config(&a.model, g.seed);
    let base = train_config(g, &a.window, &a.exec, false)?;
    build_model(&mcfg).map_err(config_err)?;
    if a.reps == 0 {
        return Err(config_err("invalid configuration: reps must be ≥1"));
    }
    header("bench", g, json!({ "stream": a.input.stream, "model": mcfg, "train": base, "reps": a.reps }))?;
    let stream = load_stream(&a.input)?;

    let n = g.workers;
    let mut runs = Vec::new();
    let mut time = |workers: usize, pipeline: bool| -> CliResult<(f64, Summary)> {
        let cfg = TrainConfig { workers, pipeline, ..base.clone() };
        let mut best: Option<(f64, Summary)> = None;
        for _ in 0..a.reps {
            let mut model = build_model(&mcfg).map_err(config_err)?;
            let t = Instant::now();
            let out = if pipeline { run_pipeline(&stream, &mut *model, &cfg) } else { train_stream(&stream, &mut *model, &cfg) }
                .map_err(runtime_err)?;
            let secs = t.elapsed().as_secs_f64();
            if best.as_ref().is_none_or(|b| secs < b.0) {
                best = Some((secs, out.summary));
            }
        }
        let (secs, summary) = best.expect("reps ≥ 1");
        runs.push(json!({
            "workers": workers,
            "pipeline": pipeline,
            "wall_secs": secs,
            "da_overlap_fraction": summary.da_overlap_fraction,
            "mean_best_auc": summary.mean_best_auc,
        }));
        Ok((secs, summary))
    };
    let (t1, s1) = time(1, false)?;
    let (tn, _) = time(n, false)?;
    let (t1p, _) = time(1, true)?;
    let (tnp, snp) = time(n, true)?;
    let stage_total = s1.stage_secs.total();
    let report = json!({
        "record": "bench",
        "runs": runs,
        "speedup_workers": t1 / tn,
        "speedup_pipeline": tn / tnp,
        "speedup_pipeline_1_worker": t1 / t1p,
        "da_fraction": if stage_total > 0.0 { s1.stage_secs.da / stage_total } else { 0.0 },
        "da_overlap_fraction": snp.da_overlap_fraction,
    });
    println!("{report}");
    if let Some(path) = &g.metrics_out {
        write_json_line(path, &report)?;
    }
    Ok(())
}

fn write_json_line(path: &Path, v: &Value) -> CliResult {
    let mut f = File::create(path).map_err(|e| runtime_err(format!("{}: {e}", path.display())))?;
    writeln!(f, "{v}").map_err(runtime_err)
}

fn run(cli: &Cli) -> CliResult {
    let g = &cli.global;
    if g.workers == 0 {
        return Err(config_err("invalid configuration: workers must be ≥1"));
    }
    match &cli.cmd {
        Command::Train(a) => cmd_train(g, a),
        Command::Gen(a) => cmd_gen(g, a),
        Command::Deps(a) => cmd_deps(g, a),
        Command::Eval(a) => cmd_eval(g, a),
        Command::Bench(a) => cmd_bench(g, a),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match parse_cli(std::env::args_os().collect()) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(CliError::Runtime(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
    }
}
