//! Command line driver: equivalence checking, benchmark simulation, rolling
//! nowcasts, the model-selection experiment, and the boosting demo. Every
//! data command stages its outputs and renames them into place only on
//! success, so a failed run leaves no partial files behind.

use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::time::Instant;

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use rayon::prelude::*;
use serde::Deserialize;
use serde_json::json;

use fusereg::equiv::{
    suite_extended_filter_vs_fusion, suite_filter_vs_augmented, suite_fusion_vs_constrained,
    suite_shrinkage_vs_ridge, suite_zero_padding_vs_unconstrained, SuiteReport,
};
use fusereg::lds_core::SensorHierarchy;
use fusereg::modelsel::{boost_assimilate, run_modelsel_experiment, BoostConfig, BoostInit};
use fusereg::nowcast::{
    benchmark_config, benchmark_trajectory, ingest_csv, rolling_nowcast, Method, NowcastConfig,
    TuneMetric,
};

#[derive(Parser)]
#[command(name = "fusereg", version, about = "Sensor fusion estimation toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Verify the estimator equivalences on seeded random systems.
    Equivalence(EquivalenceArgs),
    /// Write the bundled benchmark trajectory and its sensor hierarchy.
    Simulate(SimulateArgs),
    /// Roll the nowcasting harness over a trajectory.
    Nowcast(NowcastArgs),
    /// Run the candidate model-selection experiment.
    Modelsel(ModelselArgs),
    /// Run the boosting assimilation demo.
    Boost(BoostArgs),
}

#[derive(Args)]
struct EquivalenceArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Number of seeded cases per suite.
    #[arg(long)]
    seeds: Option<usize>,
    /// Steps per filtering case.
    #[arg(long)]
    steps: Option<usize>,
    /// Largest deviation accepted from any suite.
    #[arg(long)]
    tolerance: Option<f64>,
    /// Output directory for the JSON report.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct EquivalenceFile {
    seeds: Option<usize>,
    steps: Option<usize>,
    tolerance: Option<f64>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SimulateFile {
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct NowcastArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark generator seed, used when no input file is given.
    #[arg(long)]
    seed: Option<u64>,
    /// Trajectory CSV to nowcast instead of the bundled benchmark.
    #[arg(long)]
    input: Option<PathBuf>,
    /// Sensor hierarchy JSON defining the measurement map; required with
    /// --input.
    #[arg(long)]
    hierarchy: Option<PathBuf>,
    /// Comma-separated list drawn from sf, sf-ridge, sf-lasso, ridge, lasso.
    #[arg(long)]
    methods: Option<String>,
    /// Rolling training window length.
    #[arg(long)]
    window: Option<usize>,
    /// Held-out rows at the end of each window used to tune lambda.
    #[arg(long)]
    tune_horizon: Option<usize>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NowcastFile {
    seed: Option<u64>,
    input: Option<PathBuf>,
    hierarchy: Option<PathBuf>,
    methods: Option<Vec<String>>,
    window: Option<usize>,
    tune_horizon: Option<usize>,
    lambda_grid: Option<Vec<f64>>,
    tune_metric: Option<TuneMetric>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ModelselArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Demo process generator seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct ModelselFile {
    seed: Option<u64>,
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BoostArgs {
    /// JSON config file; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark generator seed for the demo data.
    #[arg(long)]
    seed: Option<u64>,
    /// Learning rate.
    #[arg(long)]
    eta: Option<f64>,
    /// Boosting iterations.
    #[arg(long)]
    iterations: Option<usize>,
    /// Initialization: zeros or linear-sf.
    #[arg(long)]
    init: Option<String>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct BoostFile {
    seed: Option<u64>,
    eta: Option<f64>,
    iterations: Option<usize>,
    init: Option<String>,
    out: Option<PathBuf>,
}

fn main() {
    init_thread_pool();
    let cli = Cli::parse();
    let code = match run(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            2
        }
    };
    std::process::exit(code);
}

/// FUSEREG_THREADS caps the worker pool; unset means the rayon default.
fn init_thread_pool() {
    if let Ok(raw) = std::env::var("FUSEREG_THREADS") {
        match raw.parse::<usize>() {
            Ok(n) if n >= 1 => {
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => eprintln!("warning: ignoring FUSEREG_THREADS={raw}, expected a positive integer"),
        }
    }
}

fn run(cli: Cli) -> anyhow::Result<i32> {
    match cli.command {
        Command::Equivalence(args) => cmd_equivalence(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Nowcast(args) => cmd_nowcast(args),
        Command::Modelsel(args) => cmd_modelsel(args),
        Command::Boost(args) => cmd_boost(args),
    }
}

fn load_file<T: for<'de> Deserialize<'de> + Default>(path: &Option<PathBuf>) -> anyhow::Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = fs::read_to_string(p)
                .with_context(|| format!("reading config file {}", p.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config file {}", p.display()))
        }
    }
}

/// Staged output directory: files land in a hidden scratch directory and
/// are renamed into place only when the whole command has succeeded.
struct Stage {
    scratch: PathBuf,
    target: PathBuf,
    files: Vec<String>,
    committed: bool,
}

impl Stage {
    fn new(target: &Path) -> anyhow::Result<Stage> {
        fs::create_dir_all(target)
            .with_context(|| format!("creating output directory {}", target.display()))?;
        let scratch = target.join(format!(".stage-{}", std::process::id()));
        if scratch.exists() {
            fs::remove_dir_all(&scratch)?;
        }
        fs::create_dir_all(&scratch)?;
        Ok(Stage {
            scratch,
            target: target.to_path_buf(),
            files: Vec::new(),
            committed: false,
        })
    }

    fn write(&mut self, name: &str, contents: &str) -> anyhow::Result<()> {
        fs::write(self.scratch.join(name), contents).with_context(|| format!("writing {name}"))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn commit(mut self) -> anyhow::Result<()> {
        for name in &self.files {
            fs::rename(self.scratch.join(name), self.target.join(name))
                .with_context(|| format!("publishing {name}"))?;
        }
        let _ = fs::remove_dir_all(&self.scratch);
        self.committed = true;
        Ok(())
    }
}

impl Drop for Stage {
    fn drop(&mut self) {
        if !self.committed {
            let _ = fs::remove_dir_all(&self.scratch);
        }
    }
}

fn manifest(
    command: &str,
    seed: Option<u64>,
    config: serde_json::Value,
    outputs: &[String],
    started: Instant,
) -> String {
    serde_json::to_string_pretty(&json!({
        "command": command,
        "version": env!("CARGO_PKG_VERSION"),
        "seed": seed,
        "config": config,
        "outputs": outputs,
        "wall_time_ms": started.elapsed().as_millis() as u64,
    }))
    .expect("manifest serialization cannot fail")
}

fn cmd_equivalence(args: EquivalenceArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let file: EquivalenceFile = load_file(&args.config)?;
    let seeds = args.seeds.or(file.seeds).unwrap_or(25);
    let steps = args.steps.or(file.steps).unwrap_or(60);
    let tolerance = args.tolerance.or(file.tolerance).unwrap_or(1e-8);
    let out = args
        .out
        .or(file.out)
        .unwrap_or_else(|| "fusereg-out".into());
    if !tolerance.is_finite() || tolerance < 0.0 {
        bail!("tolerance must be finite and nonnegative, got {tolerance}");
    }
    if steps == 0 {
        bail!("steps must be at least 1");
    }

    let suites: Vec<SuiteReport> = if seeds == 0 {
        eprintln!("warning: no seeded cases requested, nothing to check");
        Vec::new()
    } else {
        let runners: Vec<Box<dyn Fn() -> fusereg::Result<SuiteReport> + Send + Sync>> = vec![
            Box::new(move || suite_filter_vs_augmented(seeds, steps, tolerance)),
            Box::new(move || suite_fusion_vs_constrained(seeds, tolerance)),
            Box::new(move || suite_shrinkage_vs_ridge(seeds, tolerance)),
            Box::new(move || suite_zero_padding_vs_unconstrained(seeds, tolerance)),
            Box::new(move || suite_extended_filter_vs_fusion(seeds, steps, tolerance)),
        ];
        runners
            .par_iter()
            .map(|f| f())
            .collect::<fusereg::Result<Vec<_>>>()
            .context("running equivalence suites")?
    };

    let all_pass = suites.iter().all(|s| s.pass);
    for s in &suites {
        println!(
            "{}: max deviation {:.3e} (tolerance {:.1e}) {}",
            s.name,
            s.max_deviation,
            s.tolerance,
            if s.pass { "ok" } else { "FAILED" }
        );
    }
    let report = serde_json::to_string_pretty(&json!({
        "seeds": seeds,
        "steps": steps,
        "tolerance": tolerance,
        "suites": suites,
        "all_pass": all_pass,
    }))
    .expect("report serialization cannot fail");
    let mut stage = Stage::new(&out)?;
    stage.write("equivalence.json", &report)?;
    let outputs = stage.files.clone();
    stage.write(
        "manifest.json",
        &manifest(
            "equivalence",
            None,
            json!({ "seeds": seeds, "steps": steps, "tolerance": tolerance }),
            &outputs,
            started,
        ),
    )?;
    stage.commit()?;
    Ok(if all_pass { 0 } else { 1 })
}

fn cmd_simulate(args: SimulateArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let file: SimulateFile = load_file(&args.config)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let out = args
        .out
        .or(file.out)
        .unwrap_or_else(|| "fusereg-out".into());

    let (traj, _) = benchmark_trajectory(seed);
    let mut stage = Stage::new(&out)?;
    stage.write("trajectory.csv", &traj.to_csv_string())?;
    stage.write(
        "hierarchy.json",
        &SensorHierarchy::two_region_demo().to_json_string(),
    )?;
    let outputs = stage.files.clone();
    stage.write(
        "manifest.json",
        &manifest(
            "simulate",
            Some(seed),
            json!({ "seed": seed }),
            &outputs,
            started,
        ),
    )?;
    stage.commit()?;
    Ok(0)
}

fn parse_methods(raw: &str) -> anyhow::Result<Vec<Method>> {
    raw.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| Method::from_str(s).map_err(anyhow::Error::from))
        .collect()
}

fn cmd_nowcast(args: NowcastArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let file: NowcastFile = load_file(&args.config)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let input = args.input.or(file.input);
    let hierarchy = args.hierarchy.or(file.hierarchy);
    let out = args
        .out
        .or(file.out)
        .unwrap_or_else(|| "fusereg-out".into());

    // The bundled benchmark brings its own window sizes; external data
    // starts from the library defaults.
    let mut cfg = if input.is_some() {
        NowcastConfig::default()
    } else {
        benchmark_config()
    };
    if let Some(w) = args.window.or(file.window) {
        cfg.window = w;
    }
    if let Some(t) = args.tune_horizon.or(file.tune_horizon) {
        cfg.tune_horizon = t;
    }
    if let Some(g) = file.lambda_grid {
        cfg.lambda_grid = g;
    }
    if let Some(m) = file.tune_metric {
        cfg.tune_metric = m;
    }
    if let Some(raw) = &args.methods {
        cfg.methods = parse_methods(raw)?;
    } else if let Some(list) = file.methods {
        cfg.methods = list
            .iter()
            .map(|s| Method::from_str(s).map_err(anyhow::Error::from))
            .collect::<anyhow::Result<Vec<_>>>()?;
    }

    let (traj, h) = match &input {
        Some(path) => {
            let traj = ingest_csv(path)
                .with_context(|| format!("reading trajectory {}", path.display()))?;
            let hier_path = hierarchy
                .as_ref()
                .ok_or_else(|| anyhow::anyhow!("--hierarchy is required with --input"))?;
            let text = fs::read_to_string(hier_path)
                .with_context(|| format!("reading hierarchy {}", hier_path.display()))?;
            let hier = SensorHierarchy::from_json_str(&text)?;
            (traj, hier.measurement_map()?)
        }
        None => benchmark_trajectory(seed),
    };

    let result = rolling_nowcast(&traj, &h, &cfg)?;
    for score in &result.scores {
        println!(
            "{}: MAE {:.4}, MAD {:.4} over {} windows",
            score.method, score.mae, score.mad, score.evaluated
        );
    }
    let mut stage = Stage::new(&out)?;
    stage.write("predictions.csv", &result.predictions_csv_string())?;
    stage.write("scores.json", &result.scores_json_string())?;
    stage.write("lambda_log.csv", &result.lambda_log_csv_string())?;
    let outputs = stage.files.clone();
    let config_echo = json!({
        "seed": seed,
        "input": input,
        "window": cfg.window,
        "tune_horizon": cfg.tune_horizon,
        "methods": cfg.methods,
        "lambda_grid": cfg.lambda_grid,
        "tune_metric": cfg.tune_metric,
    });
    stage.write(
        "manifest.json",
        &manifest("nowcast", Some(seed), config_echo, &outputs, started),
    )?;
    stage.commit()?;
    Ok(0)
}

fn cmd_modelsel(args: ModelselArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let file: ModelselFile = load_file(&args.config)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let out = args
        .out
        .or(file.out)
        .unwrap_or_else(|| "fusereg-out".into());

    let result = run_modelsel_experiment(seed)?;
    println!(
        "medians: measurements {:.3}, linear {:.3}, quadratic {:.3}, spline {:.3}, sine {:.3}, cosine {:.3}",
        result.summary.measurements,
        result.summary.linear_ar,
        result.summary.quadratic_ar,
        result.summary.spline_basis,
        result.summary.sine,
        result.summary.cosine
    );
    let mut stage = Stage::new(&out)?;
    stage.write("coefficients.csv", &result.to_csv_string())?;
    stage.write("summary.json", &result.summary_json())?;
    let outputs = stage.files.clone();
    stage.write(
        "manifest.json",
        &manifest(
            "modelsel",
            Some(seed),
            json!({ "seed": seed }),
            &outputs,
            started,
        ),
    )?;
    stage.commit()?;
    Ok(0)
}

fn cmd_boost(args: BoostArgs) -> anyhow::Result<i32> {
    let started = Instant::now();
    let file: BoostFile = load_file(&args.config)?;
    let seed = args.seed.or(file.seed).unwrap_or(0);
    let eta = args.eta.or(file.eta).unwrap_or(0.5);
    let iterations = args.iterations.or(file.iterations).unwrap_or(3);
    let init_raw = args.init.or(file.init).unwrap_or_else(|| "zeros".into());
    let out = args
        .out
        .or(file.out)
        .unwrap_or_else(|| "fusereg-out".into());
    let init = match init_raw.as_str() {
        "zeros" => BoostInit::Zeros,
        "linear-sf" => BoostInit::LinearSf,
        other => bail!("unknown init '{other}', expected zeros or linear-sf"),
    };

    // Demo instance: assimilate the benchmark's raw sensor panel back into
    // its states, predicting the row after the training span.
    let (traj, h) = benchmark_trajectory(seed);
    let train = 40;
    let x = traj.states.rows(0, train).clone_owned();
    let u = traj.measurements.rows(0, train).clone_owned();
    let u_next = traj.measurements.row(train).transpose();
    let cfg = BoostConfig::uniform_linear(eta, iterations, init, u.ncols());
    let result = boost_assimilate(&x, &u, &h, &cfg, &u_next)?;

    let mut trace = String::from("iteration,train_loss\n");
    for (i, loss) in result.train_losses.iter().enumerate() {
        trace.push_str(&format!("{i},{loss}\n"));
    }
    let prediction = serde_json::to_string_pretty(&json!({
        "prediction": result.prediction.iter().cloned().collect::<Vec<f64>>(),
        "truth": traj.states.row(train).iter().cloned().collect::<Vec<f64>>(),
    }))
    .expect("prediction serialization cannot fail");

    let mut stage = Stage::new(&out)?;
    stage.write("trace.csv", &trace)?;
    stage.write("prediction.json", &prediction)?;
    let outputs = stage.files.clone();
    let config_echo = json!({
        "seed": seed,
        "eta": eta,
        "iterations": iterations,
        "init": init_raw,
        "train_rows": train,
    });
    stage.write(
        "manifest.json",
        &manifest("boost", Some(seed), config_echo, &outputs, started),
    )?;
    stage.commit()?;
    Ok(0)
}
