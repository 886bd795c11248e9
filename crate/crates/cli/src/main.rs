//! `opfproxy` command-line front end.
//!
//! Results go to stdout and to the files named by the flags; wall-clock
//! timings go to stderr or to `--timing-log`, so every data file is a pure
//! function of the flags and `--seed`.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use opfproxy::classify::{train_classifier, ClassifierSpec};
use opfproxy::dataset::{self, Dataset};
use opfproxy::eval::{self, DailyProfile, EvalReport, SweepConfig, TimingConfig};
use opfproxy::hyper::{Hyperparams, ModelKind};
use opfproxy::model::{self, TrainedModel};
use opfproxy::netcase::{self, DcModel, NetworkCase};
use opfproxy::regress::{train_regressor, RegressorSpec};
use opfproxy::rng::stage_seed;
use opfproxy::sampler::{box_polytope, SamplerConfig};
use opfproxy::{bundled, opf};

#[derive(Parser)]
#[command(name = "opfproxy", version, about = "Learned proxies for DC optimal power flow")]
struct Cli {
    /// Append timing lines here instead of printing them to stderr.
    #[arg(long, global = true)]
    timing_log: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample loads with Hit&Run and label them with exact OPF solves.
    Generate(GenerateArgs),
    /// Fit a classifier or regressor on a dataset.
    Train(TrainArgs),
    /// Score a trained model on a dataset.
    Eval(EvalArgs),
    /// Relative error of a cost model along the daily load profile.
    Sweep(SweepArgs),
    /// Group residuals into low to high error segments and project loads with PCA.
    Segment(SegmentArgs),
    /// Solve one DC-OPF exactly.
    Solve(SolveArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// Case file, or `bundled:case2`, `bundled:case3`, `bundled:case5`.
    #[arg(long)]
    case: String,
    /// Number of labeled samples.
    #[arg(long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Threads used to label samples; the output does not depend on it.
    #[arg(long, default_value_t = 1)]
    workers: usize,
    #[arg(long, default_value_t = SamplerConfig::default().burn_in)]
    burn_in: usize,
    #[arg(long, default_value_t = SamplerConfig::default().thinning)]
    thinning: usize,
    /// Lower load multiplier of the sampling box.
    #[arg(long, default_value_t = SamplerConfig::default().alpha_min)]
    alpha_min: f64,
    /// Upper load multiplier of the sampling box.
    #[arg(long, default_value_t = SamplerConfig::default().alpha_max)]
    alpha_max: f64,
    /// Output CSV; a `.meta` sidecar is written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    /// Use only the training part (train) or test part (eval) of a seeded
    /// random split with this training fraction.
    #[arg(long)]
    split: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// One of the twelve model kinds, e.g. `linear` or `random_forest`.
    #[arg(long)]
    model: String,
    /// Hyperparameter override `key=value`; repeatable.
    #[arg(long = "param", value_name = "KEY=VALUE")]
    params: Vec<String>,
    #[command(flatten)]
    split: SplitArgs,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[command(flatten)]
    split: SplitArgs,
    /// Case used to time exact solves for the run-time gain.
    #[arg(long)]
    case: Option<String>,
    /// Directory for `report.txt` and, for cost models, `residuals.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    case: String,
    /// `hour,multiplier` CSV; defaults to the bundled profile.
    #[arg(long)]
    profile: Option<PathBuf>,
    #[arg(long, default_value_t = SweepConfig::default().per_hour_samples)]
    per_hour: usize,
    /// Relative per-bus load jitter.
    #[arg(long, default_value_t = SweepConfig::default().jitter)]
    jitter: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SegmentArgs {
    /// `residuals.csv` written by `eval`.
    #[arg(long)]
    residuals: PathBuf,
    #[arg(long, default_value_t = 3)]
    k: usize,
    /// Principal components written to `pca.csv`.
    #[arg(long, default_value_t = 2)]
    pca_dims: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Receives `residuals.csv` with a segment column and `pca.csv`.
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    case: String,
    /// Per-bus loads in ascending bus-id order, comma separated.
    #[arg(long, allow_hyphen_values = true)]
    load: String,
}

/// Failure with the process exit code it maps to.
struct Failure {
    code: u8,
    message: String,
}

fn usage(message: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: message.into(),
    }
}

impl From<opfproxy::Error> for Failure {
    fn from(e: opfproxy::Error) -> Self {
        Failure {
            code: if e.is_numerical() { 1 } else { 2 },
            message: e.to_string(),
        }
    }
}

type CliResult<T = ()> = Result<T, Failure>;

struct Timings {
    log: Option<PathBuf>,
}

impl Timings {
    fn record(&self, command: &str, key: &str, seconds: f64) {
        let line = format!("{command} {key}={seconds:e}");
        match &self.log {
            Some(path) => {
                let written = OpenOptions::new()
                    .create(true)
                    .append(true)
                    .open(path)
                    .and_then(|mut f| writeln!(f, "{line}"));
                if let Err(e) = written {
                    eprintln!("warning: cannot write timing log {}: {e}", path.display());
                }
            }
            None => eprintln!("{line}"),
        }
    }
}

fn load_case(spec: &str) -> CliResult<(NetworkCase, DcModel)> {
    let case = match spec.strip_prefix("bundled:") {
        Some(name) => {
            let text = bundled::case(name).ok_or_else(|| usage(format!("no bundled case '{name}'")))?;
            let mut case = netcase::parse_case(text)?;
            if case.name.is_empty() {
                case.name = name.to_string();
            }
            case
        }
        None => {
            let path = Path::new(spec);
            if !path.is_file() {
                return Err(usage(format!("case file not found: {}", path.display())));
            }
            netcase::read_case(path).map_err(|e| usage(format!("{}: {e}", path.display())))?
        }
    };
    let model = netcase::build_dc_model(&case)?;
    Ok((case, model))
}

fn load_data(path: &Path) -> CliResult<Dataset> {
    if !path.is_file() {
        return Err(usage(format!("dataset not found: {}", path.display())));
    }
    Ok(dataset::load(path)?)
}

fn select(data: Dataset, args: &SplitArgs, train_part: bool) -> CliResult<Dataset> {
    match args.split {
        None => Ok(data),
        Some(f) => {
            let (train, test) = dataset::split(&data, f, stage_seed(args.seed, "split"))?;
            Ok(if train_part { train } else { test })
        }
    }
}

fn create_dir(dir: &Path) -> CliResult {
    std::fs::create_dir_all(dir).map_err(|e| usage(format!("cannot create {}: {e}", dir.display())))
}

fn generate(args: GenerateArgs, t: &Timings) -> CliResult {
    let (case, model) = load_case(&args.case)?;
    let config = SamplerConfig {
        seed: args.seed,
        burn_in: args.burn_in,
        thinning: args.thinning,
        alpha_min: args.alpha_min,
        alpha_max: args.alpha_max,
    };
    config.validate()?;
    let poly = box_polytope(&netcase::nominal_load_vector(&case), args.alpha_min, args.alpha_max)?;
    let start = Instant::now();
    let data = dataset::generate_dataset(&model, &poly, &config, args.n, args.workers)?;
    t.record("generate", "seconds", start.elapsed().as_secs_f64());
    dataset::save(&data, &args.out)?;
    println!("samples={}", data.n());
    println!("feasible_fraction={}", data.feasible_fraction());
    println!("mean_solve_time={:e}", data.mean_solve_time());
    Ok(())
}

fn train(args: TrainArgs, t: &Timings) -> CliResult {
    let kind: ModelKind = args.model.parse().map_err(|e: opfproxy::Error| usage(e.to_string()))?;
    let data = select(load_data(&args.data)?, &args.split, true)?;
    let mut hyper = match kind {
        ModelKind::Classifier(k) => Hyperparams::for_classifier(k),
        ModelKind::Regressor(k) => Hyperparams::for_regressor(k),
    };
    hyper.seed = args.split.seed;
    for p in &args.params {
        let (k, v) = p
            .split_once('=')
            .ok_or_else(|| usage(format!("--param expects key=value, got '{p}'")))?;
        hyper.set(k.trim(), v.trim()).map_err(|e| usage(e.to_string()))?;
    }
    let start = Instant::now();
    let trained = match kind {
        ModelKind::Classifier(kind) => TrainedModel::Classifier(train_classifier(&ClassifierSpec { kind, hyper }, &data)?),
        ModelKind::Regressor(kind) => TrainedModel::Regressor(train_regressor(&RegressorSpec { kind, hyper }, &data)?),
    };
    t.record("train", "seconds", start.elapsed().as_secs_f64());
    model::save(&trained, &data.case_name, &args.out)?;
    println!("model={kind}");
    println!("training_samples={}", data.n());
    match &trained {
        TrainedModel::Classifier(m) => println!("training_accuracy={}", eval::classification_accuracy(m, &data)?),
        TrainedModel::Regressor(m) => {
            let (mean, std) = eval::mean_relative_error(m, &data)?;
            println!("training_mean_relative_error={mean:e}");
            println!("training_relative_error_std={std:e}");
        }
    }
    Ok(())
}

fn evaluate(args: EvalArgs, t: &Timings) -> CliResult {
    let (trained, case_name) = model::load(&args.model)?;
    let data = select(load_data(&args.data)?, &args.split, false)?;
    if data.dim != trained.dim() {
        return Err(usage(format!(
            "model expects {} loads but the dataset has {}",
            trained.dim(),
            data.dim
        )));
    }
    create_dir(&args.out_dir)?;
    let mut report = EvalReport::default();
    report.push("model", trained.kind());
    report.push("model_case", &case_name);
    report.push("dataset", args.data.display());
    report.push("dataset_case", &data.case_name);
    report.push("seed", args.split.seed);
    report.push("split", args.split.split.map_or("none".into(), |f| f.to_string()));
    report.push("test_samples", data.n());
    report.push("feasible_fraction", data.feasible_fraction());
    let loads: Vec<&[f64]> = match &trained {
        TrainedModel::Classifier(m) => {
            let acc = eval::classification_accuracy(m, &data)?;
            report.push("accuracy", acc);
            data.samples.iter().map(|s| s.load.as_slice()).collect()
        }
        TrainedModel::Regressor(m) => {
            let rows = eval::residuals(m, &data)?;
            let errs: Vec<f64> = rows.iter().map(|r| r.relative_error).collect();
            let (mean, std) = eval::mean_std(&errs);
            report.push("evaluated_samples", rows.len());
            report.push("mean_relative_error", mean);
            report.push("relative_error_std", std);
            eval::write_residuals(args.out_dir.join("residuals.csv"), &rows, None)?;
            data.feasible().map(|s| s.load.as_slice()).collect()
        }
    };
    eval::write_text(args.out_dir.join("report.txt"), &report.to_text())?;
    print!("{}", report.to_text());

    if let Some(spec) = &args.case {
        let (_, dc) = load_case(spec)?;
        let cfg = TimingConfig::default();
        let gain = match &trained {
            TrainedModel::Classifier(m) => {
                eval::runtime_gain(|l| f64::from(m.predict(l).unwrap_or(0)), &dc, &loads, &cfg)?
            }
            TrainedModel::Regressor(m) => eval::runtime_gain(|l| m.predict(l).unwrap_or(f64::NAN), &dc, &loads, &cfg)?,
        };
        t.record("eval", "exact_seconds_per_call", gain.exact_seconds);
        t.record("eval", "predict_seconds_per_call", gain.predict_seconds);
        t.record("eval", "runtime_gain", gain.gain);
    }
    Ok(())
}

fn sweep(args: SweepArgs, _t: &Timings) -> CliResult {
    let (trained, _) = model::load(&args.model)?;
    let TrainedModel::Regressor(reg) = trained else {
        return Err(usage("sweep needs a cost regressor"));
    };
    let (case, dc) = load_case(&args.case)?;
    if reg.dim != dc.n_buses() {
        return Err(usage(format!("model expects {} loads but the case has {} buses", reg.dim, dc.n_buses())));
    }
    let profile = match &args.profile {
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| usage(format!("{}: {e}", p.display())))?;
            DailyProfile::parse(&text).map_err(|e| usage(format!("{}: {e}", p.display())))?
        }
        None => DailyProfile::bundled(),
    };
    let cfg = SweepConfig {
        per_hour_samples: args.per_hour,
        jitter: args.jitter,
        seed: args.seed,
    };
    let errors = eval::profile_sweep(&reg, &dc, &profile, &netcase::nominal_load_vector(&case), &cfg)?;
    eval::write_profile(&args.out, &errors)?;
    let finite: Vec<f64> = errors.iter().flatten().copied().collect();
    println!("hours={}", errors.len());
    println!("infeasible_hours={}", errors.len() - finite.len());
    println!("max_mean_rel_err={}", finite.iter().copied().fold(0.0, f64::max));
    println!("seed={}", args.seed);
    Ok(())
}

fn segment(args: SegmentArgs, _t: &Timings) -> CliResult {
    if !args.residuals.is_file() {
        return Err(usage(format!("residuals file not found: {}", args.residuals.display())));
    }
    let rows = eval::read_residuals(&args.residuals)?;
    let errs: Vec<f64> = rows.iter().map(|r| r.relative_error).collect();
    let seg = eval::kmeans_segment(&errs, args.k, args.seed)?;
    let loads: Vec<Vec<f64>> = rows.iter().map(|r| r.load.clone()).collect();
    let pca = eval::pca_project(&loads, args.pca_dims)?;
    create_dir(&args.out_dir)?;
    eval::write_residuals(args.out_dir.join("residuals.csv"), &rows, Some(&seg.labels))?;
    eval::write_pca(args.out_dir.join("pca.csv"), &pca.projected, &seg.labels)?;
    for (i, ((c, (lo, hi)), n)) in seg
        .centroids
        .iter()
        .zip(&seg.intervals)
        .zip((0..args.k).map(|s| seg.labels.iter().filter(|&&l| l == s).count()))
        .enumerate()
    {
        println!("segment_{i}=centroid:{c} interval:[{lo},{hi}] samples:{n}");
    }
    let ratios: Vec<String> = pca.explained_variance_ratio.iter().map(|r| r.to_string()).collect();
    println!("explained_variance_ratio={}", ratios.join(","));
    Ok(())
}

fn solve(args: SolveArgs, t: &Timings) -> CliResult {
    let (_, dc) = load_case(&args.case)?;
    let load = args
        .load
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|_| usage(format!("invalid load value '{v}'"))))
        .collect::<CliResult<Vec<f64>>>()?;
    let out = opf::solve_opf(&dc, &load)?;
    t.record("solve", "seconds", out.solve_time);
    println!("feasible={}", u8::from(out.feasible));
    if let Some(c) = out.cost {
        println!("cost={c}");
        let d: Vec<String> = out.dispatch.iter().map(|p| p.to_string()).collect();
        println!("dispatch={}", d.join(","));
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let timings = Timings { log: cli.timing_log };
    let result = match cli.command {
        Command::Generate(a) => generate(a, &timings),
        Command::Train(a) => train(a, &timings),
        Command::Eval(a) => evaluate(a, &timings),
        Command::Sweep(a) => sweep(a, &timings),
        Command::Segment(a) => segment(a, &timings),
        Command::Solve(a) => solve(a, &timings),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}
