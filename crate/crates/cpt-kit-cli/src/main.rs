//! cpt-kit command line: test | simulate | fit | diagnose.
//!
//! Output is machine-first (JSON/CSV); stdout carries a short human summary.
//! Every command writes a run manifest next to its output. All randomness
//! flows from --seed through keyed substreams, so results are byte-identical
//! across reruns and thread counts.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error (inputs failed to
//! load, parse, or validate), 3 numerical/precondition error.

#![allow(clippy::enum_variant_names)]
#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use cpt_kit::data::{
    fit_gaussian_linear, fit_kernel_gaussian, load_dataset_csv, load_rides_csv, rides_to_dataset,
    UnlabeledSet, DEFAULT_BANDWIDTH_MIN,
};
use cpt_kit::diagnostics::{chain_trace, gaussian_linear_pinsker};
use cpt_kit::experiments::{run_experiment, ExperimentConfig, ExperimentOutput};
use cpt_kit::inference::{run_cpt_test, run_crt_test, Statistic};
use cpt_kit::model::Covariate;
use cpt_kit::sampler::{crt_draws, exchangeable_draws, ChainConfig, ChainStream};
use cpt_kit::{ConditionalModel, Dataset};

const EXIT_USAGE: u8 = 1;
const EXIT_DATA: u8 = 2;
const EXIT_NUMERIC: u8 = 3;

#[derive(Parser)]
#[command(
    name = "cpt-kit",
    version,
    about = "Conditional independence testing via conditional permutation and randomization tests"
)]
struct Cli {
    /// Worker threads (default: CPT_KIT_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test X independent of Y given Z on a dataset, using a fitted model.
    Test(TestArgs),
    /// Run a config-driven simulation suite.
    Simulate(SimulateArgs),
    /// Fit a conditional model from training data.
    Fit(FitArgs),
    /// Chain mixing trace, plus model divergence diagnostics.
    Diagnose(DiagnoseArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    #[value(name = "CPT", alias = "cpt")]
    Cpt,
    #[value(name = "CRT", alias = "crt")]
    Crt,
}

#[derive(Clone, Copy, ValueEnum)]
enum StatisticArg {
    AbsCorr,
    ResidualCorr,
    CategoricalMaxCorr,
}

impl From<StatisticArg> for Statistic {
    fn from(value: StatisticArg) -> Self {
        match value {
            StatisticArg::AbsCorr => Statistic::AbsCorr,
            StatisticArg::ResidualCorr => Statistic::ResidualCorr,
            StatisticArg::CategoricalMaxCorr => Statistic::CategoricalMaxCorr,
        }
    }
}

#[derive(Args)]
struct TestArgs {
    /// Dataset CSV (x,y,z1,...,zp) or ride CSV (duration_s,route,time_min,y).
    #[arg(long)]
    data: PathBuf,
    /// Model JSON produced by `fit` (or written by hand).
    #[arg(long)]
    model: PathBuf,
    #[arg(long, value_enum)]
    method: MethodArg,
    #[arg(long, value_enum, default_value = "abs-corr")]
    statistic: StatisticArg,
    /// Number of copies.
    #[arg(short = 'M', long = "copies", default_value_t = 500)]
    copies_m: usize,
    /// Chain steps per copy (CPT only).
    #[arg(short = 'S', long = "steps", default_value_t = 50)]
    steps_s: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Result JSON path.
    #[arg(long)]
    output: PathBuf,
    /// Keep per-copy statistics in the result JSON.
    #[arg(long)]
    include_copies: bool,
    /// Also dump the copies as a CSV matrix (M rows, n columns).
    #[arg(long)]
    copies_csv: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Suite configuration JSON.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (created if missing).
    #[arg(long)]
    output: PathBuf,
    /// Master seed; overrides the seed in the config file.
    #[arg(long)]
    seed: Option<u64>,
    /// Rejection level; overrides the alpha in the config file.
    #[arg(long)]
    alpha: Option<f64>,
    /// Paper-scale copies (M = 500) instead of the desk-scale default.
    #[arg(long)]
    full_scale: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKindArg {
    GaussianLinear,
    KernelGaussian,
}

#[derive(Args)]
struct FitArgs {
    /// Training CSV: dataset schema for gaussian-linear, ride schema for
    /// kernel-gaussian.
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum)]
    kind: ModelKindArg,
    /// Kernel bandwidth in minutes.
    #[arg(long, default_value_t = DEFAULT_BANDWIDTH_MIN)]
    bandwidth: f64,
    /// Model JSON path.
    #[arg(long)]
    output: PathBuf,
}

#[derive(Args)]
struct DiagnoseArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// Chain steps to trace.
    #[arg(short = 'S', long = "steps", default_value_t = 250)]
    steps_s: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trace CSV path (step,loglik,corr).
    #[arg(long)]
    output: PathBuf,
    /// Second gaussian-linear model; emits the KL sum and Pinsker TV bound
    /// between it and --model at the observed covariates.
    #[arg(long)]
    reference_model: Option<PathBuf>,
    /// Divergence JSON path (default: <output>.divergence.json).
    #[arg(long)]
    divergence_output: Option<PathBuf>,
}

struct Failure {
    code: u8,
    message: String,
}

impl Failure {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Failure { code, message: message.into() }
    }
}

type CmdResult<T> = Result<T, Failure>;

/// Errors while reading or validating inputs: exit code 2.
fn data_phase<T>(result: cpt_kit::Result<T>) -> CmdResult<T> {
    result.map_err(|e| Failure::new(EXIT_DATA, e.to_string()))
}

/// Errors while computing: precondition/numerical failures are exit code 3,
/// output I/O is 2.
fn compute_phase<T>(result: cpt_kit::Result<T>) -> CmdResult<T> {
    result.map_err(|e| {
        let code = match &e {
            cpt_kit::Error::File { .. } | cpt_kit::Error::Csv(_) | cpt_kit::Error::Json(_) => {
                EXIT_DATA
            }
            _ => EXIT_NUMERIC,
        };
        Failure::new(code, e.to_string())
    })
}

fn write_text(path: &Path, text: &str) -> CmdResult<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent)
                .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", parent.display())))?;
        }
    }
    std::fs::write(path, text)
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

#[derive(Serialize)]
struct RunManifest {
    command: Vec<String>,
    master_seed: u64,
    config_hash: String,
    artifact_version: String,
    created_utc: String,
}

fn sha256_hex(chunks: &[&[u8]]) -> String {
    let mut hasher = Sha256::new();
    for chunk in chunks {
        hasher.update(chunk);
    }
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

fn read_bytes(path: &Path) -> CmdResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))
}

/// Write `<target>.manifest.json` (or `<dir>/manifest.json` for directories).
fn write_manifest(target: &Path, is_dir: bool, seed: u64, hashed_inputs: &[&[u8]]) -> CmdResult<()> {
    let manifest = RunManifest {
        command: std::env::args().collect(),
        master_seed: seed,
        config_hash: sha256_hex(hashed_inputs),
        artifact_version: env!("CARGO_PKG_VERSION").to_string(),
        created_utc: chrono::Utc::now().to_rfc3339(),
    };
    let path = if is_dir {
        target.join("manifest.json")
    } else {
        let mut name = target.file_name().unwrap_or_default().to_os_string();
        name.push(".manifest.json");
        target.with_file_name(name)
    };
    let text = serde_json::to_string_pretty(&manifest)
        .map_err(|e| Failure::new(EXIT_DATA, e.to_string()))?;
    write_text(&path, &(text + "\n"))
}

/// Dataset CSV or ride CSV, told apart by the header line.
fn load_any_dataset(path: &Path) -> CmdResult<Dataset> {
    let head = read_bytes(path)?;
    let first_line = head.split(|&b| b == b'\n').next().unwrap_or_default();
    if first_line.starts_with(b"duration_s,") {
        let rides = data_phase(load_rides_csv(path))?;
        data_phase(rides_to_dataset(&rides))
    } else {
        data_phase(load_dataset_csv(path))
    }
}

fn load_model(path: &Path) -> CmdResult<ConditionalModel> {
    let text = read_bytes(path)?;
    let text = String::from_utf8(text)
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", path.display())))?;
    data_phase(ConditionalModel::from_json(&text))
}

fn format_float(v: f64) -> String {
    format!("{v}")
}

fn cmd_test(args: &TestArgs) -> CmdResult<()> {
    let dataset = load_any_dataset(&args.data)?;
    let model = load_model(&args.model)?;
    let statistic: Statistic = args.statistic.into();

    let result = match args.method {
        MethodArg::Cpt => {
            let config = ChainConfig::new(args.steps_s, args.copies_m, args.seed);
            compute_phase(run_cpt_test(&dataset, &model, statistic, &config))?
        }
        MethodArg::Crt => compute_phase(run_crt_test(
            &dataset,
            &model,
            statistic,
            args.copies_m,
            args.seed,
        ))?,
    };

    if let Some(copies_path) = &args.copies_csv {
        // Keyed streams make the regenerated copies bit-identical to the
        // ones the driver consumed.
        let copies: Vec<Vec<f64>> = match args.method {
            MethodArg::Cpt => {
                let config = ChainConfig::new(args.steps_s, args.copies_m, args.seed);
                compute_phase(exchangeable_draws(dataset.x(), dataset.z(), &model, &config))?
                    .iter()
                    .map(|perm| perm.apply(dataset.x()))
                    .collect()
            }
            MethodArg::Crt => compute_phase(crt_draws(
                dataset.z(),
                &model,
                args.copies_m,
                args.seed,
            ))?,
        };
        let mut text = String::new();
        for copy in &copies {
            let row: Vec<String> = copy.iter().map(|&v| format_float(v)).collect();
            text.push_str(&row.join(","));
            text.push('\n');
        }
        write_text(copies_path, &text)?;
    }

    let summary = format!(
        "{} p-value {} (T = {}, M = {}, seed {})",
        result.method, result.p_value, result.t_observed, result.copies_m, result.seed
    );
    let reported = if args.include_copies { result } else { result.without_copies() };
    let json = compute_phase(reported.to_json())?;
    write_text(&args.output, &(json + "\n"))?;

    let data_bytes = read_bytes(&args.data)?;
    let model_bytes = read_bytes(&args.model)?;
    write_manifest(&args.output, false, args.seed, &[&data_bytes, &model_bytes])?;
    println!("{summary}");
    println!("result written to {}", args.output.display());
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> CmdResult<()> {
    let config_bytes = read_bytes(&args.config)?;
    let config_text = String::from_utf8(config_bytes.clone())
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", args.config.display())))?;
    let mut config = data_phase(ExperimentConfig::from_json(&config_text))?;
    if let Some(seed) = args.seed {
        config.chain.seed = seed;
    }
    if let Some(alpha) = args.alpha {
        config.alpha = alpha;
    }
    if args.full_scale {
        config.chain.copies_m = 500;
    }
    data_phase(config.validate())?;

    std::fs::create_dir_all(&args.output)
        .map_err(|e| Failure::new(EXIT_DATA, format!("{}: {e}", args.output.display())))?;

    match compute_phase(run_experiment(&config))? {
        ExperimentOutput::Rates(result) => {
            let mut csv = Vec::new();
            compute_phase(result.write_csv(&mut csv))?;
            let text = String::from_utf8(csv).expect("csv is utf-8");
            write_text(&args.output.join("results.csv"), &text)?;
            for warning in &result.warnings {
                eprintln!("warning: {warning}");
            }
            if !result.failures.is_empty() {
                eprintln!("warning: {} trial(s) failed", result.failures.len());
                for failure in result.failures.iter().take(10) {
                    eprintln!(
                        "  grid {} trial {}: {}",
                        failure.grid_value, failure.trial, failure.message
                    );
                }
            }
            println!(
                "{} suite: {} grid points, {} trials each -> {}",
                result.family,
                result.rows.len() / 2,
                config.trials,
                args.output.join("results.csv").display()
            );
        }
        ExperimentOutput::Traces(traces) => {
            for (k, trace) in traces.iter().enumerate() {
                let mut buf = Vec::new();
                compute_phase(trace.write_csv(&mut buf))?;
                let text = String::from_utf8(buf).expect("csv is utf-8");
                write_text(&args.output.join(format!("trace_{k:02}.csv")), &text)?;
            }
            println!(
                "trace suite: {} chains -> {}",
                traces.len(),
                args.output.display()
            );
        }
        ExperimentOutput::WorstCase(report) => {
            let json = compute_phase(report.to_json())?;
            write_text(&args.output.join("worst_case.json"), &(json + "\n"))?;
            println!(
                "worst-case suite: tv = {}, excess = {} (lower bound {}) -> {}",
                report.tv,
                report.excess,
                report.lower_bound,
                args.output.join("worst_case.json").display()
            );
        }
    }

    write_manifest(&args.output, true, config.chain.seed, &[&config_bytes])?;
    Ok(())
}

fn cmd_fit(args: &FitArgs) -> CmdResult<()> {
    let model = match args.kind {
        ModelKindArg::GaussianLinear => {
            let dataset = data_phase(load_dataset_csv(&args.data))?;
            let z_rows: Vec<Vec<f64>> = dataset
                .z()
                .iter()
                .map(|cov| match cov {
                    Covariate::Vector(v) => v.clone(),
                    _ => unreachable!("dataset CSV yields numeric covariates"),
                })
                .collect();
            let set = data_phase(UnlabeledSet::new(dataset.x().to_vec(), z_rows))?;
            ConditionalModel::GaussianLinear(compute_phase(fit_gaussian_linear(&set))?)
        }
        ModelKindArg::KernelGaussian => {
            if !(args.bandwidth > 0.0) {
                return Err(Failure::new(EXIT_USAGE, "--bandwidth must be positive"));
            }
            let rides = data_phase(load_rides_csv(&args.data))?;
            ConditionalModel::KernelGaussian(compute_phase(fit_kernel_gaussian(
                &rides,
                args.bandwidth,
            ))?)
        }
    };
    let json = compute_phase(model.to_json())?;
    write_text(&args.output, &(json + "\n"))?;
    let train_bytes = read_bytes(&args.data)?;
    write_manifest(&args.output, false, 0, &[&train_bytes])?;
    println!("{} model written to {}", model.kind(), args.output.display());
    Ok(())
}

fn cmd_diagnose(args: &DiagnoseArgs) -> CmdResult<()> {
    let dataset = load_any_dataset(&args.data)?;
    let model = load_model(&args.model)?;
    let trace = compute_phase(chain_trace(
        dataset.x(),
        dataset.z(),
        &model,
        args.steps_s,
        &ChainStream::new(args.seed, 0),
    ))?;
    let mut buf = Vec::new();
    compute_phase(trace.write_csv(&mut buf))?;
    let text = String::from_utf8(buf).expect("csv is utf-8");
    write_text(&args.output, &text)?;
    println!(
        "trace with {} steps written to {}",
        args.steps_s,
        args.output.display()
    );

    if let Some(reference) = &args.reference_model {
        let reference_model = load_model(reference)?;
        let (star, hat) = match (&reference_model, &model) {
            (ConditionalModel::GaussianLinear(a), ConditionalModel::GaussianLinear(b)) => (a, b),
            _ => {
                return Err(Failure::new(
                    EXIT_NUMERIC,
                    "divergence diagnostics need two gaussian_linear models",
                ))
            }
        };
        let (kl_sum, tv_bound) =
            compute_phase(gaussian_linear_pinsker(star, hat, dataset.z()))?;
        let payload = serde_json::json!({
            "kl_sum": kl_sum,
            "pinsker_tv_bound": tv_bound,
            "n": dataset.n(),
        });
        let path = args
            .divergence_output
            .clone()
            .unwrap_or_else(|| {
                let mut name = args.output.file_name().unwrap_or_default().to_os_string();
                name.push(".divergence.json");
                args.output.with_file_name(name)
            });
        write_text(&path, &(serde_json::to_string_pretty(&payload).unwrap() + "\n"))?;
        println!(
            "pinsker bound {} (KL sum {}) written to {}",
            tv_bound,
            kl_sum,
            path.display()
        );
    }

    let data_bytes = read_bytes(&args.data)?;
    let model_bytes = read_bytes(&args.model)?;
    write_manifest(&args.output, false, args.seed, &[&data_bytes, &model_bytes])?;
    Ok(())
}

fn init_threads(requested: Option<usize>) {
    let threads = requested.or_else(|| {
        std::env::var("CPT_KIT_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = threads {
        if n > 0 {
            // Ignore the error if a pool already exists (tests).
            let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            use clap::error::ErrorKind;
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_USAGE,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    init_threads(cli.threads);
    let outcome = match &cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Fit(args) => cmd_fit(args),
        Command::Diagnose(args) => cmd_diagnose(args),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            eprintln!("error: {}", failure.message);
            ExitCode::from(failure.code)
        }
    }
}
