//! Command-line interface for readout-error unfolding.
//!
//! Ten subcommands cover the full workflow: generating truth spectra,
//! folding them through a response matrix, applying stochastic readout
//! noise, building response matrices from calibration data, unfolding,
//! fitting flip-rate noise models, bootstrap uncertainties, iteration
//! scans, pseudo-experiment ensembles, and built-in example matrices.
//!
//! Every run that writes an output also writes `<out>.manifest.json`
//! recording the tool version, subcommand, parameters, and sha256 digests
//! of all inputs. Runs are deterministic: the same command with the same
//! seed writes byte-identical outputs, independent of `--threads`.
//!
//! Exit codes: 0 on success, 2 for usage or input errors, 3 when the
//! numerics fail (singular response matrix, zero denominator).

mod manifest;

use clap::{Parser, Subcommand, ValueEnum};
use readout_unfold::error::Error as CoreError;
use readout_unfold::io::{
    CalibrationFile, ConditionedEntry, CountsFile, FitFile, MatrixFile, VectorFile,
    SCHEMA_VERSION,
};
use readout_unfold::response::{self, CalibrationData, NoiseModel};
use readout_unfold::types::{CountVector, ProbabilityVector, ResponseMatrix};
use readout_unfold::unfold::{Method, Prior, UnfoldConfig};
use readout_unfold::{noisefit, sim, uncertainty};
use serde::Serialize;
use serde_json::json;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Largest register the generators accept; beyond this the state space
/// (2^14 = 16384 states) stops being desk-sized.
const MAX_QUBITS: usize = 14;
const MAX_BINS: usize = 1 << 14;

#[derive(Parser)]
#[command(
    name = "readout-unfold",
    version,
    about = "Unfold quantum readout noise from measured histograms",
    max_term_width = 100
)]
struct Cli {
    /// Worker threads for parallel sections (default: all cores).
    /// Results do not depend on this setting.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..=4096))]
    threads: Option<u64>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic truth spectrum, optionally sampled into counts.
    GenTruth(GenTruthArgs),
    /// Fold a truth spectrum through a response matrix (exact expectation).
    Fold(FoldArgs),
    /// Push integer counts through a response matrix stochastically.
    ApplyNoise(ApplyNoiseArgs),
    /// Build a response matrix from calibration histograms.
    Calibrate(CalibrateArgs),
    /// Unfold a measured spectrum with a chosen estimator.
    Unfold(UnfoldArgs),
    /// Fit per-qubit flip rates to a response matrix.
    FitNoise(FitNoiseArgs),
    /// Bootstrap statistical uncertainties of an unfolded spectrum.
    Bootstrap(BootstrapArgs),
    /// Scan uncertainty components over iteration counts.
    Scan(ScanArgs),
    /// Run an ensemble of synthetic sample-fold-unfold experiments.
    Pseudo(PseudoArgs),
    /// Write a built-in example response matrix.
    Examples(ExamplesArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum TruthKind {
    /// Discrete Gaussian over basis states.
    Gaussian,
    /// Uniform over one-hot states.
    WState,
    /// Gaussian integrated over equal-width bins.
    BinnedGaussian,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    /// Direct matrix inversion.
    Inversion,
    /// Norm-preserving non-negative least squares.
    Ls,
    /// Iterative Bayesian unfolding.
    Ibu,
}

impl MethodArg {
    fn to_method(self) -> Method {
        match self {
            MethodArg::Inversion => Method::Inversion,
            MethodArg::Ls => Method::LeastSquares,
            MethodArg::Ibu => Method::Ibu,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ReferenceArg {
    /// Compare against the truth counts drawn in each experiment.
    Sampled,
    /// Compare against the expected counts shots * truth.
    Theoretical,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ExampleName {
    /// 2x2 symmetric flip matrix with off-diagonal eps.
    TwoLevel,
    /// Banded matrix: eps to each neighboring bin.
    Tridiagonal,
    /// Tensor product of per-qubit flip rates.
    NoiseModel,
}

#[derive(clap::Args)]
struct GenTruthArgs {
    /// Spectrum family.
    #[arg(long, value_enum)]
    kind: TruthKind,
    /// Register size for gaussian and w-state spectra.
    #[arg(long)]
    qubits: Option<usize>,
    /// Width parameter of the gaussian spectrum.
    #[arg(long)]
    sigma: Option<f64>,
    /// Bin count for binned-gaussian spectra.
    #[arg(long)]
    bins: Option<usize>,
    /// Mean of the binned gaussian.
    #[arg(long, allow_negative_numbers = true)]
    mean: Option<f64>,
    /// Standard deviation of the binned gaussian.
    #[arg(long)]
    sd: Option<f64>,
    /// Center of the first bin.
    #[arg(long, allow_negative_numbers = true)]
    lo: Option<f64>,
    /// Center of the last bin.
    #[arg(long, allow_negative_numbers = true)]
    hi: Option<f64>,
    /// Sample this many shots from the spectrum; the output becomes an
    /// integer counts file. Requires --seed.
    #[arg(long, requires = "seed")]
    shots: Option<u64>,
    /// RNG seed for --shots sampling.
    #[arg(long)]
    seed: Option<u64>,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct FoldArgs {
    /// Response matrix JSON.
    #[arg(long)]
    response: PathBuf,
    /// Truth spectrum JSON (values or counts).
    #[arg(long)]
    truth: PathBuf,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ApplyNoiseArgs {
    /// Response matrix JSON.
    #[arg(long)]
    response: PathBuf,
    /// Integer counts JSON.
    #[arg(long)]
    counts: PathBuf,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct CalibrateArgs {
    /// Calibration histograms JSON (measured mode).
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Known response matrix to simulate a calibration run against
    /// (synthetic mode; requires --shots-per-state and --seed).
    #[arg(long)]
    response: Option<PathBuf>,
    /// Shots per prepared basis state in synthetic mode.
    #[arg(long)]
    shots_per_state: Option<u64>,
    /// RNG seed for synthetic mode.
    #[arg(long)]
    seed: Option<u64>,
    /// Also write the simulated calibration histograms here.
    #[arg(long)]
    calibration_out: Option<PathBuf>,
    /// Output JSON path for the estimated response matrix.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct UnfoldArgs {
    /// Response matrix JSON.
    #[arg(long)]
    response: PathBuf,
    /// Measured spectrum JSON (values or counts).
    #[arg(long)]
    measured: PathBuf,
    /// Estimator.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Iteration count for the ibu method.
    #[arg(long)]
    iterations: Option<usize>,
    /// Prior spectrum JSON for the ibu method (default: uniform).
    #[arg(long)]
    prior: Option<PathBuf>,
    /// Relative objective-decrease tolerance for the ls method.
    #[arg(long)]
    ls_tolerance: Option<f64>,
    /// Iteration cap for the ls method.
    #[arg(long)]
    ls_max_iterations: Option<usize>,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct FitNoiseArgs {
    /// Response matrix JSON (must have qubit structure).
    #[arg(long)]
    response: PathBuf,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct BootstrapArgs {
    /// Response matrix JSON used for unfolding. If omitted, the matrix is
    /// built from --calibration.
    #[arg(long)]
    response: Option<PathBuf>,
    /// Calibration histograms JSON; enables the calibration-statistics
    /// component.
    #[arg(long)]
    calibration: Option<PathBuf>,
    /// Measured integer counts JSON.
    #[arg(long)]
    measured: PathBuf,
    /// Number of bootstrap replicas (at least 2).
    #[arg(long)]
    replicas: usize,
    /// Estimator.
    #[arg(long, value_enum)]
    method: MethodArg,
    /// Iteration count for the ibu method.
    #[arg(long)]
    iterations: Option<usize>,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct ScanArgs {
    /// Calibration histograms JSON; the nominal response matrix is built
    /// from it and its fluctuations drive the stat_r component.
    #[arg(long)]
    calibration: PathBuf,
    /// Measured integer counts JSON.
    #[arg(long)]
    measured: PathBuf,
    /// Strictly increasing iteration counts, comma separated.
    #[arg(long, value_delimiter = ',', required = true)]
    iterations: Vec<usize>,
    /// Number of bootstrap replicas (at least 2).
    #[arg(long)]
    replicas: usize,
    /// Strength of the uniform flip channel used for the systematic shift.
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Truth spectrum JSON on the counts scale; adds bias and mse columns.
    #[arg(long)]
    truth: Option<PathBuf>,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
    /// Output CSV path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct PseudoArgs {
    /// Truth spectrum JSON (normalized internally).
    #[arg(long)]
    truth: PathBuf,
    /// Response matrix JSON.
    #[arg(long)]
    response: PathBuf,
    /// Shots per experiment.
    #[arg(long)]
    shots: u64,
    /// Number of experiments (at least 2).
    #[arg(long)]
    experiments: usize,
    /// Estimators to run, comma separated (default: all three).
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Option<Vec<MethodArg>>,
    /// Iteration count for the ibu method.
    #[arg(long)]
    iterations: Option<usize>,
    /// What deviations are measured against.
    #[arg(long, value_enum, default_value_t = ReferenceArg::Sampled)]
    reference: ReferenceArg,
    /// RNG seed.
    #[arg(long)]
    seed: u64,
    /// Output CSV path (one row per method, experiment, and state).
    #[arg(long)]
    out: PathBuf,
    /// Optional JSON summary (per-method mean and spread of deviations).
    #[arg(long)]
    summary_out: Option<PathBuf>,
}

#[derive(clap::Args)]
struct ExamplesArgs {
    /// Which built-in matrix to write.
    #[arg(long, value_enum)]
    name: ExampleName,
    /// Flip strength for two-level and tridiagonal matrices.
    #[arg(long)]
    eps: Option<f64>,
    /// Bin count for the tridiagonal matrix.
    #[arg(long)]
    bins: Option<usize>,
    /// Per-qubit 0->1 flip rates, comma separated (noise-model).
    #[arg(long, value_delimiter = ',')]
    p01: Option<Vec<f64>>,
    /// Per-qubit 1->0 flip rates, comma separated (noise-model).
    #[arg(long, value_delimiter = ',')]
    p10: Option<Vec<f64>>,
    /// Output JSON path.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug)]
enum AppError {
    Core(CoreError),
    File { path: PathBuf, message: String },
    Usage(String),
}

impl From<CoreError> for AppError {
    fn from(e: CoreError) -> Self {
        AppError::Core(e)
    }
}

impl AppError {
    fn exit_code(&self) -> u8 {
        match self {
            AppError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }

    fn code(&self) -> &'static str {
        match self {
            AppError::Core(e) => e.code(),
            AppError::File { .. } => "File",
            AppError::Usage(_) => "InvalidInput",
        }
    }
}

impl fmt::Display for AppError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AppError::Core(e) => write!(f, "{e}"),
            AppError::File { path, message } => write!(f, "{}: {message}", path.display()),
            AppError::Usage(message) => write!(f, "{message}"),
        }
    }
}

type AppResult<T> = Result<T, AppError>;

fn usage(message: impl Into<String>) -> AppError {
    AppError::Usage(message.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        // First call in the process, so this cannot fail to apply.
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads as usize)
            .build_global()
            .ok();
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let message = e.to_string().replace('"', "'");
            eprintln!("error: code={} message=\"{}\"", e.code(), message);
            ExitCode::from(e.exit_code())
        }
    }
}

fn run(command: Command) -> AppResult<()> {
    match command {
        Command::GenTruth(a) => gen_truth(a),
        Command::Fold(a) => fold(a),
        Command::ApplyNoise(a) => apply_noise(a),
        Command::Calibrate(a) => calibrate(a),
        Command::Unfold(a) => unfold_cmd(a),
        Command::FitNoise(a) => fit_noise(a),
        Command::Bootstrap(a) => bootstrap(a),
        Command::Scan(a) => scan(a),
        Command::Pseudo(a) => pseudo(a),
        Command::Examples(a) => examples(a),
    }
}

// ---------------------------------------------------------------------------
// File helpers
// ---------------------------------------------------------------------------

fn file_error(path: &Path, message: impl fmt::Display) -> AppError {
    AppError::File {
        path: path.to_path_buf(),
        message: message.to_string(),
    }
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> AppResult<T> {
    let text = fs::read_to_string(path).map_err(|e| file_error(path, e))?;
    serde_json::from_str(&text).map_err(|e| file_error(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> AppResult<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| file_error(path, e))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| file_error(path, e))
}

fn write_text(path: &Path, text: &str) -> AppResult<()> {
    fs::write(path, text).map_err(|e| file_error(path, e))
}

fn read_response(path: &Path) -> AppResult<ResponseMatrix> {
    let file: MatrixFile = read_json(path)?;
    file.to_response().map_err(AppError::from)
}

fn read_counts(path: &Path) -> AppResult<CountVector> {
    let file: CountsFile = read_json(path)?;
    file.to_counts().map_err(AppError::from)
}

/// Read a spectrum that may be stored either as real values or as integer
/// counts; both arrive as a real-valued vector.
fn read_spectrum(path: &Path) -> AppResult<ProbabilityVector> {
    let value: serde_json::Value = read_json(path)?;
    if value.get("counts").is_some() {
        let file: CountsFile =
            serde_json::from_value(value).map_err(|e| file_error(path, e))?;
        Ok(file.to_counts()?.to_probability())
    } else {
        let file: VectorFile =
            serde_json::from_value(value).map_err(|e| file_error(path, e))?;
        file.to_probability().map_err(AppError::from)
    }
}

fn read_calibration(path: &Path) -> AppResult<CalibrationData> {
    let file: CalibrationFile = read_json(path)?;
    file.to_calibration().map_err(AppError::from)
}

/// Floats in CSV output carry 17 significant digits, enough to reproduce
/// the exact binary value on re-read.
fn csv_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn path_str(path: &Path) -> String {
    path.display().to_string()
}

/// Prints an informational line to stdout, ignoring write failures such as a
/// closed pipe, so truncating the output (e.g. with `head`) never aborts a
/// run whose files are already written.
fn info_line(args: std::fmt::Arguments) {
    use std::io::Write;
    let _ = writeln!(std::io::stdout(), "{args}");
}

// ---------------------------------------------------------------------------
// Subcommand handlers
// ---------------------------------------------------------------------------

fn gen_truth(a: GenTruthArgs) -> AppResult<()> {
    if a.seed.is_some() && a.shots.is_none() {
        return Err(usage("--seed applies only with --shots"));
    }
    let check_qubits = |q: Option<usize>| -> AppResult<usize> {
        let q = q.ok_or_else(|| usage("--qubits is required for this kind"))?;
        if q == 0 || q > MAX_QUBITS {
            return Err(usage(format!("--qubits must be between 1 and {MAX_QUBITS}")));
        }
        Ok(q)
    };
    let (spec, mut params) = match a.kind {
        TruthKind::Gaussian => {
            let qubits = check_qubits(a.qubits)?;
            let sigma = a.sigma.ok_or_else(|| usage("--sigma is required for gaussian"))?;
            (
                sim::TruthSpec::Gaussian {
                    n_qubits: qubits,
                    sigma,
                },
                json!({"kind": "gaussian", "qubits": qubits, "sigma": sigma}),
            )
        }
        TruthKind::WState => {
            let qubits = check_qubits(a.qubits)?;
            (
                sim::TruthSpec::WState { n_qubits: qubits },
                json!({"kind": "w-state", "qubits": qubits}),
            )
        }
        TruthKind::BinnedGaussian => {
            let bins = a.bins.ok_or_else(|| usage("--bins is required for binned-gaussian"))?;
            if bins < 2 || bins > MAX_BINS {
                return Err(usage(format!("--bins must be between 2 and {MAX_BINS}")));
            }
            let mean = a.mean.ok_or_else(|| usage("--mean is required for binned-gaussian"))?;
            let sd = a.sd.ok_or_else(|| usage("--sd is required for binned-gaussian"))?;
            let lo = a.lo.ok_or_else(|| usage("--lo is required for binned-gaussian"))?;
            let hi = a.hi.ok_or_else(|| usage("--hi is required for binned-gaussian"))?;
            (
                sim::TruthSpec::BinnedGaussian {
                    n_bins: bins,
                    mean,
                    sd,
                    lo,
                    hi,
                },
                json!({"kind": "binned-gaussian", "bins": bins, "mean": mean, "sd": sd, "lo": lo, "hi": hi}),
            )
        }
    };
    let truth = spec.build()?;
    if let Some(shots) = a.shots {
        let seed = a.seed.expect("clap enforces --seed with --shots");
        let counts = sim::sample_counts(&truth, shots, seed)?;
        write_json(&a.out, &CountsFile::from_counts(&counts))?;
        params["shots"] = json!(shots);
        params["seed"] = json!(seed);
    } else {
        write_json(&a.out, &VectorFile::from_probability(&truth))?;
    }
    manifest::write_manifest(&a.out, "gen-truth", params, &[], &[&a.out])
        .map_err(|e| file_error(&a.out, e))
}

fn fold(a: FoldArgs) -> AppResult<()> {
    let r = read_response(&a.response)?;
    let truth = read_spectrum(&a.truth)?;
    let folded = r.fold(&truth)?;
    write_json(&a.out, &VectorFile::from_probability(&folded))?;
    manifest::write_manifest(
        &a.out,
        "fold",
        json!({"response": path_str(&a.response), "truth": path_str(&a.truth)}),
        &[&a.response, &a.truth],
        &[&a.out],
    )
    .map_err(|e| file_error(&a.out, e))
}

fn apply_noise(a: ApplyNoiseArgs) -> AppResult<()> {
    let r = read_response(&a.response)?;
    let counts = read_counts(&a.counts)?;
    let noisy = sim::apply_readout_noise(&r, &counts, a.seed)?;
    write_json(&a.out, &CountsFile::from_counts(&noisy))?;
    manifest::write_manifest(
        &a.out,
        "apply-noise",
        json!({"response": path_str(&a.response), "counts": path_str(&a.counts), "seed": a.seed}),
        &[&a.response, &a.counts],
        &[&a.out],
    )
    .map_err(|e| file_error(&a.out, e))
}

fn calibrate(a: CalibrateArgs) -> AppResult<()> {
    match (&a.calibration, &a.response) {
        (Some(calibration_path), None) => {
            if a.shots_per_state.is_some() || a.seed.is_some() || a.calibration_out.is_some() {
                return Err(usage(
                    "--shots-per-state, --seed, and --calibration-out apply only to the synthetic mode (--response)",
                ));
            }
            let calibration = read_calibration(calibration_path)?;
            let estimated = response::build_from_calibration(&calibration)?;
            write_json(&a.out, &MatrixFile::from_response(&estimated))?;
            manifest::write_manifest(
                &a.out,
                "calibrate",
                json!({"calibration": path_str(calibration_path)}),
                &[calibration_path.as_path()],
                &[&a.out],
            )
            .map_err(|e| file_error(&a.out, e))
        }
        (None, Some(response_path)) => {
            let shots = a
                .shots_per_state
                .ok_or_else(|| usage("--shots-per-state is required with --response"))?;
            let seed = a.seed.ok_or_else(|| usage("--seed is required with --response"))?;
            let truth_matrix = read_response(response_path)?;
            let calibration = sim::sample_calibration(&truth_matrix, shots, seed)?;
            let mut outputs: Vec<&Path> = vec![&a.out];
            if let Some(calibration_out) = &a.calibration_out {
                write_json(calibration_out, &CalibrationFile::from_calibration(&calibration))?;
                outputs.push(calibration_out.as_path());
            }
            let estimated = response::build_from_calibration(&calibration)?;
            write_json(&a.out, &MatrixFile::from_response(&estimated))?;
            manifest::write_manifest(
                &a.out,
                "calibrate",
                json!({
                    "response": path_str(response_path),
                    "shots_per_state": shots,
                    "seed": seed
                }),
                &[response_path.as_path()],
                &outputs,
            )
            .map_err(|e| file_error(&a.out, e))
        }
        _ => Err(usage(
            "calibrate needs exactly one of --calibration (measured histograms) or --response (synthetic run)",
        )),
    }
}

/// Build an unfolding configuration from method-specific flags, rejecting
/// flags that do not apply to the chosen method.
fn build_config(
    method: MethodArg,
    iterations: Option<usize>,
    prior: Option<&Path>,
    ls_tolerance: Option<f64>,
    ls_max_iterations: Option<usize>,
) -> AppResult<UnfoldConfig> {
    if method != MethodArg::Ibu {
        if iterations.is_some() {
            return Err(usage("--iterations applies only to the ibu method"));
        }
        if prior.is_some() {
            return Err(usage("--prior applies only to the ibu method"));
        }
    }
    if method != MethodArg::Ls && (ls_tolerance.is_some() || ls_max_iterations.is_some()) {
        return Err(usage("--ls-tolerance and --ls-max-iterations apply only to the ls method"));
    }
    match method {
        MethodArg::Inversion => Ok(UnfoldConfig::inversion()),
        MethodArg::Ls => {
            let mut cfg = UnfoldConfig::least_squares();
            if let Some(tolerance) = ls_tolerance {
                cfg.ls_tolerance = tolerance;
            }
            if let Some(cap) = ls_max_iterations {
                cfg.ls_max_iterations = cap;
            }
            Ok(cfg)
        }
        MethodArg::Ibu => {
            let n = iterations
                .ok_or_else(|| usage("--iterations is required for the ibu method"))?;
            if n == 0 {
                return Err(usage("--iterations must be at least 1"));
            }
            let mut cfg = UnfoldConfig::ibu(n);
            if let Some(prior_path) = prior {
                cfg = cfg.with_prior(Prior::Custom(read_spectrum(prior_path)?));
            }
            Ok(cfg)
        }
    }
}

fn unfold_cmd(a: UnfoldArgs) -> AppResult<()> {
    let r = read_response(&a.response)?;
    let measured = read_spectrum(&a.measured)?;
    let cfg = build_config(
        a.method,
        a.iterations,
        a.prior.as_deref(),
        a.ls_tolerance,
        a.ls_max_iterations,
    )?;
    let result = readout_unfold::unfold::unfold(&r, &measured, &cfg)?;
    write_json(&a.out, &VectorFile::from_unfold_result(&result, r.n_qubits()))?;
    let mut params = json!({
        "response": path_str(&a.response),
        "measured": path_str(&a.measured),
        "method": result.method.name()
    });
    if let Some(n) = a.iterations {
        params["iterations"] = json!(n);
    }
    if let Some(prior) = &a.prior {
        params["prior"] = json!(path_str(prior));
    }
    if let Some(tolerance) = a.ls_tolerance {
        params["ls_tolerance"] = json!(tolerance);
    }
    if let Some(cap) = a.ls_max_iterations {
        params["ls_max_iterations"] = json!(cap);
    }
    let mut inputs: Vec<&Path> = vec![&a.response, &a.measured];
    if let Some(prior) = &a.prior {
        inputs.push(prior.as_path());
    }
    manifest::write_manifest(&a.out, "unfold", params, &inputs, &[&a.out])
        .map_err(|e| file_error(&a.out, e))
}

fn fit_noise(a: FitNoiseArgs) -> AppResult<()> {
    let r = read_response(&a.response)?;
    let n_qubits = r
        .n_qubits()
        .ok_or(CoreError::MissingQubitStructure)?;
    let global = noisefit::fit_global(&r)?;
    let per_qubit = noisefit::fit_per_qubit(&r)?;
    let mut conditioned = std::collections::BTreeMap::new();
    for q in 0..n_qubits {
        let (p01, p10) = noisefit::conditioned_transitions(&r, q)?;
        conditioned.insert(q.to_string(), ConditionedEntry { p01, p10 });
    }
    let file = FitFile {
        schema: SCHEMA_VERSION.to_string(),
        global: (&global).into(),
        per_qubit: (&per_qubit).into(),
        conditioned,
    };
    write_json(&a.out, &file)?;
    manifest::write_manifest(
        &a.out,
        "fit-noise",
        json!({"response": path_str(&a.response)}),
        &[&a.response],
        &[&a.out],
    )
    .map_err(|e| file_error(&a.out, e))
}

/// JSON document written by the bootstrap subcommand: per-state spreads of
/// the estimate under measurement refluctuation (`stat_m`) and, when
/// calibration data was supplied, under calibration refluctuation
/// (`stat_r`).
#[derive(Debug, Serialize)]
struct BootstrapFile {
    schema: &'static str,
    method: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    iterations: Option<usize>,
    replicas: usize,
    stat_m: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    stat_r: Option<Vec<f64>>,
}

fn bootstrap(a: BootstrapArgs) -> AppResult<()> {
    let measured = read_counts(&a.measured)?;
    let cfg = build_config(a.method, a.iterations, None, None, None)?;
    let calibration = a
        .calibration
        .as_deref()
        .map(read_calibration)
        .transpose()?;
    let nominal = match (&a.response, &calibration) {
        (Some(path), _) => read_response(path)?,
        (None, Some(calibration)) => response::build_from_calibration(calibration)?,
        (None, None) => {
            return Err(usage(
                "bootstrap needs --response, --calibration, or both",
            ))
        }
    };
    let stat_m =
        uncertainty::bootstrap_measurement(&nominal, &measured, a.replicas, &cfg, a.seed)?;
    let stat_r = calibration
        .as_ref()
        .map(|c| uncertainty::bootstrap_response(c, &measured, a.replicas, &cfg, a.seed))
        .transpose()?;
    write_json(
        &a.out,
        &BootstrapFile {
            schema: SCHEMA_VERSION,
            method: a.method.to_method().name().to_string(),
            iterations: a.iterations,
            replicas: a.replicas,
            stat_m,
            stat_r,
        },
    )?;
    let mut params = json!({
        "measured": path_str(&a.measured),
        "method": a.method.to_method().name(),
        "replicas": a.replicas,
        "seed": a.seed
    });
    if let Some(n) = a.iterations {
        params["iterations"] = json!(n);
    }
    let mut inputs: Vec<&Path> = Vec::new();
    if let Some(response) = &a.response {
        params["response"] = json!(path_str(response));
        inputs.push(response.as_path());
    }
    if let Some(calibration) = &a.calibration {
        params["calibration"] = json!(path_str(calibration));
        inputs.push(calibration.as_path());
    }
    inputs.push(a.measured.as_path());
    manifest::write_manifest(&a.out, "bootstrap", params, &inputs, &[&a.out])
        .map_err(|e| file_error(&a.out, e))
}

fn scan(a: ScanArgs) -> AppResult<()> {
    let calibration = read_calibration(&a.calibration)?;
    let measured = read_counts(&a.measured)?;
    let base = UnfoldConfig::ibu(1);
    let scan = uncertainty::uncertainty_scan(
        &calibration,
        &measured,
        &a.iterations,
        a.replicas,
        a.lambda,
        &base,
        a.seed,
    )?;
    let bias = a
        .truth
        .as_deref()
        .map(|truth_path| -> AppResult<_> {
            let truth = read_spectrum(truth_path)?;
            let nominal = response::build_from_calibration(&calibration)?;
            uncertainty::bias_scan(&truth, &nominal, &measured, &a.iterations, &base)
                .map_err(AppError::from)
        })
        .transpose()?;

    let mut csv = String::from("iterations,stat_m,stat_r,nonclosure,systematic_r,total,bias,mse\n");
    for (i, row) in scan.rows.iter().enumerate() {
        let (bias_cell, mse_cell) = match &bias {
            Some(b) => (csv_float(b.rows[i].bias), csv_float(b.rows[i].mse)),
            None => (String::new(), String::new()),
        };
        csv.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            row.iterations,
            csv_float(row.averaged.stat_m),
            csv_float(row.averaged.stat_r),
            csv_float(row.averaged.nonclosure),
            csv_float(row.averaged.systematic_r),
            csv_float(row.averaged.total),
            bias_cell,
            mse_cell,
        ));
    }
    write_text(&a.out, &csv)?;
    info_line(format_args!(
        "recommended_iterations={}",
        scan.recommended_iterations
    ));
    if let Some(b) = &bias {
        info_line(format_args!(
            "inversion_bias={} inversion_mse={}",
            csv_float(b.inversion_bias),
            csv_float(b.inversion_mse)
        ));
        info_line(format_args!(
            "least_squares_bias={} least_squares_mse={}",
            csv_float(b.least_squares_bias),
            csv_float(b.least_squares_mse)
        ));
    }
    let mut params = json!({
        "calibration": path_str(&a.calibration),
        "measured": path_str(&a.measured),
        "iterations": a.iterations,
        "replicas": a.replicas,
        "lambda": a.lambda,
        "seed": a.seed
    });
    let mut inputs: Vec<&Path> = vec![&a.calibration, &a.measured];
    if let Some(truth) = &a.truth {
        params["truth"] = json!(path_str(truth));
        inputs.push(truth.as_path());
    }
    manifest::write_manifest(&a.out, "scan", params, &inputs, &[&a.out])
        .map_err(|e| file_error(&a.out, e))
}

/// JSON summary written by the pseudo subcommand alongside the per-state
/// CSV: the mean and sample standard deviation of (estimate - reference)
/// per method and state.
#[derive(Debug, Serialize)]
struct PseudoSummaryFile {
    schema: &'static str,
    reference: String,
    shots: u64,
    experiments: usize,
    methods: Vec<String>,
    mean_difference: Vec<Vec<f64>>,
    std_difference: Vec<Vec<f64>>,
}

fn pseudo(a: PseudoArgs) -> AppResult<()> {
    let methods = a
        .methods
        .clone()
        .unwrap_or_else(|| vec![MethodArg::Inversion, MethodArg::Ls, MethodArg::Ibu]);
    if methods.is_empty() {
        return Err(usage("--methods must name at least one estimator"));
    }
    let truth = read_spectrum(&a.truth)?;
    let r = read_response(&a.response)?;
    let needs_iterations = methods.contains(&MethodArg::Ibu);
    if needs_iterations && a.iterations.is_none() {
        return Err(usage("--iterations is required when the ibu method is included"));
    }
    if !needs_iterations && a.iterations.is_some() {
        return Err(usage("--iterations applies only to the ibu method"));
    }
    let configs: Vec<UnfoldConfig> = methods
        .iter()
        .map(|m| match m {
            MethodArg::Inversion => UnfoldConfig::inversion(),
            MethodArg::Ls => UnfoldConfig::least_squares(),
            MethodArg::Ibu => UnfoldConfig::ibu(a.iterations.expect("checked above")),
        })
        .collect();
    let reference = match a.reference {
        ReferenceArg::Sampled => sim::Reference::SampledTruth,
        ReferenceArg::Theoretical => sim::Reference::Theoretical,
    };
    let report = sim::pseudo_experiments(
        &truth,
        &r,
        a.shots,
        a.experiments,
        &configs,
        reference,
        a.seed,
    )?;

    let mut csv = String::from("method,experiment,state,truth,predicted\n");
    for (k, method) in report.methods.iter().enumerate() {
        for experiment in &report.experiments {
            for state in 0..experiment.reference.len() {
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    method,
                    experiment.experiment,
                    state,
                    csv_float(experiment.reference[state]),
                    csv_float(experiment.estimates[k][state]),
                ));
            }
        }
    }
    write_text(&a.out, &csv)?;

    let mut outputs: Vec<&Path> = vec![&a.out];
    if let Some(summary_out) = &a.summary_out {
        let summary = PseudoSummaryFile {
            schema: SCHEMA_VERSION,
            reference: match a.reference {
                ReferenceArg::Sampled => "sampled".to_string(),
                ReferenceArg::Theoretical => "theoretical".to_string(),
            },
            shots: a.shots,
            experiments: a.experiments,
            methods: report.methods.clone(),
            mean_difference: report.summary.mean_difference.clone(),
            std_difference: report.summary.std_difference.clone(),
        };
        write_json(summary_out, &summary)?;
        outputs.push(summary_out.as_path());
    }
    let mut params = json!({
        "truth": path_str(&a.truth),
        "response": path_str(&a.response),
        "shots": a.shots,
        "experiments": a.experiments,
        "methods": report.methods,
        "reference": match a.reference {
            ReferenceArg::Sampled => "sampled",
            ReferenceArg::Theoretical => "theoretical",
        },
        "seed": a.seed
    });
    if let Some(n) = a.iterations {
        params["iterations"] = json!(n);
    }
    manifest::write_manifest(
        &a.out,
        "pseudo",
        params,
        &[&a.truth, &a.response],
        &outputs,
    )
    .map_err(|e| file_error(&a.out, e))
}

fn examples(a: ExamplesArgs) -> AppResult<()> {
    if a.name != ExampleName::NoiseModel && (a.p01.is_some() || a.p10.is_some()) {
        return Err(usage("--p01/--p10 apply only to noise-model"));
    }
    if a.name != ExampleName::Tridiagonal && a.bins.is_some() {
        return Err(usage("--bins applies only to tridiagonal"));
    }
    if a.name == ExampleName::NoiseModel && a.eps.is_some() {
        return Err(usage("--eps does not apply to noise-model"));
    }
    let (matrix, params) = match a.name {
        ExampleName::TwoLevel => {
            let eps = a.eps.ok_or_else(|| usage("--eps is required for two-level"))?;
            (
                response::two_level(eps)?,
                json!({"name": "two-level", "eps": eps}),
            )
        }
        ExampleName::Tridiagonal => {
            let eps = a.eps.ok_or_else(|| usage("--eps is required for tridiagonal"))?;
            let bins = a.bins.ok_or_else(|| usage("--bins is required for tridiagonal"))?;
            if bins < 2 || bins > MAX_BINS {
                return Err(usage(format!("--bins must be between 2 and {MAX_BINS}")));
            }
            (
                response::tridiagonal(bins, eps)?,
                json!({"name": "tridiagonal", "bins": bins, "eps": eps}),
            )
        }
        ExampleName::NoiseModel => {
            let p01 = a.p01.ok_or_else(|| usage("--p01 is required for noise-model"))?;
            let p10 = a.p10.ok_or_else(|| usage("--p10 is required for noise-model"))?;
            if p01.len() > MAX_QUBITS {
                return Err(usage(format!("at most {MAX_QUBITS} qubits are supported")));
            }
            let model = NoiseModel::new(p01.clone(), p10.clone())?;
            (
                response::from_noise_model(&model),
                json!({"name": "noise-model", "p01": p01, "p10": p10}),
            )
        }
    };
    write_json(&a.out, &MatrixFile::from_response(&matrix))?;
    manifest::write_manifest(&a.out, "examples", params, &[], &[&a.out])
        .map_err(|e| file_error(&a.out, e))
}
