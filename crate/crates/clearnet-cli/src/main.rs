//! `clearnet`: command-line front end for clearing-network analysis.
//!
//! Every invocation reads a network JSON file, runs one analysis, and emits
//! a single-line JSON report on standard output (the `sweep` command can
//! emit raw CSV instead). Failures produce a single-line JSON error object
//! and a classifying exit code: 2 for input/validation problems, 3 for
//! domain conditions (insolvency, infeasibility, out-of-range radii), 1 for
//! internal numerical failures.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use clearnet::clearing::{self, ClearingError, ClearingResult};
use clearnet::experiments::{self, ExperimentError, LossCurve, SweepConfig};
use clearnet::model::ModelError;
use clearnet::resilience::{self, MarginError, MarginReport};
use clearnet::worstcase::{self, UniquenessReport, WorstCaseError, WorstCaseReport};
use clearnet::{FinancialNetwork, NormKind};

/// Net worths of exactly zero (within this) pass `validate --allow-boundary`.
const BOUNDARY_TOL: f64 = 1e-9;

#[derive(Parser)]
#[command(
    name = "clearnet",
    version,
    about = "Clearing payments, resilience margins, and worst-case losses for financial networks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    L1,
    Linf,
}

impl From<NormArg> for NormKind {
    fn from(a: NormArg) -> Self {
        match a {
            NormArg::L1 => NormKind::L1,
            NormArg::Linf => NormKind::Linf,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum MethodArg {
    Lp,
    IterMax,
    IterMin,
}

#[derive(Clone, Copy, ValueEnum)]
enum FormatArg {
    Json,
    Csv,
}

#[derive(Subcommand)]
enum Command {
    /// Check structural invariants and nominal solvency of a network file.
    Validate {
        file: PathBuf,
        /// Accept banks whose nominal net worth is exactly zero.
        #[arg(long)]
        allow_boundary: bool,
    },
    /// Compute the maximal clearing payment vector, optionally under a
    /// price shock.
    Clear {
        file: PathBuf,
        /// Comma-separated price moves, one per asset (default: none).
        #[arg(long, value_delimiter = ',', num_args = 1, allow_hyphen_values = true)]
        delta: Option<Vec<f64>>,
        #[arg(long, value_enum, default_value = "lp")]
        method: MethodArg,
    },
    /// Largest shock radius below which no bank defaults, with the witness
    /// scenario attaining it.
    Margin {
        file: PathBuf,
        #[arg(long, value_enum)]
        norm: NormArg,
    },
    /// Largest shock radius for which clearing payments still exist.
    InsolvencyMargin {
        file: PathBuf,
        #[arg(long, value_enum)]
        norm: NormArg,
    },
    /// Worst-case system loss over the shock ball of a given radius.
    WorstCase {
        file: PathBuf,
        #[arg(long, value_enum)]
        norm: NormArg,
        #[arg(long, allow_negative_numbers = true)]
        epsilon: f64,
        /// Also certify whether the worst-case scenario is unique (needs
        /// epsilon strictly between the default and insolvency margins).
        #[arg(long)]
        check_uniqueness: bool,
    },
    /// Sweep the worst-case loss and random-shock baselines over an epsilon
    /// grid from the default margin to the insolvency margin.
    Sweep {
        file: PathBuf,
        #[arg(long, value_enum)]
        norm: NormArg,
        /// Grid points spaced evenly on [default margin, insolvency margin].
        #[arg(long, default_value_t = 20)]
        grid: usize,
        /// Extra points prepended evenly on [0, default margin).
        #[arg(long, default_value_t = 0)]
        prefix: usize,
        /// Random shocks per grid point.
        #[arg(long, default_value_t = 150)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the CSV rendering to this file.
        #[arg(long)]
        out: Option<PathBuf>,
        /// What to print on standard output.
        #[arg(long, value_enum, default_value = "json")]
        format: FormatArg,
    },
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Validate { .. } => "validate",
            Command::Clear { .. } => "clear",
            Command::Margin { .. } => "margin",
            Command::InsolvencyMargin { .. } => "insolvency-margin",
            Command::WorstCase { .. } => "worst-case",
            Command::Sweep { .. } => "sweep",
        }
    }

    fn file(&self) -> &PathBuf {
        match self {
            Command::Validate { file, .. }
            | Command::Clear { file, .. }
            | Command::Margin { file, .. }
            | Command::InsolvencyMargin { file, .. }
            | Command::WorstCase { file, .. }
            | Command::Sweep { file, .. } => file,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum ErrorKind {
    Validation,
    Domain,
    Internal,
}

impl ErrorKind {
    fn name(self) -> &'static str {
        match self {
            ErrorKind::Validation => "validation",
            ErrorKind::Domain => "domain",
            ErrorKind::Internal => "internal",
        }
    }

    fn exit_code(self) -> u8 {
        match self {
            ErrorKind::Validation => 2,
            ErrorKind::Domain => 3,
            ErrorKind::Internal => 1,
        }
    }
}

struct CliError {
    kind: ErrorKind,
    detail: &'static str,
    message: String,
}

impl CliError {
    fn new(kind: ErrorKind, detail: &'static str, message: String) -> Self {
        CliError { kind, detail, message }
    }
}

impl From<ModelError> for CliError {
    fn from(e: ModelError) -> Self {
        CliError::new(ErrorKind::Validation, "invalid-network", e.to_string())
    }
}

impl From<ClearingError> for CliError {
    fn from(e: ClearingError) -> Self {
        let (kind, detail) = match &e {
            ClearingError::InsolventToExternal { .. } => {
                (ErrorKind::Domain, "insolvent-to-external")
            }
            ClearingError::OutOfRange { .. } => (ErrorKind::Validation, "payments-out-of-range"),
            ClearingError::MaxIterExceeded { .. } => (ErrorKind::Internal, "iteration-limit"),
            ClearingError::Lp(_) => (ErrorKind::Internal, "lp-failure"),
        };
        CliError::new(kind, detail, e.to_string())
    }
}

impl From<MarginError> for CliError {
    fn from(e: MarginError) -> Self {
        let (kind, detail) = match &e {
            MarginError::NominalDefault { .. } => (ErrorKind::Domain, "nominal-default"),
            MarginError::InfeasibleAtZero => (ErrorKind::Domain, "infeasible-at-zero"),
            MarginError::Lp(_) => (ErrorKind::Internal, "lp-failure"),
        };
        CliError::new(kind, detail, e.to_string())
    }
}

impl From<WorstCaseError> for CliError {
    fn from(e: WorstCaseError) -> Self {
        match e {
            WorstCaseError::Margin(inner) => inner.into(),
            WorstCaseError::Clearing(inner) => inner.into(),
            other => {
                let (kind, detail) = match &other {
                    WorstCaseError::NegativeEpsilon { .. } => {
                        (ErrorKind::Validation, "negative-epsilon")
                    }
                    WorstCaseError::EpsilonExceedsBound { .. } => {
                        (ErrorKind::Domain, "epsilon-exceeds-insolvency-margin")
                    }
                    WorstCaseError::EpsilonOutOfRange { .. } => {
                        (ErrorKind::Domain, "epsilon-outside-margin-interval")
                    }
                    WorstCaseError::TooManyVertices { .. } => {
                        (ErrorKind::Validation, "oracle-too-large")
                    }
                    WorstCaseError::ConsistencyFailure { .. } => {
                        (ErrorKind::Internal, "duality-consistency-failure")
                    }
                    WorstCaseError::Lp(_) => (ErrorKind::Internal, "lp-failure"),
                    WorstCaseError::Margin(_) | WorstCaseError::Clearing(_) => unreachable!(),
                };
                CliError::new(kind, detail, other.to_string())
            }
        }
    }
}

impl From<ExperimentError> for CliError {
    fn from(e: ExperimentError) -> Self {
        match e {
            ExperimentError::Margin(inner) => inner.into(),
            ExperimentError::WorstCase(inner) => inner.into(),
            ExperimentError::Clearing(inner) => inner.into(),
            ExperimentError::GridTooSmall { .. } => {
                CliError::new(ErrorKind::Validation, "grid-too-small", e.to_string())
            }
            ExperimentError::NoPriceExposure => {
                CliError::new(ErrorKind::Domain, "no-price-exposure", e.to_string())
            }
        }
    }
}

#[derive(Serialize)]
struct Report<'a, P: Serialize> {
    command: &'a str,
    input_digest: &'a str,
    version: &'a str,
    duration_seconds: f64,
    payload: P,
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    kind: &'a str,
    detail: &'a str,
    message: &'a str,
}

#[derive(Serialize)]
struct ErrorReport<'a> {
    command: &'a str,
    input_digest: Option<&'a str>,
    version: &'a str,
    duration_seconds: f64,
    error: ErrorBody<'a>,
}

#[derive(Serialize)]
struct ValidatePayload {
    banks: usize,
    assets: usize,
    node_names: Vec<String>,
    strictly_solvent: bool,
    net_worth: Vec<f64>,
    boundary_allowed: bool,
}

#[derive(Serialize)]
struct ClearPayload {
    delta: Vec<f64>,
    fixed_point_residual: f64,
    #[serde(flatten)]
    result: ClearingResult,
}

#[derive(Serialize)]
struct MarginPayload {
    #[serde(flatten)]
    report: MarginReport,
    /// Margin divided by the norm of the nominal price vector.
    #[serde(serialize_with = "clearnet::jsonf::extended")]
    epsilon_star_relative: f64,
    price_norm: f64,
}

#[derive(Serialize)]
struct InsolvencyPayload {
    norm: &'static str,
    #[serde(serialize_with = "clearnet::jsonf::extended")]
    epsilon_ub: f64,
    #[serde(serialize_with = "clearnet::jsonf::extended")]
    epsilon_ub_relative: f64,
    price_norm: f64,
}

#[derive(Serialize)]
struct WorstCasePayload {
    #[serde(flatten)]
    report: WorstCaseReport,
    uniqueness: Option<UniquenessReport>,
}

#[derive(Serialize)]
struct SweepPayload {
    grid_points: usize,
    prefix_points: usize,
    csv_path: Option<String>,
    #[serde(flatten)]
    curve: LossCurve,
}

/// What a successful command prints.
enum Output {
    Payload(serde_json::Value),
    Raw(String),
}

fn to_payload<P: Serialize>(payload: P) -> Result<Output, CliError> {
    serde_json::to_value(payload)
        .map(Output::Payload)
        .map_err(|e| CliError::new(ErrorKind::Internal, "serialization-failure", e.to_string()))
}

fn load_network(text: &str) -> Result<FinancialNetwork, CliError> {
    Ok(FinancialNetwork::from_json_str(text)?)
}

fn run_validate(text: &str, allow_boundary: bool) -> Result<Output, CliError> {
    let net = load_network(text)?;
    let solvency = net.check_nominal_solvency();
    let acceptable = solvency.solvent
        || (allow_boundary && solvency.net_worth.iter().all(|w| *w >= -BOUNDARY_TOL));
    if !acceptable {
        let worst = solvency.net_worth.iter().cloned().fold(f64::INFINITY, f64::min);
        return Err(CliError::new(
            ErrorKind::Domain,
            "nominal-default",
            format!("some bank defaults at nominal prices (lowest net worth {worst})"),
        ));
    }
    to_payload(ValidatePayload {
        banks: net.n(),
        assets: net.m(),
        node_names: net.node_names().to_vec(),
        strictly_solvent: solvency.solvent,
        net_worth: solvency.net_worth,
        boundary_allowed: allow_boundary,
    })
}

fn run_clear(text: &str, delta: Option<Vec<f64>>, method: MethodArg) -> Result<Output, CliError> {
    let net = load_network(text)?;
    let delta = delta.unwrap_or_else(|| vec![0.0; net.m()]);
    let c = net.perturbed_inflow(&delta)?;
    let result = match method {
        MethodArg::Lp => clearing::max_clearing_lp(&net, c.view())?,
        MethodArg::IterMax => clearing::max_clearing_iterative(
            &net,
            c.view(),
            clearing::ITER_TOL,
            clearing::default_max_iter(&net),
        )?,
        MethodArg::IterMin => clearing::min_clearing_iterative(
            &net,
            c.view(),
            clearing::ITER_TOL,
            clearing::default_max_iter(&net),
        )?,
    };
    let fixed_point_residual = clearing::fixed_point_residual(&net, c.view(), &result.payments);
    to_payload(ClearPayload { delta, fixed_point_residual, result })
}

fn run_margin(text: &str, norm: NormKind) -> Result<Output, CliError> {
    let net = load_network(text)?;
    let report = resilience::default_margin(&net, norm)?;
    let price_norm = norm.vector_norm(net.nominal_prices());
    let epsilon_star_relative = report.epsilon_star / price_norm;
    to_payload(MarginPayload { report, epsilon_star_relative, price_norm })
}

fn run_insolvency_margin(text: &str, norm: NormKind) -> Result<Output, CliError> {
    let net = load_network(text)?;
    let epsilon_ub = resilience::insolvency_margin(&net, norm)?;
    let price_norm = norm.vector_norm(net.nominal_prices());
    to_payload(InsolvencyPayload {
        norm: norm.name(),
        epsilon_ub,
        epsilon_ub_relative: epsilon_ub / price_norm,
        price_norm,
    })
}

fn run_worst_case(
    text: &str,
    norm: NormKind,
    epsilon: f64,
    check_uniqueness: bool,
) -> Result<Output, CliError> {
    let net = load_network(text)?;
    let report = worstcase::worst_case_loss(&net, norm, epsilon)?;
    let uniqueness = if check_uniqueness {
        Some(worstcase::uniqueness_check(&net, epsilon, norm)?)
    } else {
        None
    };
    to_payload(WorstCasePayload { report, uniqueness })
}

#[allow(clippy::too_many_arguments)]
fn run_sweep(
    text: &str,
    norm: NormKind,
    grid: usize,
    prefix: usize,
    runs: usize,
    seed: u64,
    out: Option<PathBuf>,
    format: FormatArg,
) -> Result<Output, CliError> {
    let net = load_network(text)?;
    let config = SweepConfig { grid_points: grid, prefix_points: prefix, runs, seed };
    let curve = experiments::loss_curve(&net, norm, &config)?;
    let csv = experiments::to_csv(&curve);
    let csv_path = match out {
        Some(path) => {
            fs::write(&path, &csv).map_err(|e| {
                CliError::new(
                    ErrorKind::Internal,
                    "output-write-failed",
                    format!("cannot write {}: {e}", path.display()),
                )
            })?;
            Some(path.display().to_string())
        }
        None => None,
    };
    match format {
        FormatArg::Csv => Ok(Output::Raw(csv)),
        FormatArg::Json => to_payload(SweepPayload {
            grid_points: grid,
            prefix_points: prefix,
            csv_path,
            curve,
        }),
    }
}

fn dispatch(command: &Command, text: &str) -> Result<Output, CliError> {
    match command {
        Command::Validate { allow_boundary, .. } => run_validate(text, *allow_boundary),
        Command::Clear { delta, method, .. } => run_clear(text, delta.clone(), *method),
        Command::Margin { norm, .. } => run_margin(text, (*norm).into()),
        Command::InsolvencyMargin { norm, .. } => run_insolvency_margin(text, (*norm).into()),
        Command::WorstCase { norm, epsilon, check_uniqueness, .. } => {
            run_worst_case(text, (*norm).into(), *epsilon, *check_uniqueness)
        }
        Command::Sweep { norm, grid, prefix, runs, seed, out, format, .. } => run_sweep(
            text,
            (*norm).into(),
            *grid,
            *prefix,
            *runs,
            *seed,
            out.clone(),
            *format,
        ),
    }
}

/// Cap rayon's global pool from `CLEARNET_THREADS` (0 or unset = automatic).
fn configure_threads() {
    if let Ok(raw) = std::env::var("CLEARNET_THREADS") {
        if let Ok(threads) = raw.trim().parse::<usize>() {
            if threads > 0 {
                let _ = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global();
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    configure_threads();
    let start = Instant::now();
    let version = env!("CARGO_PKG_VERSION");
    let command_name = cli.command.name();

    let file_text = fs::read(cli.command.file());
    let (digest, outcome) = match file_text {
        Ok(bytes) => {
            let digest = format!("sha256:{:x}", Sha256::digest(&bytes));
            let text = String::from_utf8_lossy(&bytes).into_owned();
            (Some(digest), dispatch(&cli.command, &text))
        }
        Err(e) => (
            None,
            Err(CliError::new(
                ErrorKind::Validation,
                "unreadable-input",
                format!("cannot read {}: {e}", cli.command.file().display()),
            )),
        ),
    };
    let duration_seconds = start.elapsed().as_secs_f64();

    match outcome {
        Ok(Output::Raw(body)) => {
            print!("{body}");
            ExitCode::SUCCESS
        }
        Ok(Output::Payload(payload)) => {
            let report = Report {
                command: command_name,
                input_digest: digest.as_deref().unwrap_or(""),
                version,
                duration_seconds,
                payload,
            };
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            ExitCode::SUCCESS
        }
        Err(err) => {
            let report = ErrorReport {
                command: command_name,
                input_digest: digest.as_deref(),
                version,
                duration_seconds,
                error: ErrorBody {
                    kind: err.kind.name(),
                    detail: err.detail,
                    message: &err.message,
                },
            };
            println!("{}", serde_json::to_string(&report).expect("report serializes"));
            ExitCode::from(err.kind.exit_code())
        }
    }
}
