//! `dsieve`: simulate, fit, forecast, benchmark and smooth functional time series.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dsieve::basis::{Family, WaveletForm};
use dsieve::dgp::{A1Band, DgpCase};
use dsieve::fdata::CpvMode;
use dsieve::tvvar::TimeFamily;

/// Exit status for usage and input errors.
pub const EXIT_USAGE: u8 = 2;
/// Exit status for numerical failures.
pub const EXIT_NUMERIC: u8 = 1;

#[derive(Parser, Debug)]
#[command(name = "dsieve", version, about = "Double-sieve forecasting of functional time series")]
struct Cli {
    /// Log verbosity (error, warn, info, debug, trace).
    #[arg(long, global = true, default_value = "warn")]
    log_level: String,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Simulate one path of a benchmark process and write its curves.
    Simulate(SimulateArgs),
    /// Fit the double-sieve model to a curve CSV and write a model file.
    Fit(FitArgs),
    /// Forecast the curve following a curve CSV with a saved model.
    Forecast(ForecastArgs),
    /// Run a Monte Carlo comparison of forecasting methods.
    Bench(BenchArgs),
    /// Smooth raw discrete observations onto a regular grid.
    Smooth(SmoothArgs),
}

#[derive(Args, Debug)]
pub struct SimulateArgs {
    /// Process: ma1_stat, ar2_stat, bl_stat, bekk_stat, ma1_ls, tvarma, tvtar.
    #[arg(long)]
    pub case: DgpCase,
    /// Dependence parameter of the MA processes.
    #[arg(long, default_value_t = 0.5)]
    pub a: f64,
    /// Number of observed curves; n + 1 curves are written, the last one held out.
    #[arg(long)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Score components of the MA processes.
    #[arg(long, default_value_t = dsieve::dgp::DEFAULT_DIM_K)]
    pub dim_k: usize,
    /// Off-diagonal pattern of A1: adjacent or dense.
    #[arg(long, default_value = "adjacent")]
    pub a1_band: A1Band,
    /// Curve CSV (header of grid points, one curve per row).
    #[arg(long)]
    pub out: PathBuf,
    /// Optional score CSV: r_1..r_{n+1} and the oracle conditional mean.
    #[arg(long)]
    pub truth: Option<PathBuf>,
}

/// Tunables of the sieve fit shared by `fit` and `bench`.
#[derive(Args, Debug, Clone, Default)]
pub struct SieveArgs {
    /// Spatial basis family: legendre, fourier or daubechies [default: legendre].
    #[arg(long)]
    pub basis: Option<Family>,
    /// Number of raw spatial coefficients K [default: 50].
    #[arg(long)]
    pub k: Option<usize>,
    /// Daubechies order N [default: 9].
    #[arg(long)]
    pub wavelet_order: Option<usize>,
    /// Daubechies form: father or mixed [default: father].
    #[arg(long)]
    pub wavelet_form: Option<WaveletForm>,
    /// Coarse level J0 of the mixed wavelet form [default: 0].
    #[arg(long)]
    pub coarse_level: Option<u32>,
    /// CPV threshold in (0, 1] [default: 0.95].
    #[arg(long)]
    pub cpv: Option<f64>,
    /// CPV weighting: basis or eigen [default: basis].
    #[arg(long)]
    pub cpv_mode: Option<String>,
    /// Largest lag order tried by AIC [default: 5].
    #[arg(long)]
    pub b_max: Option<usize>,
    /// Largest temporal sieve size tried by AIC [default: 3].
    #[arg(long)]
    pub c_max: Option<usize>,
    /// Temporal basis: legendre or fourier [default: legendre].
    #[arg(long)]
    pub time_basis: Option<TimeFamily>,
}

#[derive(Args, Debug)]
pub struct FitArgs {
    /// Curve CSV; the header row gives the grid.
    #[arg(long)]
    pub curves: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    /// Also write the report here (it is always printed).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[command(flatten)]
    pub sieve: SieveArgs,
    /// Run the (b, c) search sequentially.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct ForecastArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Curve CSV on the model grid; the forecast follows its last row.
    #[arg(long)]
    pub curves: PathBuf,
    /// Output CSV: grid header and the forecast curve.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Clone, Default)]
pub struct BenchArgs {
    /// key = value file; any flag below overrides the matching key.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Process (required here or in the config file).
    #[arg(long)]
    pub case: Option<DgpCase>,
    /// Dependence parameter [default: 0.5].
    #[arg(long)]
    pub a: Option<f64>,
    /// Observed curves per replication (required).
    #[arg(long)]
    pub n: Option<usize>,
    /// Replications [default: 200].
    #[arg(long)]
    pub reps: Option<usize>,
    /// Master seed [default: 0].
    #[arg(long)]
    pub seed: Option<u64>,
    /// Comma-separated methods from sieve, naive, stat_var [default: all].
    #[arg(long)]
    pub methods: Option<String>,
    /// Equally spaced scoring points N [default: 101].
    #[arg(long)]
    pub eval_points: Option<usize>,
    /// Score components of the MA processes [default: 50].
    #[arg(long)]
    pub dim_k: Option<usize>,
    /// Off-diagonal pattern of A1 [default: adjacent].
    #[arg(long)]
    pub a1_band: Option<A1Band>,
    /// Oracle MSE for RR: a number or `analytic` [default: none].
    #[arg(long)]
    pub mse_true: Option<String>,
    #[command(flatten)]
    pub sieve: SieveArgs,
    /// Results CSV, one row per method [default: results.csv].
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Per-replication CSV [default: not written].
    #[arg(long)]
    pub reps_out: Option<PathBuf>,
    /// Run replications sequentially.
    #[arg(long)]
    pub sequential: bool,
}

#[derive(Args, Debug)]
pub struct SmoothArgs {
    /// Raw CSV: header of observation points, one record per row.
    #[arg(long)]
    pub raw: PathBuf,
    /// Output curve CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// Bandwidth: a positive number or `auto` (leave-one-out CV).
    #[arg(long, default_value = "auto")]
    pub bandwidth: String,
    /// Target grid size (odd sizes give an exact Simpson rule).
    #[arg(long, default_value_t = 101)]
    pub grid_size: usize,
    /// Take logarithms of the raw values first.
    #[arg(long)]
    pub log: bool,
    /// Rescale the observation points to [0, 1].
    #[arg(long)]
    pub rescale: bool,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(EXIT_USAGE)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    env_logger::Builder::new()
        .parse_filters(&cli.log_level)
        .format_timestamp(None)
        .init();
    let outcome = match cli.command {
        Command::Simulate(a) => commands::simulate(&a),
        Command::Fit(a) => commands::fit(&a),
        Command::Forecast(a) => commands::forecast(&a),
        Command::Bench(a) => commands::bench(&a),
        Command::Smooth(a) => commands::smooth(&a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", e.message);
            if let Some(hint) = &e.hint {
                eprintln!("hint: {hint}");
            }
            ExitCode::from(e.code)
        }
    }
}

pub fn parse_cpv_mode(s: &str) -> Result<CpvMode, String> {
    match s.to_ascii_lowercase().as_str() {
        "basis" => Ok(CpvMode::BasisOrder),
        "eigen" => Ok(CpvMode::Eigen),
        other => Err(format!("unknown CPV mode '{other}' (expected basis or eigen)")),
    }
}
