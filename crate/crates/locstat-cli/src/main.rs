//! `locstat`: simulate, fit, estimate spectra and test stationarity from the
//! command line. Results go to plain CSV and JSON files under `--out`.

mod commands;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

/// 0 success, 2 usage or configuration, 3 non-convergence, 4 data or window errors.
pub const EXIT_USAGE: u8 = 2;
pub const EXIT_NOT_CONVERGED: u8 = 3;
pub const EXIT_DATA: u8 = 4;

#[derive(Debug, Parser)]
#[command(name = "locstat", version, about = "Locally stationary time series toolkit")]
struct Cli {
    /// Cap on worker threads.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a realization from a model JSON file.
    Simulate(SimulateArgs),
    /// Fit a model or local parameters to a data CSV.
    Fit(FitArgs),
    /// Smoothed time-varying spectrum, true spectrum, or their difference.
    Spectrum(SpectrumArgs),
    /// Sup-type test of constancy of the spectrum in time.
    TestStationarity(StationarityArgs),
    /// Matrix approximation gap and log-determinant check over sample sizes.
    MatrixCheck(MatrixArgs),
}

#[derive(Debug, Args)]
pub struct Output {
    /// Output directory (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sample size; defaults to the model file's `T`.
    #[arg(long = "T")]
    pub t_len: Option<i64>,
    /// Defaults to the model file's `seed`, then 0.
    #[arg(long)]
    pub seed: Option<u64>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Method {
    LocalYw,
    LocalWhittle,
    BlockWhittle,
    Gw,
    Mle,
    LocalConditional,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, value_enum)]
    pub method: Method,
    /// AR order (largest order when scanning).
    #[arg(long, default_value_t = 1)]
    pub p: usize,
    /// Polynomial orders of the AR curves, comma separated (missing entries are 0).
    /// With `--scan`: the largest order of the first curve and of the others.
    #[arg(long, value_delimiter = ',')]
    pub orders: Vec<usize>,
    /// Segment length for local Whittle, local Yule-Walker and block Whittle.
    #[arg(long = "N")]
    pub n: Option<usize>,
    /// Segment shift for block Whittle.
    #[arg(long = "S")]
    pub s: Option<usize>,
    /// Kernel bandwidth for the kernel-weighted local methods.
    #[arg(long)]
    pub b: Option<f64>,
    #[arg(long, default_value = "canonical")]
    pub kernel: String,
    #[arg(long, default_value = "sine-squared")]
    pub taper: String,
    /// Number of `u` points for local fits and fitted curves.
    #[arg(long = "grid-u", default_value_t = 50)]
    pub grid_u: usize,
    /// Local polynomial degree for the conditional likelihood.
    #[arg(long, default_value_t = 0)]
    pub degree: usize,
    /// AIC scan over orders with block Whittle.
    #[arg(long)]
    pub scan: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct SpectrumArgs {
    /// Data CSV; omit for the true spectrum of `--model`.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Model whose spectrum is written alongside (and differenced against) the estimate.
    #[arg(long)]
    pub model: Option<PathBuf>,
    #[arg(long, default_value_t = 0.2)]
    pub bt: f64,
    #[arg(long, default_value_t = 0.3)]
    pub bf: f64,
    #[arg(long, default_value = "sine-squared")]
    pub taper: String,
    /// Frequency kernel.
    #[arg(long, default_value = "canonical")]
    pub kernel: String,
    #[arg(long = "grid-u", default_value_t = 50)]
    pub grid_u: usize,
    #[arg(long = "grid-l", default_value_t = 64)]
    pub grid_l: usize,
    /// Smooth the pre-periodogram instead of segment periodograms.
    #[arg(long)]
    pub pre_periodogram: bool,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct StationarityArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long = "grid-u", default_value_t = 50)]
    pub grid_u: usize,
    #[arg(long = "grid-l", default_value_t = 64)]
    pub grid_l: usize,
    /// Null replications for the critical values.
    #[arg(long, default_value_t = 500)]
    pub reps: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Also report the statistic on grids refined by these factors.
    #[arg(long, value_delimiter = ',')]
    pub refine: Vec<usize>,
    #[command(flatten)]
    pub output: Output,
}

#[derive(Debug, Args)]
pub struct MatrixArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Sample sizes, comma separated.
    #[arg(long = "T", value_delimiter = ',', default_values_t = [64usize, 128, 256])]
    pub t_grid: Vec<usize>,
    #[command(flatten)]
    pub output: Output,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(EXIT_USAGE);
        }
        locstat::mc::set_threads(n);
    }
    let outcome = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Fit(a) => commands::fit(a),
        Command::Spectrum(a) => commands::spectrum(a),
        Command::TestStationarity(a) => commands::test_stationarity(a),
        Command::MatrixCheck(a) => commands::matrix_check(a),
    };
    match outcome {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(commands::exit_code(&e))
        }
    }
}
