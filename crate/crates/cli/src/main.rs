//! `auctionfolio`: estimation, uniform confidence bands, counterfactuals,
//! the reserve-price-optimality test, Monte Carlo coverage experiments,
//! and CSV residualization for first-price auction bid data.
//!
//! Every subcommand is deterministic given input bytes, configuration and
//! seed. Errors exit with 1 (validation), 2 (I/O) or 3 (numerical) and
//! print a machine-readable JSON object on stderr.

mod commands;
mod input;

use std::process::ExitCode;

use auctionfolio_core::Error;
use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use auctionfolio_core::inference::{Approximation, Side, Studentization};
use auctionfolio_core::Kernel;

#[derive(Parser)]
#[command(
    name = "auctionfolio",
    version,
    about = "Quantile-based estimation and inference for first-price auction bids",
    propagate_version = true
)]
struct Cli {
    /// RNG seed for all simulation draws (env: AUCTIONFOLIO_SEED).
    #[arg(long, global = true, env = "AUCTIONFOLIO_SEED", default_value_t = 0)]
    seed: u64,
    /// Cap on the number of worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate Q_hat, q_hat and v_hat on the canonical grid.
    Estimate(EstimateArgs),
    /// Simulate a uniform confidence band for an estimation target.
    Bands(BandsArgs),
    /// Estimate a counterfactual curve over exclusion levels.
    Counterfactual(CounterfactualArgs),
    /// Test optimality of the observed reserve price (H0: sup Delta = 0).
    TestReserve(TestReserveArgs),
    /// Run a Monte Carlo coverage experiment and emit a Table-2-shaped CSV.
    Montecarlo(MontecarloArgs),
    /// Residualize log bids on auction covariates and write bid residuals.
    Residualize(ResidualizeArgs),
}

/// `auto` (rule of thumb) or an explicit value in (0, 1/2).
#[derive(Clone, Copy, Debug)]
pub(crate) enum BandwidthArg {
    Auto,
    Manual(f64),
}

impl std::str::FromStr for BandwidthArg {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s.eq_ignore_ascii_case("auto") {
            return Ok(BandwidthArg::Auto);
        }
        s.parse::<f64>()
            .map(BandwidthArg::Manual)
            .map_err(|_| format!("expected 'auto' or a number, got '{s}'"))
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub(crate) enum KernelArg {
    Epanechnikov,
    Triweight,
}

impl From<KernelArg> for Kernel {
    fn from(arg: KernelArg) -> Kernel {
        match arg {
            KernelArg::Epanechnikov => Kernel::Epanechnikov,
            KernelArg::Triweight => Kernel::Triweight,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub(crate) enum SideArg {
    TwoSided,
    Lower,
    Upper,
}

impl From<SideArg> for Side {
    fn from(arg: SideArg) -> Side {
        match arg {
            SideArg::TwoSided => Side::TwoSided,
            SideArg::Lower => Side::LowerOneSided,
            SideArg::Upper => Side::UpperOneSided,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub(crate) enum ApproximationArg {
    /// Recompute the statistic on uniform[0,1] pseudo-samples.
    Pseudo,
    /// Simulate the first-order approximating process directly.
    Linear,
}

impl From<ApproximationArg> for Approximation {
    fn from(arg: ApproximationArg) -> Approximation {
        match arg {
            ApproximationArg::Pseudo => Approximation::UniformPseudoBids,
            ApproximationArg::Linear => Approximation::LinearTerm,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub(crate) enum StudentizationArg {
    Qhat,
    Off,
}

impl From<StudentizationArg> for Studentization {
    fn from(arg: StudentizationArg) -> Studentization {
        match arg {
            StudentizationArg::Qhat => Studentization::ByQhat,
            StudentizationArg::Off => Studentization::Off,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub(crate) enum BandTarget {
    /// Bid quantile density q.
    Q,
    /// Value quantile function v.
    V,
    /// Expected bidder surplus (T-type).
    BidderSurplus,
    /// Expected revenue (T-type).
    Revenue,
    /// Expected total surplus (S-type).
    TotalSurplus,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub(crate) enum KindArg {
    BidderSurplus,
    Revenue,
    TotalSurplus,
    RevenueDelta,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub(crate) enum EstimatorArg {
    /// Order-statistic estimator, no bandwidth.
    S,
    /// Kernel plug-in estimator.
    T,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub(crate) enum ScopeArg {
    Pooled,
    PerSubsample,
}

/// Flags shared by every subcommand that reads bids and smooths them.
#[derive(Args)]
pub(crate) struct SmoothingArgs {
    /// Bandwidth: 'auto' for the rule of thumb, or a value in (0, 1/2).
    #[arg(long, default_value = "auto")]
    pub(crate) bandwidth: BandwidthArg,
    /// Smoothing kernel.
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    pub(crate) kernel: KernelArg,
    /// Declared number of potential bidders for plain bid inputs.
    #[arg(long, default_value_t = 2)]
    pub(crate) bidders: u32,
}

#[derive(Args)]
pub(crate) struct EstimateArgs {
    /// Input CSV: a `bid` column, an `auction_id,residual` file, or the
    /// full auction schema.
    #[arg(long)]
    pub(crate) input: std::path::PathBuf,
    /// Output JSON path.
    #[arg(long)]
    pub(crate) output: std::path::PathBuf,
    #[command(flatten)]
    pub(crate) smoothing: SmoothingArgs,
    /// Restrict exported grid points to [max(h,trim), 1 - max(h,trim)].
    #[arg(long)]
    pub(crate) trim: Option<f64>,
    /// Thin the exported grid to at most this many points.
    #[arg(long)]
    pub(crate) max_points: Option<usize>,
}

#[derive(Args)]
pub(crate) struct BandsArgs {
    #[arg(long)]
    pub(crate) input: std::path::PathBuf,
    #[arg(long)]
    pub(crate) output: std::path::PathBuf,
    /// Estimation target the band covers.
    #[arg(long, value_enum)]
    pub(crate) target: BandTarget,
    #[command(flatten)]
    pub(crate) smoothing: SmoothingArgs,
    /// Trimming parameter tau; evaluation on [max(h,tau), 1-max(h,tau)].
    /// Defaults to the bandwidth.
    #[arg(long)]
    pub(crate) trim: Option<f64>,
    /// Uniform coverage error rate.
    #[arg(long, default_value_t = 0.05)]
    pub(crate) alpha: f64,
    /// Number of critical-value simulation draws.
    #[arg(long, default_value_t = 1000)]
    pub(crate) n_sims: usize,
    #[arg(long, value_enum, default_value_t = SideArg::TwoSided)]
    pub(crate) side: SideArg,
    #[arg(long, value_enum, default_value_t = ApproximationArg::Pseudo)]
    pub(crate) approximation: ApproximationArg,
    #[arg(long, value_enum, default_value_t = StudentizationArg::Qhat)]
    pub(crate) studentization: StudentizationArg,
}

#[derive(Args)]
pub(crate) struct CounterfactualArgs {
    #[arg(long)]
    pub(crate) input: std::path::PathBuf,
    #[arg(long)]
    pub(crate) output: std::path::PathBuf,
    /// Counterfactual functional to estimate.
    #[arg(long, value_enum)]
    pub(crate) kind: KindArg,
    /// S-type (order statistics) or T-type (kernel plug-in) estimator.
    #[arg(long, value_enum, default_value_t = EstimatorArg::S)]
    pub(crate) estimator: EstimatorArg,
    #[command(flatten)]
    pub(crate) smoothing: SmoothingArgs,
    /// Thin the exported grid to at most this many points.
    #[arg(long)]
    pub(crate) max_points: Option<usize>,
}

#[derive(Args)]
pub(crate) struct TestReserveArgs {
    #[arg(long)]
    pub(crate) input: std::path::PathBuf,
    #[arg(long)]
    pub(crate) output: std::path::PathBuf,
    #[command(flatten)]
    pub(crate) smoothing: SmoothingArgs,
    #[arg(long, default_value_t = 0.05)]
    pub(crate) alpha: f64,
    #[arg(long, default_value_t = 1000)]
    pub(crate) n_sims: usize,
    /// Keep auctions with a bidder count in [lo, hi], as `lo,hi`.
    /// Only meaningful for full auction-schema inputs.
    #[arg(long, value_parser = parse_range)]
    pub(crate) bidder_range: Option<(u32, u32)>,
    /// Whether residual truncation is pooled or redone per subsample.
    #[arg(long, value_enum, default_value_t = ScopeArg::Pooled)]
    pub(crate) truncation_scope: ScopeArg,
}

#[derive(Args)]
pub(crate) struct MontecarloArgs {
    /// Output CSV path (Table-2-shaped).
    #[arg(long)]
    pub(crate) output: std::path::PathBuf,
    /// Optional JSON report with the full per-run configuration.
    #[arg(long)]
    pub(crate) json: Option<std::path::PathBuf>,
    /// Preset grid: 'desk' (n = 1000, 6 DGPs, 200 outer) or 'full'
    /// (3 sample sizes x 6 DGPs, 500/500; hours of work).
    #[arg(long, conflicts_with_all = ["dgp", "n", "trim"])]
    pub(crate) preset: Option<String>,
    /// DGP family: uniform, beta(a,b) or powerlaw(a).
    #[arg(long, required_unless_present = "preset")]
    pub(crate) dgp: Option<String>,
    /// Sample size per replication.
    #[arg(long, required_unless_present = "preset")]
    pub(crate) n: Option<usize>,
    /// Trimming parameter tau.
    #[arg(long, required_unless_present = "preset")]
    pub(crate) trim: Option<f64>,
    #[arg(long, default_value_t = 0.05)]
    pub(crate) alpha: f64,
    /// Outer Monte Carlo replications (defaults: 200 for desk, 500 otherwise).
    #[arg(long)]
    pub(crate) outer: Option<usize>,
    /// Inner simulation draws per critical value (default 500).
    #[arg(long)]
    pub(crate) inner: Option<usize>,
    #[arg(long, value_enum, default_value_t = KernelArg::Epanechnikov)]
    pub(crate) kernel: KernelArg,
    #[arg(long, value_enum, default_value_t = ApproximationArg::Pseudo)]
    pub(crate) approximation: ApproximationArg,
}

#[derive(Args)]
pub(crate) struct ResidualizeArgs {
    /// Input CSV with the full auction schema.
    #[arg(long)]
    pub(crate) input: std::path::PathBuf,
    /// Output CSV of kept `auction_id,residual` rows.
    #[arg(long)]
    pub(crate) output: std::path::PathBuf,
    /// Manifest JSON path (defaults to the output with a .manifest.json
    /// extension).
    #[arg(long)]
    pub(crate) manifest: Option<std::path::PathBuf>,
    /// Covariates to include: comma-separated subset of
    /// {year, location, log_adv_value, log_hhi}, or '1' for intercept only.
    #[arg(long, default_value = "year,location,log_adv_value,log_hhi")]
    pub(crate) formula: String,
}

fn parse_range(s: &str) -> Result<(u32, u32), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected 'lo,hi', got '{s}'"))?;
    let parse = |x: &str| {
        x.trim()
            .parse::<u32>()
            .map_err(|_| format!("invalid bidder count '{x}'"))
    };
    Ok((parse(lo)?, parse(hi)?))
}

fn error_kind(err: &Error) -> &'static str {
    if err.is_validation() {
        "validation"
    } else if err.is_io() {
        "io"
    } else {
        "numerical"
    }
}

fn report(err: &Error) -> ExitCode {
    let body = serde_json::json!({
        "error": { "kind": error_kind(err), "message": err.to_string() }
    });
    eprintln!("{body}");
    let code = if err.is_validation() {
        1u8
    } else if err.is_io() {
        2
    } else {
        3
    };
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) {
                print!("{err}");
                return ExitCode::SUCCESS;
            }
            // Usage problems are validation failures in the exit-code
            // taxonomy, not clap's default exit 2.
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };

    if let Some(threads) = cli.threads {
        if threads == 0 {
            return report(&Error::Config("--threads must be positive".into()));
        }
        // Outputs do not depend on the pool size; failure to configure an
        // already-initialized pool is harmless.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global();
    }

    let seed = cli.seed;
    let run = match cli.command {
        Command::Estimate(args) => commands::estimate(&args),
        Command::Bands(args) => commands::bands(&args, seed),
        Command::Counterfactual(args) => commands::counterfactual(&args),
        Command::TestReserve(args) => commands::test_reserve(&args, seed),
        Command::Montecarlo(args) => commands::montecarlo(&args, seed),
        Command::Residualize(args) => commands::residualize(&args),
    };
    match run {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => report(&err),
    }
}
