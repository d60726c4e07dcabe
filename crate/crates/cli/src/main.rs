//! `bufsched`: delay-power tradeoff curves for a buffered transmitter.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

use commands::Failure;

#[derive(Parser)]
#[command(name = "bufsched", version, about, propagate_version = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Trace the optimal tradeoff curve and the full deterministic point cloud.
    Pareto(ParetoArgs),
    /// Minimize delay under an average power budget.
    Lp(LpArgs),
    /// Run the cross-validation battery and print a pass/fail table.
    Verify(VerifyArgs),
    /// Monte-Carlo run of one policy.
    Simulate(SimulateArgs),
}

/// Model parameters. Flags override values read from `--config`.
#[derive(Args, Debug, Clone)]
pub struct ParamArgs {
    /// Key-value file with `alpha`, `A`, `M`, `Q` and `power` entries.
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Arrival probability per slot.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Bits per arriving packet.
    #[arg(long = "A", value_name = "A")]
    pub packet_size: Option<usize>,
    /// Most bits sent in one slot.
    #[arg(long = "M", value_name = "M")]
    pub max_transmit: Option<usize>,
    /// Buffer size in bits.
    #[arg(long = "Q", value_name = "Q")]
    pub buffer: Option<usize>,
    /// Comma-separated power for sending 0..=M bits, starting with 0.
    #[arg(long, value_name = "P0,P1,..")]
    pub power: Option<String>,
}

#[derive(Args)]
pub struct ParetoArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Output directory.
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
    /// Skip the deterministic point cloud.
    #[arg(long)]
    pub no_cloud: bool,
    /// Largest number of deterministic policies to enumerate.
    #[arg(long, default_value_t = 10_000_000)]
    pub cap: u128,
}

#[derive(Args)]
#[group(id = "budget", required = true, multiple = false, args = ["pth", "sweep"])]
pub struct LpArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Single power budget (`inf` for none).
    #[arg(long, allow_negative_numbers = true)]
    pub pth: Option<f64>,
    /// Evenly spaced budgets `lo:hi:n`.
    #[arg(long, value_name = "LO:HI:N")]
    pub sweep: Option<String>,
    /// Where the sweep CSV goes.
    #[arg(long, default_value = "lp_sweep.csv")]
    pub out: PathBuf,
    /// Also write the single-budget program in MPS format.
    #[arg(long, value_name = "FILE", requires = "pth")]
    pub mps: Option<PathBuf>,
}

#[derive(Args)]
pub struct VerifyArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Random policies or pairs drawn per randomized check.
    #[arg(long, default_value_t = 5)]
    pub trials: usize,
    /// Override the collinearity and slope tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// Slots for the simulation check.
    #[arg(long, default_value_t = 1_000_000)]
    pub slots: u64,
    /// Largest number of deterministic policies to enumerate.
    #[arg(long, default_value_t = 1_000_000)]
    pub cap: u128,
}

#[derive(Args)]
#[group(id = "which", multiple = false, args = ["policy", "thresholds"])]
pub struct SimulateArgs {
    #[command(flatten)]
    pub params: ParamArgs,
    /// Policy matrix CSV (`k,m0,m1,..` rows). Defaults to sending everything.
    #[arg(long, value_name = "FILE")]
    pub policy: Option<PathBuf>,
    /// Deterministic threshold policy `k0,k1,..,kM`.
    #[arg(long, value_name = "K0,..,KM")]
    pub thresholds: Option<String>,
    #[arg(long, default_value_t = 1_000_000)]
    pub slots: u64,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Write the first slots (up to 100000) as CSV.
    #[arg(long, value_name = "FILE")]
    pub trace: Option<PathBuf>,
}

fn init_threads() -> Result<(), Failure> {
    let Ok(value) = std::env::var("DPS_THREADS") else {
        return Ok(());
    };
    let n: usize = value
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| {
            Failure::usage(format!(
                "DPS_THREADS must be a positive integer, got {value:?}"
            ))
        })?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Failure::runtime(e.to_string()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = init_threads().and_then(|()| match cli.command {
        Command::Pareto(a) => commands::pareto(&a),
        Command::Lp(a) => commands::lp(&a),
        Command::Verify(a) => commands::verify(&a),
        Command::Simulate(a) => commands::simulate(&a),
    });
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            if !f.message.is_empty() {
                eprintln!("error: {}", f.message);
            }
            ExitCode::from(f.code)
        }
    }
}
