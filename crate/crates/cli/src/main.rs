use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use tsfed_cli::{
    cmd_account, cmd_audit, cmd_calibrate, cmd_evaluate, cmd_gen_data, cmd_train, AccountArgs, CalibrateArgs, CliError,
    Experiment, RunSummary, Synthesis,
};
use tsfed_core::accountant::CurveKind;

#[derive(Parser)]
#[command(name = "tsfed", version, about = "Federated time-series GAN experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Curve {
    Generator,
    Discriminator,
}

impl From<Curve> for CurveKind {
    fn from(c: Curve) -> Self {
        match c {
            Curve::Generator => CurveKind::Generator,
            Curve::Discriminator => CurveKind::Discriminator,
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Write the configured dataset as CSV with a metadata sidecar.
    GenData { config: PathBuf },
    /// Train the federation and store checkpoints, history and accounting.
    Train { config: PathBuf },
    /// Score a generator checkpoint against the configured dataset.
    Evaluate {
        config: PathBuf,
        /// Generator bank to sample; defaults to the run's best checkpoint.
        #[arg(long, conflicts_with = "identity")]
        checkpoint: Option<PathBuf>,
        /// Score the real data against itself.
        #[arg(long)]
        identity: bool,
    },
    /// Run the membership-inference audit.
    Audit { config: PathBuf },
    /// Rényi-DP accounting of a subsampled Gaussian training run (CSV on stdout).
    Account {
        #[arg(long)]
        sigma: f64,
        #[arg(long)]
        gamma: f64,
        #[arg(long)]
        steps: u64,
        #[arg(long)]
        delta: f64,
        /// Comma-separated integer orders ≥ 2.
        #[arg(long, value_delimiter = ',')]
        orders: Option<Vec<u32>>,
        /// Only this curve; both otherwise.
        #[arg(long)]
        curve: Option<Curve>,
    },
    /// Calibrate σ (or the iteration count) to a budget (JSON on stdout).
    Calibrate {
        /// Take the budget, sampling rate and length from an experiment.
        #[arg(conflicts_with_all = ["epsilon", "delta", "gamma", "steps", "sigma", "max_steps"])]
        config: Option<PathBuf>,
        #[arg(long, required_unless_present = "config")]
        epsilon: Option<f64>,
        #[arg(long, required_unless_present = "config")]
        delta: Option<f64>,
        #[arg(long, required_unless_present = "config")]
        gamma: Option<f64>,
        #[arg(long)]
        steps: Option<u64>,
        /// Fix σ and search for the largest admissible iteration count.
        #[arg(long, requires = "max_steps")]
        sigma: Option<f64>,
        #[arg(long)]
        max_steps: Option<u64>,
        #[arg(long, default_value_t = 0.01)]
        sigma_min: f64,
        #[arg(long, default_value_t = 1000.0)]
        sigma_max: f64,
        #[arg(long, value_enum, default_value = "generator")]
        curve: Curve,
    },
}

fn report(summary: RunSummary) {
    println!("{}", summary.dir.display());
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::GenData { config } => report(cmd_gen_data(&Experiment::load(&config)?)?),
        Command::Train { config } => report(cmd_train(&Experiment::load(&config)?)?),
        Command::Evaluate { config, checkpoint, identity } => {
            let synthesis = if identity { Synthesis::Identity } else { Synthesis::Checkpoint(checkpoint) };
            report(cmd_evaluate(&Experiment::load(&config)?, &synthesis)?)
        }
        Command::Audit { config } => report(cmd_audit(&Experiment::load(&config)?)?),
        Command::Account { sigma, gamma, steps, delta, orders, curve } => {
            let args = AccountArgs { sigma, gamma, steps, delta, orders, curve: curve.map(Into::into) };
            print!("{}", cmd_account(&args)?);
        }
        Command::Calibrate { config, epsilon, delta, gamma, steps, sigma, max_steps, sigma_min, sigma_max, curve } => {
            let args = match config {
                Some(path) => CalibrateArgs::from_experiment(&Experiment::load(&path)?)?,
                None => CalibrateArgs {
                    epsilon: epsilon.expect("required by clap"),
                    delta: delta.expect("required by clap"),
                    gamma: gamma.expect("required by clap"),
                    steps,
                    sigma,
                    max_steps,
                    sigma_range: (sigma_min, sigma_max),
                    curve: curve.into(),
                },
            };
            let calibration = cmd_calibrate(&args)?;
            println!("{}", serde_json::to_string_pretty(&calibration).expect("calibration serializes"));
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("tsfed: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
