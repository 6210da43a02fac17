//! `pushpull`: analysis, optimization, design guidelines, sweeps and
//! simulation for pull (query) and push (Framed-ALOHA) traffic sharing one
//! slotted frame.
//!
//! Exit codes: 0 success, 2 usage or config error, 3 infeasible design
//! point, 4 validation flags raised under `--strict`.

mod commands;
mod config;
mod output;

use std::ffi::OsString;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::config::FrameArgs;
use crate::output::OutputArgs;

#[derive(Parser, Debug)]
#[command(name = "pushpull", version, about = "Pull/push frame-sharing model: analysis, design and simulation")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Args, Debug, Clone)]
pub struct LoadArgs {
    /// Query arrival rate [queries/s].
    #[arg(long, default_value_t = 0.0)]
    pub lambda_q: f64,
    /// Push packet arrival rate [packets/s].
    #[arg(long, default_value_t = 0.0)]
    pub lambda_p: f64,
    /// Query weight of the combined objective (push weight is 1 - w_q).
    /// Defaults to lambda_q / (lambda_q + lambda_p).
    #[arg(long)]
    pub w_q: Option<f64>,
}

#[derive(Args, Debug, Clone)]
pub struct SimArgs {
    /// Measured frames per replication.
    #[arg(long, default_value_t = 100_000)]
    pub frames: u64,
    /// Base seed; falls back to $PUSHPULL_SEED, then 1.
    #[arg(long, env = config::SEED_ENV)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub replications: u32,
    #[arg(long, default_value_t = 1)]
    pub warmup_frames: u64,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Evaluate every analytic metric at one design point.
    Analyze {
        #[command(flatten)]
        frame: FrameArgs,
        #[command(flatten)]
        load: LoadArgs,
        /// Query services reserved per frame.
        #[arg(long)]
        q: u32,
    },
    /// Find the q maximizing the weighted success probability.
    Optimize {
        #[command(flatten)]
        frame: FrameArgs,
        #[command(flatten)]
        load: LoadArgs,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Maximum supportable rates per q at one or more success targets.
    Guidelines {
        #[command(flatten)]
        frame: FrameArgs,
        /// Success target in (0, 1); repeat or comma-separate for several.
        #[arg(long = "p-th", required = true, value_delimiter = ',')]
        p_th: Vec<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Weighted success versus push rate at fixed lambda_q / lambda_p ratios.
    Sweep {
        #[command(flatten)]
        frame: FrameArgs,
        #[arg(long, required = true, value_delimiter = ',')]
        q_list: Vec<u32>,
        /// lambda_q / lambda_p ratios.
        #[arg(long, required = true, value_delimiter = ',')]
        ratio_list: Vec<f64>,
        /// MIN:MAX:STEPS push rates, endpoints included.
        #[arg(long, required = true)]
        lambda_p_range: String,
        /// Report where each pair of q curves crosses.
        #[arg(long)]
        crossovers: bool,
        /// Upper push rate for the crossover search; defaults to the rate
        /// giving three packets per access slot at the smaller q.
        #[arg(long)]
        ceiling: Option<f64>,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Monte Carlo estimate of the metrics at one design point.
    Simulate {
        #[command(flatten)]
        frame: FrameArgs,
        #[command(flatten)]
        load: LoadArgs,
        #[arg(long)]
        q: u32,
        #[command(flatten)]
        sim: SimArgs,
    },
    /// Compare simulation with the analytic model over a grid.
    Validate {
        #[command(flatten)]
        frame: FrameArgs,
        #[arg(long, value_delimiter = ',', default_value = "2,10,19")]
        q_list: Vec<u32>,
        #[arg(long, value_delimiter = ',', default_value = "10,100,400")]
        lambda_q_list: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "100,500,1500")]
        lambda_p_list: Vec<f64>,
        #[command(flatten)]
        sim: SimArgs,
        /// Exit with code 4 when any point is flagged.
        #[arg(long)]
        strict: bool,
        #[command(flatten)]
        out: OutputArgs,
    },
    /// Re-run the command recorded in a manifest.
    Replay {
        /// A manifest JSON file, or a command's JSON output containing one.
        manifest: std::path::PathBuf,
    },
}

fn main() -> ExitCode {
    let argv: Vec<OsString> = std::env::args_os().collect();
    let cli = Cli::parse_from(&argv);
    let args: Vec<String> = argv.iter().skip(1).map(|a| a.to_string_lossy().into_owned()).collect();
    match commands::run(cli.command, &args, &commands::Overrides::default()) {
        Ok(code) => ExitCode::from(code),
        Err(failure) => {
            eprintln!("error: {:#}", failure.error);
            ExitCode::from(failure.code)
        }
    }
}
