use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Debug, Parser)]
#[command(name = "wbslope", version, about = "Low-SNR wideband slope of Gaussian interference channels")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimum energy per bit and the no-interference, TDMA and TIN slopes.
    Slope {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Optimize the one-dimensional signaling phases.
    Align {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Outer bound on the slope, with its membership status.
    Bound {
        #[command(flatten)]
        channel: ChannelArgs,
        #[command(flatten)]
        search: SearchArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-receiver PSD certificates of the side-information covariances.
    Membership {
        #[command(flatten)]
        channel: ChannelArgs,
        /// Relative eigenvalue tolerance [default: 1e-10]
        #[arg(long)]
        tol: Option<f64>,
        /// Per-user power at which the certificates are evaluated.
        #[arg(long, default_value_t = 0.0)]
        power: f64,
        /// Upper end of the bracket searched for the largest admissible power.
        #[arg(long, default_value_t = 10.0)]
        p_hi: f64,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Per-realization slopes over random channels (CSV by default).
    Montecarlo {
        #[command(flatten)]
        experiment: ExperimentArgs,
        /// Also compute the outer bound and membership of every realization.
        #[arg(long)]
        with_bound: bool,
        #[command(flatten)]
        output: OutputArgs,
    },
    /// Median alignment slope per cross gain, with the TIN and TDMA slopes.
    Sweep {
        #[command(flatten)]
        experiment: ExperimentArgs,
        #[command(flatten)]
        output: OutputArgs,
    },
}

#[derive(Debug, Args)]
#[group(required = true, multiple = false)]
pub struct ChannelArgs {
    /// Unit direct gains and every cross gain equal to a, zero phases.
    #[arg(long, num_args = 2, value_names = ["k=<int>", "a=<real>"])]
    pub symmetric: Option<Vec<String>>,
    /// Channel document to load.
    #[arg(long, value_name = "PATH")]
    pub channel: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct SearchArgs {
    /// Seed of the random restarts.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Number of starts, the first one deterministic.
    #[arg(long, default_value_t = 32)]
    pub restarts: usize,
    /// Convergence tolerance [default: 1e-8 for align, 1e-9 for bound]
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Args)]
pub struct ExperimentArgs {
    /// Settings as key=value (keys: k, a, samples, seed, restarts, jobs, tol).
    #[arg(value_name = "KEY=VALUE")]
    pub settings: Vec<String>,
    /// Number of users [default: 10]
    #[arg(long)]
    pub k: Option<usize>,
    /// Comma-separated cross gains [default: 0.1,0.5,0.9]
    #[arg(long, value_name = "LIST")]
    pub a: Option<String>,
    /// Realizations per cross gain [default: 1000]
    #[arg(long)]
    pub samples: Option<usize>,
    /// Master seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Alignment starts per realization [default: 32]
    #[arg(long)]
    pub restarts: Option<usize>,
    /// Alignment gradient tolerance [default: 1e-8]
    #[arg(long)]
    pub tol: Option<f64>,
    /// Worker threads, 0 for one per core [default: 0]
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct OutputArgs {
    /// Write to this file instead of standard output.
    #[arg(long, value_name = "PATH")]
    pub out: Option<PathBuf>,
    /// Output format [default: text, csv for montecarlo and sweep]
    #[arg(long, value_enum)]
    pub format: Option<Format>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Csv,
    Text,
}
