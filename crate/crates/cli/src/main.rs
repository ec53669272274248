//! `twotier`: rates, simulations, bounds, gap sweeps and region comparisons
//! for two-layer coded caching networks.
//!
//! Exit codes: 0 success, 1 invalid arguments or parameters, 2 a violated
//! invariant (decode failure, failed order-optimality check, failed acceptance
//! criterion).

mod check;
mod commands;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::output::{Emit, Format};

#[derive(Debug, Parser)]
#[command(name = "twotier", version, about = "Coded caching in two-layer server/helper/user networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Output format.
    #[arg(long, global = true, value_enum, default_value_t = Format::Json)]
    format: Format,

    /// Write output to this file instead of stdout.
    #[arg(long, short, global = true)]
    output: Option<PathBuf>,

    /// Worker threads for grid evaluations (default: all cores).
    #[arg(long, global = true, env = "TWOTIER_THREADS")]
    threads: Option<usize>,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct Topology {
    /// Number of files N.
    #[arg(long)]
    pub n: usize,
    /// Number of helpers K1.
    #[arg(long)]
    pub k1: usize,
    /// Users per helper K2.
    #[arg(long)]
    pub k2: usize,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct Memories {
    /// Helper memory M1, in files.
    #[arg(long)]
    pub m1: f64,
    /// User memory M2, in files.
    #[arg(long)]
    pub m2: f64,
}

#[derive(Debug, Args, Clone, Copy)]
pub struct ShareArgs {
    /// Fraction of every file served by the S&C subsystem.
    #[arg(long)]
    pub alpha: Option<f64>,
    /// Fraction of user memory given to the S&C subsystem.
    #[arg(long)]
    pub beta: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SchemeArg {
    Sc,
    A,
    B,
    Hybrid,
    Generalized,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RegimeArg {
    I,
    Ii,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AxisArg {
    Alpha,
    Beta,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Closed-form rates of one scheme.
    Rates {
        #[command(flatten)]
        topology: Topology,
        #[command(flatten)]
        memories: Memories,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[command(flatten)]
        share: ShareArgs,
    },
    /// Place, deliver and decode at bit level; compare with the closed forms.
    Simulate {
        #[command(flatten)]
        topology: Topology,
        #[command(flatten)]
        memories: Memories,
        #[arg(long, value_enum)]
        scheme: SchemeArg,
        #[command(flatten)]
        share: ShareArgs,
        /// Bits per file F.
        #[arg(long)]
        file_bits: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// `uniform-random`, or a file of 1-based demands (one per user, in user order).
        #[arg(long, default_value = "uniform-random")]
        demands: String,
        /// Also write the per-link transcripts to this file.
        #[arg(long)]
        dump_transcript: Option<PathBuf>,
        /// Include payload bits in the transcript dump.
        #[arg(long, requires = "dump_transcript")]
        with_payload: bool,
    },
    /// Lower bounds, envelope, chosen tuple and case label at one point.
    Bounds {
        #[command(flatten)]
        topology: Topology,
        #[command(flatten)]
        memories: Memories,
    },
    /// Order-optimality checks over a grid of memories.
    GapSweep {
        #[command(flatten)]
        topology: Topology,
        /// Grid points per memory axis.
        #[arg(long, default_value_t = 41)]
        grid: usize,
        /// Keep only points of this regime.
        #[arg(long, value_enum)]
        regime: Option<RegimeArg>,
    },
    /// Achievable-region frontiers over the memory-sharing grid.
    Region {
        #[command(flatten)]
        topology: Topology,
        #[command(flatten)]
        memories: Memories,
        /// Grid points per share axis.
        #[arg(long, default_value_t = 101)]
        grid: usize,
        #[arg(long, value_enum, default_value_t = SchemeArg::Hybrid)]
        scheme: SchemeArg,
        /// Compute both frontiers and test dominance both ways.
        #[arg(long, conflicts_with = "fig3")]
        compare: bool,
        /// Vary this factor over 0.2..0.9 and tabulate both schemes.
        #[arg(long, value_enum, requires = "fixed")]
        fig3: Option<AxisArg>,
        /// Value of the other factor in `--fig3` mode.
        #[arg(long)]
        fixed: Option<f64>,
    },
    /// Run every acceptance criterion at desk scale.
    CheckAll,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: cannot set up {threads} threads: {e}");
            return ExitCode::from(1);
        }
    }
    let emit = Emit { format: cli.format, output: cli.output.clone() };
    match commands::run(cli.command, &emit) {
        Ok(None) => ExitCode::SUCCESS,
        Ok(Some(violation)) => {
            eprintln!("invariant violated: {violation}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}
