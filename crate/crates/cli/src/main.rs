mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use hriesz::selftest::Mutant;
use hriesz::Execution;

use crate::commands::Ctx;
use crate::config::RunConfig;
use crate::output::{CliResult, Failure, Sink};

#[derive(Parser)]
#[command(
    name = "hriesz",
    version,
    about = "Riesz transforms and self-similar sets in the Heisenberg group"
)]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Global {
    /// JSON run configuration (laid over the built-in defaults).
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; 1 runs everything sequentially.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Smaller sample counts and coarser measures.
    #[arg(long, global = true)]
    quick: bool,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Randomized invariant suites for the group law, kernel and transforms.
    Selftest {
        #[arg(long, hide = true, value_enum)]
        inject_mutant: Option<MutantArg>,
    },
    /// Build or verify the configured iterated function system.
    Ifs {
        #[command(subcommand)]
        action: IfsAction,
    },
    Measure {
        #[command(subcommand)]
        action: MeasureAction,
    },
    Riesz {
        #[command(subcommand)]
        action: RieszAction,
    },
    Tangent {
        #[command(subcommand)]
        action: TangentAction,
    },
    /// Mass outside cones around homogeneous subgroups.
    ConeDeficiency,
    /// Random check of the lower bound on the vertical coordinate near the cone axis.
    Horest,
}

#[derive(Subcommand)]
enum IfsAction {
    /// Write the cylinder measure CSV.
    Generate,
    /// Fixed point, invariant region and piece separation certificate.
    Verify,
}

#[derive(Subcommand)]
enum MeasureAction {
    /// Ball-mass ratios against r^a.
    AdReport,
}

#[derive(Subcommand)]
enum RieszAction {
    Transform,
    Divergence,
    SubgroupProbe,
}

#[derive(Subcommand)]
enum TangentAction {
    Blowup,
}

#[derive(Clone, Copy, ValueEnum)]
enum MutantArg {
    SignFlip,
    SymmetricA,
}

fn run(cli: Cli) -> CliResult<()> {
    let g = cli.global;
    let mut cfg = RunConfig::load(g.config.as_deref(), g.quick)?;
    if let Some(seed) = g.seed {
        cfg.seed = seed;
    }
    if let Some(t) = g.threads {
        cfg.thread_count = Some(t);
    }
    if let Some(out) = g.out {
        cfg.output_dir = out;
    }
    let threads = match cfg.thread_count {
        Some(0) => return Err(Failure::config("thread count must be positive")),
        Some(t) => t,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::runtime(e.to_string()))?;
    let exec = if threads == 1 {
        Execution::Sequential
    } else {
        Execution::Parallel
    };
    let ctx = Ctx {
        cfg: &cfg,
        exec,
        sink: Sink::new(&cfg, threads)?,
    };
    match cli.command {
        Command::Selftest { inject_mutant } => commands::selftest(
            &ctx,
            inject_mutant.map(|m| match m {
                MutantArg::SignFlip => Mutant::SignFlip,
                MutantArg::SymmetricA => Mutant::SymmetricA,
            }),
        ),
        Command::Ifs {
            action: IfsAction::Generate,
        } => commands::ifs_generate(&ctx),
        Command::Ifs {
            action: IfsAction::Verify,
        } => commands::ifs_verify(&ctx),
        Command::Measure {
            action: MeasureAction::AdReport,
        } => commands::ad_report(&ctx),
        Command::Riesz { action } => match action {
            RieszAction::Transform => commands::riesz_transform(&ctx),
            RieszAction::Divergence => commands::riesz_divergence(&ctx),
            RieszAction::SubgroupProbe => commands::riesz_subgroup_probe(&ctx),
        },
        Command::Tangent {
            action: TangentAction::Blowup,
        } => commands::tangent_blowup(&ctx),
        Command::ConeDeficiency => commands::cone(&ctx),
        Command::Horest => commands::horest(&ctx),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
