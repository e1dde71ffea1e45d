use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

mod commands;
mod config;
mod error;
mod manifest;

/// Flags shared by every subcommand. Config-file keys fill in whatever the
/// flags leave unset; flags win on overlap.
#[derive(Debug, Args)]
pub struct CommonArgs {
    /// Config file, TOML or JSON (format sniffed from the content).
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Root RNG seed. Required here or in the config; never clock-derived.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker threads for the simulation loop (default: all cores).
    #[arg(long)]
    pub workers: Option<usize>,
    /// Directory for output artifacts (created if missing).
    #[arg(long, default_value = ".")]
    pub out: PathBuf,
}

#[derive(Parser)]
#[command(name = "abckit", version, about = "Batch runner for the ABC engine")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Accept-reject posterior sampling experiments
    #[command(subcommand)]
    Abc(AbcCommand),
    /// Identification and stability diagnostics
    #[command(subcommand)]
    Diagnose(DiagnoseCommand),
    /// Closed-form studies that need no simulation
    #[command(subcommand)]
    Analytic(AnalyticCommand),
    /// Predator-prey model fit, deterministic or noise-matched
    LvStudy {
        /// `deterministic` or `noise_matched`
        #[arg(long)]
        mode: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Subcommand)]
enum AbcCommand {
    /// Run accept-reject sampling and write posterior and density files
    Run {
        /// Named experiment preset (`ma2-figure1`, `gauss-kernel`)
        #[arg(long)]
        preset: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Subcommand)]
enum DiagnoseCommand {
    /// Grow the conditioning set stepwise and flag posterior relocations
    Augment {
        /// Named step ladder (`figure2`, `figure4`, `figure5`)
        #[arg(long)]
        plan: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
    /// Check a summary map for distinct parameters with matching values
    Injectivity {
        /// Model name (`ar1`, `ma2`)
        #[arg(long)]
        model: Option<String>,
        /// Statistic names, comma separated
        #[arg(long, value_delimiter = ',')]
        stats: Option<Vec<String>>,
        /// `analytic` (limit formulas) or `simulated` (long synthetic runs)
        #[arg(long)]
        method: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

#[derive(Subcommand)]
enum AnalyticCommand {
    /// Tabulate pseudo-posterior tail mass over sample-size/bandwidth grids
    Sweep {
        /// `eps_then_t`, `t_then_eps`, or `both`
        #[arg(long)]
        order: Option<String>,
        #[command(flatten)]
        common: CommonArgs,
    },
}

fn main() {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Abc(AbcCommand::Run { preset, common }) => {
            commands::abc_run::cmd_abc_run(&common, preset)
        }
        Command::Diagnose(DiagnoseCommand::Augment { plan, common }) => {
            commands::augment::cmd_diagnose_augment(&common, plan)
        }
        Command::Diagnose(DiagnoseCommand::Injectivity { model, stats, method, common }) => {
            commands::injectivity::cmd_diagnose_injectivity(&common, model, stats, method)
        }
        Command::Analytic(AnalyticCommand::Sweep { order, common }) => {
            commands::sweep::cmd_analytic_sweep(&common, order)
        }
        Command::LvStudy { mode, common } => commands::lv_study::cmd_lv_study(&common, mode),
    };
    if let Err(e) = result {
        eprintln!("{e}");
        std::process::exit(e.exit_code());
    }
}
