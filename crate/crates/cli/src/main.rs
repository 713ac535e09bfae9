//! Command-line front end: budget planning, tiled variable-step sampling,
//! normalization, augmentation, tiling inspection, metric reports, and a
//! self-contained end-to-end demo.
//!
//! Exit codes: 0 success, 1 demo tolerance failure, 2 infeasible plan,
//! 64 usage error, 65 data error.

mod commands;
mod util;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(
    name = "voxdiff",
    version,
    about = "Budget-planned variable-step diffusion sampling for 3D volumes"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Plan step count and overlap for a time budget.
    Plan(commands::plan::PlanArgs),
    /// Run tiled sampling with the analytic Gaussian denoiser.
    Sample(commands::sample::SampleArgs),
    /// Score a prediction against a reference volume.
    Metrics(commands::metrics::MetricsArgs),
    /// Apply or invert an intensity normalization pipeline.
    Normalize(commands::normalize::NormalizeArgs),
    /// Print the sliding-window decomposition for a shape.
    TileInfo(commands::tile_info::TileInfoArgs),
    /// Apply augmentation transforms to a volume.
    Augment(commands::augment::AugmentArgs),
    /// End-to-end run on a synthetic phantom with pass/fail checks.
    Demo(commands::demo::DemoArgs),
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprintln!("{e}");
            std::process::exit(64);
        }
    };

    if let Ok(threads) = std::env::var("VOXDIFF_THREADS") {
        match threads.parse::<usize>() {
            Ok(n) if n > 0 => {
                // Errors only if a pool already exists, which is fine.
                let _ = rayon::ThreadPoolBuilder::new()
                    .num_threads(n)
                    .build_global();
            }
            _ => {
                eprintln!("VOXDIFF_THREADS must be a positive integer, got {threads:?}");
                std::process::exit(64);
            }
        }
    }

    let result = match cli.command {
        Command::Plan(args) => commands::plan::run(args),
        Command::Sample(args) => commands::sample::run(args),
        Command::Metrics(args) => commands::metrics::run(args),
        Command::Normalize(args) => commands::normalize::run(args),
        Command::TileInfo(args) => commands::tile_info::run(args),
        Command::Augment(args) => commands::augment::run(args),
        Command::Demo(args) => commands::demo::run(args),
    };

    if let Err(e) = result {
        eprintln!("{}", e.message());
        std::process::exit(e.exit_code());
    }
}
