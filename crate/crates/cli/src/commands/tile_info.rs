use std::path::PathBuf;

use clap::Args;
use serde::{Deserialize, Serialize};

use voxdiff::tiler::{coverage_counts, make_plan, WeightMode, WindowPlan};

use crate::util::{self, CliError, CliResult};

#[derive(Args)]
pub struct TileInfoArgs {
    /// Volume shape as x,y,z voxels.
    #[arg(long)]
    shape: Option<String>,
    /// Window shape as x,y,z voxels.
    #[arg(long)]
    window: Option<String>,
    /// Overlap fraction in [0, 1).
    #[arg(long)]
    overlap: Option<f64>,
    /// Blend weighting: uniform or cosine-taper.
    #[arg(long)]
    weight_mode: Option<String>,
    /// JSON file with defaults for any flag not given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct TileInfoConfig {
    shape: Option<String>,
    window: Option<String>,
    overlap: Option<f64>,
    weight_mode: Option<String>,
}

#[derive(Serialize)]
struct TileInfo {
    n_windows: usize,
    coverage_min: u32,
    coverage_max: u32,
    coverage_mean: f64,
    plan: WindowPlan,
}

pub fn parse_weight_mode(text: &str) -> CliResult<WeightMode> {
    match text {
        "uniform" => Ok(WeightMode::Uniform),
        "cosine-taper" | "cosine_taper" => Ok(WeightMode::CosineTaper),
        other => Err(CliError::Usage(format!(
            "--weight-mode must be uniform or cosine-taper, got {other:?}"
        ))),
    }
}

pub fn run(args: TileInfoArgs) -> CliResult<()> {
    let cfg: TileInfoConfig = util::load_config(&args.config)?;
    let shape = util::parse_triple(&util::require(args.shape, cfg.shape, "shape")?, "shape")?;
    let window = util::parse_triple(&util::require(args.window, cfg.window, "window")?, "window")?;
    let overlap = args.overlap.or(cfg.overlap).unwrap_or(0.5);
    let mode = parse_weight_mode(
        &args
            .weight_mode
            .or(cfg.weight_mode)
            .unwrap_or_else(|| "cosine-taper".to_string()),
    )?;

    let plan = make_plan(shape, window, overlap, mode)?;
    let counts = coverage_counts(&plan, shape);
    let info = TileInfo {
        n_windows: plan.offsets.len(),
        coverage_min: counts.iter().copied().min().unwrap_or(0),
        coverage_max: counts.iter().copied().max().unwrap_or(0),
        coverage_mean: counts.iter().map(|&c| c as f64).sum::<f64>() / counts.len() as f64,
        plan,
    };
    util::emit_json(&info, &args.output)
}
