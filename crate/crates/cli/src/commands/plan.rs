use std::path::PathBuf;
use std::time::Instant;

use clap::Args;
use serde::Deserialize;

use voxdiff::denoiser::{Denoiser, GaussianAnalyticDenoiser};
use voxdiff::diffusion::{p_sample_step, SamplerConfig};
use voxdiff::planner::{self, HardwareProfile};
use voxdiff::rng;
use voxdiff::schedule::{self, ScheduleDump};
use voxdiff::volume::Grid3;

use crate::util::{self, CliError, CliResult};

#[derive(Args)]
pub struct PlanArgs {
    /// Volume shape as x,y,z voxels.
    #[arg(long)]
    shape: Option<String>,
    /// Window shape as x,y,z voxels.
    #[arg(long)]
    window: Option<String>,
    /// Total time budget in seconds.
    #[arg(long)]
    budget: Option<f64>,
    /// Seconds per denoising step on one window.
    #[arg(long, conflicts_with = "calibrate")]
    latency: Option<f64>,
    /// Measure per-step latency on this machine instead of assuming it.
    #[arg(long)]
    calibrate: bool,
    /// Initial overlap fraction (at least 0.5).
    #[arg(long)]
    overlap: Option<f64>,
    /// Comma-separated trained step counts.
    #[arg(long)]
    step_set: Option<String>,
    /// Write the respaced schedule (betas, alpha-bars) as JSON here.
    #[arg(long)]
    dump_schedule: Option<PathBuf>,
    /// JSON file with defaults for any flag not given.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Write the plan JSON here instead of stdout.
    #[arg(long)]
    output: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct PlanConfig {
    shape: Option<String>,
    window: Option<String>,
    budget: Option<f64>,
    latency: Option<f64>,
    overlap: Option<f64>,
    step_set: Option<String>,
}

/// Median wall time of one reverse step on one window of this size, using
/// the analytic denoiser as the workload stand-in.
fn calibrate_latency(window: [usize; 3]) -> CliResult<f64> {
    let schedule = schedule::respace(&schedule::default_base_schedule(), 25)?;
    let denoiser = GaussianAnalyticDenoiser::scalar(0.0, 0.5)?;
    let cfg = SamplerConfig::default();
    let mut r = rng::master(0);
    let mut x = Grid3::filled(window, 0.1).map_err(CliError::from)?;
    let mut times = Vec::new();
    for (i, t) in (0..25).rev().enumerate() {
        let start = Instant::now();
        let out = denoiser.denoise(&x, t as f64 / 25.0, t, &schedule, None)?;
        x = p_sample_step(&out, &x, t, &schedule, &mut r, &cfg)?;
        if i > 0 {
            // Skip the first (cold) step.
            times.push(start.elapsed().as_secs_f64());
        }
    }
    times.sort_by(f64::total_cmp);
    Ok(times[times.len() / 2])
}

pub fn run(args: PlanArgs) -> CliResult<()> {
    let cfg: PlanConfig = util::load_config(&args.config)?;
    let shape = util::parse_triple(&util::require(args.shape, cfg.shape, "shape")?, "shape")?;
    let window = util::parse_triple(&util::require(args.window, cfg.window, "window")?, "window")?;
    let latency = if args.calibrate {
        let measured = calibrate_latency(window)?;
        eprintln!("calibrated latency: {measured:.6} s/step on a {window:?} window");
        measured
    } else {
        args.latency.or(cfg.latency).unwrap_or(0.433)
    };
    let hw = HardwareProfile {
        total_budget_s: args.budget.or(cfg.budget).unwrap_or(900.0),
        time_per_infer_s: latency,
    };
    if hw.total_budget_s <= 0.0 || hw.time_per_infer_s <= 0.0 {
        return Err(CliError::Usage(
            "budget and latency must be positive".into(),
        ));
    }
    let steps = match args.step_set.or(cfg.step_set) {
        Some(text) => util::parse_steps(&text)?,
        None => schedule::default_step_set(),
    };
    let p_init = args.overlap.or(cfg.overlap).unwrap_or(0.5);

    let plan = planner::plan(shape, window, &hw, &steps, p_init)?;
    if let Some(path) = &args.dump_schedule {
        let base = schedule::default_base_schedule();
        let respaced = schedule::respace(&base, plan.t_selected)?;
        util::emit_json(&ScheduleDump::from(&respaced), &Some(path.clone()))?;
    }
    util::emit_json(&plan, &args.output)
}
