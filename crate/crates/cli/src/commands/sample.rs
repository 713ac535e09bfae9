use std::path::PathBuf;

use clap::Args;
use rayon::prelude::*;
use serde::Deserialize;

use voxdiff::denoiser::{Denoiser, GaussianAnalyticDenoiser, MuSource};
use voxdiff::diffusion::{sample_with_rng, SamplerConfig};
use voxdiff::schedule::{default_base_schedule, default_step_set, respace, NoiseSchedule};
use voxdiff::tiler::{extract, make_plan, stitch, WindowPlan};
use voxdiff::volume::{Grid3, Volume, VoxelDomain};
use voxdiff::{rng, Result as CoreResult};

use crate::commands::tile_info::parse_weight_mode;
use crate::util::{self, CliError, CliResult};

#[derive(Args)]
pub struct SampleArgs {
    /// Output volume path.
    #[arg(long)]
    output: PathBuf,
    /// Shape to generate (x,y,z); alternative to --condition.
    #[arg(long)]
    shape: Option<String>,
    /// Conditioning volume; its values become the per-voxel target means.
    #[arg(long)]
    condition: Option<PathBuf>,
    /// Step count; must belong to the trained step set.
    #[arg(long)]
    steps: Option<usize>,
    /// Comma-separated trained step counts.
    #[arg(long)]
    step_set: Option<String>,
    /// Target mean when no condition volume is given.
    #[arg(long)]
    mu: Option<f64>,
    /// Target standard deviation of the analytic denoiser.
    #[arg(long)]
    sigma: Option<f64>,
    /// Window shape (x,y,z); enables tiled sampling.
    #[arg(long)]
    window: Option<String>,
    /// Window overlap fraction.
    #[arg(long)]
    overlap: Option<f64>,
    /// Blend weighting: uniform or cosine-taper.
    #[arg(long)]
    weight_mode: Option<String>,
    /// Disable clamping of the denoised estimate.
    #[arg(long)]
    no_clip: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// JSON file with defaults for any flag not given.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct SampleConfig {
    shape: Option<String>,
    steps: Option<usize>,
    step_set: Option<String>,
    mu: Option<f64>,
    sigma: Option<f64>,
    window: Option<String>,
    overlap: Option<f64>,
    weight_mode: Option<String>,
    seed: Option<u64>,
}

/// Sample every window with an independent substream and stitch.
pub fn sample_tiled(
    denoiser: &dyn Denoiser,
    condition: Option<&Grid3>,
    plan: &WindowPlan,
    volume_shape: [usize; 3],
    cfg: &SamplerConfig,
    schedule: &NoiseSchedule,
) -> CoreResult<(Grid3, Vec<Grid3>)> {
    let cond_windows: Option<Vec<Grid3>> = match condition {
        Some(c) => {
            let v = Volume::from_grid(c.clone(), [1.0; 3], VoxelDomain::MriRaw)?;
            Some(
                (0..plan.offsets.len())
                    .map(|k| extract(&v, plan, k))
                    .collect::<CoreResult<_>>()?,
            )
        }
        None => None,
    };
    let outputs: Vec<Grid3> = (0..plan.offsets.len())
        .into_par_iter()
        .map(|k| {
            let mut r = rng::substream(cfg.seed, k as u64);
            let cond_slice = cond_windows.as_ref().map(|w| std::slice::from_ref(&w[k]));
            sample_with_rng(denoiser, cond_slice, plan.window, cfg, schedule, &mut r)
        })
        .collect::<CoreResult<_>>()?;
    let stitched = stitch(&outputs, plan, volume_shape)?;
    Ok((stitched, outputs))
}

pub fn run(args: SampleArgs) -> CliResult<()> {
    let file_cfg: SampleConfig = util::load_config(&args.config)?;
    let steps_set = match args.step_set.or(file_cfg.step_set) {
        Some(text) => util::parse_steps(&text)?,
        None => default_step_set(),
    };
    let t = args.steps.or(file_cfg.steps).unwrap_or(25);
    if !steps_set.contains(t) {
        return Err(CliError::Usage(format!(
            "--steps {t} is not in the trained step set {:?}",
            steps_set.values()
        )));
    }
    let sigma = args.sigma.or(file_cfg.sigma).unwrap_or(0.5);
    let seed = args.seed.or(file_cfg.seed).unwrap_or(0);

    let condition = args
        .condition
        .as_deref()
        .map(util::read_volume)
        .transpose()?;
    let (shape, spacing) = match (&condition, args.shape.or(file_cfg.shape)) {
        (Some(c), None) => (c.shape(), c.spacing()),
        (None, Some(text)) => (util::parse_triple(&text, "shape")?, [1.0, 1.0, 1.0]),
        (Some(c), Some(text)) => {
            let s = util::parse_triple(&text, "shape")?;
            if s != c.shape() {
                return Err(CliError::Usage(
                    "--shape disagrees with the condition volume".into(),
                ));
            }
            (s, c.spacing())
        }
        (None, None) => {
            return Err(CliError::Usage("need --shape or --condition".into()));
        }
    };

    let denoiser = match &condition {
        Some(_) => GaussianAnalyticDenoiser::new(MuSource::FirstCondition, sigma)?,
        None => GaussianAnalyticDenoiser::scalar(args.mu.or(file_cfg.mu).unwrap_or(0.0), sigma)?,
    };
    let base = default_base_schedule();
    let schedule = respace(&base, t)?;
    let cfg = SamplerConfig {
        t,
        clip_denoised: !args.no_clip,
        clip_range: (-1.0, 1.0),
        seed,
    };

    let grid = match args.window.or(file_cfg.window) {
        Some(wtext) => {
            let window = util::parse_triple(&wtext, "window")?;
            let overlap = args.overlap.or(file_cfg.overlap).unwrap_or(0.5);
            let mode = parse_weight_mode(
                &args
                    .weight_mode
                    .or(file_cfg.weight_mode)
                    .unwrap_or_else(|| "cosine-taper".to_string()),
            )?;
            let plan = make_plan(shape, window, overlap, mode)?;
            let (stitched, _) = sample_tiled(
                &denoiser,
                condition.as_ref().map(|c| c.grid()),
                &plan,
                shape,
                &cfg,
                &schedule,
            )?;
            stitched
        }
        None => {
            let cond_grids: Option<Vec<Grid3>> = condition.as_ref().map(|c| vec![c.grid().clone()]);
            let mut r = rng::master(seed);
            sample_with_rng(
                &denoiser,
                cond_grids.as_deref(),
                shape,
                &cfg,
                &schedule,
                &mut r,
            )?
        }
    };

    // Clamped runs stay inside [-1, 1] by construction.
    let domain = if cfg.clip_denoised {
        VoxelDomain::NormSym
    } else {
        VoxelDomain::MriRaw
    };
    let out = Volume::from_grid(grid, spacing, domain)?;
    util::write_volume(&out, &args.output)
}
