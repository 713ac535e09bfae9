use std::path::PathBuf;

use clap::Args;

use voxdiff::normalize::{
    ct_denormalize, ct_normalize, mri_denormalize, mri_normalize, postprocess_floor, MriStatsMode,
    NormStats, DEFAULT_FLOOR_THRESHOLD,
};

use crate::util::{self, CliError, CliResult};

#[derive(Args)]
pub struct NormalizeArgs {
    /// Input volume (.nii or raw sidecar pair).
    #[arg(long)]
    input: PathBuf,
    /// Output volume path.
    #[arg(long)]
    output: PathBuf,
    /// ct | ct-denorm | mri-per-case | mri-global | mri-nonzero |
    /// mri-denorm | floor
    #[arg(long)]
    mode: String,
    /// Stats JSON to import (mri-global, mri-denorm).
    #[arg(long)]
    stats_in: Option<PathBuf>,
    /// Where to export the forward stats JSON.
    #[arg(long)]
    stats_out: Option<PathBuf>,
    /// Floor threshold for --mode floor.
    #[arg(long)]
    threshold: Option<f64>,
}

fn load_stats(path: &Option<PathBuf>, mode: &str) -> CliResult<NormStats> {
    let path = path
        .as_ref()
        .ok_or_else(|| CliError::Usage(format!("--mode {mode} requires --stats-in")))?;
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Data(format!("cannot read stats {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::Data(format!("bad stats {}: {e}", path.display())))
}

pub fn run(args: NormalizeArgs) -> CliResult<()> {
    let v = util::read_volume(&args.input)?;
    let (out, stats) = match args.mode.as_str() {
        "ct" => {
            let (out, stats) = ct_normalize(&v)?;
            (out, Some(stats))
        }
        "ct-denorm" => (ct_denormalize(&v)?, None),
        "mri-per-case" => {
            let (out, stats) = mri_normalize(&v, MriStatsMode::PerCase, None)?;
            (out, Some(stats))
        }
        "mri-global" => {
            let external = load_stats(&args.stats_in, "mri-global")?;
            let (out, stats) = mri_normalize(&v, MriStatsMode::Global, Some(&external))?;
            (out, Some(stats))
        }
        "mri-nonzero" => {
            let (out, stats) = mri_normalize(&v, MriStatsMode::NonzeroMasked, None)?;
            (out, Some(stats))
        }
        "mri-denorm" => {
            let stats = load_stats(&args.stats_in, "mri-denorm")?;
            (mri_denormalize(&v, &stats)?, None)
        }
        "floor" => {
            let threshold = args.threshold.unwrap_or(DEFAULT_FLOOR_THRESHOLD);
            (postprocess_floor(&v, threshold)?, None)
        }
        other => {
            return Err(CliError::Usage(format!("unknown --mode {other:?}")));
        }
    };

    if let Some(path) = &args.stats_out {
        match &stats {
            Some(s) => util::emit_json(s, &Some(path.clone()))?,
            None => {
                return Err(CliError::Usage(format!(
                    "--stats-out does not apply to --mode {}",
                    args.mode
                )))
            }
        }
    }
    util::write_volume(&out, &args.output)
}
