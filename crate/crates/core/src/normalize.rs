//! Intensity normalization pipelines.
//!
//! CT/CBCT: clamp to [-1000, 1600] HU and map linearly onto [-1, 1].
//! MRI: clamp to the [0.1, 99.9] percentile band, z-score with statistics
//! chosen by mode, then map the observed post-z range onto [-1, 1]. Every
//! forward pass records the statistics needed to invert it.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Volume, VoxelDomain};

pub const CT_CLIP_LO: f64 = -1000.0;
pub const CT_CLIP_HI: f64 = 1600.0;
pub const MRI_PERCENTILE_LO: f64 = 0.1;
pub const MRI_PERCENTILE_HI: f64 = 99.9;
pub const DEFAULT_FLOOR_THRESHOLD: f64 = 0.01;

/// Which statistics feed the z-scoring step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormMode {
    Ct,
    MriGlobal,
    MriPerCase,
    MriNonzeroMasked,
}

/// Statistics of one forward normalization, sufficient to invert it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct NormStats {
    pub clip_lo: f64,
    pub clip_hi: f64,
    pub mean: f64,
    pub std: f64,
    /// Observed post-z-score extrema (the [-1, 1] anchors).
    pub post_min: f64,
    pub post_max: f64,
    pub mode: NormMode,
}

/// Rank-interpolated percentile (`q` in percent). Uses selection rather
/// than a full sort.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    debug_assert!(!values.is_empty());
    let n = values.len();
    if n == 1 {
        return values[0];
    }
    let pos = q / 100.0 * (n - 1) as f64;
    let lo_rank = pos.floor() as usize;
    let frac = pos - lo_rank as f64;
    let mut buf = values.to_vec();
    let (_, lo_val, upper) = buf.select_nth_unstable_by(lo_rank, f64::total_cmp);
    let lo_val = *lo_val;
    if frac == 0.0 {
        return lo_val;
    }
    let hi_val = upper.iter().copied().fold(f64::INFINITY, f64::min);
    lo_val + frac * (hi_val - lo_val)
}

/// Map [-1, 1] back onto [lo, hi]; endpoints are exact.
fn sym_to_range(y: f64, lo: f64, hi: f64) -> f64 {
    lo + (y + 1.0) * (hi - lo) / 2.0
}

/// Map [lo, hi] onto [-1, 1]; endpoints are exact.
fn range_to_sym(x: f64, lo: f64, hi: f64) -> f64 {
    2.0 * ((x - lo) / (hi - lo)) - 1.0
}

/// Clamp to the HU window and rescale onto [-1, 1].
pub fn ct_normalize(v: &Volume) -> Result<(Volume, NormStats)> {
    if v.domain() != VoxelDomain::Hu {
        return Err(Error::DomainMismatch {
            expected: VoxelDomain::Hu,
            found: v.domain(),
        });
    }
    let data = v
        .data()
        .iter()
        .map(|&x| range_to_sym(x.clamp(CT_CLIP_LO, CT_CLIP_HI), CT_CLIP_LO, CT_CLIP_HI))
        .collect();
    let out = Volume::new(v.shape(), v.spacing(), VoxelDomain::NormSym, data)?;
    Ok((
        out,
        NormStats {
            clip_lo: CT_CLIP_LO,
            clip_hi: CT_CLIP_HI,
            mean: 0.0,
            std: 1.0,
            post_min: -1.0,
            post_max: 1.0,
            mode: NormMode::Ct,
        },
    ))
}

/// Exact affine inverse of [`ct_normalize`].
pub fn ct_denormalize(v: &Volume) -> Result<Volume> {
    if v.domain() != VoxelDomain::NormSym {
        return Err(Error::DomainMismatch {
            expected: VoxelDomain::NormSym,
            found: v.domain(),
        });
    }
    let data = v
        .data()
        .iter()
        .map(|&y| sym_to_range(y, CT_CLIP_LO, CT_CLIP_HI))
        .collect();
    Volume::new(v.shape(), v.spacing(), VoxelDomain::Hu, data)
}

/// MRI statistics source. `NonzeroMasked` computes over the voxels that
/// are nonzero in the input; callers exclude regions (e.g. lesions) by
/// zeroing them beforehand.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MriStatsMode {
    PerCase,
    Global,
    NonzeroMasked,
}

impl MriStatsMode {
    fn norm_mode(self) -> NormMode {
        match self {
            MriStatsMode::PerCase => NormMode::MriPerCase,
            MriStatsMode::Global => NormMode::MriGlobal,
            MriStatsMode::NonzeroMasked => NormMode::MriNonzeroMasked,
        }
    }
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> Option<(f64, f64)> {
    let mut n = 0usize;
    let mut sum = 0.0;
    for v in values.clone() {
        sum += v;
        n += 1;
    }
    if n == 0 {
        return None;
    }
    let mean = sum / n as f64;
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / n as f64;
    Some((mean, var.sqrt()))
}

/// Percentile clip, z-score, and min/max rescale onto [-1, 1].
pub fn mri_normalize(
    v: &Volume,
    mode: MriStatsMode,
    external_stats: Option<&NormStats>,
) -> Result<(Volume, NormStats)> {
    if v.domain() != VoxelDomain::MriRaw {
        return Err(Error::DomainMismatch {
            expected: VoxelDomain::MriRaw,
            found: v.domain(),
        });
    }
    let clip_lo = percentile(v.data(), MRI_PERCENTILE_LO);
    let clip_hi = percentile(v.data(), MRI_PERCENTILE_HI);
    let clipped: Vec<f64> = v
        .data()
        .iter()
        .map(|&x| x.clamp(clip_lo, clip_hi))
        .collect();

    let (mean, std) = match mode {
        MriStatsMode::PerCase => {
            mean_std(clipped.iter().copied()).ok_or(Error::EmptyStatsRegion)?
        }
        MriStatsMode::Global => {
            let stats = external_stats.ok_or(Error::MissingGlobalStats)?;
            (stats.mean, stats.std)
        }
        MriStatsMode::NonzeroMasked => {
            let region: Vec<f64> = v
                .data()
                .iter()
                .zip(&clipped)
                .filter(|(&raw, _)| raw != 0.0)
                .map(|(_, &c)| c)
                .collect();
            if region.is_empty() {
                return Err(Error::EmptyStatsRegion);
            }
            mean_std(region.iter().copied()).ok_or(Error::EmptyStatsRegion)?
        }
    };
    if std <= 0.0 || !std.is_finite() {
        return Err(Error::ZeroStd);
    }

    let z: Vec<f64> = clipped.iter().map(|&x| (x - mean) / std).collect();
    let post_min = z.iter().copied().fold(f64::INFINITY, f64::min);
    let post_max = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if post_max <= post_min {
        return Err(Error::ZeroStd);
    }
    let data = z
        .into_iter()
        .map(|x| range_to_sym(x, post_min, post_max))
        .collect();
    let out = Volume::new(v.shape(), v.spacing(), VoxelDomain::NormSym, data)?;
    Ok((
        out,
        NormStats {
            clip_lo,
            clip_hi,
            mean,
            std,
            post_min,
            post_max,
            mode: mode.norm_mode(),
        },
    ))
}

/// Invert [`mri_normalize`] with the statistics from the forward call.
pub fn mri_denormalize(v: &Volume, stats: &NormStats) -> Result<Volume> {
    if v.domain() != VoxelDomain::NormSym {
        return Err(Error::DomainMismatch {
            expected: VoxelDomain::NormSym,
            found: v.domain(),
        });
    }
    if stats.mode == NormMode::Ct {
        return Err(Error::StatsMismatch {
            reason: "CT stats cannot invert an MRI normalization".into(),
        });
    }
    if stats.std <= 0.0 || !stats.std.is_finite() {
        return Err(Error::StatsMismatch {
            reason: "std must be positive".into(),
        });
    }
    if stats.post_max <= stats.post_min || stats.post_max.is_nan() || stats.post_min.is_nan() {
        return Err(Error::StatsMismatch {
            reason: "post-z range is empty".into(),
        });
    }
    let data = v
        .data()
        .iter()
        .map(|&y| sym_to_range(y, stats.post_min, stats.post_max) * stats.std + stats.mean)
        .collect();
    Volume::new(v.shape(), v.spacing(), VoxelDomain::MriRaw, data)
}

/// Zero out values below `threshold` in a [0, 1] volume.
pub fn postprocess_floor(v: &Volume, threshold: f64) -> Result<Volume> {
    if v.domain() != VoxelDomain::NormUnit {
        return Err(Error::DomainMismatch {
            expected: VoxelDomain::NormUnit,
            found: v.domain(),
        });
    }
    let data = v
        .data()
        .iter()
        .map(|&x| if x < threshold { 0.0 } else { x })
        .collect();
    Volume::new(v.shape(), v.spacing(), VoxelDomain::NormUnit, data)
}
