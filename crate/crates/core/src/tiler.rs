//! Sliding-window decomposition and blended stitching.
//!
//! Window origins advance by `R·(1−p)` per axis, floored to integer
//! offsets, with the final origin clamped flush to the volume boundary.
//! The offset count per axis always equals the planner's window-count
//! formula, so plans and budgets stay consistent. Stitching averages
//! per-window outputs under uniform or raised-cosine weights; the taper
//! keeps a 0.01 floor so every voxel keeps positive total weight.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::volume::{Grid3, Volume};

/// Per-window blend weighting.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightMode {
    Uniform,
    CosineTaper,
}

const TAPER_FLOOR: f64 = 0.01;

/// A concrete tiling: window size, overlap, and every window origin.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowPlan {
    pub window: [usize; 3],
    pub p: f64,
    pub offsets: Vec<[usize; 3]>,
    pub weight_mode: WeightMode,
}

impl WindowPlan {
    pub fn n_windows(&self) -> usize {
        self.offsets.len()
    }
}

fn axis_offsets(extent: usize, window: usize, p: f64) -> Vec<usize> {
    let span = extent - window;
    if span == 0 {
        return vec![0];
    }
    let stride = window as f64 * (1.0 - p);
    let count = (span as f64 / stride).ceil() as usize + 1;
    let mut offsets = Vec::with_capacity(count);
    for j in 0..count - 1 {
        offsets.push(((j as f64 * stride).floor() as usize).min(span));
    }
    offsets.push(span);
    offsets
}

/// Tile `volume_shape` with windows of size `window` at overlap `p`.
pub fn make_plan(
    volume_shape: [usize; 3],
    window: [usize; 3],
    p: f64,
    weight_mode: WeightMode,
) -> Result<WindowPlan> {
    if window.iter().zip(&volume_shape).any(|(r, i)| r > i) || window.contains(&0) {
        return Err(Error::WindowLargerThanVolume {
            window,
            volume: volume_shape,
        });
    }
    if !(0.0..1.0).contains(&p) || !p.is_finite() {
        return Err(Error::InvalidOverlap { p });
    }
    let ox = axis_offsets(volume_shape[0], window[0], p);
    let oy = axis_offsets(volume_shape[1], window[1], p);
    let oz = axis_offsets(volume_shape[2], window[2], p);
    let mut offsets = Vec::with_capacity(ox.len() * oy.len() * oz.len());
    for &x in &ox {
        for &y in &oy {
            for &z in &oz {
                offsets.push([x, y, z]);
            }
        }
    }
    Ok(WindowPlan {
        window,
        p,
        offsets,
        weight_mode,
    })
}

/// Copy window `k` out of a grid.
pub fn extract_grid(g: &Grid3, plan: &WindowPlan, k: usize) -> Result<Grid3> {
    let count = plan.offsets.len();
    let off = *plan
        .offsets
        .get(k)
        .ok_or(Error::IndexOutOfRange { index: k, count })?;
    let r = plan.window;
    let shape = g.shape();
    if (0..3).any(|i| off[i] + r[i] > shape[i]) {
        return Err(Error::WindowLargerThanVolume {
            window: r,
            volume: shape,
        });
    }
    let mut out = Vec::with_capacity(r[0] * r[1] * r[2]);
    for x in 0..r[0] {
        for y in 0..r[1] {
            for z in 0..r[2] {
                out.push(g.at(off[0] + x, off[1] + y, off[2] + z));
            }
        }
    }
    Grid3::new(r, out)
}

/// Copy window `k` out of a volume.
pub fn extract(v: &Volume, plan: &WindowPlan, k: usize) -> Result<Grid3> {
    extract_grid(v.grid(), plan, k)
}

fn axis_taper(window: usize) -> Vec<f64> {
    (0..window)
        .map(|u| {
            let phase = std::f64::consts::TAU * (u as f64 + 0.5) / window as f64;
            (0.5 * (1.0 - phase.cos())).max(TAPER_FLOOR)
        })
        .collect()
}

/// Weighted-average recomposition of per-window outputs into a full grid.
pub fn stitch(outputs: &[Grid3], plan: &WindowPlan, volume_shape: [usize; 3]) -> Result<Grid3> {
    if outputs.len() != plan.offsets.len() {
        return Err(Error::CountMismatch {
            expected: plan.offsets.len(),
            found: outputs.len(),
        });
    }
    let r = plan.window;
    for out in outputs {
        if out.shape() != r {
            return Err(Error::ShapeMismatch {
                lhs: r,
                rhs: out.shape(),
            });
        }
    }
    let weights: Option<[Vec<f64>; 3]> = match plan.weight_mode {
        WeightMode::Uniform => None,
        WeightMode::CosineTaper => Some([axis_taper(r[0]), axis_taper(r[1]), axis_taper(r[2])]),
    };

    let n = volume_shape[0] * volume_shape[1] * volume_shape[2];
    let mut num = vec![0.0f64; n];
    let mut den = vec![0.0f64; n];
    let idx = |x: usize, y: usize, z: usize| (x * volume_shape[1] + y) * volume_shape[2] + z;

    for (out, off) in outputs.iter().zip(&plan.offsets) {
        if (0..3).any(|i| off[i] + r[i] > volume_shape[i]) {
            return Err(Error::WindowLargerThanVolume {
                window: r,
                volume: volume_shape,
            });
        }
        for x in 0..r[0] {
            for y in 0..r[1] {
                for z in 0..r[2] {
                    let w = match &weights {
                        None => 1.0,
                        Some([wx, wy, wz]) => wx[x] * wy[y] * wz[z],
                    };
                    let i = idx(off[0] + x, off[1] + y, off[2] + z);
                    num[i] += w * out.at(x, y, z);
                    den[i] += w;
                }
            }
        }
    }
    // Plans from make_plan cover every voxel, so den > 0 throughout.
    for i in 0..n {
        num[i] /= den[i];
    }
    Grid3::new(volume_shape, num)
}

/// Uniformly random window of size `window` from `v`, with its origin.
pub fn sample_patch(
    v: &Volume,
    window: [usize; 3],
    rng: &mut rng::Rng,
) -> Result<(Grid3, [usize; 3])> {
    let shape = v.shape();
    if window.iter().zip(&shape).any(|(r, i)| r > i) || window.contains(&0) {
        return Err(Error::WindowLargerThanVolume {
            window,
            volume: shape,
        });
    }
    let origin = [
        rng.random_range(0..=shape[0] - window[0]),
        rng.random_range(0..=shape[1] - window[1]),
        rng.random_range(0..=shape[2] - window[2]),
    ];
    let plan = WindowPlan {
        window,
        p: 0.0,
        offsets: vec![origin],
        weight_mode: WeightMode::Uniform,
    };
    Ok((extract(v, &plan, 0)?, origin))
}

/// How many windows cover each voxel.
pub fn coverage_counts(plan: &WindowPlan, volume_shape: [usize; 3]) -> Vec<u32> {
    let n = volume_shape[0] * volume_shape[1] * volume_shape[2];
    let mut counts = vec![0u32; n];
    let idx = |x: usize, y: usize, z: usize| (x * volume_shape[1] + y) * volume_shape[2] + z;
    for off in &plan.offsets {
        for x in off[0]..(off[0] + plan.window[0]).min(volume_shape[0]) {
            for y in off[1]..(off[1] + plan.window[1]).min(volume_shape[1]) {
                for z in off[2]..(off[2] + plan.window[2]).min(volume_shape[2]) {
                    counts[idx(x, y, z)] += 1;
                }
            }
        }
    }
    counts
}
