//! 3D SSIM and multi-scale SSIM.
//!
//! Local statistics use a separable Gaussian window (size 7, sigma 1.5)
//! and are averaged over the region where the window fits entirely, so no
//! padding convention leaks into the score.

use crate::error::{Error, Result};
use crate::volume::Grid3;

pub const DEFAULT_WINDOW: usize = 7;
const WINDOW_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

/// Standard five-scale exponents; truncated prefixes are renormalized to
/// sum to one so a single scale degenerates to plain SSIM.
const MS_WEIGHTS: [f64; 5] = [0.0448, 0.2856, 0.3001, 0.2363, 0.1333];

fn gaussian_kernel(size: usize, sigma: f64) -> Vec<f64> {
    let half = (size / 2) as isize;
    let mut k: Vec<f64> = (-half..=half)
        .map(|i| (-(i as f64).powi(2) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = k.iter().sum();
    for v in &mut k {
        *v /= sum;
    }
    k
}

/// Separable correlation with zero extension. Only voxels at least
/// `size/2` from every face hold fully supported values; callers must crop.
fn filter_separable(g: &Grid3, kernel: &[f64]) -> Grid3 {
    let [dx, dy, dz] = g.shape();
    let half = (kernel.len() / 2) as isize;
    let mut cur = g.data().to_vec();
    let mut next = vec![0.0; cur.len()];
    let idx = |x: usize, y: usize, z: usize| (x * dy + y) * dz + z;

    for axis in 0..3 {
        let dim = [dx, dy, dz][axis];
        for x in 0..dx {
            for y in 0..dy {
                for z in 0..dz {
                    let pos = [x, y, z][axis] as isize;
                    let mut acc = 0.0;
                    for (k, &w) in kernel.iter().enumerate() {
                        let p = pos + k as isize - half;
                        if p < 0 || p >= dim as isize {
                            continue;
                        }
                        let mut c = [x, y, z];
                        c[axis] = p as usize;
                        acc += w * cur[idx(c[0], c[1], c[2])];
                    }
                    next[idx(x, y, z)] = acc;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
    }
    Grid3::new(g.shape(), cur).expect("shape preserved")
}

/// Mean SSIM and mean contrast-structure over the valid core.
pub(crate) fn ssim_cs_mean(
    a: &Grid3,
    b: &Grid3,
    window: usize,
    data_range: f64,
) -> Result<(f64, f64)> {
    a.check_same_shape(b)?;
    let shape = a.shape();
    if shape.iter().any(|&d| d < window) {
        return Err(Error::WindowTooLarge { window, shape });
    }
    let kernel = gaussian_kernel(window, WINDOW_SIGMA);
    let mu1 = filter_separable(a, &kernel);
    let mu2 = filter_separable(b, &kernel);
    let m11 = filter_separable(&a.zip(a, |x, y| x * y)?, &kernel);
    let m22 = filter_separable(&b.zip(b, |x, y| x * y)?, &kernel);
    let m12 = filter_separable(&a.zip(b, |x, y| x * y)?, &kernel);

    let c1 = (K1 * data_range) * (K1 * data_range);
    let c2 = (K2 * data_range) * (K2 * data_range);
    let half = window / 2;
    let [dx, dy, dz] = shape;

    let mut ssim_sum = 0.0;
    let mut cs_sum = 0.0;
    let mut count = 0usize;
    for x in half..dx - half {
        for y in half..dy - half {
            for z in half..dz - half {
                let u1 = mu1.at(x, y, z);
                let u2 = mu2.at(x, y, z);
                let v1 = m11.at(x, y, z) - u1 * u1;
                let v2 = m22.at(x, y, z) - u2 * u2;
                let cov = m12.at(x, y, z) - u1 * u2;
                let l = (2.0 * u1 * u2 + c1) / (u1 * u1 + u2 * u2 + c1);
                let cs = (2.0 * cov + c2) / (v1 + v2 + c2);
                ssim_sum += l * cs;
                cs_sum += cs;
                count += 1;
            }
        }
    }
    Ok((ssim_sum / count as f64, cs_sum / count as f64))
}

/// Mean local SSIM between two grids. `data_range` is the nominal dynamic
/// range of the inputs (2 for values in [-1, 1]).
pub fn ssim3(a: &Grid3, b: &Grid3, window: usize, data_range: f64) -> Result<f64> {
    Ok(ssim_cs_mean(a, b, window, data_range)?.0)
}

/// 2x average pooling along every axis, truncating odd trailing voxels.
pub(crate) fn avg_pool2(g: &Grid3) -> Grid3 {
    let [dx, dy, dz] = g.shape();
    let (nx, ny, nz) = (dx / 2, dy / 2, dz / 2);
    let mut out = Vec::with_capacity(nx * ny * nz);
    for x in 0..nx {
        for y in 0..ny {
            for z in 0..nz {
                let mut acc = 0.0;
                for ox in 0..2 {
                    for oy in 0..2 {
                        for oz in 0..2 {
                            acc += g.at(2 * x + ox, 2 * y + oy, 2 * z + oz);
                        }
                    }
                }
                out.push(acc / 8.0);
            }
        }
    }
    Grid3::new([nx, ny, nz], out).expect("pooled shape is valid")
}

/// Multi-scale SSIM: contrast-structure terms at every scale, luminance at
/// the coarsest, exponents from the truncated standard weights.
pub fn ms_ssim3(a: &Grid3, b: &Grid3, scales: usize, data_range: f64) -> Result<f64> {
    a.check_same_shape(b)?;
    let shape = a.shape();
    if scales == 0 || scales > MS_WEIGHTS.len() {
        return Err(Error::TooManyScalesForShape {
            scales,
            window: DEFAULT_WINDOW,
            shape,
        });
    }
    let needed = DEFAULT_WINDOW << (scales - 1);
    if shape.iter().any(|&d| d < needed) {
        return Err(Error::TooManyScalesForShape {
            scales,
            window: DEFAULT_WINDOW,
            shape,
        });
    }
    let wsum: f64 = MS_WEIGHTS[..scales].iter().sum();
    let weights: Vec<f64> = MS_WEIGHTS[..scales].iter().map(|w| w / wsum).collect();

    let mut ca = a.clone();
    let mut cb = b.clone();
    let mut acc = 1.0;
    for (j, &w) in weights.iter().enumerate() {
        let (ssim, cs) = ssim_cs_mean(&ca, &cb, DEFAULT_WINDOW, data_range)?;
        if j + 1 == weights.len() {
            acc *= ssim.max(0.0).powf(w);
        } else {
            acc *= cs.max(0.0).powf(w);
            ca = avg_pool2(&ca);
            cb = avg_pool2(&cb);
        }
    }
    Ok(acc)
}
