//! Shape-preserving augmentation transforms.
//!
//! Geometric transforms resample trilinearly about the volume center in
//! index space and fill out-of-bounds reads with the volume minimum, so
//! bounded domains stay in range. Intensity transforms that can leave a
//! bounded range (shift, noise, bias field) are restricted to the
//! unbounded HU / raw-MRI domains; augmentation runs before normalization
//! in the intended pipeline.

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;
use crate::volume::{Grid3, Volume};

/// Parameter bounds and seed for a randomized augmentation pipeline.
/// Deserializes leniently: absent fields take their defaults.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    /// Maximum rotation per axis, degrees.
    pub rotation_deg: f64,
    /// Inclusive multiplicative scale range per axis.
    pub scale_range: (f64, f64),
    /// Maximum absolute shear coefficient.
    pub shear_max: f64,
    /// Maximum absolute additive intensity shift.
    pub intensity_shift_max: f64,
    /// Standard deviation of additive Gaussian noise.
    pub noise_sigma: f64,
    /// Standard deviation of the Gaussian smoothing kernel, voxels.
    pub smooth_sigma: f64,
    /// Polynomial order of the multiplicative bias field (at most 3).
    pub bias_field_order: usize,
    /// Maximum absolute log-amplitude of the bias field.
    pub bias_field_amp: f64,
    pub seed: u64,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        Self {
            rotation_deg: 3.0,
            scale_range: (0.9, 1.1),
            shear_max: 0.1,
            intensity_shift_max: 0.1,
            noise_sigma: 0.05,
            smooth_sigma: 1.0,
            bias_field_order: 2,
            bias_field_amp: 0.3,
            seed: 0,
        }
    }
}

impl AugmentConfig {
    fn validate(&self) -> Result<()> {
        if self.rotation_deg < 0.0 {
            return Err(Error::AngleOutOfRange {
                angle: self.rotation_deg,
                max: 0.0,
            });
        }
        if !(self.scale_range.0 > 0.0 && self.scale_range.1 >= self.scale_range.0) {
            return Err(Error::FactorOutOfRange {
                value: self.scale_range.0,
                lo: 0.0,
                hi: self.scale_range.1,
            });
        }
        if self.noise_sigma < 0.0 {
            return Err(Error::NegativeSigma {
                sigma: self.noise_sigma,
            });
        }
        if self.smooth_sigma < 0.0 {
            return Err(Error::NegativeSigma {
                sigma: self.smooth_sigma,
            });
        }
        if self.bias_field_order > 3 {
            return Err(Error::OrderTooHigh {
                order: self.bias_field_order,
            });
        }
        Ok(())
    }
}

/// Applies transforms validated against an [`AugmentConfig`].
#[derive(Debug, Clone)]
pub struct Augmenter {
    cfg: AugmentConfig,
}

type Mat3 = [[f64; 3]; 3];

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            for (k, bk) in b.iter().enumerate() {
                out[i][j] += a[i][k] * bk[j];
            }
        }
    }
    out
}

fn mat_inverse(m: &Mat3) -> Mat3 {
    let det = m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0]);
    let inv_det = 1.0 / det;
    let mut out = [[0.0; 3]; 3];
    out[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
    out[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
    out[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
    out[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
    out[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
    out[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
    out[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
    out[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
    out[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
    out
}

fn rotation_matrix(angles_deg: [f64; 3]) -> Mat3 {
    let [a, b, c] = angles_deg.map(f64::to_radians);
    let rx = [
        [1.0, 0.0, 0.0],
        [0.0, a.cos(), -a.sin()],
        [0.0, a.sin(), a.cos()],
    ];
    let ry = [
        [b.cos(), 0.0, b.sin()],
        [0.0, 1.0, 0.0],
        [-b.sin(), 0.0, b.cos()],
    ];
    let rz = [
        [c.cos(), -c.sin(), 0.0],
        [c.sin(), c.cos(), 0.0],
        [0.0, 0.0, 1.0],
    ];
    mat_mul(&rz, &mat_mul(&ry, &rx))
}

fn scale_matrix(f: [f64; 3]) -> Mat3 {
    [[f[0], 0.0, 0.0], [0.0, f[1], 0.0], [0.0, 0.0, f[2]]]
}

fn shear_matrix(s: [f64; 3]) -> Mat3 {
    // Upper-triangular: xy, xz, yz couplings.
    [[1.0, s[0], s[1]], [0.0, 1.0, s[2]], [0.0, 0.0, 1.0]]
}

/// Lerp-nested trilinear sample; out-of-bounds corners read `fill`.
fn trilinear(g: &Grid3, p: [f64; 3], fill: f64) -> f64 {
    let [dx, dy, dz] = g.shape();
    let base = p.map(f64::floor);
    let frac = [p[0] - base[0], p[1] - base[1], p[2] - base[2]];
    let fetch = |ox: i64, oy: i64, oz: i64| -> f64 {
        let x = base[0] as i64 + ox;
        let y = base[1] as i64 + oy;
        let z = base[2] as i64 + oz;
        if x < 0 || y < 0 || z < 0 || x >= dx as i64 || y >= dy as i64 || z >= dz as i64 {
            fill
        } else {
            g.at(x as usize, y as usize, z as usize)
        }
    };
    let lerp = |a: f64, b: f64, f: f64| a + f * (b - a);
    let c00 = lerp(fetch(0, 0, 0), fetch(0, 0, 1), frac[2]);
    let c01 = lerp(fetch(0, 1, 0), fetch(0, 1, 1), frac[2]);
    let c10 = lerp(fetch(1, 0, 0), fetch(1, 0, 1), frac[2]);
    let c11 = lerp(fetch(1, 1, 0), fetch(1, 1, 1), frac[2]);
    let c0 = lerp(c00, c01, frac[1]);
    let c1 = lerp(c10, c11, frac[1]);
    lerp(c0, c1, frac[0])
}

/// Resample through the inverse of `forward` about the volume center.
fn affine_resample(v: &Volume, forward: &Mat3) -> Result<Volume> {
    let inv = mat_inverse(forward);
    let shape = v.shape();
    let center = shape.map(|d| (d as f64 - 1.0) / 2.0);
    let fill = v.grid().min();
    let mut out = Vec::with_capacity(v.len());
    for x in 0..shape[0] {
        for y in 0..shape[1] {
            for z in 0..shape[2] {
                let o = [
                    x as f64 - center[0],
                    y as f64 - center[1],
                    z as f64 - center[2],
                ];
                let p = [
                    inv[0][0] * o[0] + inv[0][1] * o[1] + inv[0][2] * o[2] + center[0],
                    inv[1][0] * o[0] + inv[1][1] * o[1] + inv[1][2] * o[2] + center[1],
                    inv[2][0] * o[0] + inv[2][1] * o[1] + inv[2][2] * o[2] + center[2],
                ];
                out.push(trilinear(v.grid(), p, fill));
            }
        }
    }
    v.with_grid(Grid3::new(shape, out)?)
}

fn require_unbounded(v: &Volume) -> Result<()> {
    if !v.domain().is_unbounded() {
        return Err(Error::DomainMismatch {
            expected: crate::volume::VoxelDomain::MriRaw,
            found: v.domain(),
        });
    }
    Ok(())
}

impl Augmenter {
    pub fn new(cfg: AugmentConfig) -> Result<Self> {
        cfg.validate()?;
        Ok(Self { cfg })
    }

    pub fn config(&self) -> &AugmentConfig {
        &self.cfg
    }

    /// Rotate about the center by per-axis angles (degrees).
    pub fn rotate(&self, v: &Volume, angles_deg: [f64; 3]) -> Result<Volume> {
        for &a in &angles_deg {
            if a.abs() > self.cfg.rotation_deg {
                return Err(Error::AngleOutOfRange {
                    angle: a,
                    max: self.cfg.rotation_deg,
                });
            }
        }
        affine_resample(v, &rotation_matrix(angles_deg))
    }

    /// Scale about the center by per-axis factors.
    pub fn scale(&self, v: &Volume, factors: [f64; 3]) -> Result<Volume> {
        let (lo, hi) = self.cfg.scale_range;
        for &f in &factors {
            if f < lo || f > hi {
                return Err(Error::FactorOutOfRange { value: f, lo, hi });
            }
        }
        affine_resample(v, &scale_matrix(factors))
    }

    /// Shear with coefficients (xy, xz, yz).
    pub fn shear(&self, v: &Volume, shear: [f64; 3]) -> Result<Volume> {
        for &s in &shear {
            if s.abs() > self.cfg.shear_max {
                return Err(Error::FactorOutOfRange {
                    value: s,
                    lo: -self.cfg.shear_max,
                    hi: self.cfg.shear_max,
                });
            }
        }
        affine_resample(v, &shear_matrix(shear))
    }

    /// Add a scalar to every voxel (unbounded domains only).
    pub fn intensity_shift(&self, v: &Volume, delta: f64) -> Result<Volume> {
        if delta.abs() > self.cfg.intensity_shift_max {
            return Err(Error::FactorOutOfRange {
                value: delta,
                lo: -self.cfg.intensity_shift_max,
                hi: self.cfg.intensity_shift_max,
            });
        }
        require_unbounded(v)?;
        v.with_grid(v.grid().map(|x| x + delta))
    }

    /// Add seeded i.i.d. Gaussian noise (unbounded domains only).
    pub fn gaussian_noise(&self, v: &Volume, sigma: f64, rng: &mut rng::Rng) -> Result<Volume> {
        if sigma < 0.0 {
            return Err(Error::NegativeSigma { sigma });
        }
        require_unbounded(v)?;
        let data = v
            .data()
            .iter()
            .map(|&x| x + sigma * rng.sample::<f64, _>(StandardNormal))
            .collect();
        v.with_grid(Grid3::new(v.shape(), data)?)
    }

    /// Separable Gaussian smoothing with a renormalized kernel of radius
    /// 3 sigma and replicate padding.
    pub fn gaussian_smooth(&self, v: &Volume, sigma: f64) -> Result<Volume> {
        if sigma < 0.0 {
            return Err(Error::NegativeSigma { sigma });
        }
        if sigma == 0.0 {
            return Ok(v.clone());
        }
        let radius = (3.0 * sigma).ceil() as usize;
        let mut kernel: Vec<f64> = (0..=2 * radius)
            .map(|i| {
                let d = i as f64 - radius as f64;
                (-d * d / (2.0 * sigma * sigma)).exp()
            })
            .collect();
        let sum: f64 = kernel.iter().sum();
        for k in &mut kernel {
            *k /= sum;
        }

        let [dx, dy, dz] = v.shape();
        let idx = |x: usize, y: usize, z: usize| (x * dy + y) * dz + z;
        let mut cur = v.data().to_vec();
        let mut next = vec![0.0; cur.len()];
        for axis in 0..3 {
            let dim = [dx, dy, dz][axis] as i64;
            for x in 0..dx {
                for y in 0..dy {
                    for z in 0..dz {
                        let pos = [x, y, z][axis] as i64;
                        let mut acc = 0.0;
                        for (k, &w) in kernel.iter().enumerate() {
                            let p = (pos + k as i64 - radius as i64).clamp(0, dim - 1);
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
        v.with_grid(Grid3::new(v.shape(), cur)?)
    }

    /// Multiply by exp(P) for a random polynomial P of the given order,
    /// scaled so max |P| equals `amplitude` (unbounded domains only).
    pub fn bias_field(
        &self,
        v: &Volume,
        order: usize,
        amplitude: f64,
        rng: &mut rng::Rng,
    ) -> Result<Volume> {
        if order > 3 {
            return Err(Error::OrderTooHigh { order });
        }
        require_unbounded(v)?;
        let field = bias_log_field(v.shape(), order, amplitude, rng);
        let data = v
            .data()
            .iter()
            .zip(&field)
            .map(|(&x, &p)| x * p.exp())
            .collect();
        v.with_grid(Grid3::new(v.shape(), data)?)
    }

    /// Randomized pipeline: one combined geometric resample (rotate, scale,
    /// shear), then bias field, intensity shift, smoothing, and noise on
    /// unbounded domains. Deterministic given the generator state.
    pub fn apply_random(&self, v: &Volume, rng: &mut rng::Rng) -> Result<Volume> {
        let c = &self.cfg;
        let angles = [
            rng.random_range(-c.rotation_deg..=c.rotation_deg),
            rng.random_range(-c.rotation_deg..=c.rotation_deg),
            rng.random_range(-c.rotation_deg..=c.rotation_deg),
        ];
        let factors = [
            rng.random_range(c.scale_range.0..=c.scale_range.1),
            rng.random_range(c.scale_range.0..=c.scale_range.1),
            rng.random_range(c.scale_range.0..=c.scale_range.1),
        ];
        let shears = [
            rng.random_range(-c.shear_max..=c.shear_max),
            rng.random_range(-c.shear_max..=c.shear_max),
            rng.random_range(-c.shear_max..=c.shear_max),
        ];
        let forward = mat_mul(
            &shear_matrix(shears),
            &mat_mul(&scale_matrix(factors), &rotation_matrix(angles)),
        );
        let mut out = affine_resample(v, &forward)?;
        if v.domain().is_unbounded() {
            out = self.bias_field(&out, c.bias_field_order, c.bias_field_amp, rng)?;
            let delta = rng.random_range(-c.intensity_shift_max..=c.intensity_shift_max);
            out = self.intensity_shift(&out, delta)?;
            out = self.gaussian_smooth(&out, c.smooth_sigma)?;
            out = self.gaussian_noise(&out, c.noise_sigma, rng)?;
        } else {
            out = self.gaussian_smooth(&out, c.smooth_sigma)?;
        }
        Ok(out)
    }
}

/// Random polynomial over normalized [-1, 1]³ coordinates with max |P|
/// scaled to `amplitude`.
fn bias_log_field(shape: [usize; 3], order: usize, amplitude: f64, rng: &mut rng::Rng) -> Vec<f64> {
    let mut exponents = Vec::new();
    for i in 0..=order {
        for j in 0..=order - i {
            for k in 0..=order - i - j {
                exponents.push((i as i32, j as i32, k as i32));
            }
        }
    }
    let coeffs: Vec<f64> = exponents
        .iter()
        .map(|_| rng.sample::<f64, _>(StandardNormal))
        .collect();

    let coord = |i: usize, d: usize| {
        if d <= 1 {
            0.0
        } else {
            2.0 * i as f64 / (d - 1) as f64 - 1.0
        }
    };
    let mut field = Vec::with_capacity(shape[0] * shape[1] * shape[2]);
    let mut max_abs = 0.0f64;
    for x in 0..shape[0] {
        for y in 0..shape[1] {
            for z in 0..shape[2] {
                let (u, v, w) = (coord(x, shape[0]), coord(y, shape[1]), coord(z, shape[2]));
                let mut p = 0.0;
                for (c, &(i, j, k)) in coeffs.iter().zip(&exponents) {
                    p += c * u.powi(i) * v.powi(j) * w.powi(k);
                }
                max_abs = max_abs.max(p.abs());
                field.push(p);
            }
        }
    }
    let scale = if max_abs > 0.0 {
        amplitude / max_abs
    } else {
        0.0
    };
    for p in &mut field {
        *p *= scale;
    }
    field
}
