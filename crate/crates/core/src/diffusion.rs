//! Forward diffusion, reverse sampling with learned variance, and the
//! variational-bound term.
//!
//! The reverse step predicts x̃₀ from the model's noise estimate, forms the
//! posterior mean, and draws the step variance from a log-space
//! interpolation between β_t and the clipped posterior variance controlled
//! by the model's variance output `v_raw` in [-1, 1].

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::denoiser::Denoiser;
use crate::error::{Error, Result};
use crate::rng;
use crate::schedule::NoiseSchedule;
use crate::volume::Grid3;

/// One denoiser evaluation: predicted noise and the raw variance
/// interpolation coefficient. `v_raw` is clamped to [-1, 1] on
/// construction.
#[derive(Debug, Clone)]
pub struct ModelOutput {
    pub eps_hat: Grid3,
    pub v_raw: Grid3,
}

impl ModelOutput {
    pub fn new(eps_hat: Grid3, v_raw: Grid3) -> Result<Self> {
        eps_hat.check_same_shape(&v_raw)?;
        Ok(Self {
            eps_hat,
            v_raw: v_raw.map(|v| v.clamp(-1.0, 1.0)),
        })
    }
}

/// Sampler settings. `t` must equal the step count of the schedule passed
/// to [`sample`].
#[derive(Debug, Clone)]
pub struct SamplerConfig {
    pub t: usize,
    pub clip_denoised: bool,
    pub clip_range: (f64, f64),
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            t: 25,
            clip_denoised: true,
            clip_range: (-1.0, 1.0),
            seed: 0,
        }
    }
}

impl SamplerConfig {
    fn validate(&self, s: &NoiseSchedule) -> Result<()> {
        if self.t != s.t_count() {
            return Err(Error::SamplerConfigMismatch {
                cfg_t: self.t,
                schedule_t: s.t_count(),
            });
        }
        if self.clip_range.0 >= self.clip_range.1 {
            return Err(Error::InvalidClipRange {
                lo: self.clip_range.0,
                hi: self.clip_range.1,
            });
        }
        Ok(())
    }
}

/// Forward process: x_t = √ᾱ_t·x₀ + √(1−ᾱ_t)·ε.
pub fn q_sample(x0: &Grid3, t: usize, noise: &Grid3, s: &NoiseSchedule) -> Result<Grid3> {
    s.check_step(t)?;
    let ab = s.alpha_bars()[t];
    let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
    x0.zip(noise, |x, n| sa * x + sb * n)
}

/// Posterior q(x_{t−1} | x_t, x₀): mean grid and scalar variance.
pub fn posterior(x0: &Grid3, x_t: &Grid3, t: usize, s: &NoiseSchedule) -> Result<(Grid3, f64)> {
    s.check_step(t)?;
    let c1 = s.posterior_mean_coef1()[t];
    let c2 = s.posterior_mean_coef2()[t];
    let mean = x0.zip(x_t, |a, b| c1 * a + c2 * b)?;
    Ok((mean, s.posterior_variance()[t]))
}

/// Invert the forward process: x̃₀ = (x_t − √(1−ᾱ_t)·ε̂)/√ᾱ_t, with an
/// optional clamp.
pub fn predict_x0_from_eps(
    x_t: &Grid3,
    t: usize,
    eps_hat: &Grid3,
    s: &NoiseSchedule,
    clip: Option<(f64, f64)>,
) -> Result<Grid3> {
    s.check_step(t)?;
    let ab = s.alpha_bars()[t];
    let (sa, sb) = (ab.sqrt(), (1.0 - ab).sqrt());
    let x0 = x_t.zip(eps_hat, |x, e| (x - sb * e) / sa)?;
    Ok(match clip {
        Some((lo, hi)) => x0.map(|v| v.clamp(lo, hi)),
        None => x0,
    })
}

/// Per-element log variance: f·log β_t + (1−f)·log β̃_t(clipped), with
/// f = (v_raw+1)/2.
pub fn model_variance(v_raw: &Grid3, t: usize, s: &NoiseSchedule) -> Result<Grid3> {
    s.check_step(t)?;
    let lo = s.log_posterior_variance_clipped()[t];
    let hi = s.log_beta()[t];
    Ok(v_raw.map(|v| {
        let f = ((v + 1.0) / 2.0).clamp(0.0, 1.0);
        f * hi + (1.0 - f) * lo
    }))
}

/// One reverse step x_t → x_{t−1}. Deterministic at t = 0.
pub fn p_sample_step(
    out: &ModelOutput,
    x_t: &Grid3,
    t: usize,
    s: &NoiseSchedule,
    rng: &mut rng::Rng,
    cfg: &SamplerConfig,
) -> Result<Grid3> {
    s.check_step(t)?;
    x_t.check_same_shape(&out.eps_hat)?;
    let clip = if cfg.clip_denoised {
        Some(cfg.clip_range)
    } else {
        None
    };
    let x0_hat = predict_x0_from_eps(x_t, t, &out.eps_hat, s, clip)?;
    let (mean, _) = posterior(&x0_hat, x_t, t, s)?;
    if t == 0 {
        return Ok(mean);
    }
    let log_var = model_variance(&out.v_raw, t, s)?;
    let mut prev = mean.into_data();
    for (i, v) in prev.iter_mut().enumerate() {
        let z: f64 = rng.sample(StandardNormal);
        *v += (0.5 * log_var.data()[i]).exp() * z;
    }
    Grid3::new(x_t.shape(), prev)
}

/// Full reverse chain from standard normal noise, driving `denoiser` with
/// the step index, the normalized position t/T, and the conditioning
/// grids. The generator is derived from `cfg.seed`; runs with identical
/// configs are bit-reproducible.
pub fn sample(
    denoiser: &dyn Denoiser,
    condition: Option<&[Grid3]>,
    shape: [usize; 3],
    cfg: &SamplerConfig,
    s: &NoiseSchedule,
) -> Result<Grid3> {
    let mut r = rng::master(cfg.seed);
    sample_with_rng(denoiser, condition, shape, cfg, s, &mut r)
}

/// As [`sample`] but drawing from a caller-provided generator, so tiled
/// runs can give each window an independent substream.
pub fn sample_with_rng(
    denoiser: &dyn Denoiser,
    condition: Option<&[Grid3]>,
    shape: [usize; 3],
    cfg: &SamplerConfig,
    s: &NoiseSchedule,
    rng: &mut rng::Rng,
) -> Result<Grid3> {
    cfg.validate(s)?;
    if let Some(cond) = condition {
        for c in cond {
            if c.shape() != shape {
                return Err(Error::ShapeMismatch {
                    lhs: shape,
                    rhs: c.shape(),
                });
            }
        }
    }
    let n = shape[0] * shape[1] * shape[2];
    let mut x = Grid3::new(
        shape,
        (0..n)
            .map(|_| rng.sample::<f64, _>(StandardNormal))
            .collect(),
    )?;
    let t_total = s.t_count();
    for t in (0..t_total).rev() {
        let t_norm = t as f64 / t_total as f64;
        let out = denoiser.denoise(&x, t_norm, t, s, condition)?;
        x = p_sample_step(&out, &x, t, s, rng, cfg)?;
    }
    Ok(x)
}

/// Variational-bound term in nats per element.
///
/// For t > 0 this is the mean KL between the true posterior
/// q(x_{t−1}|x_t,x₀) and the model's Gaussian; at t = 0 it is the Gaussian
/// negative log-likelihood of x₀ under the model. The model mean is formed
/// from the unclipped x̃₀ so matched moments give exactly zero.
pub fn vlb_term(
    x0: &Grid3,
    x_t: &Grid3,
    t: usize,
    out: &ModelOutput,
    s: &NoiseSchedule,
) -> Result<f64> {
    s.check_step(t)?;
    x0.check_same_shape(x_t)?;
    x0.check_same_shape(&out.eps_hat)?;

    let x0_hat = predict_x0_from_eps(x_t, t, &out.eps_hat, s, None)?;
    let (model_mean, _) = posterior(&x0_hat, x_t, t, s)?;
    let model_log_var = model_variance(&out.v_raw, t, s)?;

    let n = x0.len() as f64;
    if t == 0 {
        // Continuous Gaussian log-likelihood of x0 under the model.
        let mut nll = 0.0;
        for i in 0..x0.len() {
            let lv = model_log_var.data()[i];
            let d = x0.data()[i] - model_mean.data()[i];
            nll += 0.5 * (lv + std::f64::consts::TAU.ln()) + d * d / (2.0 * lv.exp());
        }
        return Ok(nll / n);
    }

    let (true_mean, true_var) = posterior(x0, x_t, t, s)?;
    let log_true_var = true_var.ln();
    let mut kl = 0.0;
    for i in 0..x0.len() {
        let lv2 = model_log_var.data()[i];
        let d = true_mean.data()[i] - model_mean.data()[i];
        kl += 0.5 * (lv2 - log_true_var) + (true_var + d * d) / (2.0 * lv2.exp()) - 0.5;
    }
    Ok(kl / n)
}

/// Closed-form KL between two scalar Gaussians, in nats.
pub fn gaussian_kl(mean1: f64, var1: f64, mean2: f64, var2: f64) -> f64 {
    0.5 * (var2.ln() - var1.ln()) + (var1 + (mean1 - mean2).powi(2)) / (2.0 * var2) - 0.5
}
