//! Noise schedules and variable-step respacing.
//!
//! A single base schedule (1000 linear betas by default) is respaced to any
//! smaller step count by selecting evenly spaced indices and matching the
//! cumulative signal retention ᾱ at the selected points. This preserves the
//! marginal noise level at each fraction of the trajectory, which is what
//! lets one trained model sample correctly at many step counts.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const DEFAULT_BASE_STEPS: usize = 1000;
pub const DEFAULT_BETA_START: f64 = 1e-4;
pub const DEFAULT_BETA_END: f64 = 0.02;

/// Precomputed per-step diffusion quantities.
///
/// All vectors have length `t_count`. `alpha_bars` is strictly decreasing
/// in (0, 1); `posterior_variance[0]` is exactly zero, so its log is stored
/// clipped (index 0 borrows the value at index 1).
#[derive(Debug, Clone)]
pub struct NoiseSchedule {
    t_count: usize,
    betas: Vec<f64>,
    alphas: Vec<f64>,
    alpha_bars: Vec<f64>,
    posterior_variance: Vec<f64>,
    posterior_mean_coef1: Vec<f64>,
    posterior_mean_coef2: Vec<f64>,
    log_beta: Vec<f64>,
    log_posterior_variance_clipped: Vec<f64>,
}

impl NoiseSchedule {
    /// Build every derived quantity from betas and their cumulative ᾱ.
    fn derive(betas: Vec<f64>, alpha_bars: Vec<f64>) -> Self {
        let t_count = betas.len();
        let alphas: Vec<f64> = betas.iter().map(|b| 1.0 - b).collect();

        let mut posterior_variance = Vec::with_capacity(t_count);
        let mut coef1 = Vec::with_capacity(t_count);
        let mut coef2 = Vec::with_capacity(t_count);
        for t in 0..t_count {
            let ab_prev = if t == 0 { 1.0 } else { alpha_bars[t - 1] };
            let ab = alpha_bars[t];
            posterior_variance.push(betas[t] * (1.0 - ab_prev) / (1.0 - ab));
            coef1.push(betas[t] * ab_prev.sqrt() / (1.0 - ab));
            coef2.push(alphas[t].sqrt() * (1.0 - ab_prev) / (1.0 - ab));
        }

        let log_beta: Vec<f64> = betas.iter().map(|b| b.ln()).collect();
        // posterior_variance[0] is zero; clip its log slot with the t=1
        // value (or log beta for a one-step schedule).
        let clip0 = if t_count > 1 {
            posterior_variance[1].ln()
        } else {
            log_beta[0]
        };
        let mut log_pv = Vec::with_capacity(t_count);
        log_pv.push(clip0);
        log_pv.extend(posterior_variance[1..].iter().map(|v| v.ln()));

        Self {
            t_count,
            betas,
            alphas,
            alpha_bars,
            posterior_variance,
            posterior_mean_coef1: coef1,
            posterior_mean_coef2: coef2,
            log_beta,
            log_posterior_variance_clipped: log_pv,
        }
    }

    pub fn t_count(&self) -> usize {
        self.t_count
    }

    pub fn betas(&self) -> &[f64] {
        &self.betas
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    pub fn alpha_bars(&self) -> &[f64] {
        &self.alpha_bars
    }

    pub fn posterior_variance(&self) -> &[f64] {
        &self.posterior_variance
    }

    pub fn posterior_mean_coef1(&self) -> &[f64] {
        &self.posterior_mean_coef1
    }

    pub fn posterior_mean_coef2(&self) -> &[f64] {
        &self.posterior_mean_coef2
    }

    pub fn log_beta(&self) -> &[f64] {
        &self.log_beta
    }

    pub fn log_posterior_variance_clipped(&self) -> &[f64] {
        &self.log_posterior_variance_clipped
    }

    /// ᾱ at step `t−1`, defined as 1 for `t = 0`.
    pub fn alpha_bar_prev(&self, t: usize) -> f64 {
        if t == 0 {
            1.0
        } else {
            self.alpha_bars[t - 1]
        }
    }

    pub fn check_step(&self, t: usize) -> Result<()> {
        if t >= self.t_count {
            return Err(Error::StepOutOfRange {
                t,
                len: self.t_count,
            });
        }
        Ok(())
    }
}

/// Linear beta ramp from `beta_start` to `beta_end`, endpoints included.
pub fn linear_base_schedule(
    t_base: usize,
    beta_start: f64,
    beta_end: f64,
) -> Result<NoiseSchedule> {
    if t_base == 0 {
        return Err(Error::ZeroSteps);
    }
    if !(beta_start > 0.0 && beta_start <= beta_end && beta_end < 1.0) {
        return Err(Error::InvalidBetaRange {
            beta_start,
            beta_end,
        });
    }
    let betas: Vec<f64> = if t_base == 1 {
        vec![beta_start]
    } else {
        (0..t_base)
            .map(|i| {
                let f = i as f64 / (t_base - 1) as f64;
                beta_start + f * (beta_end - beta_start)
            })
            .collect()
    };
    let mut alpha_bars = Vec::with_capacity(t_base);
    let mut prod = 1.0;
    for &b in &betas {
        prod *= 1.0 - b;
        alpha_bars.push(prod);
    }
    Ok(NoiseSchedule::derive(betas, alpha_bars))
}

/// Default base: 1000 steps, betas in [1e-4, 0.02].
pub fn default_base_schedule() -> NoiseSchedule {
    linear_base_schedule(DEFAULT_BASE_STEPS, DEFAULT_BETA_START, DEFAULT_BETA_END)
        .expect("default beta range is valid")
}

/// Respace `base` to `t` steps by ᾱ matching.
///
/// Selects `t` indices evenly spaced over `[0, base.T−1]`, always including
/// the last index, takes the base ᾱ at those indices verbatim, and derives
/// the new betas from consecutive ᾱ ratios: `β_k = 1 − ᾱ_k/ᾱ_{k−1}` with
/// `ᾱ_{−1} = 1`. The final ᾱ of the result is bit-identical to the base's.
pub fn respace(base: &NoiseSchedule, t: usize) -> Result<NoiseSchedule> {
    if t == 0 {
        return Err(Error::ZeroSteps);
    }
    if t > base.t_count {
        return Err(Error::StepCountTooLarge {
            requested: t,
            base: base.t_count,
        });
    }
    let last = base.t_count - 1;
    let indices: Vec<usize> = if t == 1 {
        vec![last]
    } else {
        (0..t)
            .map(|k| ((k as f64 * last as f64) / (t - 1) as f64).round() as usize)
            .collect()
    };

    let alpha_bars: Vec<f64> = indices.iter().map(|&i| base.alpha_bars[i]).collect();
    let mut betas = Vec::with_capacity(t);
    let mut prev = 1.0;
    for &ab in &alpha_bars {
        betas.push(1.0 - ab / prev);
        prev = ab;
    }
    Ok(NoiseSchedule::derive(betas, alpha_bars))
}

/// Ordered set of step counts a model was trained to support.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct StepSet {
    values: Vec<usize>,
}

impl StepSet {
    pub fn new(values: Vec<usize>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::EmptyStepSet);
        }
        if values.contains(&0) || values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::UnsortedStepSet { values });
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[usize] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn min(&self) -> usize {
        self.values[0]
    }

    pub fn max(&self) -> usize {
        *self.values.last().unwrap()
    }

    pub fn contains(&self, t: usize) -> bool {
        self.values.binary_search(&t).is_ok()
    }
}

/// The 17 step counts used for variable-step training.
pub fn default_step_set() -> StepSet {
    StepSet::new(vec![
        5, 10, 15, 20, 25, 35, 50, 75, 100, 125, 150, 175, 200, 225, 250, 275, 300,
    ])
    .expect("default step set is valid")
}

/// JSON-friendly dump of a schedule (used by the CLI).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScheduleDump {
    pub t_count: usize,
    pub betas: Vec<f64>,
    pub alpha_bars: Vec<f64>,
}

impl From<&NoiseSchedule> for ScheduleDump {
    fn from(s: &NoiseSchedule) -> Self {
        Self {
            t_count: s.t_count(),
            betas: s.betas().to_vec(),
            alpha_bars: s.alpha_bars().to_vec(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_step_schedule_matches_hand_cumprod() {
        let s = linear_base_schedule(2, 0.1, 0.2).unwrap();
        assert_eq!(s.betas(), &[0.1, 0.2]);
        assert!((s.alpha_bars()[0] - 0.9).abs() < 1e-15);
        assert!((s.alpha_bars()[1] - 0.72).abs() < 1e-15);
    }

    #[test]
    fn single_step_schedule() {
        let s = linear_base_schedule(1, 0.1, 0.1).unwrap();
        assert_eq!(s.t_count(), 1);
        assert!((s.alpha_bars()[0] - 0.9).abs() < 1e-15);
        assert_eq!(s.posterior_variance()[0], 0.0);
    }

    #[test]
    fn rejects_beta_out_of_range() {
        assert!(matches!(
            linear_base_schedule(10, 0.1, 1.2),
            Err(Error::InvalidBetaRange { .. })
        ));
        assert!(matches!(
            linear_base_schedule(10, 0.0, 0.5),
            Err(Error::InvalidBetaRange { .. })
        ));
    }

    #[test]
    fn identity_respacing_preserves_alpha_bars() {
        let base = linear_base_schedule(100, 1e-4, 0.02).unwrap();
        let same = respace(&base, 100).unwrap();
        for (a, b) in base.alpha_bars().iter().zip(same.alpha_bars()) {
            assert!((a - b).abs() <= 1e-15);
        }
    }

    #[test]
    fn respaced_alpha_bars_match_cumprod_oracle() {
        let base = default_base_schedule();
        let s = respace(&base, 25).unwrap();
        assert_eq!(s.t_count(), 25);
        // Recompute ᾱ by cumulative product of the derived betas.
        let mut prod = 1.0;
        for t in 0..25 {
            prod *= 1.0 - s.betas()[t];
            let rel = (prod - s.alpha_bars()[t]).abs() / s.alpha_bars()[t];
            assert!(rel < 1e-12, "t={t} rel={rel}");
        }
    }

    #[test]
    fn respacing_too_many_steps_fails() {
        let base = default_base_schedule();
        assert!(matches!(
            respace(&base, 1001),
            Err(Error::StepCountTooLarge { .. })
        ));
    }

    #[test]
    fn respacing_hits_final_alpha_bar_exactly() {
        let base = default_base_schedule();
        for &t in default_step_set().values() {
            let s = respace(&base, t).unwrap();
            assert_eq!(
                s.alpha_bars().last().unwrap().to_bits(),
                base.alpha_bars().last().unwrap().to_bits(),
                "T={t}"
            );
            assert!(s.alpha_bars().windows(2).all(|w| w[0] > w[1]), "T={t}");
        }
    }

    #[test]
    fn posterior_variance_matches_direct_formula() {
        let base = default_base_schedule();
        for sched in [&respace(&base, 25).unwrap(), &base] {
            for t in 0..sched.t_count() {
                let direct = sched.betas()[t] * (1.0 - sched.alpha_bar_prev(t))
                    / (1.0 - sched.alpha_bars()[t]);
                assert_eq!(direct.to_bits(), sched.posterior_variance()[t].to_bits());
                assert!(sched.posterior_variance()[t] <= sched.betas()[t] + 1e-15);
            }
            assert_eq!(sched.posterior_variance()[0], 0.0);
        }
    }

    #[test]
    fn default_step_set_is_the_trained_family() {
        let set = default_step_set();
        assert_eq!(set.len(), 17);
        assert_eq!(set.min(), 5);
        assert_eq!(set.max(), 300);
        assert!(set.values().windows(2).all(|w| w[0] < w[1]));
    }
}
