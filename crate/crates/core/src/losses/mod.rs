//! Training losses: pointwise errors, structural similarity, feature-space
//! L1, the two composite objectives, and the cosine learning-rate schedule.

mod afp;
mod ssim;

pub use afp::{afp, FeatureExtractor, IdentityExtractor, RandomConvExtractor};
pub use ssim::{ms_ssim3, ssim3, DEFAULT_WINDOW};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::Grid3;

/// Nominal dynamic range of [-1, 1] data; callers override for HU.
pub const DEFAULT_DATA_RANGE: f64 = 2.0;

/// Training phase a set of loss weights applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossPhase {
    BratsSinglePhase,
    SynthradPhase1,
    SynthradPhase2,
}

/// Weights of the composite objectives.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LossWeights {
    /// Variational-bound weight.
    pub lambda1: f64,
    /// Feature-loss weight (fine-tuning phase).
    pub lambda2: f64,
    pub phase: LossPhase,
    /// Weight of the squared variance-output penalty (phase 1 only).
    pub var_penalty: f64,
}

impl LossWeights {
    pub fn brats() -> Self {
        Self {
            lambda1: 0.001,
            lambda2: 0.2,
            phase: LossPhase::BratsSinglePhase,
            var_penalty: 0.0001,
        }
    }

    pub fn synthrad_phase1() -> Self {
        Self {
            phase: LossPhase::SynthradPhase1,
            ..Self::brats()
        }
    }

    pub fn synthrad_phase2() -> Self {
        Self {
            phase: LossPhase::SynthradPhase2,
            ..Self::brats()
        }
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self::brats()
    }
}

/// Named loss components plus their weighted total. Only the components a
/// composite actually uses are present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct LossReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim_loss: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub vlb: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub afp: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub var_penalty: Option<f64>,
    pub total: f64,
}

/// Mean absolute error.
pub fn mae(a: &Grid3, b: &Grid3) -> Result<f64> {
    a.check_same_shape(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y).abs())
        .sum();
    Ok(sum / a.len() as f64)
}

/// Mean squared error.
pub fn mse(a: &Grid3, b: &Grid3) -> Result<f64> {
    a.check_same_shape(b)?;
    let sum: f64 = a
        .data()
        .iter()
        .zip(b.data())
        .map(|(x, y)| (x - y) * (x - y))
        .sum();
    Ok(sum / a.len() as f64)
}

/// Single-phase composite: MAE + MSE + (1 − SSIM) + λ₁·VLB.
pub fn composite_brats(
    x0_hat: &Grid3,
    x0: &Grid3,
    vlb: f64,
    w: &LossWeights,
) -> Result<LossReport> {
    if w.phase != LossPhase::BratsSinglePhase {
        return Err(Error::PhaseMismatch {
            expected: "brats_single_phase",
            found: format!("{:?}", w.phase),
        });
    }
    let mae_v = mae(x0_hat, x0)?;
    let mse_v = mse(x0_hat, x0)?;
    let ssim_loss = 1.0 - ssim3(x0_hat, x0, DEFAULT_WINDOW, DEFAULT_DATA_RANGE)?;
    Ok(LossReport {
        mae: Some(mae_v),
        mse: Some(mse_v),
        ssim_loss: Some(ssim_loss),
        vlb: Some(vlb),
        total: mae_v + mse_v + ssim_loss + w.lambda1 * vlb,
        ..LossReport::default()
    })
}

/// Two-phase composite. Phase 1: MAE + var_penalty·mean(v_raw²) + λ₁·VLB.
/// Phase 2: MAE + λ₂·AFP + λ₁·VLB.
pub fn composite_synthrad(
    x0_hat: &Grid3,
    x0: &Grid3,
    vlb: f64,
    v_raw: &Grid3,
    w: &LossWeights,
    extractor: &dyn FeatureExtractor,
) -> Result<LossReport> {
    let mae_v = mae(x0_hat, x0)?;
    match w.phase {
        LossPhase::SynthradPhase1 => {
            x0_hat.check_same_shape(v_raw)?;
            let pen = v_raw.data().iter().map(|v| v * v).sum::<f64>() / v_raw.len() as f64;
            Ok(LossReport {
                mae: Some(mae_v),
                var_penalty: Some(pen),
                vlb: Some(vlb),
                total: mae_v + w.var_penalty * pen + w.lambda1 * vlb,
                ..LossReport::default()
            })
        }
        LossPhase::SynthradPhase2 => {
            let afp_v = afp(x0_hat, x0, extractor)?;
            Ok(LossReport {
                mae: Some(mae_v),
                afp: Some(afp_v),
                vlb: Some(vlb),
                total: mae_v + w.lambda2 * afp_v + w.lambda1 * vlb,
                ..LossReport::default()
            })
        }
        LossPhase::BratsSinglePhase => Err(Error::PhaseMismatch {
            expected: "synthrad_phase1 or synthrad_phase2",
            found: format!("{:?}", w.phase),
        }),
    }
}

/// Cosine learning-rate decay from `lr0` at epoch 0 to `lr_min` at
/// `total_epochs`. Endpoints are exact.
pub fn cosine_lr(epoch: usize, total_epochs: usize, lr0: f64, lr_min: f64) -> Result<f64> {
    if epoch > total_epochs {
        return Err(Error::EpochOutOfRange {
            epoch,
            total: total_epochs,
        });
    }
    if total_epochs == 0 {
        return Ok(lr0);
    }
    let w = 0.5 * (1.0 + (std::f64::consts::PI * epoch as f64 / total_epochs as f64).cos());
    Ok(lr0 * w + lr_min * (1.0 - w))
}
