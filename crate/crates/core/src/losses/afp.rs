//! Feature-space L1 loss with a pluggable extractor.
//!
//! The real loss uses pretrained segmentation features; here the default
//! extractor is a fixed-seed two-layer random convolutional pyramid, which
//! keeps the loss deterministic and dependency-free while preserving the
//! contract for real extractors.

use rand::Rng as _;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::losses::ssim::avg_pool2;
use crate::rng;
use crate::volume::Grid3;

/// Maps a grid to one or more feature grids. Implementations must be
/// deterministic.
pub trait FeatureExtractor: Sync {
    fn features(&self, g: &Grid3) -> Vec<Grid3>;
}

/// Returns the input unchanged; makes the loss degenerate to plain MAE.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityExtractor;

impl FeatureExtractor for IdentityExtractor {
    fn features(&self, g: &Grid3) -> Vec<Grid3> {
        vec![g.clone()]
    }
}

const DEFAULT_SEED: u64 = 0x4146_5021;
const CHANNELS: usize = 4;

/// Fixed-weight random convolutional feature pyramid.
///
/// Layer 1: four 3x3x3 kernels with replicate padding and ReLU, full
/// resolution. Layer 2: four 3x3x3 kernels over the 2x-pooled layer-1
/// maps, ReLU, half resolution. Weights are drawn once from the seed.
pub struct RandomConvExtractor {
    layer1: Vec<Vec<f64>>,
    layer2: Vec<Vec<Vec<f64>>>,
}

impl RandomConvExtractor {
    pub fn seeded(seed: u64) -> Self {
        let mut r = rng::master(seed);
        let scale1 = (27.0f64).sqrt().recip();
        let layer1 = (0..CHANNELS)
            .map(|_| {
                (0..27)
                    .map(|_| scale1 * r.sample::<f64, _>(StandardNormal))
                    .collect()
            })
            .collect();
        let scale2 = (27.0 * CHANNELS as f64).sqrt().recip();
        let layer2 = (0..CHANNELS)
            .map(|_| {
                (0..CHANNELS)
                    .map(|_| {
                        (0..27)
                            .map(|_| scale2 * r.sample::<f64, _>(StandardNormal))
                            .collect()
                    })
                    .collect()
            })
            .collect();
        Self { layer1, layer2 }
    }
}

impl Default for RandomConvExtractor {
    fn default() -> Self {
        Self::seeded(DEFAULT_SEED)
    }
}

/// 3x3x3 correlation with replicate padding.
fn conv3(g: &Grid3, kernel: &[f64]) -> Grid3 {
    let [dx, dy, dz] = g.shape();
    let mut out = Vec::with_capacity(g.len());
    for x in 0..dx {
        for y in 0..dy {
            for z in 0..dz {
                let mut acc = 0.0;
                let mut k = 0;
                for i in -1i64..=1 {
                    for j in -1i64..=1 {
                        for l in -1i64..=1 {
                            let cx = (x as i64 + i).clamp(0, dx as i64 - 1) as usize;
                            let cy = (y as i64 + j).clamp(0, dy as i64 - 1) as usize;
                            let cz = (z as i64 + l).clamp(0, dz as i64 - 1) as usize;
                            acc += kernel[k] * g.at(cx, cy, cz);
                            k += 1;
                        }
                    }
                }
                out.push(acc);
            }
        }
    }
    Grid3::new(g.shape(), out).expect("shape preserved")
}

impl FeatureExtractor for RandomConvExtractor {
    fn features(&self, g: &Grid3) -> Vec<Grid3> {
        let l1: Vec<Grid3> = self
            .layer1
            .iter()
            .map(|k| conv3(g, k).map(|v| v.max(0.0)))
            .collect();
        let mut feats = l1.clone();
        // Layer 2 needs at least one full pooling block per axis.
        if g.shape().iter().all(|&d| d >= 2) {
            let pooled: Vec<Grid3> = l1.iter().map(avg_pool2).collect();
            for kernels in &self.layer2 {
                let mut acc = Grid3::zeros(pooled[0].shape()).expect("nonempty");
                for (c, k) in kernels.iter().enumerate() {
                    let conv = conv3(&pooled[c], k);
                    acc = acc.zip(&conv, |a, b| a + b).expect("same shape");
                }
                feats.push(acc.map(|v| v.max(0.0)));
            }
        }
        feats
    }
}

/// Mean absolute difference pooled across every element of every feature
/// grid of the two inputs.
pub fn afp(a: &Grid3, b: &Grid3, extractor: &dyn FeatureExtractor) -> Result<f64> {
    a.check_same_shape(b)?;
    let fa = extractor.features(a);
    let fb = extractor.features(b);
    if fa.is_empty() || fa.len() != fb.len() {
        return Err(Error::ExtractorShapeMismatch {
            reason: format!("{} feature grids vs {}", fa.len(), fb.len()),
        });
    }
    let mut sum = 0.0;
    let mut count = 0usize;
    for (ga, gb) in fa.iter().zip(&fb) {
        if ga.shape() != gb.shape() {
            return Err(Error::ExtractorShapeMismatch {
                reason: format!("feature shapes {:?} vs {:?}", ga.shape(), gb.shape()),
            });
        }
        for (x, y) in ga.data().iter().zip(gb.data()) {
            sum += (x - y).abs();
            count += 1;
        }
    }
    Ok(sum / count as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::losses::mae;

    fn random_grid(shape: [usize; 3], seed: u64) -> Grid3 {
        let mut r = rng::master(seed);
        let n = shape[0] * shape[1] * shape[2];
        Grid3::new(
            shape,
            (0..n).map(|_| r.sample::<f64, _>(StandardNormal)).collect(),
        )
        .unwrap()
    }

    #[test]
    fn identical_inputs_give_zero() {
        let g = random_grid([6, 6, 6], 1);
        let v = afp(&g, &g, &RandomConvExtractor::default()).unwrap();
        assert_eq!(v, 0.0);
    }

    #[test]
    fn identity_extractor_equals_mae() {
        let a = random_grid([5, 5, 5], 2);
        let b = random_grid([5, 5, 5], 3);
        let v = afp(&a, &b, &IdentityExtractor).unwrap();
        let m = mae(&a, &b).unwrap();
        assert!((v - m).abs() <= 1e-12);
    }

    #[test]
    fn default_extractor_matches_direct_recomputation() {
        let a = random_grid([6, 6, 6], 4);
        let b = a.map(|v| v * 0.8 - 0.1);
        let ex = RandomConvExtractor::default();
        let got = afp(&a, &b, &ex).unwrap();

        let fa = ex.features(&a);
        let fb = ex.features(&b);
        let mut sum = 0.0;
        let mut n = 0usize;
        for (ga, gb) in fa.iter().zip(&fb) {
            for (x, y) in ga.data().iter().zip(gb.data()) {
                sum += (x - y).abs();
                n += 1;
            }
        }
        assert!((got - sum / n as f64).abs() <= 1e-15);
        // Pyramid: 4 full-res + 4 half-res maps.
        assert_eq!(fa.len(), 8);
        assert_eq!(fa[0].shape(), [6, 6, 6]);
        assert_eq!(fa[4].shape(), [3, 3, 3]);
    }

    #[test]
    fn shape_dependent_extractor_is_rejected() {
        // Produces differently shaped features for the two inputs.
        struct Flaky;
        impl FeatureExtractor for Flaky {
            fn features(&self, g: &Grid3) -> Vec<Grid3> {
                if g.data()[0] > 0.0 {
                    vec![g.clone(), g.clone()]
                } else {
                    vec![g.clone()]
                }
            }
        }
        let mut a = random_grid([3, 3, 3], 6);
        a.data_mut()[0] = 1.0;
        let mut b = a.clone();
        b.data_mut()[0] = -1.0;
        assert!(matches!(
            afp(&a, &b, &Flaky),
            Err(crate::error::Error::ExtractorShapeMismatch { .. })
        ));
    }

    #[test]
    fn extractor_is_deterministic() {
        let g = random_grid([4, 4, 4], 5);
        let f1 = RandomConvExtractor::default().features(&g);
        let f2 = RandomConvExtractor::default().features(&g);
        for (a, b) in f1.iter().zip(&f2) {
            assert_eq!(a.data(), b.data());
        }
    }
}
