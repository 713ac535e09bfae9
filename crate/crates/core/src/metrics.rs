//! Evaluation metrics: intensity similarity (MAE, MSE/RMSE, PSNR, SSIM,
//! MS-SSIM) and geometric consistency (Dice, HD95, NSD) on caller-provided
//! masks.
//!
//! Surface distances use boundary voxels under 6-connectivity and an exact
//! Euclidean distance transform (separable parabola envelopes), scaled by
//! the voxel spacing, so they run in linear time rather than the quadratic
//! pairwise scan used as the test oracle.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::losses;
use crate::normalize::percentile;
use crate::volume::{Mask, Volume, VoxelDomain};

/// How the two directed surface-distance sets combine into HD95.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Hd95Convention {
    /// 95th percentile of both directed sets pooled together.
    PooledSymmetric,
    /// Maximum of the per-direction 95th percentiles.
    MaxOfDirected,
}

#[derive(Debug, Clone)]
pub struct MetricsConfig {
    /// Dynamic range for PSNR/SSIM; derived from the domain when `None`.
    pub data_range: Option<f64>,
    pub ssim_window: usize,
    pub ms_ssim_scales: usize,
    pub nsd_tolerance_mm: f64,
    pub hd95_convention: Hd95Convention,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            data_range: None,
            ssim_window: losses::DEFAULT_WINDOW,
            ms_ssim_scales: 3,
            nsd_tolerance_mm: 1.0,
            hd95_convention: Hd95Convention::PooledSymmetric,
        }
    }
}

/// Only the metrics that were actually computed are present.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mae_hu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rmse: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub psnr_db: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub ms_ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dice: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hd95_mm: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub nsd: Option<f64>,
}

fn check_pair(pred: &Volume, gt: &Volume) -> Result<()> {
    if pred.shape() != gt.shape() {
        return Err(Error::ShapeMismatch {
            lhs: pred.shape(),
            rhs: gt.shape(),
        });
    }
    if pred.spacing() != gt.spacing() {
        return Err(Error::SpacingMismatch {
            lhs: pred.spacing(),
            rhs: gt.spacing(),
        });
    }
    // Domain tags are not compared: formats differ in what they can carry
    // (NIfTI has no tag field), and values are scored in native units.
    Ok(())
}

fn masked_moments(pred: &Volume, gt: &Volume, mask: Option<&Mask>) -> Result<(f64, f64)> {
    check_pair(pred, gt)?;
    if let Some(m) = mask {
        if m.shape() != pred.shape() {
            return Err(Error::ShapeMismatch {
                lhs: m.shape(),
                rhs: pred.shape(),
            });
        }
    }
    let mut abs_sum = 0.0;
    let mut sq_sum = 0.0;
    let mut n = 0usize;
    for i in 0..pred.len() {
        if let Some(m) = mask {
            if !m.bits()[i] {
                continue;
            }
        }
        let d = pred.data()[i] - gt.data()[i];
        abs_sum += d.abs();
        sq_sum += d * d;
        n += 1;
    }
    if n == 0 {
        return Err(Error::EmptyMask);
    }
    Ok((abs_sum / n as f64, sq_sum / n as f64))
}

/// Mean absolute error over the mask (all voxels when `None`). Reported in
/// the volumes' native intensity units — HU for CT-domain inputs. Callers
/// are responsible for comparing volumes in the same unit system.
pub fn mae_hu(pred: &Volume, gt: &Volume, mask: Option<&Mask>) -> Result<f64> {
    Ok(masked_moments(pred, gt, mask)?.0)
}

/// Peak signal-to-noise ratio in dB; identical inputs give +inf.
pub fn psnr(pred: &Volume, gt: &Volume, data_range: f64, mask: Option<&Mask>) -> Result<f64> {
    let (_, mse) = masked_moments(pred, gt, mask)?;
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (data_range * data_range / mse).log10())
}

/// Dice overlap of two masks. Both empty counts as perfect agreement (1);
/// exactly one empty scores 0.
pub fn dice(a: &Mask, b: &Mask) -> Result<f64> {
    a.check_same_shape(b)?;
    let mut inter = 0usize;
    let mut ca = 0usize;
    let mut cb = 0usize;
    for (&x, &y) in a.bits().iter().zip(b.bits()) {
        ca += x as usize;
        cb += y as usize;
        inter += (x && y) as usize;
    }
    if ca + cb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * inter as f64 / (ca + cb) as f64)
}

/// Boundary voxels under 6-connectivity; out-of-bounds counts as
/// background.
fn surface_voxels(m: &Mask) -> Vec<[usize; 3]> {
    let [dx, dy, dz] = m.shape();
    let mut out = Vec::new();
    for x in 0..dx {
        for y in 0..dy {
            for z in 0..dz {
                if !m.at(x, y, z) {
                    continue;
                }
                let boundary = (x == 0 || !m.at(x - 1, y, z))
                    || (x + 1 == dx || !m.at(x + 1, y, z))
                    || (y == 0 || !m.at(x, y - 1, z))
                    || (y + 1 == dy || !m.at(x, y + 1, z))
                    || (z == 0 || !m.at(x, y, z - 1))
                    || (z + 1 == dz || !m.at(x, y, z + 1));
                if boundary {
                    out.push([x, y, z]);
                }
            }
        }
    }
    out
}

/// 1D lower envelope of parabolas at arbitrary sample positions
/// (Felzenszwalb–Huttenlocher). Sites with infinite `f` never contribute.
fn edt_1d(f: &[f64], positions: &[f64], out: &mut [f64]) {
    let n = f.len();
    let mut sites: Vec<usize> = Vec::with_capacity(n);
    let mut bounds: Vec<f64> = Vec::with_capacity(n + 1);
    for q in 0..n {
        if f[q].is_infinite() {
            continue;
        }
        let val = |i: usize| f[i] + positions[i] * positions[i];
        loop {
            match sites.last() {
                None => {
                    sites.push(q);
                    bounds.push(f64::NEG_INFINITY);
                    break;
                }
                Some(&v) => {
                    let s = (val(q) - val(v)) / (2.0 * positions[q] - 2.0 * positions[v]);
                    if s <= *bounds.last().unwrap() {
                        sites.pop();
                        bounds.pop();
                    } else {
                        sites.push(q);
                        bounds.push(s);
                        break;
                    }
                }
            }
        }
    }
    if sites.is_empty() {
        out.fill(f64::INFINITY);
        return;
    }
    let mut k = 0usize;
    for q in 0..n {
        while k + 1 < sites.len() && bounds[k + 1] < positions[q] {
            k += 1;
        }
        let v = sites[k];
        let d = positions[q] - positions[v];
        out[q] = d * d + f[v];
    }
}

/// Squared Euclidean distance (mm²) from every voxel center to the nearest
/// source voxel center.
fn distance_squared_field(
    shape: [usize; 3],
    spacing: [f64; 3],
    sources: &[[usize; 3]],
) -> Vec<f64> {
    let [dx, dy, dz] = shape;
    let n = dx * dy * dz;
    let idx = |x: usize, y: usize, z: usize| (x * dy + y) * dz + z;
    let mut field = vec![f64::INFINITY; n];
    for s in sources {
        field[idx(s[0], s[1], s[2])] = 0.0;
    }

    let positions: [Vec<f64>; 3] = [
        (0..dx).map(|i| i as f64 * spacing[0]).collect(),
        (0..dy).map(|i| i as f64 * spacing[1]).collect(),
        (0..dz).map(|i| i as f64 * spacing[2]).collect(),
    ];

    // Pass along z.
    let mut line = vec![0.0; dx.max(dy).max(dz)];
    for x in 0..dx {
        for y in 0..dy {
            let row: Vec<f64> = (0..dz).map(|z| field[idx(x, y, z)]).collect();
            edt_1d(&row, &positions[2], &mut line[..dz]);
            for z in 0..dz {
                field[idx(x, y, z)] = line[z];
            }
        }
    }
    // Pass along y.
    for x in 0..dx {
        for z in 0..dz {
            let row: Vec<f64> = (0..dy).map(|y| field[idx(x, y, z)]).collect();
            edt_1d(&row, &positions[1], &mut line[..dy]);
            for y in 0..dy {
                field[idx(x, y, z)] = line[y];
            }
        }
    }
    // Pass along x.
    for y in 0..dy {
        for z in 0..dz {
            let row: Vec<f64> = (0..dx).map(|x| field[idx(x, y, z)]).collect();
            edt_1d(&row, &positions[0], &mut line[..dx]);
            for x in 0..dx {
                field[idx(x, y, z)] = line[x];
            }
        }
    }
    field
}

fn check_mask_pair(a: &Mask, b: &Mask) -> Result<()> {
    a.check_same_shape(b)?;
    if a.spacing() != b.spacing() {
        return Err(Error::SpacingMismatch {
            lhs: a.spacing(),
            rhs: b.spacing(),
        });
    }
    if a.is_all_clear() || b.is_all_clear() {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Directed surface distances (mm) from every boundary voxel of `from` to
/// the boundary of `to`.
fn directed_surface_distances(from: &Mask, to: &Mask) -> Vec<f64> {
    let surf_from = surface_voxels(from);
    let surf_to = surface_voxels(to);
    let field = distance_squared_field(from.shape(), from.spacing(), &surf_to);
    let [_, dy, dz] = from.shape();
    surf_from
        .iter()
        .map(|&[x, y, z]| field[(x * dy + y) * dz + z].sqrt())
        .collect()
}

/// 95th-percentile symmetric surface distance in millimeters.
pub fn hd95(a: &Mask, b: &Mask) -> Result<f64> {
    hd95_with(a, b, Hd95Convention::PooledSymmetric)
}

pub fn hd95_with(a: &Mask, b: &Mask, convention: Hd95Convention) -> Result<f64> {
    check_mask_pair(a, b)?;
    let ab = directed_surface_distances(a, b);
    let ba = directed_surface_distances(b, a);
    match convention {
        Hd95Convention::PooledSymmetric => {
            let mut pooled = ab;
            pooled.extend(ba);
            Ok(percentile(&pooled, 95.0))
        }
        Hd95Convention::MaxOfDirected => Ok(percentile(&ab, 95.0).max(percentile(&ba, 95.0))),
    }
}

/// Normalized surface distance: mean of the two directed fractions of
/// surface voxels lying within `tolerance_mm` of the other surface.
pub fn nsd(a: &Mask, b: &Mask, tolerance_mm: f64) -> Result<f64> {
    check_mask_pair(a, b)?;
    if tolerance_mm < 0.0 || tolerance_mm.is_nan() {
        return Err(Error::NegativeTolerance { tolerance_mm });
    }
    let frac = |d: &[f64]| d.iter().filter(|&&x| x <= tolerance_mm).count() as f64 / d.len() as f64;
    let ab = directed_surface_distances(a, b);
    let ba = directed_surface_distances(b, a);
    Ok(0.5 * (frac(&ab) + frac(&ba)))
}

/// Full metric suite. Intensity metrics run over `eval_mask` (all voxels
/// when absent); geometric metrics run when both structure masks are
/// given; windowed metrics are omitted when the volume is too small.
pub fn report(
    pred: &Volume,
    gt: &Volume,
    eval_mask: Option<&Mask>,
    pred_mask: Option<&Mask>,
    gt_mask: Option<&Mask>,
    config: &MetricsConfig,
) -> Result<MetricsReport> {
    let (mae, mse) = masked_moments(pred, gt, eval_mask)?;
    let data_range = config.data_range.unwrap_or_else(|| match gt.domain() {
        VoxelDomain::Hu => crate::normalize::CT_CLIP_HI - crate::normalize::CT_CLIP_LO,
        VoxelDomain::NormSym => 2.0,
        VoxelDomain::NormUnit => 1.0,
        VoxelDomain::MriRaw => {
            let lo = gt.grid().min();
            let hi = gt.grid().max();
            if hi > lo {
                hi - lo
            } else {
                1.0
            }
        }
    });

    let mut rep = MetricsReport {
        mae_hu: Some(mae),
        mse: Some(mse),
        rmse: Some(mse.sqrt()),
        psnr_db: Some(if mse == 0.0 {
            f64::INFINITY
        } else {
            10.0 * (data_range * data_range / mse).log10()
        }),
        ..MetricsReport::default()
    };

    let shape = pred.shape();
    if shape.iter().all(|&d| d >= config.ssim_window) {
        rep.ssim = Some(losses::ssim3(
            pred.grid(),
            gt.grid(),
            config.ssim_window,
            data_range,
        )?);
        let needed = config.ssim_window << (config.ms_ssim_scales - 1);
        if config.ms_ssim_scales >= 1 && shape.iter().all(|&d| d >= needed) {
            rep.ms_ssim = Some(losses::ms_ssim3(
                pred.grid(),
                gt.grid(),
                config.ms_ssim_scales,
                data_range,
            )?);
        }
    }

    if let (Some(pm), Some(gm)) = (pred_mask, gt_mask) {
        rep.dice = Some(dice(pm, gm)?);
        if !pm.is_all_clear() && !gm.is_all_clear() {
            rep.hd95_mm = Some(hd95_with(pm, gm, config.hd95_convention)?);
            rep.nsd = Some(nsd(pm, gm, config.nsd_tolerance_mm)?);
        }
    }
    Ok(rep)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn mask_from(shape: [usize; 3], spacing: [f64; 3], set: &[[usize; 3]]) -> Mask {
        let mut bits = vec![false; shape[0] * shape[1] * shape[2]];
        for &[x, y, z] in set {
            bits[(x * shape[1] + y) * shape[2] + z] = true;
        }
        Mask::new(shape, spacing, bits).unwrap()
    }

    fn random_mask(shape: [usize; 3], spacing: [f64; 3], seed: u64, fill: f64) -> Mask {
        let mut r = rng::master(seed);
        let n = shape[0] * shape[1] * shape[2];
        let bits: Vec<bool> = (0..n).map(|_| r.random::<f64>() < fill).collect();
        Mask::new(shape, spacing, bits).unwrap()
    }

    /// O(n²) pairwise oracle for directed surface distances.
    fn brute_directed(from: &Mask, to: &Mask) -> Vec<f64> {
        let sf = surface_voxels(from);
        let st = surface_voxels(to);
        let sp = from.spacing();
        sf.iter()
            .map(|a| {
                st.iter()
                    .map(|b| {
                        let dx = (a[0] as f64 - b[0] as f64) * sp[0];
                        let dy = (a[1] as f64 - b[1] as f64) * sp[1];
                        let dz = (a[2] as f64 - b[2] as f64) * sp[2];
                        (dx * dx + dy * dy + dz * dz).sqrt()
                    })
                    .fold(f64::INFINITY, f64::min)
            })
            .collect()
    }

    fn brute_hd95(a: &Mask, b: &Mask) -> f64 {
        let mut pooled = brute_directed(a, b);
        pooled.extend(brute_directed(b, a));
        pooled.sort_by(f64::total_cmp);
        let pos = 0.95 * (pooled.len() - 1) as f64;
        let lo = pos.floor() as usize;
        let frac = pos - lo as f64;
        if frac == 0.0 {
            pooled[lo]
        } else {
            pooled[lo] + frac * (pooled[lo + 1] - pooled[lo])
        }
    }

    #[test]
    fn dice_hand_counts() {
        let shape = [4, 4, 1];
        let sp = [1.0; 3];
        let a = mask_from(shape, sp, &[[0, 0, 0], [1, 0, 0]]);
        let b = mask_from(shape, sp, &[[1, 0, 0], [2, 0, 0]]);
        assert_eq!(dice(&a, &b).unwrap(), 0.5);
        assert_eq!(dice(&a, &a).unwrap(), 1.0);

        let empty = mask_from(shape, sp, &[]);
        assert_eq!(dice(&empty, &empty).unwrap(), 1.0);
        assert_eq!(dice(&a, &empty).unwrap(), 0.0);
    }

    #[test]
    fn hd95_identical_masks_is_zero() {
        let m = random_mask([6, 6, 6], [1.0; 3], 1, 0.3);
        assert_eq!(hd95(&m, &m).unwrap(), 0.0);
    }

    #[test]
    fn hd95_single_voxels_axis_aligned() {
        let shape = [1, 1, 8];
        let a = mask_from(shape, [1.0; 3], &[[0, 0, 0]]);
        let b = mask_from(shape, [1.0; 3], &[[0, 0, 3]]);
        assert_eq!(hd95(&a, &b).unwrap(), 3.0);
    }

    #[test]
    fn hd95_matches_bruteforce_on_random_masks() {
        for trial in 0..100 {
            let a = random_mask([8, 8, 8], [1.0, 1.0, 1.0], 100 + trial, 0.2);
            let b = random_mask([8, 8, 8], [1.0, 1.0, 1.0], 200 + trial, 0.2);
            if a.is_all_clear() || b.is_all_clear() {
                continue;
            }
            let got = hd95(&a, &b).unwrap();
            let want = brute_hd95(&a, &b);
            assert!((got - want).abs() <= 1e-9, "trial {trial}: {got} vs {want}");
        }
    }

    #[test]
    fn hd95_scales_linearly_with_spacing() {
        let a = random_mask([6, 6, 6], [1.0, 1.0, 1.0], 7, 0.25);
        let b = random_mask([6, 6, 6], [1.0, 1.0, 1.0], 8, 0.25);
        let a2 = Mask::new([6, 6, 6], [2.0, 2.0, 2.0], a.bits().to_vec()).unwrap();
        let b2 = Mask::new([6, 6, 6], [2.0, 2.0, 2.0], b.bits().to_vec()).unwrap();
        assert_eq!(hd95(&a2, &b2).unwrap(), 2.0 * hd95(&a, &b).unwrap());
    }

    #[test]
    fn hd95_anisotropic_spacing_matches_bruteforce() {
        let sp = [0.5, 1.0, 2.5];
        let a = random_mask([7, 6, 5], sp, 11, 0.3);
        let b = random_mask([7, 6, 5], sp, 12, 0.3);
        let got = hd95(&a, &b).unwrap();
        let want = brute_hd95(&a, &b);
        assert!((got - want).abs() <= 1e-9, "{got} vs {want}");
    }

    #[test]
    fn hd95_symmetric_and_rejects_empty() {
        let a = random_mask([6, 6, 6], [1.0; 3], 3, 0.3);
        let b = random_mask([6, 6, 6], [1.0; 3], 4, 0.3);
        assert_eq!(hd95(&a, &b).unwrap(), hd95(&b, &a).unwrap());
        let empty = mask_from([6, 6, 6], [1.0; 3], &[]);
        assert!(matches!(hd95(&a, &empty), Err(Error::EmptyMask)));
    }

    #[test]
    fn max_of_directed_convention() {
        let a = random_mask([6, 6, 6], [1.0; 3], 5, 0.3);
        let b = random_mask([6, 6, 6], [1.0; 3], 6, 0.3);
        let ab = brute_directed(&a, &b);
        let ba = brute_directed(&b, &a);
        let perc = |mut v: Vec<f64>| {
            v.sort_by(f64::total_cmp);
            let pos = 0.95 * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let frac = pos - lo as f64;
            if frac == 0.0 {
                v[lo]
            } else {
                v[lo] + frac * (v[lo + 1] - v[lo])
            }
        };
        let want = perc(ab).max(perc(ba));
        let got = hd95_with(&a, &b, Hd95Convention::MaxOfDirected).unwrap();
        assert!((got - want).abs() <= 1e-9);
    }

    #[test]
    fn nsd_identity_and_disjoint() {
        let a = random_mask([6, 6, 6], [1.0; 3], 9, 0.3);
        assert_eq!(nsd(&a, &a, 0.0).unwrap(), 1.0);
        assert_eq!(nsd(&a, &a, 5.0).unwrap(), 1.0);

        let shape = [1, 1, 10];
        let p = mask_from(shape, [1.0; 3], &[[0, 0, 0]]);
        let q = mask_from(shape, [1.0; 3], &[[0, 0, 5]]);
        assert_eq!(nsd(&p, &q, 0.0).unwrap(), 0.0);
    }

    #[test]
    fn nsd_threshold_at_exact_distance() {
        let shape = [1, 1, 8];
        let a = mask_from(shape, [1.0; 3], &[[0, 0, 0]]);
        let b = mask_from(shape, [1.0; 3], &[[0, 0, 3]]);
        assert_eq!(nsd(&a, &b, 3.0).unwrap(), 1.0);
        assert_eq!(nsd(&a, &b, 2.9).unwrap(), 0.0);
    }

    #[test]
    fn nsd_is_symmetric_and_bounded() {
        for trial in 0..20 {
            let a = random_mask([6, 6, 6], [1.0; 3], 300 + trial, 0.3);
            let b = random_mask([6, 6, 6], [1.0; 3], 400 + trial, 0.3);
            if a.is_all_clear() || b.is_all_clear() {
                continue;
            }
            let ab = nsd(&a, &b, 1.5).unwrap();
            let ba = nsd(&b, &a, 1.5).unwrap();
            assert_eq!(ab, ba);
            assert!((0.0..=1.0).contains(&ab));
        }
    }

    #[test]
    fn mae_constant_offset_under_half_mask() {
        let n = 64;
        let gt = Volume::new([4, 4, 4], [1.0; 3], VoxelDomain::Hu, vec![10.0; n]).unwrap();
        let pred = Volume::new([4, 4, 4], [1.0; 3], VoxelDomain::Hu, vec![60.0; n]).unwrap();
        let bits: Vec<bool> = (0..n).map(|i| i < 32).collect();
        let mask = Mask::new([4, 4, 4], [1.0; 3], bits).unwrap();
        assert_eq!(mae_hu(&pred, &gt, Some(&mask)).unwrap(), 50.0);
        assert_eq!(mae_hu(&gt, &gt, None).unwrap(), 0.0);

        let empty = Mask::new([4, 4, 4], [1.0; 3], vec![false; n]).unwrap();
        assert!(matches!(
            mae_hu(&pred, &gt, Some(&empty)),
            Err(Error::EmptyMask)
        ));
    }

    #[test]
    fn psnr_hand_value_and_identities() {
        // mse 0.04 with range 2 -> 20 dB.
        let gt = Volume::new([1, 1, 2], [1.0; 3], VoxelDomain::MriRaw, vec![0.0, 0.0]).unwrap();
        let pred = Volume::new([1, 1, 2], [1.0; 3], VoxelDomain::MriRaw, vec![0.2, 0.2]).unwrap();
        let p = psnr(&pred, &gt, 2.0, None).unwrap();
        assert!((p - 20.0).abs() <= 1e-9, "psnr={p}");

        assert_eq!(psnr(&gt, &gt, 2.0, None).unwrap(), f64::INFINITY);

        let half = psnr(&pred, &gt, 1.0, None).unwrap();
        assert!((p - half - 20.0 * 2.0f64.log10()).abs() <= 1e-9);
    }

    #[test]
    fn report_identity_case() {
        let v = Volume::new(
            [8, 8, 8],
            [1.0; 3],
            VoxelDomain::NormSym,
            (0..512).map(|i| (i % 7) as f64 / 10.0 - 0.3).collect(),
        )
        .unwrap();
        let m = Mask::from_volume(&v, |x| x > 0.0);
        let rep = report(&v, &v, None, Some(&m), Some(&m), &MetricsConfig::default()).unwrap();
        assert_eq!(rep.mae_hu.unwrap(), 0.0);
        assert_eq!(rep.psnr_db.unwrap(), f64::INFINITY);
        assert!((rep.ssim.unwrap() - 1.0).abs() <= 1e-9);
        assert_eq!(rep.dice.unwrap(), 1.0);
        assert_eq!(rep.hd95_mm.unwrap(), 0.0);
        assert_eq!(rep.nsd.unwrap(), 1.0);
    }

    #[test]
    fn report_rmse_squares_to_mse() {
        let mut r = rng::master(13);
        let data: Vec<f64> = (0..512).map(|_| r.random_range(-0.9..0.9)).collect();
        let noisy: Vec<f64> = data.iter().map(|&x| (x + 0.05).clamp(-1.0, 1.0)).collect();
        let gt = Volume::new([8, 8, 8], [1.0; 3], VoxelDomain::NormSym, data).unwrap();
        let pred = Volume::new([8, 8, 8], [1.0; 3], VoxelDomain::NormSym, noisy).unwrap();
        let rep = report(&pred, &gt, None, None, None, &MetricsConfig::default()).unwrap();
        let rmse = rep.rmse.unwrap();
        assert!((rmse * rmse - rep.mse.unwrap()).abs() <= 1e-10);
        assert!(rep.dice.is_none());
    }

    #[test]
    fn report_json_keys_match_computed_set() {
        let v = Volume::new([4, 4, 4], [1.0; 3], VoxelDomain::NormSym, vec![0.1; 64]).unwrap();
        let rep = report(&v, &v, None, None, None, &MetricsConfig::default()).unwrap();
        let json = serde_json::to_value(&rep).unwrap();
        let keys: Vec<&str> = json
            .as_object()
            .unwrap()
            .keys()
            .map(|s| s.as_str())
            .collect();
        // 4x4x4 is below the SSIM window, PSNR is +inf (serialized null),
        // and no structure masks were given.
        assert_eq!(keys, vec!["mae_hu", "mse", "psnr_db", "rmse"]);
    }
}
