//! Raw float32 payload with a JSON sidecar.
//!
//! A volume is stored as `<name>.f32` (contiguous little-endian float32,
//! row-major, z fastest) next to `<name>.json` declaring shape, spacing,
//! domain, and element type. Unlike NIfTI, the sidecar carries the domain
//! tag, so every domain round-trips.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::volume::{Volume, VoxelDomain};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RawSidecar {
    pub shape: [usize; 3],
    pub spacing_mm: [f64; 3],
    pub domain: VoxelDomain,
    pub dtype: String,
}

fn base_path(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some("json") | Some("f32") => path.with_extension(""),
        _ => path.to_path_buf(),
    }
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Write `<base>.json` + `<base>.f32`. `path` may carry either extension
/// or none.
pub fn write_raw(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let base = base_path(path.as_ref());
    let sidecar = RawSidecar {
        shape: v.shape(),
        spacing_mm: v.spacing(),
        domain: v.domain(),
        dtype: "f32".to_string(),
    };
    let json_path = base.with_extension("json");
    let text = serde_json::to_string_pretty(&sidecar).expect("sidecar serializes");
    fs::write(&json_path, text).map_err(|e| io_err(&json_path, e))?;

    let f32_path = base.with_extension("f32");
    let mut payload = Vec::with_capacity(v.len() * 4);
    for &x in v.data() {
        payload.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(&f32_path, payload).map_err(|e| io_err(&f32_path, e))
}

/// Read the pair addressed by a sidecar (or base/payload) path.
pub fn read_raw(path: impl AsRef<Path>) -> Result<Volume> {
    let base = base_path(path.as_ref());
    let json_path = base.with_extension("json");
    let text = fs::read_to_string(&json_path).map_err(|e| io_err(&json_path, e))?;
    let sidecar: RawSidecar = serde_json::from_str(&text).map_err(|e| Error::MalformedSidecar {
        path: json_path.display().to_string(),
        reason: e.to_string(),
    })?;
    if sidecar.dtype != "f32" {
        return Err(Error::MalformedSidecar {
            path: json_path.display().to_string(),
            reason: format!("unsupported dtype {:?}", sidecar.dtype),
        });
    }
    let f32_path = base.with_extension("f32");
    let payload = fs::read(&f32_path).map_err(|e| io_err(&f32_path, e))?;
    let declared: usize = sidecar.shape.iter().product();
    if payload.len() != declared * 4 {
        return Err(Error::SidecarMismatch {
            declared,
            actual: payload.len() / 4,
        });
    }
    let data: Vec<f64> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect();
    Volume::new(sidecar.shape, sidecar.spacing_mm, sidecar.domain, data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn tmpdir() -> PathBuf {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().to_path_buf();
        std::mem::forget(dir);
        path
    }

    #[test]
    fn roundtrip_is_exact_for_f32_values() {
        let mut r = rng::master(1);
        let data: Vec<f64> = (0..512)
            .map(|_| (r.random_range(-10.0f32..10.0f32)) as f64)
            .collect();
        let v = Volume::new([8, 8, 8], [0.7, 0.7, 3.0], VoxelDomain::MriRaw, data).unwrap();
        let base = tmpdir().join("vol");
        write_raw(&v, &base).unwrap();
        let back = read_raw(base.with_extension("json")).unwrap();
        assert_eq!(back.shape(), v.shape());
        assert_eq!(back.spacing(), v.spacing());
        assert_eq!(back.domain(), v.domain());
        for (a, b) in back.data().iter().zip(v.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn domain_tag_roundtrips() {
        let v = Volume::new([2, 2, 2], [1.0; 3], VoxelDomain::NormUnit, vec![0.25; 8]).unwrap();
        let base = tmpdir().join("unit");
        write_raw(&v, &base).unwrap();
        assert_eq!(read_raw(&base).unwrap().domain(), VoxelDomain::NormUnit);
    }

    #[test]
    fn size_mismatch_is_detected() {
        let v = Volume::new([2, 2, 2], [1.0; 3], VoxelDomain::MriRaw, vec![1.0; 8]).unwrap();
        let base = tmpdir().join("short");
        write_raw(&v, &base).unwrap();
        // Truncate payload to 7 elements.
        let payload = fs::read(base.with_extension("f32")).unwrap();
        fs::write(base.with_extension("f32"), &payload[..28]).unwrap();
        assert!(matches!(
            read_raw(&base),
            Err(Error::SidecarMismatch {
                declared: 8,
                actual: 7
            })
        ));
    }

    #[test]
    fn out_of_range_value_violates_domain_invariant() {
        let v = Volume::new([1, 1, 2], [1.0; 3], VoxelDomain::MriRaw, vec![0.0, 1.5]).unwrap();
        let base = tmpdir().join("sym");
        write_raw(&v, &base).unwrap();
        // Rewrite the sidecar claiming a [-1, 1] domain.
        let text = fs::read_to_string(base.with_extension("json")).unwrap();
        fs::write(
            base.with_extension("json"),
            text.replace("mri_raw", "norm_sym"),
        )
        .unwrap();
        assert!(matches!(
            read_raw(&base),
            Err(Error::DomainRangeViolation { .. })
        ));
    }

    #[test]
    fn garbage_sidecar_is_malformed() {
        let dir = tmpdir();
        fs::write(dir.join("bad.json"), "{not json").unwrap();
        assert!(matches!(
            read_raw(dir.join("bad.json")),
            Err(Error::MalformedSidecar { .. })
        ));
    }
}
