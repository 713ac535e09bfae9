//! Volume file formats: a NIfTI-1 subset and a raw float32 + JSON pair.

pub mod nifti;
pub mod raw;

pub use nifti::{read_nifti, write_nifti, NiftiHeaderSubset};
pub use raw::{read_raw, write_raw, RawSidecar};

use std::path::Path;

use crate::error::Result;
use crate::volume::Volume;

/// Read by extension: `.nii` via the NIfTI subset, anything else as a raw
/// sidecar pair.
pub fn read_volume(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("nii") => read_nifti(path),
        _ => read_raw(path),
    }
}

/// Write by extension, mirroring [`read_volume`].
pub fn write_volume(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    match path.extension().and_then(|e| e.to_str()) {
        Some("nii") => write_nifti(v, path),
        _ => write_raw(v, path),
    }
}
