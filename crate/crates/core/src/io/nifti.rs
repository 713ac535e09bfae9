//! Minimal NIfTI-1 reader/writer.
//!
//! Supported subset: uncompressed little-endian single-file `.nii`, 3D,
//! datatypes int16 (code 4) and float32 (code 16), spacing from pixdim,
//! value scaling from scl_slope/scl_inter (slope 0 means 1, the NIfTI
//! convention). int16 payloads are tagged HU, float32 payloads raw MRI.
//! The writer always emits float32 with slope 1 / inter 0, so float-valued
//! volumes round-trip bit-exactly at f32 precision.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::volume::{Volume, VoxelDomain};

pub const HEADER_SIZE: usize = 348;
pub const SINGLE_FILE_OFFSET: usize = 352;
const MAGIC_SINGLE: &[u8; 4] = b"n+1\0";

pub const DT_INT16: i16 = 4;
pub const DT_FLOAT32: i16 = 16;

/// The header fields this subset reads and writes.
#[derive(Debug, Clone, PartialEq)]
pub struct NiftiHeaderSubset {
    pub dims: [u16; 3],
    /// NIfTI datatype code: 4 (int16) or 16 (float32).
    pub datatype: i16,
    pub pixdim: [f32; 3],
    pub scl_slope: f32,
    pub scl_inter: f32,
    pub vox_offset: u32,
}

impl NiftiHeaderSubset {
    fn bitpix(&self) -> i16 {
        match self.datatype {
            DT_INT16 => 16,
            _ => 32,
        }
    }

    fn element_size(&self) -> usize {
        match self.datatype {
            DT_INT16 => 2,
            _ => 4,
        }
    }

    fn voxel_count(&self) -> usize {
        self.dims.iter().map(|&d| d as usize).product()
    }
}

fn read_i16(buf: &[u8], at: usize) -> i16 {
    i16::from_le_bytes([buf[at], buf[at + 1]])
}

fn read_i32(buf: &[u8], at: usize) -> i32 {
    i32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

fn read_f32(buf: &[u8], at: usize) -> f32 {
    f32::from_le_bytes([buf[at], buf[at + 1], buf[at + 2], buf[at + 3]])
}

fn malformed(reason: impl Into<String>) -> Error {
    Error::MalformedHeader {
        reason: reason.into(),
    }
}

/// Parse and validate the 348-byte header block.
pub fn parse_header(buf: &[u8]) -> Result<NiftiHeaderSubset> {
    if buf.len() < HEADER_SIZE {
        return Err(malformed(format!(
            "file holds {} bytes, header needs {HEADER_SIZE}",
            buf.len()
        )));
    }
    let sizeof_hdr = read_i32(buf, 0);
    if sizeof_hdr != HEADER_SIZE as i32 {
        if sizeof_hdr.swap_bytes() == HEADER_SIZE as i32 {
            return Err(Error::UnsupportedEndianness);
        }
        return Err(malformed(format!("size field is {sizeof_hdr}, not 348")));
    }
    if &buf[344..348] != MAGIC_SINGLE {
        return Err(malformed("magic is not the single-file tag n+1"));
    }
    let ndim = read_i16(buf, 40);
    if ndim != 3 {
        return Err(malformed(format!(
            "expected 3 dimensions, header says {ndim}"
        )));
    }
    let mut dims = [0u16; 3];
    for (i, d) in dims.iter_mut().enumerate() {
        let raw = read_i16(buf, 42 + 2 * i);
        if raw <= 0 {
            return Err(malformed(format!("dimension {i} is {raw}")));
        }
        *d = raw as u16;
    }
    let datatype = read_i16(buf, 70);
    if datatype != DT_INT16 && datatype != DT_FLOAT32 {
        return Err(Error::UnsupportedDatatype { code: datatype });
    }
    let bitpix = read_i16(buf, 72);
    let expected_bitpix = if datatype == DT_INT16 { 16 } else { 32 };
    if bitpix != expected_bitpix {
        return Err(malformed(format!(
            "bitpix {bitpix} does not match datatype {datatype}"
        )));
    }
    let mut pixdim = [0f32; 3];
    for (i, p) in pixdim.iter_mut().enumerate() {
        let raw = read_f32(buf, 76 + 4 * (i + 1));
        if !raw.is_finite() || raw <= 0.0 {
            return Err(malformed(format!("pixdim[{}] is {raw}", i + 1)));
        }
        *p = raw;
    }
    let vox_offset = read_f32(buf, 108);
    if !vox_offset.is_finite() || vox_offset < SINGLE_FILE_OFFSET as f32 {
        return Err(malformed(format!("vox_offset {vox_offset} below 352")));
    }
    let scl_slope = read_f32(buf, 112);
    let scl_inter = read_f32(buf, 116);
    if !scl_slope.is_finite() || !scl_inter.is_finite() {
        return Err(malformed("non-finite scl_slope/scl_inter"));
    }
    Ok(NiftiHeaderSubset {
        dims,
        datatype,
        pixdim,
        scl_slope,
        scl_inter,
        vox_offset: vox_offset as u32,
    })
}

/// Encode a header block (348 bytes + the 4-byte extension flag).
pub fn encode_header(h: &NiftiHeaderSubset) -> Vec<u8> {
    let mut buf = vec![0u8; SINGLE_FILE_OFFSET];
    buf[0..4].copy_from_slice(&(HEADER_SIZE as i32).to_le_bytes());
    buf[40..42].copy_from_slice(&3i16.to_le_bytes());
    for i in 0..3 {
        buf[42 + 2 * i..44 + 2 * i].copy_from_slice(&(h.dims[i] as i16).to_le_bytes());
    }
    // Unused trailing dims are 1 by convention.
    for i in 3..7 {
        buf[42 + 2 * i..44 + 2 * i].copy_from_slice(&1i16.to_le_bytes());
    }
    buf[70..72].copy_from_slice(&h.datatype.to_le_bytes());
    buf[72..74].copy_from_slice(&h.bitpix().to_le_bytes());
    buf[76..80].copy_from_slice(&1f32.to_le_bytes());
    for i in 0..3 {
        buf[80 + 4 * i..84 + 4 * i].copy_from_slice(&h.pixdim[i].to_le_bytes());
    }
    buf[108..112].copy_from_slice(&(h.vox_offset as f32).to_le_bytes());
    buf[112..116].copy_from_slice(&h.scl_slope.to_le_bytes());
    buf[116..120].copy_from_slice(&h.scl_inter.to_le_bytes());
    buf[344..348].copy_from_slice(MAGIC_SINGLE);
    buf
}

fn io_err(path: &Path, source: std::io::Error) -> Error {
    Error::IoFailure {
        path: path.display().to_string(),
        source,
    }
}

/// Read a volume from a `.nii` file.
pub fn read_nifti(path: impl AsRef<Path>) -> Result<Volume> {
    let path = path.as_ref();
    let buf = fs::read(path).map_err(|e| io_err(path, e))?;
    let header = parse_header(&buf)?;

    let n = header.voxel_count();
    let start = header.vox_offset as usize;
    let need = n * header.element_size();
    if buf.len() < start + need {
        return Err(Error::TruncatedPayload {
            expected: need,
            found: buf.len().saturating_sub(start),
        });
    }
    let slope = if header.scl_slope == 0.0 {
        1.0
    } else {
        header.scl_slope as f64
    };
    let inter = header.scl_inter as f64;
    let payload = &buf[start..start + need];
    let data: Vec<f64> = match header.datatype {
        DT_INT16 => payload
            .chunks_exact(2)
            .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 * slope + inter)
            .collect(),
        _ => payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64 * slope + inter)
            .collect(),
    };
    let domain = if header.datatype == DT_INT16 {
        VoxelDomain::Hu
    } else {
        VoxelDomain::MriRaw
    };
    Volume::new(
        header.dims.map(|d| d as usize),
        header.pixdim.map(|p| p as f64),
        domain,
        data,
    )
}

/// Write a volume as float32 with identity scaling. Values and spacing are
/// narrowed to f32; the domain tag itself is not stored (NIfTI has no such
/// field), so a read-back is tagged from the datatype.
pub fn write_nifti(v: &Volume, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let shape = v.shape();
    let header = NiftiHeaderSubset {
        dims: [shape[0] as u16, shape[1] as u16, shape[2] as u16],
        datatype: DT_FLOAT32,
        pixdim: v.spacing().map(|s| s as f32),
        scl_slope: 1.0,
        scl_inter: 0.0,
        vox_offset: SINGLE_FILE_OFFSET as u32,
    };
    let mut buf = encode_header(&header);
    buf.reserve(v.len() * 4);
    for &x in v.data() {
        buf.extend_from_slice(&(x as f32).to_le_bytes());
    }
    fs::write(path, buf).map_err(|e| io_err(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng as _;

    fn tmpfile(name: &str) -> std::path::PathBuf {
        let dir = tempfile::tempdir().unwrap();
        // Leak the tempdir so the path stays alive for the test body.
        let path = dir.path().join(name);
        std::mem::forget(dir);
        path
    }

    fn random_f32_volume(shape: [usize; 3], seed: u64) -> Volume {
        let mut r = rng::master(seed);
        let n = shape[0] * shape[1] * shape[2];
        let data: Vec<f64> = (0..n)
            .map(|_| (r.random_range(-100.0f32..100.0f32)) as f64)
            .collect();
        Volume::new(shape, [1.0, 1.0, 1.0], VoxelDomain::MriRaw, data).unwrap()
    }

    #[test]
    fn zero_volume_reads_back() {
        let path = tmpfile("zeros.nii");
        let v = Volume::new([4, 4, 4], [1.0; 3], VoxelDomain::MriRaw, vec![0.0; 64]).unwrap();
        write_nifti(&v, &path).unwrap();
        let back = read_nifti(&path).unwrap();
        assert_eq!(back.shape(), [4, 4, 4]);
        assert_eq!(back.spacing(), [1.0, 1.0, 1.0]);
        assert!(back.data().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn roundtrip_is_bit_exact_for_f32_values() {
        let path = tmpfile("rt.nii");
        let v = random_f32_volume([8, 8, 8], 1);
        write_nifti(&v, &path).unwrap();
        let back = read_nifti(&path).unwrap();
        for (a, b) in back.data().iter().zip(v.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn roundtrip_preserves_f32_spacing_exactly() {
        let path = tmpfile("spacing.nii");
        let v = Volume::new(
            [2, 2, 2],
            [0.5, 0.5, 2.0],
            VoxelDomain::MriRaw,
            vec![1.0; 8],
        )
        .unwrap();
        write_nifti(&v, &path).unwrap();
        assert_eq!(read_nifti(&path).unwrap().spacing(), [0.5, 0.5, 2.0]);
    }

    #[test]
    fn int16_payload_applies_affine_scaling() {
        let header = NiftiHeaderSubset {
            dims: [1, 1, 1],
            datatype: DT_INT16,
            pixdim: [1.0; 3],
            scl_slope: 2.0,
            scl_inter: -30.0,
            vox_offset: SINGLE_FILE_OFFSET as u32,
        };
        let mut buf = encode_header(&header);
        buf.extend_from_slice(&100i16.to_le_bytes());
        let path = tmpfile("scaled.nii");
        std::fs::write(&path, buf).unwrap();
        let v = read_nifti(&path).unwrap();
        assert_eq!(v.data(), &[170.0]);
        assert_eq!(v.domain(), VoxelDomain::Hu);
    }

    #[test]
    fn zero_slope_means_identity_scaling() {
        let header = NiftiHeaderSubset {
            dims: [1, 1, 1],
            datatype: DT_INT16,
            pixdim: [1.0; 3],
            scl_slope: 0.0,
            scl_inter: 0.0,
            vox_offset: SINGLE_FILE_OFFSET as u32,
        };
        let mut buf = encode_header(&header);
        buf.extend_from_slice(&(-41i16).to_le_bytes());
        let path = tmpfile("slope0.nii");
        std::fs::write(&path, buf).unwrap();
        assert_eq!(read_nifti(&path).unwrap().data(), &[-41.0]);
    }

    #[test]
    fn zeroed_magic_is_malformed() {
        let v = random_f32_volume([2, 2, 2], 2);
        let path = tmpfile("badmagic.nii");
        write_nifti(&v, &path).unwrap();
        let mut buf = std::fs::read(&path).unwrap();
        buf[344..348].fill(0);
        std::fs::write(&path, buf).unwrap();
        assert!(matches!(
            read_nifti(&path),
            Err(Error::MalformedHeader { .. })
        ));
    }

    #[test]
    fn every_wrong_size_field_is_rejected() {
        let v = random_f32_volume([2, 2, 2], 3);
        let path = tmpfile("badsize.nii");
        write_nifti(&v, &path).unwrap();
        let good = std::fs::read(&path).unwrap();
        for wrong in [0i32, 1, 347, 349, 540, -348] {
            let mut buf = good.clone();
            buf[0..4].copy_from_slice(&wrong.to_le_bytes());
            std::fs::write(&path, &buf).unwrap();
            assert!(
                matches!(read_nifti(&path), Err(Error::MalformedHeader { .. })),
                "size {wrong} accepted"
            );
        }
    }

    #[test]
    fn big_endian_size_field_reports_endianness() {
        let v = random_f32_volume([2, 2, 2], 4);
        let path = tmpfile("be.nii");
        write_nifti(&v, &path).unwrap();
        let mut buf = std::fs::read(&path).unwrap();
        buf[0..4].copy_from_slice(&(348i32).to_be_bytes());
        std::fs::write(&path, buf).unwrap();
        assert!(matches!(
            read_nifti(&path),
            Err(Error::UnsupportedEndianness)
        ));
    }

    #[test]
    fn unsupported_datatype_code() {
        let v = random_f32_volume([2, 2, 2], 5);
        let path = tmpfile("dt.nii");
        write_nifti(&v, &path).unwrap();
        let mut buf = std::fs::read(&path).unwrap();
        buf[70..72].copy_from_slice(&64i16.to_le_bytes()); // float64
        std::fs::write(&path, buf).unwrap();
        assert!(matches!(
            read_nifti(&path),
            Err(Error::UnsupportedDatatype { code: 64 })
        ));
    }

    #[test]
    fn short_payload_is_truncated() {
        let v = random_f32_volume([4, 4, 4], 6);
        let path = tmpfile("trunc.nii");
        write_nifti(&v, &path).unwrap();
        let buf = std::fs::read(&path).unwrap();
        std::fs::write(&path, &buf[..buf.len() - 8]).unwrap();
        assert!(matches!(
            read_nifti(&path),
            Err(Error::TruncatedPayload { .. })
        ));
    }

    #[test]
    fn unwritable_path_is_io_failure() {
        let v = random_f32_volume([2, 2, 2], 7);
        let err = write_nifti(&v, "/nonexistent-dir/x/y.nii").unwrap_err();
        assert!(matches!(err, Error::IoFailure { .. }));
    }
}
