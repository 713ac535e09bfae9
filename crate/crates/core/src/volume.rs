//! Core 3D grid and volume types.
//!
//! [`Grid3`] is the plain numeric workhorse: a row-major `f64` grid with a
//! shape and nothing else. [`Volume`] adds voxel spacing and an intensity
//! domain tag and enforces the domain invariants at construction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Intensity domain of a volume.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VoxelDomain {
    /// Hounsfield units (CT/CBCT), unbounded.
    Hu,
    /// Raw MRI intensities, unbounded.
    MriRaw,
    /// Normalized to [-1, 1].
    NormSym,
    /// Normalized to [0, 1].
    NormUnit,
}

impl VoxelDomain {
    /// Closed value range enforced for this domain, if any.
    pub fn range(self) -> Option<(f64, f64)> {
        match self {
            VoxelDomain::Hu | VoxelDomain::MriRaw => None,
            VoxelDomain::NormSym => Some((-1.0, 1.0)),
            VoxelDomain::NormUnit => Some((0.0, 1.0)),
        }
    }

    /// Whether values in this domain are unbounded.
    pub fn is_unbounded(self) -> bool {
        self.range().is_none()
    }
}

/// Row-major 3D grid of `f64`. Index order is `[x][y][z]` with `z` fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid3 {
    shape: [usize; 3],
    data: Vec<f64>,
}

impl Grid3 {
    pub fn new(shape: [usize; 3], data: Vec<f64>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::EmptyShape { shape });
        }
        let expected = shape[0] * shape[1] * shape[2];
        if data.len() != expected {
            return Err(Error::ShapeDataMismatch {
                shape,
                len: data.len(),
                expected,
            });
        }
        Ok(Self { shape, data })
    }

    /// Grid filled with a constant.
    pub fn filled(shape: [usize; 3], value: f64) -> Result<Self> {
        let n = shape[0]
            .checked_mul(shape[1])
            .and_then(|v| v.checked_mul(shape[2]))
            .unwrap_or(0);
        Self::new(shape, vec![value; n])
    }

    pub fn zeros(shape: [usize; 3]) -> Result<Self> {
        Self::filled(shape, 0.0)
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.shape[1] + y) * self.shape[2] + z
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.data[self.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: f64) {
        let i = self.index(x, y, z);
        self.data[i] = v;
    }

    /// Elementwise map into a new grid.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Grid3 {
        Grid3 {
            shape: self.shape,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Elementwise combination of two grids of equal shape.
    pub fn zip(&self, other: &Grid3, f: impl Fn(f64, f64) -> f64) -> Result<Grid3> {
        self.check_same_shape(other)?;
        Ok(Grid3 {
            shape: self.shape,
            data: self
                .data
                .iter()
                .zip(other.data.iter())
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn check_same_shape(&self, other: &Grid3) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                lhs: self.shape,
                rhs: other.shape,
            });
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.data.iter().sum::<f64>() / self.data.len() as f64
    }

    pub fn min(&self) -> f64 {
        self.data.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.data.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

/// A 3D scalar volume: grid data plus voxel spacing (mm) and a domain tag.
///
/// Construction validates the full invariant set: data length matches the
/// shape, every element is finite, and bounded domains hold their range.
/// Volumes are immutable afterwards.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume {
    grid: Grid3,
    spacing: [f64; 3],
    domain: VoxelDomain,
}

impl Volume {
    pub fn new(
        shape: [usize; 3],
        spacing: [f64; 3],
        domain: VoxelDomain,
        data: Vec<f64>,
    ) -> Result<Self> {
        Self::from_grid(Grid3::new(shape, data)?, spacing, domain)
    }

    pub fn from_grid(grid: Grid3, spacing: [f64; 3], domain: VoxelDomain) -> Result<Self> {
        if spacing.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidSpacing { spacing });
        }
        for (i, &v) in grid.data().iter().enumerate() {
            if !v.is_finite() {
                return Err(Error::NonFiniteData { index: i });
            }
        }
        if let Some((lo, hi)) = domain.range() {
            for (i, &v) in grid.data().iter().enumerate() {
                if v < lo || v > hi {
                    return Err(Error::DomainRangeViolation {
                        domain,
                        value: v,
                        index: i,
                    });
                }
            }
        }
        Ok(Self {
            grid,
            spacing,
            domain,
        })
    }

    pub fn shape(&self) -> [usize; 3] {
        self.grid.shape()
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn domain(&self) -> VoxelDomain {
        self.domain
    }

    pub fn grid(&self) -> &Grid3 {
        &self.grid
    }

    pub fn data(&self) -> &[f64] {
        self.grid.data()
    }

    pub fn len(&self) -> usize {
        self.grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.grid.is_empty()
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> f64 {
        self.grid.at(x, y, z)
    }

    /// Rebuild with the same spacing and domain from new data. The domain
    /// invariants are re-checked.
    pub fn with_grid(&self, grid: Grid3) -> Result<Volume> {
        Volume::from_grid(grid, self.spacing, self.domain)
    }

    /// Rebuild with a different domain tag. The new domain's invariants are
    /// checked against the data.
    pub fn retagged(&self, domain: VoxelDomain) -> Result<Volume> {
        Volume::from_grid(self.grid.clone(), self.spacing, domain)
    }
}

/// Binary mask over a voxel grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    shape: [usize; 3],
    spacing: [f64; 3],
    bits: Vec<bool>,
}

impl Mask {
    pub fn new(shape: [usize; 3], spacing: [f64; 3], bits: Vec<bool>) -> Result<Self> {
        if shape.contains(&0) {
            return Err(Error::EmptyShape { shape });
        }
        if spacing.iter().any(|&s| s <= 0.0 || !s.is_finite()) {
            return Err(Error::InvalidSpacing { spacing });
        }
        let expected = shape[0] * shape[1] * shape[2];
        if bits.len() != expected {
            return Err(Error::ShapeDataMismatch {
                shape,
                len: bits.len(),
                expected,
            });
        }
        Ok(Self {
            shape,
            spacing,
            bits,
        })
    }

    /// Mask of the voxels where `f(value)` holds.
    pub fn from_volume(v: &Volume, f: impl Fn(f64) -> bool) -> Mask {
        Mask {
            shape: v.shape(),
            spacing: v.spacing(),
            bits: v.data().iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn shape(&self) -> [usize; 3] {
        self.shape
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.spacing
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        (x * self.shape[1] + y) * self.shape[2] + z
    }

    #[inline]
    pub fn at(&self, x: usize, y: usize, z: usize) -> bool {
        self.bits[self.index(x, y, z)]
    }

    /// Number of set voxels.
    pub fn count(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }

    pub fn is_all_clear(&self) -> bool {
        self.count() == 0
    }

    pub fn check_same_shape(&self, other: &Mask) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::ShapeMismatch {
                lhs: self.shape,
                rhs: other.shape,
            });
        }
        Ok(())
    }
}
