//! Voxel grids, affine transforms and the volume-level operations the
//! pipeline needs: normalization, resampling, warping and label merging.

mod affine;
mod mask;
pub mod nifti;
mod normalize;
mod resample;

pub use affine::{apply_affine, invert_affine, Affine4};
pub use mask::{merge_mask_classes, CompositeMasks, MaskScheme, SegMask, LABEL_ED, LABEL_ET, LABEL_NC};
pub use normalize::{normalize_intensity, NormalizationStats};
pub use resample::{resample_to_shape, Interpolation};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum VolumeError {
    #[error("voxel buffer has {got} elements, dims {dims:?} require {expected}")]
    BufferSize {
        dims: [usize; 3],
        expected: usize,
        got: usize,
    },
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),
    #[error("in-mask intensities are degenerate (constant or too few inliers)")]
    DegenerateIntensities,
    #[error("brain mask is empty")]
    EmptyMask,
    #[error("trilinear interpolation requested on label data")]
    ModeLabelMismatch,
    #[error("transform is singular")]
    SingularTransform,
    #[error("invalid label {0} (expected one of 0, 1, 2, 4)")]
    InvalidLabel(u8),
    #[error("volumes are on different grids")]
    GridMismatch,
}

/// Voxel types a [`Volume3D`] can hold.
///
/// Label voxels may only be resampled with nearest-neighbor interpolation.
pub trait Voxel: Copy + Default + Send + Sync + PartialEq + std::fmt::Debug + 'static {
    const IS_LABEL: bool;
    fn to_f64(self) -> f64;
    fn from_f64(v: f64) -> Self;
}

impl Voxel for f64 {
    const IS_LABEL: bool = false;
    fn to_f64(self) -> f64 {
        self
    }
    fn from_f64(v: f64) -> Self {
        v
    }
}

impl Voxel for f32 {
    const IS_LABEL: bool = false;
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v as f32
    }
}

impl Voxel for u8 {
    const IS_LABEL: bool = true;
    fn to_f64(self) -> f64 {
        self as f64
    }
    fn from_f64(v: f64) -> Self {
        v.round().clamp(0.0, 255.0) as u8
    }
}

/// Grid description shared by every volume: size, voxel size and the
/// world position (mm) of voxel (0,0,0).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub dims: [usize; 3],
    pub spacing: [f64; 3],
    pub origin: [f64; 3],
}

impl Geometry {
    pub fn new(dims: [usize; 3], spacing: [f64; 3], origin: [f64; 3]) -> Result<Self, VolumeError> {
        if dims.iter().any(|&d| d == 0) {
            return Err(VolumeError::InvalidGeometry(format!("zero dimension in {dims:?}")));
        }
        if spacing.iter().any(|&s| !(s > 0.0) || !s.is_finite()) {
            return Err(VolumeError::InvalidGeometry(format!(
                "non-positive spacing {spacing:?}"
            )));
        }
        Ok(Self { dims, spacing, origin })
    }

    pub fn len(&self) -> usize {
        self.dims.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    #[inline]
    pub fn index(&self, x: usize, y: usize, z: usize) -> usize {
        x + self.dims[0] * (y + self.dims[1] * z)
    }

    #[inline]
    pub fn coords(&self, idx: usize) -> [usize; 3] {
        let x = idx % self.dims[0];
        let yz = idx / self.dims[0];
        [x, yz % self.dims[1], yz / self.dims[1]]
    }

    /// World position (mm) of a continuous voxel index.
    #[inline]
    pub fn to_world(&self, ijk: [f64; 3]) -> [f64; 3] {
        [
            self.origin[0] + self.spacing[0] * ijk[0],
            self.origin[1] + self.spacing[1] * ijk[1],
            self.origin[2] + self.spacing[2] * ijk[2],
        ]
    }

    #[inline]
    pub fn to_index(&self, world: [f64; 3]) -> [f64; 3] {
        [
            (world[0] - self.origin[0]) / self.spacing[0],
            (world[1] - self.origin[1]) / self.spacing[1],
            (world[2] - self.origin[2]) / self.spacing[2],
        ]
    }

    /// Same voxel lattice, tolerant to float noise in spacing/origin.
    pub fn same_grid(&self, other: &Geometry) -> bool {
        self.dims == other.dims
            && self
                .spacing
                .iter()
                .zip(other.spacing.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(1.0))
            && self
                .origin
                .iter()
                .zip(other.origin.iter())
                .all(|(a, b)| (a - b).abs() <= 1e-6 * a.abs().max(1.0))
    }
}

/// A voxel grid. Voxels are stored x-fastest: `x + nx * (y + ny * z)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Volume3D<T> {
    geometry: Geometry,
    voxels: Vec<T>,
}

impl<T: Voxel> Volume3D<T> {
    pub fn new(geometry: Geometry, voxels: Vec<T>) -> Result<Self, VolumeError> {
        if voxels.len() != geometry.len() {
            return Err(VolumeError::BufferSize {
                dims: geometry.dims,
                expected: geometry.len(),
                got: voxels.len(),
            });
        }
        Ok(Self { geometry, voxels })
    }

    pub fn filled(geometry: Geometry, value: T) -> Self {
        Self {
            voxels: vec![value; geometry.len()],
            geometry,
        }
    }

    pub fn from_fn(geometry: Geometry, mut f: impl FnMut(usize, usize, usize) -> T) -> Self {
        let mut voxels = Vec::with_capacity(geometry.len());
        for z in 0..geometry.dims[2] {
            for y in 0..geometry.dims[1] {
                for x in 0..geometry.dims[0] {
                    voxels.push(f(x, y, z));
                }
            }
        }
        Self { geometry, voxels }
    }

    pub fn geometry(&self) -> &Geometry {
        &self.geometry
    }

    pub fn dims(&self) -> [usize; 3] {
        self.geometry.dims
    }

    pub fn spacing(&self) -> [f64; 3] {
        self.geometry.spacing
    }

    pub fn origin(&self) -> [f64; 3] {
        self.geometry.origin
    }

    pub fn voxels(&self) -> &[T] {
        &self.voxels
    }

    pub fn voxels_mut(&mut self) -> &mut [T] {
        &mut self.voxels
    }

    pub fn into_voxels(self) -> Vec<T> {
        self.voxels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, z: usize) -> T {
        self.voxels[self.geometry.index(x, y, z)]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, z: usize, v: T) {
        let i = self.geometry.index(x, y, z);
        self.voxels[i] = v;
    }

    /// Voxel lookup with signed coordinates; `None` outside the grid.
    #[inline]
    pub fn get_checked(&self, x: isize, y: isize, z: isize) -> Option<T> {
        let d = self.geometry.dims;
        if x < 0 || y < 0 || z < 0 || x as usize >= d[0] || y as usize >= d[1] || z as usize >= d[2] {
            return None;
        }
        Some(self.get(x as usize, y as usize, z as usize))
    }

    pub fn map<U: Voxel>(&self, f: impl Fn(T) -> U) -> Volume3D<U> {
        Volume3D {
            geometry: self.geometry,
            voxels: self.voxels.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Binary view helper: true where a label voxel is nonzero.
pub fn nonzero(vol: &Volume3D<u8>) -> Vec<bool> {
    vol.voxels().iter().map(|&v| v != 0).collect()
}
