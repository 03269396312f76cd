use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Geometry, Volume3D, VolumeError, Voxel};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Interpolation {
    Nearest,
    Trilinear,
}

/// Nearest voxel to a continuous index, `None` outside the grid.
#[inline]
pub(crate) fn sample_nearest<T: Voxel>(vol: &Volume3D<T>, p: [f64; 3]) -> Option<T> {
    let x = p[0].round();
    let y = p[1].round();
    let z = p[2].round();
    if !(x.is_finite() && y.is_finite() && z.is_finite()) {
        return None;
    }
    vol.get_checked(x as isize, y as isize, z as isize)
}

/// Trilinear sample. Points within half a voxel of the border are clamped
/// to the edge; anything further out is `None`.
#[inline]
pub(crate) fn sample_linear<T: Voxel>(vol: &Volume3D<T>, p: [f64; 3]) -> Option<T> {
    let d = vol.dims();
    let mut base = [0usize; 3];
    let mut frac = [0f64; 3];
    for a in 0..3 {
        let n = d[a] as f64;
        if !(p[a] >= -0.5 && p[a] <= n - 0.5) {
            return None;
        }
        let c = p[a].clamp(0.0, n - 1.0);
        let f = c.floor();
        base[a] = f as usize;
        frac[a] = c - f;
    }
    let next = |a: usize| (base[a] + 1).min(d[a] - 1);
    let (x0, y0, z0) = (base[0], base[1], base[2]);
    let (x1, y1, z1) = (next(0), next(1), next(2));
    let (fx, fy, fz) = (frac[0], frac[1], frac[2]);
    let v = |x, y, z| vol.get(x, y, z).to_f64();
    let c00 = v(x0, y0, z0) * (1.0 - fx) + v(x1, y0, z0) * fx;
    let c10 = v(x0, y1, z0) * (1.0 - fx) + v(x1, y1, z0) * fx;
    let c01 = v(x0, y0, z1) * (1.0 - fx) + v(x1, y0, z1) * fx;
    let c11 = v(x0, y1, z1) * (1.0 - fx) + v(x1, y1, z1) * fx;
    let c0 = c00 * (1.0 - fy) + c10 * fy;
    let c1 = c01 * (1.0 - fy) + c11 * fy;
    Some(T::from_f64(c0 * (1.0 - fz) + c1 * fz))
}

/// Resizes a volume to `target_dims`, keeping its physical extent. Output
/// voxel centers are placed so that the outer faces of the first and last
/// voxels coincide with the input's.
pub fn resample_to_shape<T: Voxel>(
    vol: &Volume3D<T>,
    target_dims: [usize; 3],
    mode: Interpolation,
) -> Result<Volume3D<T>, VolumeError> {
    if T::IS_LABEL && mode == Interpolation::Trilinear {
        return Err(VolumeError::ModeLabelMismatch);
    }
    let src = vol.geometry();
    let mut spacing = [0.0; 3];
    let mut origin = [0.0; 3];
    let mut scale = [0.0; 3];
    for a in 0..3 {
        if target_dims[a] == 0 {
            return Err(VolumeError::InvalidGeometry(format!(
                "target dims must be positive, got {target_dims:?}"
            )));
        }
        scale[a] = src.dims[a] as f64 / target_dims[a] as f64;
        spacing[a] = src.spacing[a] * scale[a];
        origin[a] = src.origin[a] + 0.5 * (spacing[a] - src.spacing[a]);
    }
    let out = Geometry::new(target_dims, spacing, origin)?;
    let plane = target_dims[0] * target_dims[1];
    let mut voxels = vec![T::default(); out.len()];
    voxels.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for y in 0..target_dims[1] {
            for x in 0..target_dims[0] {
                let j = [x, y, z];
                let mut p = [0.0; 3];
                for a in 0..3 {
                    p[a] = ((j[a] as f64 + 0.5) * scale[a] - 0.5).clamp(0.0, (src.dims[a] - 1) as f64);
                }
                let v = match mode {
                    Interpolation::Nearest => sample_nearest(vol, p),
                    Interpolation::Trilinear => sample_linear(vol, p),
                };
                slab[x + target_dims[0] * y] = v.unwrap_or_default();
            }
        }
    });
    Volume3D::new(out, voxels)
}
