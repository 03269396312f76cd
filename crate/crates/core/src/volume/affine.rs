use std::fmt;
use std::str::FromStr;

use nalgebra::{Matrix4, Vector4};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::resample::{sample_linear, sample_nearest, Interpolation};
use super::{Geometry, Volume3D, VolumeError, Voxel};

const SINGULAR_EPS: f64 = 1e-12;

/// Homogeneous 4x4 transform between world (mm) frames. The last row is
/// always (0, 0, 0, 1).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine4(Matrix4<f64>);

impl Affine4 {
    pub fn identity() -> Self {
        Self(Matrix4::identity())
    }

    pub fn translation(t: [f64; 3]) -> Self {
        let mut m = Matrix4::identity();
        m[(0, 3)] = t[0];
        m[(1, 3)] = t[1];
        m[(2, 3)] = t[2];
        Self(m)
    }

    /// Builds from row-major entries. The bottom row is forced to (0,0,0,1)
    /// only if it already is; anything else is rejected.
    pub fn from_rows(rows: [[f64; 4]; 4]) -> Result<Self, VolumeError> {
        if rows[3] != [0.0, 0.0, 0.0, 1.0] {
            return Err(VolumeError::InvalidGeometry(format!(
                "affine bottom row must be (0,0,0,1), got {:?}",
                rows[3]
            )));
        }
        let mut m = Matrix4::zeros();
        for (r, row) in rows.iter().enumerate() {
            for (c, v) in row.iter().enumerate() {
                m[(r, c)] = *v;
            }
        }
        Ok(Self(m))
    }

    pub fn rows(&self) -> [[f64; 4]; 4] {
        let mut out = [[0.0; 4]; 4];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = self.0[(r, c)];
            }
        }
        out
    }

    pub fn matrix(&self) -> &Matrix4<f64> {
        &self.0
    }

    pub fn linear_det(&self) -> f64 {
        self.0.fixed_view::<3, 3>(0, 0).determinant()
    }

    pub fn is_invertible(&self) -> bool {
        self.linear_det().abs() > SINGULAR_EPS
    }

    pub fn compose(&self, rhs: &Affine4) -> Affine4 {
        Affine4(self.0 * rhs.0)
    }

    #[inline]
    pub fn apply_point(&self, p: [f64; 3]) -> [f64; 3] {
        let v = self.0 * Vector4::new(p[0], p[1], p[2], 1.0);
        [v[0], v[1], v[2]]
    }

    /// FLIRT-style text: four lines of four whitespace-separated reals.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        for row in self.rows() {
            let line: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
            s.push_str(&line.join("  "));
            s.push('\n');
        }
        s
    }
}

impl Serialize for Affine4 {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

impl<'de> Deserialize<'de> for Affine4 {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let rows = <[[f64; 4]; 4]>::deserialize(d)?;
        Affine4::from_rows(rows).map_err(serde::de::Error::custom)
    }
}

impl fmt::Display for Affine4 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for Affine4 {
    type Err = VolumeError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let vals: Vec<f64> = s
            .split_whitespace()
            .map(|t| {
                t.parse::<f64>()
                    .map_err(|e| VolumeError::InvalidGeometry(format!("bad matrix entry {t:?}: {e}")))
            })
            .collect::<Result<_, _>>()?;
        if vals.len() != 16 {
            return Err(VolumeError::InvalidGeometry(format!(
                "matrix file has {} values, expected 16",
                vals.len()
            )));
        }
        let mut rows = [[0.0; 4]; 4];
        for (i, v) in vals.into_iter().enumerate() {
            rows[i / 4][i % 4] = v;
        }
        Affine4::from_rows(rows)
    }
}

pub fn invert_affine(xform: &Affine4) -> Result<Affine4, VolumeError> {
    if !xform.is_invertible() {
        return Err(VolumeError::SingularTransform);
    }
    let inv = xform.0.try_inverse().ok_or(VolumeError::SingularTransform)?;
    let mut inv = inv;
    // keep the homogeneous row exact
    inv[(3, 0)] = 0.0;
    inv[(3, 1)] = 0.0;
    inv[(3, 2)] = 0.0;
    inv[(3, 3)] = 1.0;
    Ok(Affine4(inv))
}

/// Resamples `vol` onto the `reference` grid, where `xform` maps the
/// source world frame into the reference world frame. Each output voxel is
/// pulled back through the inverse; samples falling outside the source grid
/// are background (zero).
pub fn apply_affine<T: Voxel>(
    vol: &Volume3D<T>,
    xform: &Affine4,
    reference: &Geometry,
    mode: Interpolation,
) -> Result<Volume3D<T>, VolumeError> {
    if T::IS_LABEL && mode == Interpolation::Trilinear {
        return Err(VolumeError::ModeLabelMismatch);
    }
    let inv = invert_affine(xform)?;
    let src = vol.geometry();
    let dims = reference.dims;
    let plane = dims[0] * dims[1];
    let mut voxels = vec![T::default(); reference.len()];
    voxels.par_chunks_mut(plane).enumerate().for_each(|(z, slab)| {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let world = reference.to_world([x as f64, y as f64, z as f64]);
                let p = src.to_index(inv.apply_point(world));
                let v = match mode {
                    Interpolation::Nearest => sample_nearest(vol, p),
                    Interpolation::Trilinear => sample_linear(vol, p),
                };
                slab[x + dims[0] * y] = v.unwrap_or_default();
            }
        }
    });
    Volume3D::new(*reference, voxels)
}
