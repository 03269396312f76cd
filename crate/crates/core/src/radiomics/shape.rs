use std::collections::{BTreeMap, HashSet};

use nalgebra::{Matrix3, SymmetricEigen};

use super::RadiomicsError;
use crate::volume::Volume3D;

pub const SHAPE_NAMES: [&str; 14] = [
    "MeshVolume",
    "VoxelVolume",
    "SurfaceArea",
    "SurfaceVolumeRatio",
    "Sphericity",
    "Maximum3DDiameter",
    "Maximum2DDiameterSlice",
    "Maximum2DDiameterColumn",
    "Maximum2DDiameterRow",
    "MajorAxisLength",
    "MinorAxisLength",
    "LeastAxisLength",
    "Elongation",
    "Flatness",
];

/// Boundary faces of the voxelized mask: every face between an in-mask
/// voxel and a background (or out-of-grid) neighbor.
struct FaceMesh {
    area: f64,
    /// Signed volume from the divergence theorem over the faces.
    volume: f64,
    /// Corner indices of all boundary faces.
    corners: HashSet<[i64; 3]>,
}

fn face_mesh(mask: &Volume3D<u8>) -> FaceMesh {
    let [nx, ny, nz] = mask.dims();
    let s = mask.spacing();
    let face_area = [s[1] * s[2], s[0] * s[2], s[0] * s[1]];
    let inside = |x: isize, y: isize, z: isize| mask.get_checked(x, y, z).is_some_and(|v| v != 0);
    let mut area = 0.0;
    let mut volume = 0.0;
    let mut corners = HashSet::new();
    for z in 0..nz as isize {
        for y in 0..ny as isize {
            for x in 0..nx as isize {
                if !inside(x, y, z) {
                    continue;
                }
                let p = [x, y, z];
                for axis in 0..3 {
                    for dir in [-1isize, 1] {
                        let mut q = p;
                        q[axis] += dir;
                        if inside(q[0], q[1], q[2]) {
                            continue;
                        }
                        area += face_area[axis];
                        // face plane sits at index p[axis] (dir -1) or p[axis]+1 (dir +1)
                        let plane = p[axis] + isize::from(dir > 0);
                        volume += plane as f64 * s[axis] * dir as f64 * face_area[axis];
                        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
                        for (du, dv) in [(0, 0), (1, 0), (0, 1), (1, 1)] {
                            let mut c = [p[0] as i64, p[1] as i64, p[2] as i64];
                            c[axis] = plane as i64;
                            c[u] += du;
                            c[v] += dv;
                            corners.insert(c);
                        }
                    }
                }
            }
        }
    }
    FaceMesh { area, volume, corners }
}

/// Keeps, along every axis-parallel line, only the two extreme corners.
/// Every convex-hull vertex survives, so diameters are unchanged.
fn extreme_corners(corners: &HashSet<[i64; 3]>) -> Vec<[i64; 3]> {
    let mut keep: HashSet<[i64; 3]> = HashSet::new();
    for axis in 0..3 {
        let mut lines: BTreeMap<[i64; 2], (i64, i64)> = BTreeMap::new();
        let (u, v) = ((axis + 1) % 3, (axis + 2) % 3);
        for c in corners {
            let e = lines.entry([c[u], c[v]]).or_insert((c[axis], c[axis]));
            e.0 = e.0.min(c[axis]);
            e.1 = e.1.max(c[axis]);
        }
        for ([cu, cv], (lo, hi)) in lines {
            for w in [lo, hi] {
                let mut c = [0i64; 3];
                c[axis] = w;
                c[u] = cu;
                c[v] = cv;
                keep.insert(c);
            }
        }
    }
    let mut out: Vec<_> = keep.into_iter().collect();
    out.sort_unstable();
    out
}

fn max_distance(points: &[[f64; 3]]) -> f64 {
    let mut best = 0.0f64;
    for (i, a) in points.iter().enumerate() {
        for b in &points[i + 1..] {
            let d = (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2) + (a[2] - b[2]).powi(2);
            best = best.max(d);
        }
    }
    best.sqrt()
}

/// Largest distance among points sharing the same index along `axis`.
fn max_planar_distance(points: &[[i64; 3]], spacing: [f64; 3], axis: usize) -> f64 {
    let mut planes: BTreeMap<i64, Vec<[f64; 3]>> = BTreeMap::new();
    for p in points {
        planes.entry(p[axis]).or_default().push(physical(p, spacing));
    }
    planes.values().map(|v| max_distance(v)).fold(0.0, f64::max)
}

fn physical(c: &[i64; 3], s: [f64; 3]) -> [f64; 3] {
    [c[0] as f64 * s[0], c[1] as f64 * s[1], c[2] as f64 * s[2]]
}

/// Eigenvalues (descending) of the sample covariance of physical voxel
/// centres. A single voxel gives zeros.
fn axis_eigenvalues(mask: &Volume3D<u8>) -> [f64; 3] {
    let s = mask.spacing();
    let [nx, ny, nz] = mask.dims();
    let mut pts = Vec::new();
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.get(x, y, z) != 0 {
                    pts.push([x as f64 * s[0], y as f64 * s[1], z as f64 * s[2]]);
                }
            }
        }
    }
    if pts.len() < 2 {
        return [0.0; 3];
    }
    let n = pts.len() as f64;
    let mut mu = [0.0; 3];
    for p in &pts {
        for a in 0..3 {
            mu[a] += p[a] / n;
        }
    }
    let mut cov = Matrix3::zeros();
    for p in &pts {
        for i in 0..3 {
            for j in 0..3 {
                cov[(i, j)] += (p[i] - mu[i]) * (p[j] - mu[j]);
            }
        }
    }
    cov /= n - 1.0;
    let mut ev: Vec<f64> = SymmetricEigen::new(cov).eigenvalues.iter().map(|&l| l.max(0.0)).collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    [ev[0], ev[1], ev[2]]
}

/// The 14 shape descriptors of a binary mask, in [`SHAPE_NAMES`] order.
pub fn shape_features(mask: &Volume3D<u8>) -> Result<Vec<(&'static str, f64)>, RadiomicsError> {
    let n = mask.voxels().iter().filter(|&&v| v != 0).count();
    if n == 0 {
        return Err(RadiomicsError::EmptyMask);
    }
    let s = mask.spacing();
    let voxel_volume = n as f64 * s[0] * s[1] * s[2];
    let mesh = face_mesh(mask);
    // each axis contributes the full volume
    let mesh_volume = mesh.volume / 3.0;
    let area = mesh.area;
    let ext = extreme_corners(&mesh.corners);
    let pts: Vec<[f64; 3]> = ext.iter().map(|c| physical(c, s)).collect();
    let [l1, l2, l3] = axis_eigenvalues(mask);
    let (elongation, flatness) = if l1 > 0.0 { ((l2 / l1).sqrt(), (l3 / l1).sqrt()) } else { (1.0, 1.0) };
    let out = [
        mesh_volume,
        voxel_volume,
        area,
        area / mesh_volume,
        (36.0 * std::f64::consts::PI * mesh_volume * mesh_volume).cbrt() / area,
        max_distance(&pts),
        max_planar_distance(&ext, s, 2),
        max_planar_distance(&ext, s, 1),
        max_planar_distance(&ext, s, 0),
        4.0 * l1.sqrt(),
        4.0 * l2.sqrt(),
        4.0 * l3.sqrt(),
        elongation,
        flatness,
    ];
    Ok(SHAPE_NAMES.iter().copied().zip(out).collect())
}
