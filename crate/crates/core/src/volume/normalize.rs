use serde::{Deserialize, Serialize};

use super::{Volume3D, VolumeError};
use crate::stats::{percentile_sorted, sorted};

/// Statistics used for a z-score normalization, kept for provenance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationStats {
    pub p5: f64,
    pub p95: f64,
    pub mean: f64,
    pub std: f64,
    pub n_inliers: usize,
    pub n_in_mask: usize,
}

/// Z-scores the in-mask intensities using the mean and population standard
/// deviation of the inliers, i.e. the voxels strictly between the 5th and
/// 95th percentiles (linear-interpolation estimator on the sorted in-mask
/// values). Every in-mask voxel is transformed, including the tails; voxels
/// outside the mask become 0.
pub fn normalize_intensity(
    vol: &Volume3D<f64>,
    brain_mask: &Volume3D<u8>,
) -> Result<(Volume3D<f64>, NormalizationStats), VolumeError> {
    if !vol.geometry().same_grid(brain_mask.geometry()) {
        return Err(VolumeError::GridMismatch);
    }
    let in_mask: Vec<f64> = vol
        .voxels()
        .iter()
        .zip(brain_mask.voxels())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v)
        .collect();
    if in_mask.is_empty() {
        return Err(VolumeError::EmptyMask);
    }
    let s = sorted(&in_mask);
    let p5 = percentile_sorted(&s, 5.0);
    let p95 = percentile_sorted(&s, 95.0);
    let inliers: Vec<f64> = s.iter().copied().filter(|&v| v > p5 && v < p95).collect();
    if inliers.len() < 2 {
        return Err(VolumeError::DegenerateIntensities);
    }
    let n = inliers.len() as f64;
    let mean = inliers.iter().sum::<f64>() / n;
    let var = inliers.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0) {
        return Err(VolumeError::DegenerateIntensities);
    }
    let out = Volume3D::new(
        *vol.geometry(),
        vol.voxels()
            .iter()
            .zip(brain_mask.voxels())
            .map(|(&v, &m)| if m != 0 { (v - mean) / std } else { 0.0 })
            .collect(),
    )?;
    Ok((
        out,
        NormalizationStats {
            p5,
            p95,
            mean,
            std,
            n_inliers: inliers.len(),
            n_in_mask: in_mask.len(),
        },
    ))
}
