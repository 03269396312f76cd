use serde::{Deserialize, Serialize};

use super::{cross, dot, DicomError, InstanceMeta, SeriesRecord};
use crate::volume::{Geometry, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SliceOrdering {
    /// Sorted by projection of the image position onto the slice normal.
    Position,
    /// Positions missing; sorted by instance number and the slice spacing
    /// is unknown (recorded as 1 mm).
    InstanceNumber,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StackProvenance {
    pub ordering: SliceOrdering,
    pub slice_spacing: f64,
    /// Every consecutive slice gap equals the mean gap within 1e-3 mm.
    pub spacing_uniform: bool,
    /// SOP UIDs in stacking order.
    pub slice_order: Vec<String>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StackedVolume {
    pub volume: Volume3D<f64>,
    pub provenance: StackProvenance,
}

fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= tol)
}

fn decode_pixels(meta: &InstanceMeta, payload: &[u8], n: usize) -> Result<Vec<f64>, DicomError> {
    let bits = meta.bits_allocated.unwrap_or(16);
    let signed = meta.pixel_representation == Some(1);
    let slope = meta.rescale_slope.unwrap_or(1.0);
    let inter = meta.rescale_intercept.unwrap_or(0.0);
    let raw: Vec<f64> = match bits {
        8 => {
            if payload.len() < n {
                return Err(DicomError::UnsupportedPixelFormat(format!(
                    "{} bytes for {n} 8-bit pixels",
                    payload.len()
                )));
            }
            payload[..n]
                .iter()
                .map(|&b| if signed { b as i8 as f64 } else { b as f64 })
                .collect()
        }
        16 => {
            if payload.len() < 2 * n {
                return Err(DicomError::UnsupportedPixelFormat(format!(
                    "{} bytes for {n} 16-bit pixels",
                    payload.len()
                )));
            }
            payload[..2 * n]
                .chunks_exact(2)
                .map(|c| {
                    let u = u16::from_le_bytes([c[0], c[1]]);
                    if signed {
                        u as i16 as f64
                    } else {
                        u as f64
                    }
                })
                .collect()
        }
        other => {
            return Err(DicomError::UnsupportedPixelFormat(format!("bits allocated {other}")));
        }
    };
    Ok(raw.into_iter().map(|v| v * slope + inter).collect())
}

/// Stacks a series' slices into a volume expressed in the series' own
/// direction-aligned frame: x along the row cosines, y along the column
/// cosines, z along their cross product. The origin is the first slice's
/// position projected onto those axes.
pub fn series_to_volume<P: AsRef<[u8]>>(series: &SeriesRecord, payloads: &[P]) -> Result<StackedVolume, DicomError> {
    let insts = &series.instances;
    if insts.is_empty() {
        return Err(DicomError::InconsistentGeometry("series has no instances".into()));
    }
    if payloads.len() != insts.len() {
        return Err(DicomError::InconsistentGeometry(format!(
            "{} payloads for {} instances",
            payloads.len(),
            insts.len()
        )));
    }
    let first = &insts[0];
    let (rows, cols) = match (first.rows, first.cols) {
        (Some(r), Some(c)) if r > 0 && c > 0 => (r, c),
        _ => return Err(DicomError::InconsistentGeometry("rows/columns missing".into())),
    };
    let ps = first.pixel_spacing.unwrap_or([1.0, 1.0]);
    let iop = first.image_orientation_patient.unwrap_or([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]);
    for i in insts.iter().skip(1) {
        if i.rows != first.rows || i.cols != first.cols {
            return Err(DicomError::InconsistentGeometry("rows/columns differ between slices".into()));
        }
        if !close(&i.pixel_spacing.unwrap_or([1.0, 1.0]), &ps, 1e-4) {
            return Err(DicomError::InconsistentGeometry("pixel spacing differs between slices".into()));
        }
        if !close(&i.image_orientation_patient.unwrap_or(iop), &iop, 1e-4) {
            return Err(DicomError::InconsistentGeometry("orientation differs between slices".into()));
        }
    }
    let row_dir = [iop[0], iop[1], iop[2]];
    let col_dir = [iop[3], iop[4], iop[5]];
    let normal = cross(row_dir, col_dir);

    let mut warnings = Vec::new();
    let mut order: Vec<usize> = (0..insts.len()).collect();
    let have_positions = insts.iter().all(|i| i.image_position_patient.is_some());
    let (ordering, slice_spacing, uniform) = if have_positions {
        let key = |i: usize| dot(insts[i].image_position_patient.unwrap(), normal);
        order.sort_by(|&a, &b| key(a).total_cmp(&key(b)).then_with(|| insts[a].sop_uid.cmp(&insts[b].sop_uid)));
        let gaps: Vec<f64> = order.windows(2).map(|w| key(w[1]) - key(w[0])).collect();
        if gaps.iter().any(|&g| g.abs() < 1e-6) {
            return Err(DicomError::InconsistentGeometry("two slices share a position".into()));
        }
        let spacing = if gaps.is_empty() {
            1.0
        } else {
            gaps.iter().sum::<f64>() / gaps.len() as f64
        };
        let uniform = gaps.iter().all(|g| (g - spacing).abs() <= 1e-3);
        if !uniform {
            warnings.push("non-uniform slice spacing; mean gap used".to_string());
        }
        (SliceOrdering::Position, spacing, uniform)
    } else {
        if insts.iter().any(|i| i.instance_number.is_none()) {
            return Err(DicomError::MissingPosition);
        }
        order.sort_by_key(|&i| (insts[i].instance_number, insts[i].sop_uid.clone()));
        warnings.push("image position missing; slices ordered by instance number".to_string());
        (SliceOrdering::InstanceNumber, 1.0, false)
    };

    let n = rows as usize * cols as usize;
    let mut voxels = Vec::with_capacity(n * insts.len());
    for &i in &order {
        voxels.extend(decode_pixels(&insts[i], payloads[i].as_ref(), n)?);
    }
    let origin = match insts[order[0]].image_position_patient {
        Some(p) => [dot(p, row_dir), dot(p, col_dir), dot(p, normal)],
        None => [0.0; 3],
    };
    let geometry = Geometry::new([cols as usize, rows as usize, insts.len()], [ps[1], ps[0], slice_spacing], origin)
        .map_err(|e| DicomError::InconsistentGeometry(e.to_string()))?;
    let volume = Volume3D::new(geometry, voxels).map_err(|e| DicomError::InconsistentGeometry(e.to_string()))?;
    Ok(StackedVolume {
        volume,
        provenance: StackProvenance {
            ordering,
            slice_spacing,
            spacing_uniform: uniform,
            slice_order: order.iter().map(|&i| insts[i].sop_uid.clone()).collect(),
            warnings,
        },
    })
}
