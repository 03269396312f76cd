use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::curation::SequenceClass;
use crate::volume::{MaskScheme, SegMask, Volume3D, VolumeError, LABEL_ED, LABEL_ET, LABEL_NC};

/// Z-score thresholds of the intensity-threshold segmenter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MockThresholds {
    pub t_et: f64,
    pub t_nc: f64,
    pub t_ed: f64,
}

impl Default for MockThresholds {
    fn default() -> Self {
        Self {
            t_et: 3.0,
            t_nc: -3.0,
            t_ed: 3.0,
        }
    }
}

/// Deterministic stand-in for a segmentation network.
///
/// With Gd-T1WI: ET where Gd > `t_et`; NC where Gd < `t_nc` inside the
/// bounding box of ET; ED where FLAIR (else T2WI) > `t_ed` and not already
/// labeled. Without Gd-T1WI the mask is binary: 1 where FLAIR (else T2WI)
/// > `t_ed`. Returns an error if the inputs are not on one grid.
pub fn mock_segmenter(vols: &BTreeMap<SequenceClass, Volume3D<f64>>, th: &MockThresholds) -> Result<SegMask, VolumeError> {
    let first = vols.values().next().ok_or_else(|| VolumeError::InvalidGeometry("no input volumes".into()))?;
    let geom = first.geometry().clone();
    if vols.values().any(|v| !v.geometry().same_grid(&geom)) {
        return Err(VolumeError::GridMismatch);
    }
    let fluid = vols.get(&SequenceClass::FLAIR).or_else(|| vols.get(&SequenceClass::T2WI));
    let Some(gd) = vols.get(&SequenceClass::GdT1WI) else {
        let labels = match fluid {
            Some(f) => f.map(|v| u8::from(v > th.t_ed)),
            None => Volume3D::filled(geom, 0),
        };
        return SegMask::new(labels, MaskScheme::BinaryWt);
    };

    let mut labels = gd.map(|v| if v > th.t_et { LABEL_ET } else { 0 });
    let [nx, ny, nz] = geom.dims;
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if labels.get(x, y, z) == LABEL_ET {
                    for (a, v) in [x, y, z].into_iter().enumerate() {
                        lo[a] = lo[a].min(v);
                        hi[a] = hi[a].max(v);
                    }
                }
            }
        }
    }
    if lo[0] != usize::MAX {
        for z in lo[2]..=hi[2] {
            for y in lo[1]..=hi[1] {
                for x in lo[0]..=hi[0] {
                    if labels.get(x, y, z) == 0 && gd.get(x, y, z) < th.t_nc {
                        labels.set(x, y, z, LABEL_NC);
                    }
                }
            }
        }
    }
    if let Some(f) = fluid {
        for (l, &v) in labels.voxels_mut().iter_mut().zip(f.voxels()) {
            if *l == 0 && v > th.t_ed {
                *l = LABEL_ED;
            }
        }
    }
    SegMask::new(labels, MaskScheme::MultiClass)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn g() -> Geometry {
        Geometry::new([6, 1, 1], [1.0; 3], [0.0; 3]).unwrap()
    }

    fn v(vals: [f64; 6]) -> Volume3D<f64> {
        Volume3D::new(g(), vals.to_vec()).unwrap()
    }

    #[test]
    fn labels_by_threshold() {
        let mut m = BTreeMap::new();
        m.insert(SequenceClass::GdT1WI, v([0.0, 5.0, -5.0, 5.0, 0.0, -5.0]));
        m.insert(SequenceClass::FLAIR, v([4.0, 4.0, 4.0, 4.0, 4.0, 0.0]));
        let s = mock_segmenter(&m, &MockThresholds::default()).unwrap();
        assert_eq!(s.scheme, MaskScheme::MultiClass);
        // the -5 at x=5 is outside the ET bounding box
        assert_eq!(s.labels.voxels(), &[LABEL_ED, LABEL_ET, LABEL_NC, LABEL_ET, LABEL_ED, 0]);
    }

    #[test]
    fn all_zero_is_background() {
        let mut m = BTreeMap::new();
        m.insert(SequenceClass::GdT1WI, v([0.0; 6]));
        m.insert(SequenceClass::T2WI, v([0.0; 6]));
        let s = mock_segmenter(&m, &MockThresholds::default()).unwrap();
        assert!(s.labels.voxels().iter().all(|&l| l == 0));
    }

    #[test]
    fn binary_route_only_wt() {
        let mut m = BTreeMap::new();
        m.insert(SequenceClass::T2WI, v([0.0, 5.0, 9.0, -4.0, 3.5, 0.0]));
        let s = mock_segmenter(&m, &MockThresholds::default()).unwrap();
        assert_eq!(s.scheme, MaskScheme::BinaryWt);
        assert_eq!(s.labels.voxels(), &[0, 1, 1, 0, 1, 0]);
    }
}
