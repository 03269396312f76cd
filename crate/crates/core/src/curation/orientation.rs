use serde::{Deserialize, Serialize};

use crate::dicom::{cross, InstanceMeta};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Orientation {
    Axial,
    Coronal,
    Sagittal,
    Unknown,
}

impl Orientation {
    /// Selection rank: axial first, coronal and sagittal tied, unknown last.
    pub fn rank(&self) -> u8 {
        match self {
            Orientation::Axial => 2,
            Orientation::Coronal | Orientation::Sagittal => 1,
            Orientation::Unknown => 0,
        }
    }
}

/// Cross product of the row and column cosines, `None` when they are
/// (nearly) parallel.
pub fn slice_normal(iop: [f64; 6]) -> Option<[f64; 3]> {
    let n = cross([iop[0], iop[1], iop[2]], [iop[3], iop[4], iop[5]]);
    let norm = (n[0] * n[0] + n[1] * n[1] + n[2] * n[2]).sqrt();
    (norm > 1e-6).then_some(n)
}

/// Plane of the slice normal's dominant component: z axial, y coronal,
/// x sagittal. Exact ties resolve in that order. Missing or degenerate
/// cosines give `Unknown`. The acquisition type (2D/3D) is not used.
pub fn determine_orientation(meta: &InstanceMeta) -> Orientation {
    let Some(n) = meta.image_orientation_patient.and_then(slice_normal) else {
        return Orientation::Unknown;
    };
    let (ax, ay, az) = (n[0].abs(), n[1].abs(), n[2].abs());
    if az >= ay && az >= ax {
        Orientation::Axial
    } else if ay >= ax {
        Orientation::Coronal
    } else {
        Orientation::Sagittal
    }
}
