use serde::{Deserialize, Serialize};

use super::{Volume3D, VolumeError};

pub const LABEL_NC: u8 = 1;
pub const LABEL_ED: u8 = 2;
pub const LABEL_ET: u8 = 4;

/// How labels in a [`SegMask`] are to be read.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskScheme {
    /// 0 = background, 1 = NC, 2 = ED, 4 = ET.
    MultiClass,
    /// 0 = background, 1 = whole tumor.
    BinaryWt,
}

impl MaskScheme {
    pub fn as_str(&self) -> &'static str {
        match self {
            MaskScheme::MultiClass => "multiclass",
            MaskScheme::BinaryWt => "binary_wt",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s.trim_end_matches('\0').trim() {
            "multiclass" => Some(MaskScheme::MultiClass),
            "binary_wt" => Some(MaskScheme::BinaryWt),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegMask {
    pub labels: Volume3D<u8>,
    pub scheme: MaskScheme,
}

impl SegMask {
    pub fn new(labels: Volume3D<u8>, scheme: MaskScheme) -> Result<Self, VolumeError> {
        let m = Self { labels, scheme };
        m.validate()?;
        Ok(m)
    }

    pub fn validate(&self) -> Result<(), VolumeError> {
        for &v in self.labels.voxels() {
            let ok = match self.scheme {
                MaskScheme::MultiClass => matches!(v, 0 | LABEL_NC | LABEL_ED | LABEL_ET),
                MaskScheme::BinaryWt => matches!(v, 0 | 1),
            };
            if !ok {
                return Err(VolumeError::InvalidLabel(v));
            }
        }
        Ok(())
    }

    /// Binary volume of the voxels carrying `label` (multi-class only).
    pub fn select(&self, label: u8) -> Volume3D<u8> {
        self.labels.map(|v| u8::from(v == label))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompositeMasks {
    pub tc: Volume3D<u8>,
    pub wt: Volume3D<u8>,
}

/// Derives tumor core (NC + ET) and whole tumor (NC + ED + ET). For a
/// binary whole-tumor mask the core is empty.
pub fn merge_mask_classes(mask: &SegMask) -> Result<CompositeMasks, VolumeError> {
    mask.validate()?;
    Ok(match mask.scheme {
        MaskScheme::MultiClass => CompositeMasks {
            tc: mask.labels.map(|v| u8::from(v == LABEL_NC || v == LABEL_ET)),
            wt: mask.labels.map(|v| u8::from(v != 0)),
        },
        MaskScheme::BinaryWt => CompositeMasks {
            tc: mask.labels.map(|_| 0u8),
            wt: mask.labels.map(|v| u8::from(v != 0)),
        },
    })
}
