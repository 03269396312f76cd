//! Minimal DICOM Part-10 ingestion: the tags needed for curation and
//! geometry, series grouping and slice stacking.
//!
//! Only explicit- and implicit-VR little endian transfer syntaxes are
//! decoded. Everything outside the known tag set is skipped by length,
//! including sequences of undefined length.

mod manifest;
mod parse;
mod series;
mod stack;
mod tag;
pub mod writer;

pub use manifest::{ManifestSeries, SessionManifest};
pub use parse::{parse_dicom, parse_dicom_file, parse_dicom_metadata, ParsedInstance};
pub use series::{assemble_series, SeriesRecord};
pub use stack::{series_to_volume, SliceOrdering, StackProvenance, StackedVolume};
pub use tag::{tags, DicomTag};

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const IMPLICIT_VR_LE: &str = "1.2.840.10008.1.2";
pub const EXPLICIT_VR_LE: &str = "1.2.840.10008.1.2.1";

#[derive(Debug, Error, PartialEq)]
pub enum DicomError {
    #[error("missing DICM magic and no file meta group at offset 0")]
    MissingMagic,
    #[error("unsupported transfer syntax {0}")]
    UnsupportedTransferSyntax(String),
    #[error("file meta group has no transfer syntax UID")]
    MissingTransferSyntax,
    #[error("element truncated at byte offset {offset}")]
    TruncatedElement { offset: usize },
    #[error("series instance UID (0020,000E) missing or empty")]
    MissingSeriesUid,
    #[error("malformed value for {tag}: {value:?}")]
    MalformedValue { tag: DicomTag, value: String },
    #[error("image orientation cosines are not unit vectors: {0:?}")]
    InvalidOrientation([f64; 6]),
    #[error("inconsistent series geometry: {0}")]
    InconsistentGeometry(String),
    #[error("slices carry neither image position nor instance number")]
    MissingPosition,
    #[error("unsupported pixel format: {0}")]
    UnsupportedPixelFormat(String),
}

/// Metadata captured from one DICOM instance. Optional tags that were not
/// present in the file are `None`, never a default value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub series_uid: String,
    pub sop_uid: String,
    pub study_uid: Option<String>,
    pub series_description: Option<String>,
    pub image_type: Option<Vec<String>>,
    pub angio_flag: Option<char>,
    pub mr_acq_type: Option<String>,
    /// Row then column direction cosines.
    pub image_orientation_patient: Option<[f64; 6]>,
    /// mm
    pub image_position_patient: Option<[f64; 3]>,
    pub rows: Option<u16>,
    pub cols: Option<u16>,
    /// Row spacing then column spacing, mm.
    pub pixel_spacing: Option<[f64; 2]>,
    pub series_number: Option<i64>,
    pub instance_number: Option<i64>,
    pub bits_allocated: Option<u16>,
    pub pixel_representation: Option<u16>,
    pub rescale_slope: Option<f64>,
    pub rescale_intercept: Option<f64>,
    pub transfer_syntax: String,
}

impl InstanceMeta {
    /// A metadata-only instance, used for manifests and tests.
    pub fn new(series_uid: impl Into<String>, sop_uid: impl Into<String>) -> Self {
        Self {
            series_uid: series_uid.into(),
            sop_uid: sop_uid.into(),
            study_uid: None,
            series_description: None,
            image_type: None,
            angio_flag: None,
            mr_acq_type: None,
            image_orientation_patient: None,
            image_position_patient: None,
            rows: None,
            cols: None,
            pixel_spacing: None,
            series_number: None,
            instance_number: None,
            bits_allocated: None,
            pixel_representation: None,
            rescale_slope: None,
            rescale_intercept: None,
            transfer_syntax: EXPLICIT_VR_LE.to_string(),
        }
    }

    pub fn validate(&self) -> Result<(), DicomError> {
        if self.series_uid.trim().is_empty() {
            return Err(DicomError::MissingSeriesUid);
        }
        if let Some(iop) = self.image_orientation_patient {
            let n1 = (iop[0] * iop[0] + iop[1] * iop[1] + iop[2] * iop[2]).sqrt();
            let n2 = (iop[3] * iop[3] + iop[4] * iop[4] + iop[5] * iop[5]).sqrt();
            if (n1 - 1.0).abs() > 1e-3 || (n2 - 1.0).abs() > 1e-3 {
                return Err(DicomError::InvalidOrientation(iop));
            }
        }
        Ok(())
    }
}

pub(crate) fn cross(a: [f64; 3], b: [f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

pub(crate) fn dot(a: [f64; 3], b: [f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}
