use std::fmt;

use serde::{Deserialize, Serialize};

/// A (group, element) pair. Ordering is by group, then element.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct DicomTag {
    pub group: u16,
    pub element: u16,
}

impl DicomTag {
    pub const fn new(group: u16, element: u16) -> Self {
        Self { group, element }
    }
}

impl fmt::Display for DicomTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({:04X},{:04X})", self.group, self.element)
    }
}

pub mod tags {
    use super::DicomTag;

    pub const TRANSFER_SYNTAX_UID: DicomTag = DicomTag::new(0x0002, 0x0010);
    pub const IMAGE_TYPE: DicomTag = DicomTag::new(0x0008, 0x0008);
    pub const SOP_INSTANCE_UID: DicomTag = DicomTag::new(0x0008, 0x0018);
    pub const SERIES_DESCRIPTION: DicomTag = DicomTag::new(0x0008, 0x103E);
    pub const MR_ACQUISITION_TYPE: DicomTag = DicomTag::new(0x0018, 0x0023);
    pub const ANGIO_FLAG: DicomTag = DicomTag::new(0x0018, 0x0025);
    pub const STUDY_INSTANCE_UID: DicomTag = DicomTag::new(0x0020, 0x000D);
    pub const SERIES_INSTANCE_UID: DicomTag = DicomTag::new(0x0020, 0x000E);
    pub const SERIES_NUMBER: DicomTag = DicomTag::new(0x0020, 0x0011);
    pub const INSTANCE_NUMBER: DicomTag = DicomTag::new(0x0020, 0x0013);
    pub const IMAGE_POSITION_PATIENT: DicomTag = DicomTag::new(0x0020, 0x0032);
    pub const IMAGE_ORIENTATION_PATIENT: DicomTag = DicomTag::new(0x0020, 0x0037);
    pub const ROWS: DicomTag = DicomTag::new(0x0028, 0x0010);
    pub const COLUMNS: DicomTag = DicomTag::new(0x0028, 0x0011);
    pub const PIXEL_SPACING: DicomTag = DicomTag::new(0x0028, 0x0030);
    pub const BITS_ALLOCATED: DicomTag = DicomTag::new(0x0028, 0x0100);
    pub const PIXEL_REPRESENTATION: DicomTag = DicomTag::new(0x0028, 0x0103);
    pub const RESCALE_INTERCEPT: DicomTag = DicomTag::new(0x0028, 0x1052);
    pub const RESCALE_SLOPE: DicomTag = DicomTag::new(0x0028, 0x1053);
    pub const PIXEL_DATA: DicomTag = DicomTag::new(0x7FE0, 0x0010);

    pub const ITEM: DicomTag = DicomTag::new(0xFFFE, 0xE000);
    pub const ITEM_DELIMITATION: DicomTag = DicomTag::new(0xFFFE, 0xE00D);
    pub const SEQUENCE_DELIMITATION: DicomTag = DicomTag::new(0xFFFE, 0xE0DD);

    /// Value representation of the tags this crate reads, used when the
    /// transfer syntax does not carry VRs.
    pub fn vr_of(tag: DicomTag) -> Option<&'static [u8; 2]> {
        Some(match tag {
            TRANSFER_SYNTAX_UID | SOP_INSTANCE_UID | STUDY_INSTANCE_UID | SERIES_INSTANCE_UID => b"UI",
            IMAGE_TYPE | MR_ACQUISITION_TYPE | ANGIO_FLAG => b"CS",
            SERIES_DESCRIPTION => b"LO",
            SERIES_NUMBER | INSTANCE_NUMBER => b"IS",
            IMAGE_POSITION_PATIENT | IMAGE_ORIENTATION_PATIENT | PIXEL_SPACING | RESCALE_INTERCEPT
            | RESCALE_SLOPE => b"DS",
            ROWS | COLUMNS | BITS_ALLOCATED | PIXEL_REPRESENTATION => b"US",
            PIXEL_DATA => b"OW",
            _ => return None,
        })
    }
}
