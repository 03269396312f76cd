use serde::{Deserialize, Serialize};

use crate::dicom::SeriesRecord;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExclusionReason {
    /// (0008,103E) absent or blank.
    NoSeriesDescription,
    /// (0008,0008) joined with "/" lacks "ORIGINAL/PRIMARY".
    NotOriginalPrimary,
    /// (0018,0025) is "Y".
    AngioFlag,
}

fn reason(s: &SeriesRecord) -> Option<ExclusionReason> {
    if s.description().map_or(true, |d| d.trim().is_empty()) {
        return Some(ExclusionReason::NoSeriesDescription);
    }
    let original_primary = s
        .image_type()
        .is_some_and(|t| t.join("/").to_uppercase().contains("ORIGINAL/PRIMARY"));
    if !original_primary {
        return Some(ExclusionReason::NotOriginalPrimary);
    }
    if s.angio_flag().is_some_and(|c| c.eq_ignore_ascii_case(&'Y')) {
        return Some(ExclusionReason::AngioFlag);
    }
    None
}

/// Splits series into kept and excluded. When several rules apply the
/// first in declaration order of [`ExclusionReason`] is reported.
pub fn apply_exclusions(series: Vec<SeriesRecord>) -> (Vec<SeriesRecord>, Vec<(String, ExclusionReason)>) {
    let mut kept = Vec::new();
    let mut excluded = Vec::new();
    for s in series {
        match reason(&s) {
            Some(r) => excluded.push((s.series_uid.clone(), r)),
            None => kept.push(s),
        }
    }
    (kept, excluded)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::ManifestSeries;

    fn rec(desc: Option<&str>, it: Option<&[&str]>, angio: Option<&str>) -> SeriesRecord {
        ManifestSeries {
            series_uid: "u".into(),
            description: desc.map(str::to_string),
            image_type: it.map(|v| v.iter().map(|s| s.to_string()).collect()),
            angio_flag: angio.map(str::to_string),
            mr_acq_type: None,
            iop: None,
            n_instances: 10,
            series_number: None,
        }
        .to_record()
    }

    fn why(r: SeriesRecord) -> Option<ExclusionReason> {
        let (_, ex) = apply_exclusions(vec![r]);
        ex.first().map(|e| e.1)
    }

    #[test]
    fn derived_secondary() {
        assert_eq!(why(rec(Some("AX T1"), Some(&["DERIVED", "SECONDARY"]), None)), Some(ExclusionReason::NotOriginalPrimary));
    }

    #[test]
    fn angio() {
        assert_eq!(why(rec(Some("TOF"), Some(&["ORIGINAL", "PRIMARY"]), Some("Y"))), Some(ExclusionReason::AngioFlag));
        assert_eq!(why(rec(Some("T1"), Some(&["ORIGINAL", "PRIMARY"]), Some("N"))), None);
    }

    #[test]
    fn no_description() {
        assert_eq!(why(rec(None, Some(&["ORIGINAL", "PRIMARY"]), None)), Some(ExclusionReason::NoSeriesDescription));
        assert_eq!(why(rec(Some("  "), Some(&["ORIGINAL", "PRIMARY"]), None)), Some(ExclusionReason::NoSeriesDescription));
    }

    #[test]
    fn image_type_substring_match() {
        assert_eq!(why(rec(Some("T1"), Some(&["ORIGINAL", "PRIMARY", "M", "ND"]), None)), None);
        assert_eq!(why(rec(Some("T1"), Some(&["PRIMARY", "ORIGINAL"]), None)), Some(ExclusionReason::NotOriginalPrimary));
        assert_eq!(why(rec(Some("T1"), None, None)), Some(ExclusionReason::NotOriginalPrimary));
    }
}
