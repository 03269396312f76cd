//! Scan-type cascade, orientation, exclusion rules and per-class scan
//! selection, producing a [`CuratedSession`] and a JSON-ready report.

mod classify;
mod exclusions;
mod orientation;
mod ruleset;
mod select;

pub use classify::{classify_stage1, classify_stage2, ClassifierAdapter, Stage1Decision};
pub use exclusions::{apply_exclusions, ExclusionReason};
pub use orientation::{determine_orientation, slice_normal, Orientation};
pub use ruleset::{tokenize, Ruleset};
pub use select::{select_scans, PriorityKey};

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dicom::SeriesRecord;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum CurationError {
    #[error("stage-2 classifier failed on series {series_uid}: {message}")]
    AdapterFailure { series_uid: String, message: String },
    #[error("ruleset: {0}")]
    Ruleset(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum SequenceClass {
    T1WI,
    GdT1WI,
    T2WI,
    FLAIR,
    NonSegmentable,
}

impl SequenceClass {
    /// The four selectable classes, in canonical order.
    pub const SEGMENTABLE: [SequenceClass; 4] = [
        SequenceClass::T1WI,
        SequenceClass::GdT1WI,
        SequenceClass::T2WI,
        SequenceClass::FLAIR,
    ];

    pub fn is_segmentable(&self) -> bool {
        !matches!(self, SequenceClass::NonSegmentable)
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            SequenceClass::T1WI => "T1WI",
            SequenceClass::GdT1WI => "GdT1WI",
            SequenceClass::T2WI => "T2WI",
            SequenceClass::FLAIR => "FLAIR",
            SequenceClass::NonSegmentable => "NonSegmentable",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "T1WI" => Some(SequenceClass::T1WI),
            "GdT1WI" => Some(SequenceClass::GdT1WI),
            "T2WI" => Some(SequenceClass::T2WI),
            "FLAIR" => Some(SequenceClass::FLAIR),
            "NonSegmentable" => Some(SequenceClass::NonSegmentable),
            _ => None,
        }
    }
}

impl fmt::Display for SequenceClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// The scans kept for downstream processing: at most one per segmentable
/// class.
#[derive(Debug, Clone, PartialEq)]
pub struct CuratedSession {
    pub session_id: String,
    pub selected: BTreeMap<SequenceClass, SeriesRecord>,
    pub exclusions: Vec<(String, ExclusionReason)>,
    /// True exactly when none of Gd-T1WI, T2WI and FLAIR was selected.
    pub session_excluded: bool,
}

impl CuratedSession {
    pub fn has(&self, class: SequenceClass) -> bool {
        self.selected.contains_key(&class)
    }

    pub(crate) fn excluded_for(selected: &BTreeMap<SequenceClass, SeriesRecord>) -> bool {
        ![SequenceClass::GdT1WI, SequenceClass::T2WI, SequenceClass::FLAIR]
            .iter()
            .any(|c| selected.contains_key(c))
    }
}

/// Per-series audit entry of the curation report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDecision {
    pub series_uid: String,
    pub description: Option<String>,
    pub n_instances: usize,
    pub series_number: Option<i64>,
    pub mr_acq_type: Option<String>,
    pub orientation: Orientation,
    pub exclusion: Option<ExclusionReason>,
    pub stage1: Option<Stage1Decision>,
    pub stage2: Option<SequenceClass>,
    pub confidence: Option<f64>,
    /// "adapter" or "fallback" when stage 2 ran.
    pub classifier: Option<String>,
    pub selected_as: Option<SequenceClass>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CurationReport {
    pub session_id: String,
    pub session_excluded: bool,
    pub session_exclusion_reason: Option<String>,
    pub selected: BTreeMap<SequenceClass, String>,
    pub series: Vec<SeriesDecision>,
    /// Files that could not be read as DICOM, with the error.
    #[serde(default)]
    pub unreadable: Vec<(String, String)>,
}

#[derive(Debug, Clone)]
pub struct Curation {
    pub session: CuratedSession,
    pub report: CurationReport,
}

/// Runs exclusions, the two-stage cascade and selection for one session.
/// Stage 2 is only consulted for series that survived the exclusions and
/// stage 1.
pub fn curate(
    session_id: &str,
    series: Vec<SeriesRecord>,
    ruleset: &Ruleset,
    adapter: Option<&dyn ClassifierAdapter>,
) -> Result<Curation, CurationError> {
    let mut decisions: BTreeMap<String, SeriesDecision> = series
        .iter()
        .map(|s| {
            (
                s.series_uid.clone(),
                SeriesDecision {
                    series_uid: s.series_uid.clone(),
                    description: s.description().map(str::to_string),
                    n_instances: s.n_instances,
                    series_number: s.series_number(),
                    mr_acq_type: s.mr_acq_type().map(str::to_string),
                    orientation: s.first_instance().map(determine_orientation).unwrap_or(Orientation::Unknown),
                    exclusion: None,
                    stage1: None,
                    stage2: None,
                    confidence: None,
                    classifier: None,
                    selected_as: None,
                },
            )
        })
        .collect();

    let (kept, excluded) = apply_exclusions(series);
    for (uid, reason) in &excluded {
        if let Some(d) = decisions.get_mut(uid) {
            d.exclusion = Some(*reason);
        }
    }

    let mut classified = Vec::new();
    for s in kept {
        let d1 = classify_stage1(&s, ruleset);
        let entry = decisions.get_mut(&s.series_uid).expect("decision exists");
        entry.stage1 = Some(d1);
        if d1 == Stage1Decision::NonSegmentable {
            continue;
        }
        let (class, conf) = classify_stage2(&s, None, adapter, ruleset)?;
        let who = if adapter.is_some() { "adapter" } else { "fallback" };
        entry.stage2 = Some(class);
        entry.confidence = Some(conf);
        entry.classifier = Some(who.to_string());
        let orient = entry.orientation;
        classified.push((s, class, orient));
    }

    let mut session = select_scans(session_id, classified);
    session.exclusions = excluded;
    for (class, rec) in &session.selected {
        if let Some(d) = decisions.get_mut(&rec.series_uid) {
            d.selected_as = Some(*class);
        }
    }
    let report = CurationReport {
        session_id: session_id.to_string(),
        session_excluded: session.session_excluded,
        session_exclusion_reason: session
            .session_excluded
            .then(|| "no Gd-T1WI, T2WI or FLAIR available".to_string()),
        selected: session
            .selected
            .iter()
            .map(|(c, r)| (*c, r.series_uid.clone()))
            .collect(),
        series: decisions.into_values().collect(),
        unreadable: Vec::new(),
    };
    Ok(Curation { session, report })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::{ManifestSeries, SeriesRecord};
    use crate::volume::Volume3D;
    use std::sync::atomic::{AtomicUsize, Ordering};

    fn series(uid: &str, desc: Option<&str>, n: usize) -> SeriesRecord {
        ManifestSeries {
            series_uid: uid.into(),
            description: desc.map(str::to_string),
            image_type: Some(vec!["ORIGINAL".into(), "PRIMARY".into()]),
            angio_flag: None,
            mr_acq_type: Some("2D".into()),
            iop: Some([1.0, 0.0, 0.0, 0.0, 1.0, 0.0]),
            n_instances: n,
            series_number: None,
        }
        .to_record()
    }

    struct Counting(AtomicUsize);

    impl ClassifierAdapter for Counting {
        fn classify(&self, s: &SeriesRecord, _: Option<&Volume3D<f64>>) -> Result<(SequenceClass, f64), String> {
            self.0.fetch_add(1, Ordering::SeqCst);
            Ok((classify_stage2(s, None, None, &Ruleset::default()).unwrap().0, 0.9))
        }
    }

    #[test]
    fn stage2_never_sees_rejected_series() {
        let counter = Counting(AtomicUsize::new(0));
        let input = vec![
            series("1", Some("AX T1 POST"), 120),
            series("2", Some("SCOUT"), 3),
            series("3", None, 50),
            series("4", Some("DWI"), 60),
            series("5", Some("AX FLAIR"), 40),
        ];
        let out = curate("S", input, &Ruleset::default(), Some(&counter)).unwrap();
        assert_eq!(counter.0.load(Ordering::SeqCst), 2);
        assert_eq!(out.session.selected.len(), 2);
        assert!(!out.session.session_excluded);
        assert_eq!(out.report.selected[&SequenceClass::GdT1WI], "1");
        assert_eq!(out.session.exclusions, vec![("3".to_string(), ExclusionReason::NoSeriesDescription)]);
    }

    #[test]
    fn only_t1_excludes_session() {
        let out = curate("S", vec![series("1", Some("AX T1"), 100)], &Ruleset::default(), None).unwrap();
        assert!(out.session.session_excluded);
        assert!(out.report.session_exclusion_reason.is_some());
    }

    #[test]
    fn adapter_failure_carries_uid() {
        struct Failing;
        impl ClassifierAdapter for Failing {
            fn classify(&self, _: &SeriesRecord, _: Option<&Volume3D<f64>>) -> Result<(SequenceClass, f64), String> {
                Err("model crashed".into())
            }
        }
        let err = curate("S", vec![series("9", Some("AX T2"), 40)], &Ruleset::default(), Some(&Failing)).unwrap_err();
        assert_eq!(
            err,
            CurationError::AdapterFailure {
                series_uid: "9".into(),
                message: "model crashed".into()
            }
        );
    }
}
