use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::PipelineError;
use crate::curation::{determine_orientation, CuratedSession, Orientation, PriorityKey, SequenceClass};
use crate::dicom::SeriesRecord;

/// A subset of the four segmentable sequence classes.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SequenceSet(BTreeSet<SequenceClass>);

impl SequenceSet {
    pub fn new() -> Self {
        Self::default()
    }

    /// Adds a class; non-segmentable classes are ignored.
    pub fn insert(&mut self, class: SequenceClass) {
        if class.is_segmentable() {
            self.0.insert(class);
        }
    }

    pub fn contains(&self, class: SequenceClass) -> bool {
        self.0.contains(&class)
    }

    pub fn iter(&self) -> impl Iterator<Item = SequenceClass> + '_ {
        self.0.iter().copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// All 16 subsets, ordered by bitmask over the canonical class order.
    pub fn all_subsets() -> Vec<SequenceSet> {
        (0..16u8)
            .map(|bits| {
                SequenceClass::SEGMENTABLE
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| bits & (1 << i) != 0)
                    .map(|(_, &c)| c)
                    .collect()
            })
            .collect()
    }
}

impl FromIterator<SequenceClass> for SequenceSet {
    fn from_iter<I: IntoIterator<Item = SequenceClass>>(iter: I) -> Self {
        let mut s = SequenceSet::new();
        for c in iter {
            s.insert(c);
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RouteKind {
    MultiClass,
    BinaryWt,
    NoSegmentation,
}

impl fmt::Display for RouteKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RouteKind::MultiClass => "multi_class",
            RouteKind::BinaryWt => "binary_wt",
            RouteKind::NoSegmentation => "no_segmentation",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SegRoute {
    pub kind: RouteKind,
    /// Canonical name of the sequence combination the model was trained
    /// on, e.g. `"GdT1WI+T2WI+FLAIR"`, or `"none"`.
    pub model_key: String,
}

/// Model key: the available classes joined with `+` in canonical order
/// (T1WI, GdT1WI, T2WI, FLAIR); `"none"` for the empty set or when no
/// segmentation runs.
pub fn model_key(set: &SequenceSet) -> String {
    if set.is_empty() {
        return "none".into();
    }
    set.iter().map(|c| c.as_str()).collect::<Vec<_>>().join("+")
}

/// Multi-class when Gd-T1WI is present, binary whole tumor when T2WI
/// and/or FLAIR are present without it, otherwise nothing.
pub fn route_segmentation(available: &SequenceSet) -> SegRoute {
    let kind = if available.contains(SequenceClass::GdT1WI) {
        RouteKind::MultiClass
    } else if available.contains(SequenceClass::T2WI) || available.contains(SequenceClass::FLAIR) {
        RouteKind::BinaryWt
    } else {
        RouteKind::NoSegmentation
    };
    let model_key = match kind {
        RouteKind::NoSegmentation => "none".into(),
        _ => model_key(available),
    };
    SegRoute { kind, model_key }
}

/// The selected scan with the most instances; ties follow the scan
/// selection order.
pub fn select_registration_target(session: &CuratedSession) -> Result<SequenceClass, PipelineError> {
    session
        .selected
        .iter()
        .max_by(|(_, a), (_, b)| {
            let key = |s: &SeriesRecord| {
                let o = s.first_instance().map_or(Orientation::Unknown, determine_orientation);
                PriorityKey::new(s, o)
            };
            a.n_instances.cmp(&b.n_instances).then_with(|| key(a).cmp(&key(b)))
        })
        .map(|(c, _)| *c)
        .ok_or_else(|| PipelineError::EmptySession(session.session_id.clone()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::ManifestSeries;
    use std::collections::BTreeMap;
    use SequenceClass::*;

    fn set(c: &[SequenceClass]) -> SequenceSet {
        c.iter().copied().collect()
    }

    #[test]
    fn documented_examples() {
        assert_eq!(route_segmentation(&set(&[GdT1WI])).kind, RouteKind::MultiClass);
        assert_eq!(route_segmentation(&set(&[T1WI, FLAIR])).kind, RouteKind::BinaryWt);
        assert_eq!(route_segmentation(&set(&[T1WI])).kind, RouteKind::NoSegmentation);
        assert_eq!(route_segmentation(&set(&[T2WI, FLAIR])).model_key, "T2WI+FLAIR");
        assert_eq!(route_segmentation(&set(&[T1WI])).model_key, "none");
    }

    #[test]
    fn fifteen_distinct_keys() {
        let keys: BTreeSet<String> = SequenceSet::all_subsets().iter().map(model_key).collect();
        assert_eq!(keys.len(), 16);
        assert!(keys.contains("none"));
    }

    fn rec(uid: &str, n: usize, sn: Option<i64>) -> SeriesRecord {
        ManifestSeries {
            series_uid: uid.into(),
            description: Some("x".into()),
            image_type: None,
            angio_flag: None,
            mr_acq_type: None,
            iop: None,
            n_instances: n,
            series_number: sn,
        }
        .to_record()
    }

    fn session(entries: Vec<(SequenceClass, SeriesRecord)>) -> CuratedSession {
        let selected: BTreeMap<_, _> = entries.into_iter().collect();
        CuratedSession {
            session_id: "s".into(),
            selected,
            exclusions: vec![],
            session_excluded: false,
        }
    }

    #[test]
    fn registration_target() {
        let s = session(vec![(T1WI, rec("a", 30, None)), (GdT1WI, rec("b", 120, None))]);
        assert_eq!(select_registration_target(&s).unwrap(), GdT1WI);
        let s = session(vec![(FLAIR, rec("a", 60, Some(9))), (T2WI, rec("b", 60, Some(4)))]);
        assert_eq!(select_registration_target(&s).unwrap(), T2WI);
        let s = session(vec![(FLAIR, rec("a", 20, None))]);
        assert_eq!(select_registration_target(&s).unwrap(), FLAIR);
        assert!(matches!(select_registration_target(&session(vec![])), Err(PipelineError::EmptySession(_))));
    }
}
