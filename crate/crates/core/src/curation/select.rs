use std::cmp::{Ordering, Reverse};
use std::collections::BTreeMap;

use super::{CuratedSession, Orientation, SequenceClass};
use crate::dicom::SeriesRecord;

/// Total preference order among duplicate candidates. Greater is better:
/// orientation rank, then instance count, then the lowest series number
/// (absent numbers last), then the lexicographically smallest UID.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PriorityKey {
    rank: u8,
    n_instances: usize,
    series_number: Reverse<(bool, i64)>,
    uid: Reverse<String>,
}

impl PriorityKey {
    pub fn new(series: &SeriesRecord, orientation: Orientation) -> Self {
        let sn = series.series_number();
        Self {
            rank: orientation.rank(),
            n_instances: series.n_instances,
            series_number: Reverse((sn.is_none(), sn.unwrap_or(0))),
            uid: Reverse(series.series_uid.clone()),
        }
    }
}

impl PartialOrd for PriorityKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for PriorityKey {
    fn cmp(&self, other: &Self) -> Ordering {
        (self.rank, self.n_instances, &self.series_number, &self.uid).cmp(&(
            other.rank,
            other.n_instances,
            &other.series_number,
            &other.uid,
        ))
    }
}

/// Picks one winner per segmentable class. Non-segmentable candidates are
/// ignored. The exclusion list is left empty for the caller to fill.
pub fn select_scans(session_id: &str, classified: Vec<(SeriesRecord, SequenceClass, Orientation)>) -> CuratedSession {
    let mut best: BTreeMap<SequenceClass, (PriorityKey, SeriesRecord)> = BTreeMap::new();
    for (series, class, orientation) in classified {
        if !class.is_segmentable() {
            continue;
        }
        let key = PriorityKey::new(&series, orientation);
        match best.get(&class) {
            Some((k, _)) if *k >= key => {}
            _ => {
                best.insert(class, (key, series));
            }
        }
    }
    let selected: BTreeMap<_, _> = best.into_iter().map(|(c, (_, s))| (c, s)).collect();
    let session_excluded = CuratedSession::excluded_for(&selected);
    CuratedSession {
        session_id: session_id.to_string(),
        selected,
        exclusions: Vec::new(),
        session_excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dicom::ManifestSeries;
    use proptest::prelude::*;
    use rand::seq::SliceRandom;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

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

    #[test]
    fn axial_beats_more_instances() {
        let s = select_scans(
            "S",
            vec![
                (rec("sag", 200, None), SequenceClass::FLAIR, Orientation::Sagittal),
                (rec("ax", 40, None), SequenceClass::FLAIR, Orientation::Axial),
            ],
        );
        assert_eq!(s.selected[&SequenceClass::FLAIR].series_uid, "ax");
    }

    #[test]
    fn more_instances_wins_within_orientation() {
        let s = select_scans(
            "S",
            vec![
                (rec("a", 45, None), SequenceClass::T2WI, Orientation::Axial),
                (rec("b", 60, None), SequenceClass::T2WI, Orientation::Axial),
            ],
        );
        assert_eq!(s.selected[&SequenceClass::T2WI].series_uid, "b");
    }

    #[test]
    fn t1_only_session_excluded() {
        let s = select_scans("S", vec![(rec("a", 45, None), SequenceClass::T1WI, Orientation::Axial)]);
        assert!(s.session_excluded);
        assert_eq!(s.selected.len(), 1);
    }

    #[test]
    fn series_number_then_uid_break_ties() {
        let s = select_scans(
            "S",
            vec![
                (rec("z", 30, Some(3)), SequenceClass::T1WI, Orientation::Axial),
                (rec("y", 30, Some(7)), SequenceClass::T1WI, Orientation::Axial),
                (rec("a", 30, None), SequenceClass::T1WI, Orientation::Axial),
            ],
        );
        assert_eq!(s.selected[&SequenceClass::T1WI].series_uid, "z");
        let s = select_scans(
            "S",
            vec![
                (rec("q", 30, Some(3)), SequenceClass::T1WI, Orientation::Axial),
                (rec("p", 30, Some(3)), SequenceClass::T1WI, Orientation::Axial),
            ],
        );
        assert_eq!(s.selected[&SequenceClass::T1WI].series_uid, "p");
    }

    #[test]
    fn non_segmentable_ignored() {
        let s = select_scans("S", vec![(rec("a", 45, None), SequenceClass::NonSegmentable, Orientation::Axial)]);
        assert!(s.selected.is_empty());
        assert!(s.session_excluded);
    }

    fn arb_candidate() -> impl Strategy<Value = (SeriesRecord, SequenceClass, Orientation)> {
        (
            0usize..5,
            1usize..6,
            proptest::option::of(0i64..4),
            0usize..4,
            0usize..4,
        )
            .prop_map(|(c, n, sn, o, u)| {
                let class = [
                    SequenceClass::T1WI,
                    SequenceClass::GdT1WI,
                    SequenceClass::T2WI,
                    SequenceClass::FLAIR,
                    SequenceClass::NonSegmentable,
                ][c];
                let orient = [Orientation::Axial, Orientation::Coronal, Orientation::Sagittal, Orientation::Unknown][o];
                (rec(&format!("u{u}-{n}-{c}-{o}-{sn:?}"), n * 10, sn), class, orient)
            })
    }

    proptest! {
        #[test]
        fn shuffle_invariant(cands in proptest::collection::vec(arb_candidate(), 0..12), seed in any::<u64>()) {
            let a = select_scans("S", cands.clone());
            let mut shuffled = cands.clone();
            shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let b = select_scans("S", shuffled);
            prop_assert_eq!(&a.selected, &b.selected);
            prop_assert!(a.selected.len() <= 4);
            let none_of_three = !a.has(SequenceClass::GdT1WI) && !a.has(SequenceClass::T2WI) && !a.has(SequenceClass::FLAIR);
            prop_assert_eq!(a.session_excluded, none_of_three);
        }
    }
}
