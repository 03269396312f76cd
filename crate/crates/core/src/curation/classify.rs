use serde::{Deserialize, Serialize};

use super::ruleset::{any_token, tokenize};
use super::{CurationError, Ruleset, SequenceClass};
use crate::dicom::SeriesRecord;
use crate::volume::Volume3D;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Stage1Decision {
    Segmentable,
    NonSegmentable,
}

/// Stage-2 scan-type classifier. Implementations must be deterministic for
/// a fixed input and return a confidence in `[0, 1]`.
pub trait ClassifierAdapter: Send + Sync {
    fn classify(&self, series: &SeriesRecord, volume: Option<&Volume3D<f64>>) -> Result<(SequenceClass, f64), String>;
}

/// Rule-based first stage over the series description and instance count.
pub fn classify_stage1(series: &SeriesRecord, rules: &Ruleset) -> Stage1Decision {
    let Some(desc) = series.description() else {
        return Stage1Decision::NonSegmentable;
    };
    let tokens = tokenize(desc);
    if any_token(&tokens, &rules.deny_tokens) || series.n_instances < rules.min_instances {
        return Stage1Decision::NonSegmentable;
    }
    if any_token(&tokens, &rules.allow_tokens) {
        Stage1Decision::Segmentable
    } else {
        Stage1Decision::NonSegmentable
    }
}

/// Token fallback used when no adapter is configured. FLAIR and T2 tokens
/// are checked before contrast markers so that a post-contrast FLAIR stays
/// FLAIR.
fn fallback(series: &SeriesRecord, rules: &Ruleset) -> SequenceClass {
    let tokens = tokenize(series.description().unwrap_or(""));
    if any_token(&tokens, &rules.flair_tokens) {
        SequenceClass::FLAIR
    } else if any_token(&tokens, &rules.t2_tokens) {
        SequenceClass::T2WI
    } else if any_token(&tokens, &rules.contrast_markers) {
        SequenceClass::GdT1WI
    } else if any_token(&tokens, &rules.t1_tokens) {
        SequenceClass::T1WI
    } else {
        SequenceClass::NonSegmentable
    }
}

/// Second stage. An adapter, when given, is authoritative; otherwise the
/// description-token fallback decides with confidence 1.
pub fn classify_stage2(
    series: &SeriesRecord,
    volume: Option<&Volume3D<f64>>,
    adapter: Option<&dyn ClassifierAdapter>,
    rules: &Ruleset,
) -> Result<(SequenceClass, f64), CurationError> {
    match adapter {
        Some(a) => {
            let (class, conf) = a.classify(series, volume).map_err(|message| CurationError::AdapterFailure {
                series_uid: series.series_uid.clone(),
                message,
            })?;
            if !(0.0..=1.0).contains(&conf) {
                return Err(CurationError::AdapterFailure {
                    series_uid: series.series_uid.clone(),
                    message: format!("confidence {conf} outside [0, 1]"),
                });
            }
            Ok((class, conf))
        }
        None => Ok((fallback(series, rules), 1.0)),
    }
}
