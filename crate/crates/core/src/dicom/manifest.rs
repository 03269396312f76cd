use serde::{Deserialize, Serialize};

use super::{InstanceMeta, SeriesRecord};

/// JSON alternative to raw DICOM input, carrying the series-level fields
/// curation needs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SessionManifest {
    pub session_id: String,
    pub series: Vec<ManifestSeries>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestSeries {
    pub series_uid: String,
    #[serde(default)]
    pub description: Option<String>,
    #[serde(default)]
    pub image_type: Option<Vec<String>>,
    #[serde(default)]
    pub angio_flag: Option<String>,
    #[serde(default)]
    pub mr_acq_type: Option<String>,
    #[serde(default)]
    pub iop: Option<[f64; 6]>,
    pub n_instances: usize,
    #[serde(default)]
    pub series_number: Option<i64>,
}

impl ManifestSeries {
    pub fn from_record(rec: &SeriesRecord) -> Self {
        Self {
            series_uid: rec.series_uid.clone(),
            description: rec.description().map(str::to_string),
            image_type: rec.image_type().map(|v| v.to_vec()),
            angio_flag: rec.angio_flag().map(|c| c.to_string()),
            mr_acq_type: rec.mr_acq_type().map(str::to_string),
            iop: rec.orientation_cosines(),
            n_instances: rec.n_instances,
            series_number: rec.series_number(),
        }
    }

    /// Expands into a record with `n_instances` metadata-only instances.
    pub fn to_record(&self) -> SeriesRecord {
        let instances = (0..self.n_instances)
            .map(|k| {
                let mut m = InstanceMeta::new(self.series_uid.clone(), format!("{}.{}", self.series_uid, k + 1));
                m.series_description = self.description.clone();
                m.image_type = self.image_type.clone();
                m.angio_flag = self.angio_flag.as_deref().and_then(|s| s.chars().next());
                m.mr_acq_type = self.mr_acq_type.clone();
                m.image_orientation_patient = self.iop;
                m.series_number = self.series_number;
                m.instance_number = Some(k as i64 + 1);
                m
            })
            .collect();
        SeriesRecord::new(self.series_uid.clone(), instances)
    }
}

impl SessionManifest {
    pub fn from_records(session_id: impl Into<String>, records: &[SeriesRecord]) -> Self {
        Self {
            session_id: session_id.into(),
            series: records.iter().map(ManifestSeries::from_record).collect(),
        }
    }

    pub fn to_records(&self) -> Vec<SeriesRecord> {
        let mut recs: Vec<SeriesRecord> = self.series.iter().map(ManifestSeries::to_record).collect();
        recs.sort_by(|a, b| a.series_uid.cmp(&b.series_uid));
        recs
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_documented_schema() {
        let json = r#"{"session_id":"S1","series":[{"series_uid":"1.2","description":"AX FLAIR",
            "image_type":["ORIGINAL","PRIMARY"],"angio_flag":"N","mr_acq_type":"2D",
            "iop":[1,0,0,0,1,0],"n_instances":30,"series_number":4}]}"#;
        let m: SessionManifest = serde_json::from_str(json).unwrap();
        let recs = m.to_records();
        assert_eq!(recs[0].n_instances, 30);
        assert_eq!(recs[0].instances.len(), 30);
        assert_eq!(recs[0].description(), Some("AX FLAIR"));
        assert_eq!(recs[0].angio_flag(), Some('N'));
        assert_eq!(SessionManifest::from_records("S1", &recs), m);
    }

    #[test]
    fn unknown_keys_rejected() {
        let json = r#"{"session_id":"S1","series":[],"extra":1}"#;
        assert!(serde_json::from_str::<SessionManifest>(json).is_err());
    }
}
