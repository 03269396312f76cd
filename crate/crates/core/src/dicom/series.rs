use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::InstanceMeta;

/// All instances of one series. Series-level attributes are read from the
/// first instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesRecord {
    pub series_uid: String,
    pub instances: Vec<InstanceMeta>,
    pub n_instances: usize,
}

impl SeriesRecord {
    pub fn new(series_uid: impl Into<String>, instances: Vec<InstanceMeta>) -> Self {
        let n_instances = instances.len();
        Self {
            series_uid: series_uid.into(),
            instances,
            n_instances,
        }
    }

    fn first(&self) -> Option<&InstanceMeta> {
        self.instances.first()
    }

    pub fn description(&self) -> Option<&str> {
        self.first().and_then(|i| i.series_description.as_deref())
    }

    pub fn image_type(&self) -> Option<&[String]> {
        self.first().and_then(|i| i.image_type.as_deref())
    }

    pub fn angio_flag(&self) -> Option<char> {
        self.first().and_then(|i| i.angio_flag)
    }

    pub fn mr_acq_type(&self) -> Option<&str> {
        self.first().and_then(|i| i.mr_acq_type.as_deref())
    }

    pub fn series_number(&self) -> Option<i64> {
        self.first().and_then(|i| i.series_number)
    }

    pub fn orientation_cosines(&self) -> Option<[f64; 6]> {
        self.first().and_then(|i| i.image_orientation_patient)
    }

    pub fn first_instance(&self) -> Option<&InstanceMeta> {
        self.first()
    }
}

/// Groups instances by series UID. Records come out sorted by UID, and
/// instances within a record by (instance number, SOP UID).
pub fn assemble_series(instances: Vec<InstanceMeta>) -> Vec<SeriesRecord> {
    let mut groups: BTreeMap<String, Vec<InstanceMeta>> = BTreeMap::new();
    for inst in instances {
        groups.entry(inst.series_uid.clone()).or_default().push(inst);
    }
    groups
        .into_iter()
        .map(|(uid, mut insts)| {
            insts.sort_by(|a, b| {
                (a.instance_number.unwrap_or(i64::MAX), &a.sop_uid)
                    .cmp(&(b.instance_number.unwrap_or(i64::MAX), &b.sop_uid))
            });
            SeriesRecord::new(uid, insts)
        })
        .collect()
}
