use std::io::Read;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use super::SegRoute;
use crate::curation::{CurationReport, SequenceClass};
use crate::volume::Affine4;

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> std::io::Result<String> {
    let mut f = std::fs::File::open(path)?;
    let mut h = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = f.read(&mut buf)?;
        if n == 0 {
            break;
        }
        h.update(&buf[..n]);
    }
    Ok(hex::encode(h.finalize()))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileHash {
    /// Relative to the session output directory when inside it.
    pub path: String,
    pub sha256: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageEntry {
    pub name: String,
    /// Hash over the stage name, input hashes and parameters; a rerun
    /// with the same key and intact outputs is skipped.
    pub key: String,
    pub adapter: Option<String>,
    pub mock: bool,
    pub inputs: Vec<FileHash>,
    pub params: Value,
    pub params_sha256: String,
    pub outputs: Vec<FileHash>,
    pub wall_time_ms: u64,
    pub status: StageStatus,
    pub error: Option<String>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SessionStatus {
    Completed,
    Excluded,
    Failed,
}

/// Per-session record persisted as `provenance.json`. Stage entries are
/// only ever appended.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionProvenance {
    pub session_id: String,
    pub status: SessionStatus,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub curation: Option<CurationReport>,
    pub registration_target: Option<SequenceClass>,
    pub patient2atlas: Option<Affine4>,
    pub atlas_sha256: Option<String>,
    pub route: Option<SegRoute>,
    pub refined_mask: bool,
    pub stages: Vec<StageEntry>,
}

impl SessionProvenance {
    pub fn new(session_id: &str) -> Self {
        Self {
            session_id: session_id.to_string(),
            status: SessionStatus::Failed,
            failed_stage: None,
            error: None,
            curation: None,
            registration_target: None,
            patient2atlas: None,
            atlas_sha256: None,
            route: None,
            refined_mask: false,
            stages: Vec::new(),
        }
    }

    pub fn stage(&self, name: &str) -> Option<&StageEntry> {
        self.stages.iter().find(|s| s.name == name)
    }

    pub fn read(path: &Path) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))
    }

    pub fn write(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).map_err(|e| std::io::Error::new(std::io::ErrorKind::InvalidData, e))?;
        text.push('\n');
        std::fs::write(path, text)
    }
}
