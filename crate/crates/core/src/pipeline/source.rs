use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use walkdir::WalkDir;

use super::provenance::sha256_bytes;
use super::PipelineError;
use crate::dicom::{assemble_series, parse_dicom_metadata, SeriesRecord, SessionManifest};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum SourceKind {
    /// Directory tree of DICOM files.
    DicomDir(PathBuf),
    /// JSON series manifest without pixel data.
    Manifest(PathBuf),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct SessionSource {
    pub session_id: String,
    pub kind: SourceKind,
}

fn is_json(p: &Path) -> bool {
    p.extension().is_some_and(|e| e.eq_ignore_ascii_case("json"))
}

fn dir_name(p: &Path) -> String {
    p.file_name().map_or_else(|| p.display().to_string(), |n| n.to_string_lossy().into_owned())
}

fn manifest_source(p: &Path) -> Result<SessionSource, PipelineError> {
    let text = std::fs::read_to_string(p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))?;
    let m: SessionManifest = serde_json::from_str(&text).map_err(|e| PipelineError::Load(format!("{}: {e}", p.display())))?;
    Ok(SessionSource {
        session_id: m.session_id,
        kind: SourceKind::Manifest(p.to_path_buf()),
    })
}

/// Finds sessions under each root. A JSON file is a manifest session.
/// A directory with subdirectories holds one session per subdirectory
/// (plus any manifests beside them); a directory of plain files is itself
/// one session. Empty directories yield nothing.
pub fn discover_sessions(roots: &[PathBuf]) -> Result<Vec<SessionSource>, PipelineError> {
    let mut out = Vec::new();
    for root in roots {
        if root.is_file() {
            out.push(manifest_source(root)?);
            continue;
        }
        let mut entries: Vec<PathBuf> = std::fs::read_dir(root)
            .map_err(|e| PipelineError::Io(format!("{}: {e}", root.display())))?
            .filter_map(|e| e.ok().map(|e| e.path()))
            .collect();
        entries.sort();
        let has_dirs = entries.iter().any(|p| p.is_dir());
        let mut plain_files = false;
        for p in &entries {
            if p.is_dir() {
                out.push(SessionSource {
                    session_id: dir_name(p),
                    kind: SourceKind::DicomDir(p.clone()),
                });
            } else if is_json(p) {
                out.push(manifest_source(p)?);
            } else {
                plain_files = true;
            }
        }
        if plain_files && !has_dirs {
            out.push(SessionSource {
                session_id: dir_name(root),
                kind: SourceKind::DicomDir(root.clone()),
            });
        }
    }
    out.sort();
    Ok(out)
}

/// A session's series plus the raw material behind them.
#[derive(Debug, Clone, Default)]
pub struct LoadedSession {
    pub session_id: String,
    pub series: Vec<SeriesRecord>,
    /// Source file of each SOP instance UID.
    pub files: BTreeMap<String, PathBuf>,
    /// Decodable pixel payload of each SOP instance UID.
    pub payloads: BTreeMap<String, Vec<u8>>,
    /// Hash of every file read, in path order.
    pub file_hashes: BTreeMap<PathBuf, String>,
    /// Files that failed to parse, with the error.
    pub unreadable: Vec<(String, String)>,
}

pub fn load_session(src: &SessionSource) -> Result<LoadedSession, PipelineError> {
    let mut s = LoadedSession {
        session_id: src.session_id.clone(),
        ..Default::default()
    };
    match &src.kind {
        SourceKind::Manifest(p) => {
            let bytes = std::fs::read(p).map_err(|e| PipelineError::Io(format!("{}: {e}", p.display())))?;
            let m: SessionManifest = serde_json::from_slice(&bytes).map_err(|e| PipelineError::Load(format!("{}: {e}", p.display())))?;
            s.file_hashes.insert(p.clone(), sha256_bytes(&bytes));
            s.series = m.to_records();
        }
        SourceKind::DicomDir(dir) => {
            let mut metas = Vec::new();
            for entry in WalkDir::new(dir).sort_by_file_name() {
                let entry = entry.map_err(|e| PipelineError::Io(e.to_string()))?;
                let path = entry.path();
                if !entry.file_type().is_file() || is_json(path) {
                    continue;
                }
                let bytes = std::fs::read(path).map_err(|e| PipelineError::Io(format!("{}: {e}", path.display())))?;
                s.file_hashes.insert(path.to_path_buf(), sha256_bytes(&bytes));
                match parse_dicom_metadata(&bytes) {
                    Ok(parsed) => {
                        let sop = parsed.meta.sop_uid.clone();
                        s.files.insert(sop.clone(), path.to_path_buf());
                        if let (true, Some(px)) = (parsed.pixels_decodable, parsed.pixel_data) {
                            s.payloads.insert(sop, px);
                        }
                        metas.push(parsed.meta);
                    }
                    Err(e) => s.unreadable.push((path.display().to_string(), e.to_string())),
                }
            }
            s.series = assemble_series(metas);
        }
    }
    Ok(s)
}
