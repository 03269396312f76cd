use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context};
use clap::{Args, ValueEnum};
use neurocurate::curation::SequenceClass;
use neurocurate::evaluation::{dice_by_class, ConfusionMatrix, EvalReport, SessionDice};
use tracing::warn;

use crate::commands::{read_mask, CliError, CmdResult};

#[derive(Args, Debug, Clone)]
pub struct EvaluateArgs {
    /// Predicted masks: `<id>.nii` files or pipeline session directories.
    #[arg(long)]
    pub pred: PathBuf,
    /// Which mask of a session directory to use: the atlas-space
    /// segmentation or the mask warped back to the patient grid.
    #[arg(long, value_enum, default_value_t = Space::Atlas)]
    pub space: Space,
    /// Reference masks: `<id>.nii` files.
    #[arg(long)]
    pub refined: PathBuf,
    /// CSV with `session_id,grade` columns for stratified aggregates.
    #[arg(long)]
    pub grades: Option<PathBuf>,
    /// CSV with `truth,predicted` scan-type columns.
    #[arg(long)]
    pub classification: Option<PathBuf>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Report path (JSON).
    #[arg(long)]
    pub output: PathBuf,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Space {
    Atlas,
    Patient,
}

impl Space {
    fn file(&self) -> &'static str {
        match self {
            Space::Atlas => "seg_atlas.nii",
            Space::Patient => "seg_patient.nii",
        }
    }
}

/// Session id to mask path for a directory of `<id>.nii` files and/or
/// session directories holding the mask named by `space`.
fn masks_in(dir: &Path, space: Space) -> anyhow::Result<BTreeMap<String, PathBuf>> {
    let mut out = BTreeMap::new();
    for e in std::fs::read_dir(dir).with_context(|| format!("reading {}", dir.display()))? {
        let p = e?.path();
        if p.is_dir() {
            let seg = p.join(space.file());
            if seg.is_file() {
                out.insert(p.file_name().unwrap_or_default().to_string_lossy().into_owned(), seg);
            }
        } else if p.extension().is_some_and(|x| x == "nii") {
            if let Some(stem) = p.file_stem() {
                out.insert(stem.to_string_lossy().into_owned(), p);
            }
        }
    }
    Ok(out)
}

fn read_grades(path: &Path) -> anyhow::Result<BTreeMap<String, String>> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let h = r.headers()?.clone();
    let col = |name: &str| h.iter().position(|c| c.trim() == name).ok_or_else(|| anyhow!("{} lacks a {name} column", path.display()));
    let (si, gi) = (col("session_id")?, col("grade")?);
    let mut out = BTreeMap::new();
    for rec in r.records() {
        let rec = rec?;
        out.insert(rec[si].trim().to_string(), rec[gi].trim().to_string());
    }
    Ok(out)
}

fn read_classification(path: &Path) -> anyhow::Result<ConfusionMatrix> {
    let mut r = csv::Reader::from_path(path).with_context(|| format!("reading {}", path.display()))?;
    let h = r.headers()?.clone();
    let col = |name: &str| h.iter().position(|c| c.trim() == name).ok_or_else(|| anyhow!("{} lacks a {name} column", path.display()));
    let (ti, pi) = (col("truth")?, col("predicted")?);
    let parse = |s: &str| SequenceClass::parse(s.trim()).ok_or_else(|| anyhow!("unknown scan type {s:?}"));
    let mut pairs = Vec::new();
    for rec in r.records() {
        let rec = rec?;
        pairs.push((parse(&rec[ti])?, parse(&rec[pi])?));
    }
    Ok(ConfusionMatrix::from_pairs(pairs))
}

pub fn evaluate(args: &EvaluateArgs) -> CmdResult {
    if !(args.alpha > 0.0 && args.alpha < 1.0) {
        return Err(CliError::Config(anyhow!("--alpha must lie in (0, 1)")));
    }
    let pred = masks_in(&args.pred, args.space).map_err(CliError::Config)?;
    let refined = masks_in(&args.refined, args.space).map_err(CliError::Config)?;
    let grades = match &args.grades {
        Some(p) => read_grades(p).map_err(CliError::Config)?,
        None => BTreeMap::new(),
    };
    let cm = args.classification.as_deref().map(read_classification).transpose().map_err(CliError::Config)?;

    let ids: BTreeSet<&String> = pred.keys().chain(refined.keys()).collect();
    let mut sessions = Vec::new();
    let mut unpaired = Vec::new();
    let mut ok = true;
    for id in ids {
        let (Some(p), Some(r)) = (pred.get(id), refined.get(id)) else {
            warn!(session = %id, "unpaired session");
            unpaired.push(id.clone());
            continue;
        };
        match read_mask(p).and_then(|pm| Ok(dice_by_class(&pm, &read_mask(r)?)?)) {
            Ok(dice) => sessions.push(SessionDice {
                session_id: id.clone(),
                grade: grades.get(id).cloned(),
                dice,
            }),
            Err(e) => {
                ok = false;
                warn!(session = %id, error = %format!("{e:#}"), "cannot evaluate session");
            }
        }
    }
    let report = EvalReport::build(sessions, unpaired, cm, args.alpha).map_err(|e| CliError::Runtime(e.into()))?;
    let mut text = serde_json::to_string_pretty(&report).map_err(|e| CliError::Runtime(e.into()))?;
    text.push('\n');
    if let Some(parent) = args.output.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::Runtime(e.into()))?;
    }
    std::fs::write(&args.output, &text).map_err(|e| CliError::Runtime(e.into()))?;
    println!("{text}");
    Ok(ok)
}
