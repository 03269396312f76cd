use std::collections::BTreeMap;
use std::fs::File;
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::sync::Arc;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use thiserror::Error;

use super::mock::{mock_segmenter, MockThresholds};
use crate::config::AdapterEntry;
use crate::curation::{ClassifierAdapter, SequenceClass};
use crate::dicom::{ManifestSeries, SeriesRecord};
use crate::volume::{apply_affine, nifti, Affine4, Interpolation, Volume3D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AdapterKind {
    Registration,
    BiasCorrection,
    SkullStrip,
    Segmentation,
    ClassifierStage2,
    /// Reserved; no implementation is provided.
    SegObjectExport,
}

impl AdapterKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            AdapterKind::Registration => "registration",
            AdapterKind::BiasCorrection => "bias_correction",
            AdapterKind::SkullStrip => "skull_strip",
            AdapterKind::Segmentation => "segmentation",
            AdapterKind::ClassifierStage2 => "classifier_stage2",
            AdapterKind::SegObjectExport => "seg_object_export",
        }
    }
}

/// Builtin adapter names per kind.
pub const BUILTIN_ADAPTERS: [(AdapterKind, &str); 4] = [
    (AdapterKind::Registration, "translation"),
    (AdapterKind::BiasCorrection, "identity"),
    (AdapterKind::SkullStrip, "threshold"),
    (AdapterKind::Segmentation, "mock_segmenter"),
];

/// What an adapter is asked to do. External commands receive this as a
/// JSON file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvocationDescriptor {
    pub kind: AdapterKind,
    pub inputs: Vec<PathBuf>,
    pub params: Value,
    pub outputs: Vec<PathBuf>,
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AdapterError {
    #[error("no {0} adapter registered")]
    Missing(String),
    #[error("cannot start adapter: {0}")]
    Spawn(String),
    #[error("adapter exited with status {0:?}")]
    Exit(Option<i32>),
    #[error("adapter timed out after {0} s")]
    Timeout(u64),
    #[error("expected output {0} was not produced")]
    MissingOutput(PathBuf),
    #[error("invalid output {path}: {reason}")]
    InvalidOutput { path: PathBuf, reason: String },
    #[error("{0}")]
    Failed(String),
}

pub trait StageAdapter: Send + Sync {
    /// Identifier recorded in provenance, e.g. `builtin:translation`.
    fn name(&self) -> String;
    fn kind(&self) -> AdapterKind;
    /// True for test doubles.
    fn is_mock(&self) -> bool {
        false
    }
    /// Runs the stage. `work_dir` is a scratch directory inside the
    /// session output.
    fn invoke(&self, desc: &InvocationDescriptor, work_dir: &Path) -> Result<(), AdapterError>;
}

/// Checks that every expected output exists and that NIfTI outputs decode.
pub fn validate_outputs(desc: &InvocationDescriptor) -> Result<(), AdapterError> {
    for p in &desc.outputs {
        if !p.is_file() {
            return Err(AdapterError::MissingOutput(p.clone()));
        }
        if p.extension().is_some_and(|e| e == "nii") {
            nifti::read(p).map_err(|e| AdapterError::InvalidOutput {
                path: p.clone(),
                reason: e.to_string(),
            })?;
        }
    }
    Ok(())
}

fn failed(e: impl std::fmt::Display) -> AdapterError {
    AdapterError::Failed(e.to_string())
}

fn read_image(p: &Path) -> Result<Volume3D<f64>, AdapterError> {
    Ok(nifti::read(p).map_err(failed)?.volume)
}

fn expect_outputs(desc: &InvocationDescriptor, n: usize) -> Result<(), AdapterError> {
    if desc.outputs.len() != n {
        return Err(failed(format!("expected {n} output paths, got {}", desc.outputs.len())));
    }
    Ok(())
}

/// External command adapter. The descriptor is written to
/// `<work_dir>/<kind>.descriptor.json` and its path appended to the
/// command line; output and error streams go to `<kind>.log`.
pub struct ProcessAdapter {
    pub kind: AdapterKind,
    pub command: Vec<String>,
    pub timeout: Duration,
}

impl StageAdapter for ProcessAdapter {
    fn name(&self) -> String {
        format!("process:{}", self.command.join(" "))
    }

    fn kind(&self) -> AdapterKind {
        self.kind
    }

    fn invoke(&self, desc: &InvocationDescriptor, work_dir: &Path) -> Result<(), AdapterError> {
        std::fs::create_dir_all(work_dir).map_err(failed)?;
        let desc_path = work_dir.join(format!("{}.descriptor.json", self.kind.as_str()));
        let text = serde_json::to_string_pretty(desc).map_err(failed)?;
        std::fs::write(&desc_path, text).map_err(failed)?;
        let log = File::create(work_dir.join(format!("{}.log", self.kind.as_str()))).map_err(failed)?;
        let log2 = log.try_clone().map_err(failed)?;
        let (prog, args) = self.command.split_first().ok_or_else(|| AdapterError::Spawn("empty command".into()))?;
        let mut child = Command::new(prog)
            .args(args)
            .arg(&desc_path)
            .stdin(Stdio::null())
            .stdout(log)
            .stderr(log2)
            .spawn()
            .map_err(|e| AdapterError::Spawn(format!("{prog}: {e}")))?;
        let start = Instant::now();
        loop {
            match child.try_wait().map_err(failed)? {
                Some(status) if status.success() => break,
                Some(status) => return Err(AdapterError::Exit(status.code())),
                None if start.elapsed() >= self.timeout => {
                    let _ = child.kill();
                    let _ = child.wait();
                    return Err(AdapterError::Timeout(self.timeout.as_secs()));
                }
                None => std::thread::sleep(Duration::from_millis(20)),
            }
        }
        validate_outputs(desc)
    }
}

/// Rigid translation "registration": applies `params.shift` (mm) and
/// resamples every input onto the atlas grid (or the target grid when no
/// atlas is given). Outputs: one image per input, then the affine text.
pub struct TranslationRegistration;

impl StageAdapter for TranslationRegistration {
    fn name(&self) -> String {
        "builtin:translation".into()
    }

    fn kind(&self) -> AdapterKind {
        AdapterKind::Registration
    }

    fn is_mock(&self) -> bool {
        true
    }

    fn invoke(&self, desc: &InvocationDescriptor, _: &Path) -> Result<(), AdapterError> {
        expect_outputs(desc, desc.inputs.len() + 1)?;
        let shift: [f64; 3] = match desc.params.get("shift") {
            Some(v) => serde_json::from_value(v.clone()).map_err(failed)?,
            None => [0.0; 3],
        };
        let xform = Affine4::translation(shift);
        let target = read_image(desc.inputs.first().ok_or_else(|| failed("no inputs"))?)?;
        let reference = match desc.params.get("atlas").and_then(Value::as_str) {
            Some(a) => read_image(Path::new(a))?.geometry().clone(),
            None => target.geometry().clone(),
        };
        for (inp, out) in desc.inputs.iter().zip(&desc.outputs) {
            let vol = read_image(inp)?;
            let warped = apply_affine(&vol, &xform, &reference, Interpolation::Trilinear).map_err(failed)?;
            nifti::write_image(out, &warped).map_err(failed)?;
        }
        std::fs::write(desc.outputs.last().expect("checked"), xform.to_text()).map_err(failed)
    }
}

/// Copies inputs unchanged.
pub struct IdentityBiasCorrection;

impl StageAdapter for IdentityBiasCorrection {
    fn name(&self) -> String {
        "builtin:identity".into()
    }

    fn kind(&self) -> AdapterKind {
        AdapterKind::BiasCorrection
    }

    fn is_mock(&self) -> bool {
        true
    }

    fn invoke(&self, desc: &InvocationDescriptor, _: &Path) -> Result<(), AdapterError> {
        expect_outputs(desc, desc.inputs.len())?;
        for (inp, out) in desc.inputs.iter().zip(&desc.outputs) {
            std::fs::copy(inp, out).map_err(failed)?;
        }
        Ok(())
    }
}

/// Brain mask = first input above `params.threshold` (default 0). Every
/// input is zeroed outside the mask. Outputs: one image per input, then
/// the mask.
pub struct ThresholdSkullStrip;

impl StageAdapter for ThresholdSkullStrip {
    fn name(&self) -> String {
        "builtin:threshold".into()
    }

    fn kind(&self) -> AdapterKind {
        AdapterKind::SkullStrip
    }

    fn is_mock(&self) -> bool {
        true
    }

    fn invoke(&self, desc: &InvocationDescriptor, _: &Path) -> Result<(), AdapterError> {
        expect_outputs(desc, desc.inputs.len() + 1)?;
        let threshold = desc.params.get("threshold").and_then(Value::as_f64).unwrap_or(0.0);
        let reference = read_image(desc.inputs.first().ok_or_else(|| failed("no inputs"))?)?;
        let mask = reference.map(|v| u8::from(v > threshold));
        for (inp, out) in desc.inputs.iter().zip(&desc.outputs) {
            let mut vol = read_image(inp)?;
            if !vol.geometry().same_grid(mask.geometry()) {
                return Err(failed(format!("{} is not on the reference grid", inp.display())));
            }
            for (v, &m) in vol.voxels_mut().iter_mut().zip(mask.voxels()) {
                if m == 0 {
                    *v = 0.0;
                }
            }
            nifti::write_image(out, &vol).map_err(failed)?;
        }
        nifti::write_labels(desc.outputs.last().expect("checked"), &mask, None).map_err(failed)
    }
}

/// File-contract wrapper around [`mock_segmenter`]. `params.classes` names
/// the class of each input; `params.thresholds` overrides the defaults.
pub struct MockSegmenterAdapter;

impl StageAdapter for MockSegmenterAdapter {
    fn name(&self) -> String {
        "builtin:mock_segmenter".into()
    }

    fn kind(&self) -> AdapterKind {
        AdapterKind::Segmentation
    }

    fn is_mock(&self) -> bool {
        true
    }

    fn invoke(&self, desc: &InvocationDescriptor, _: &Path) -> Result<(), AdapterError> {
        expect_outputs(desc, 1)?;
        let classes: Vec<String> = serde_json::from_value(desc.params.get("classes").cloned().unwrap_or(json!([]))).map_err(failed)?;
        if classes.len() != desc.inputs.len() {
            return Err(failed("params.classes must name every input"));
        }
        let th: MockThresholds = match desc.params.get("thresholds") {
            Some(v) => serde_json::from_value(v.clone()).map_err(failed)?,
            None => MockThresholds::default(),
        };
        let mut vols = BTreeMap::new();
        for (c, p) in classes.iter().zip(&desc.inputs) {
            let class = SequenceClass::parse(c).ok_or_else(|| failed(format!("unknown class {c:?}")))?;
            vols.insert(class, read_image(p)?);
        }
        let mask = mock_segmenter(&vols, &th).map_err(failed)?;
        nifti::write_labels(&desc.outputs[0], &mask.labels, Some(mask.scheme)).map_err(failed)
    }
}

/// Stage-2 classifier backed by an external command. The command gets a
/// descriptor with `params.series` and must write
/// `{"class": "...", "confidence": x}` to the single output path.
pub struct ProcessClassifier {
    pub process: ProcessAdapter,
    pub work_dir: PathBuf,
}

#[derive(Deserialize)]
struct ClassifierAnswer {
    class: String,
    confidence: f64,
}

impl ClassifierAdapter for ProcessClassifier {
    fn classify(&self, series: &SeriesRecord, _: Option<&Volume3D<f64>>) -> Result<(SequenceClass, f64), String> {
        let out = self.work_dir.join(format!("classify_{}.json", series.series_uid));
        let desc = InvocationDescriptor {
            kind: AdapterKind::ClassifierStage2,
            inputs: Vec::new(),
            params: json!({ "series": ManifestSeries::from_record(series) }),
            outputs: vec![out.clone()],
        };
        self.process.invoke(&desc, &self.work_dir).map_err(|e| e.to_string())?;
        let text = std::fs::read_to_string(&out).map_err(|e| e.to_string())?;
        let ans: ClassifierAnswer = serde_json::from_str(&text).map_err(|e| e.to_string())?;
        let class = SequenceClass::parse(&ans.class).ok_or_else(|| format!("unknown class {:?}", ans.class))?;
        Ok((class, ans.confidence))
    }
}

/// An adapter plus the parameters configured for it.
#[derive(Clone)]
pub struct Registered {
    pub adapter: Arc<dyn StageAdapter>,
    pub params: serde_json::Map<String, Value>,
}

#[derive(Clone, Default)]
pub struct AdapterRegistry {
    entries: BTreeMap<AdapterKind, Registered>,
    /// Command for the stage-2 classifier, if configured.
    classifier: Option<(Vec<String>, Duration)>,
}

impl AdapterRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// The four builtin test doubles with default parameters.
    pub fn builtin_mocks() -> Self {
        let mut r = Self::new();
        r.insert(Arc::new(TranslationRegistration), Default::default());
        r.insert(Arc::new(IdentityBiasCorrection), Default::default());
        r.insert(Arc::new(ThresholdSkullStrip), Default::default());
        r.insert(Arc::new(MockSegmenterAdapter), Default::default());
        r
    }

    pub fn from_entries(entries: &[AdapterEntry], timeout: Duration) -> Result<Self, AdapterError> {
        let mut r = Self::new();
        for e in entries {
            if let Some(cmd) = &e.command {
                if e.kind == AdapterKind::ClassifierStage2 {
                    r.classifier = Some((cmd.clone(), timeout));
                    continue;
                }
                let p = ProcessAdapter {
                    kind: e.kind,
                    command: cmd.clone(),
                    timeout,
                };
                r.insert(Arc::new(p), e.params.clone());
                continue;
            }
            let adapter: Arc<dyn StageAdapter> = match (e.kind, e.builtin.as_deref()) {
                (AdapterKind::Registration, Some("translation")) => Arc::new(TranslationRegistration),
                (AdapterKind::BiasCorrection, Some("identity")) => Arc::new(IdentityBiasCorrection),
                (AdapterKind::SkullStrip, Some("threshold")) => Arc::new(ThresholdSkullStrip),
                (AdapterKind::Segmentation, Some("mock_segmenter")) => Arc::new(MockSegmenterAdapter),
                (k, b) => return Err(AdapterError::Missing(format!("{} builtin {b:?}", k.as_str()))),
            };
            r.insert(adapter, e.params.clone());
        }
        Ok(r)
    }

    pub fn insert(&mut self, adapter: Arc<dyn StageAdapter>, params: serde_json::Map<String, Value>) {
        self.entries.insert(adapter.kind(), Registered { adapter, params });
    }

    pub fn remove(&mut self, kind: AdapterKind) {
        self.entries.remove(&kind);
    }

    pub fn get(&self, kind: AdapterKind) -> Option<&Registered> {
        self.entries.get(&kind)
    }

    /// Stage-2 classifier writing its scratch files under `work_dir`.
    pub fn classifier(&self, work_dir: &Path) -> Option<ProcessClassifier> {
        self.classifier.as_ref().map(|(cmd, timeout)| ProcessClassifier {
            process: ProcessAdapter {
                kind: AdapterKind::ClassifierStage2,
                command: cmd.clone(),
                timeout: *timeout,
            },
            work_dir: work_dir.to_path_buf(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::volume::Geometry;

    fn img(dir: &Path, name: &str) -> PathBuf {
        let g = Geometry::new([6, 5, 4], [1.0; 3], [0.0; 3]).unwrap();
        let v = Volume3D::from_fn(g, |x, y, z| if (2..4).contains(&x) && y == 2 && z == 1 { 10.0 } else { 0.0 });
        let p = dir.join(name);
        nifti::write_image(&p, &v).unwrap();
        p
    }

    #[test]
    fn translation_contract() {
        let dir = tempfile::tempdir().unwrap();
        let a = img(dir.path(), "a.nii");
        let desc = InvocationDescriptor {
            kind: AdapterKind::Registration,
            inputs: vec![a],
            params: json!({"shift": [1.0, 0.0, 0.0]}),
            outputs: vec![dir.path().join("w.nii"), dir.path().join("x.mat")],
        };
        TranslationRegistration.invoke(&desc, dir.path()).unwrap();
        validate_outputs(&desc).unwrap();
        let w = nifti::read(&dir.path().join("w.nii")).unwrap().volume;
        assert_eq!(w.get(4, 2, 1), 10.0);
        assert_eq!(w.get(2, 2, 1), 0.0);
        let m: Affine4 = std::fs::read_to_string(dir.path().join("x.mat")).unwrap().parse().unwrap();
        assert_eq!(m, Affine4::translation([1.0, 0.0, 0.0]));
    }

    #[test]
    fn missing_output_detected() {
        let desc = InvocationDescriptor {
            kind: AdapterKind::BiasCorrection,
            inputs: vec![],
            params: json!({}),
            outputs: vec![PathBuf::from("/nonexistent/out.nii")],
        };
        assert!(matches!(validate_outputs(&desc), Err(AdapterError::MissingOutput(_))));
    }

    #[cfg(unix)]
    #[test]
    fn process_exit_and_timeout() {
        let dir = tempfile::tempdir().unwrap();
        let desc = InvocationDescriptor {
            kind: AdapterKind::BiasCorrection,
            inputs: vec![],
            params: json!({}),
            outputs: vec![],
        };
        let fail = ProcessAdapter {
            kind: AdapterKind::BiasCorrection,
            command: vec!["sh".into(), "-c".into(), "exit 3".into()],
            timeout: Duration::from_secs(10),
        };
        assert_eq!(fail.invoke(&desc, dir.path()), Err(AdapterError::Exit(Some(3))));
        let slow = ProcessAdapter {
            kind: AdapterKind::BiasCorrection,
            command: vec!["sh".into(), "-c".into(), "sleep 5".into()],
            timeout: Duration::from_millis(200),
        };
        assert!(matches!(slow.invoke(&desc, dir.path()), Err(AdapterError::Timeout(_))));
        assert!(dir.path().join("bias_correction.descriptor.json").is_file());
    }

    #[test]
    fn registry_from_entries() {
        let entries = vec![AdapterEntry {
            kind: AdapterKind::Segmentation,
            builtin: Some("mock_segmenter".into()),
            command: None,
            params: Default::default(),
        }];
        let r = AdapterRegistry::from_entries(&entries, Duration::from_secs(1)).unwrap();
        assert!(r.get(AdapterKind::Segmentation).unwrap().adapter.is_mock());
        assert!(r.get(AdapterKind::Registration).is_none());
    }
}
