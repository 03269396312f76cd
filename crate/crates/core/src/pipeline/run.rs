use std::collections::{BTreeMap, BTreeSet};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};
use tracing::{info, warn};

use super::adapter::{validate_outputs, AdapterError, AdapterKind, AdapterRegistry, InvocationDescriptor};
use super::mock::MockThresholds;
use super::provenance::{sha256_bytes, sha256_file, FileHash, SessionProvenance, SessionStatus, StageEntry, StageStatus};
use super::route::{route_segmentation, select_registration_target, RouteKind, SegRoute, SequenceSet};
use super::source::{load_session, LoadedSession, SessionSource};
use super::PipelineError;
use crate::config::RunConfig;
use crate::curation::{curate, ClassifierAdapter, CuratedSession, CurationReport, Ruleset, SequenceClass};
use crate::dicom::series_to_volume;
use crate::radiomics::{extract_all, write_features_csv, RadiomicsParams};
use crate::volume::{
    apply_affine, invert_affine, merge_mask_classes, nifti, normalize_intensity, Affine4, Interpolation, MaskScheme,
    SegMask, Volume3D,
};

/// Everything a run needs besides the sessions themselves.
#[derive(Clone, Copy)]
pub struct PipelineContext<'a> {
    pub config: &'a RunConfig,
    pub registry: &'a AdapterRegistry,
    pub ruleset: &'a Ruleset,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionOutcome {
    pub session_id: String,
    pub status: SessionStatus,
    pub failed_stage: Option<String>,
    pub error: Option<String>,
    pub executed: Vec<String>,
    pub skipped: Vec<String>,
    pub output_dir: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BatchSummary {
    pub n_completed: usize,
    pub n_excluded: usize,
    pub n_failed: usize,
    pub sessions: Vec<SessionOutcome>,
}

struct StageSpec {
    name: String,
    inputs: Vec<PathBuf>,
    params: Value,
    outputs: Vec<PathBuf>,
    adapter: Option<(String, bool)>,
}

impl StageSpec {
    fn internal(name: impl Into<String>, inputs: Vec<PathBuf>, params: Value, outputs: Vec<PathBuf>) -> Self {
        Self {
            name: name.into(),
            inputs,
            params,
            outputs,
            adapter: None,
        }
    }
}

type StageResult = Result<Vec<String>, String>;

/// Runs stages against the previous provenance: a stage whose key matches
/// and whose recorded outputs are intact is reused instead of re-run.
struct Runner {
    dir: PathBuf,
    previous: Option<SessionProvenance>,
    prov: SessionProvenance,
    hashes: BTreeMap<PathBuf, String>,
    executed: Vec<String>,
    skipped: Vec<String>,
}

impl Runner {
    fn rel(&self, p: &Path) -> String {
        match p.strip_prefix(&self.dir) {
            Ok(r) => r.to_string_lossy().replace('\\', "/"),
            Err(_) => p.display().to_string(),
        }
    }

    fn hash(&mut self, p: &Path, cached: bool) -> Result<FileHash, String> {
        let sha256 = match self.hashes.get(p) {
            Some(h) if cached => h.clone(),
            _ => {
                let h = sha256_file(p).map_err(|e| format!("{}: {e}", p.display()))?;
                self.hashes.insert(p.to_path_buf(), h.clone());
                h
            }
        };
        Ok(FileHash {
            path: self.rel(p),
            sha256,
        })
    }

    fn reusable(&mut self, name: &str, key: &str) -> Option<StageEntry> {
        let prev = self.previous.as_ref()?.stage(name)?.clone();
        if prev.status != StageStatus::Ok || prev.key != key {
            return None;
        }
        for out in &prev.outputs {
            let p = self.dir.join(&out.path);
            if sha256_file(&p).ok().as_deref() != Some(out.sha256.as_str()) {
                return None;
            }
            self.hashes.insert(p, out.sha256.clone());
        }
        Some(prev)
    }

    fn stage(&mut self, spec: StageSpec, f: impl FnOnce() -> StageResult) -> Result<(), PipelineError> {
        let fail = |stage: &str, message: String| PipelineError::Stage {
            stage: stage.to_string(),
            message,
        };
        let inputs = spec
            .inputs
            .iter()
            .map(|p| self.hash(p, true))
            .collect::<Result<Vec<_>, _>>()
            .map_err(|m| fail(&spec.name, format!("missing input: {m}")))?;
        let params_sha256 = sha256_bytes(spec.params.to_string().as_bytes());
        let key = sha256_bytes(json!({ "stage": spec.name, "inputs": inputs, "params": params_sha256 }).to_string().as_bytes());
        if let Some(prev) = self.reusable(&spec.name, &key) {
            info!(session = %self.prov.session_id, stage = %spec.name, "stage reused");
            self.skipped.push(spec.name.clone());
            self.prov.stages.push(prev);
            return Ok(());
        }
        for out in &spec.outputs {
            if let Some(parent) = out.parent() {
                std::fs::create_dir_all(parent).map_err(|e| fail(&spec.name, e.to_string()))?;
            }
        }
        let (adapter, mock) = spec.adapter.clone().unzip();
        let start = Instant::now();
        let result = f();
        let wall_time_ms = start.elapsed().as_millis() as u64;
        let mut entry = StageEntry {
            name: spec.name.clone(),
            key,
            adapter,
            mock: mock.unwrap_or(false),
            inputs,
            params: spec.params,
            params_sha256,
            outputs: Vec::new(),
            wall_time_ms,
            status: StageStatus::Ok,
            error: None,
            notes: Vec::new(),
        };
        let outputs = result.and_then(|notes| {
            entry.notes = notes;
            spec.outputs.iter().map(|p| self.hash(p, false)).collect::<Result<Vec<_>, _>>()
        });
        match outputs {
            Ok(o) => {
                entry.outputs = o;
                info!(session = %self.prov.session_id, stage = %spec.name, wall_time_ms, "stage done");
                self.executed.push(spec.name);
                self.prov.stages.push(entry);
                Ok(())
            }
            Err(message) => {
                warn!(session = %self.prov.session_id, stage = %spec.name, error = %message, "stage failed");
                entry.status = StageStatus::Failed;
                entry.error = Some(message.clone());
                self.prov.stages.push(entry);
                Err(fail(&spec.name, message))
            }
        }
    }
}

fn s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn read_labels(p: &Path) -> Result<(Volume3D<u8>, Option<MaskScheme>), String> {
    let img = nifti::read(p).map_err(s)?;
    let scheme = img.mask_scheme();
    Ok((img.into_labels().map_err(s)?, scheme))
}

fn scheme_for(route: &SegRoute) -> MaskScheme {
    match route.kind {
        RouteKind::BinaryWt => MaskScheme::BinaryWt,
        _ => MaskScheme::MultiClass,
    }
}

fn merged_params(base: &serde_json::Map<String, Value>, extra: Value) -> Value {
    let mut m = base.clone();
    if let Value::Object(e) = extra {
        m.extend(e);
    }
    Value::Object(m)
}

fn adapter_failure(kind: AdapterKind) -> String {
    AdapterError::Missing(kind.as_str().to_string()).to_string()
}

/// Rebuilds the curated session from a stored report and the loaded series.
fn curated_from_report(report: &CurationReport, loaded: &LoadedSession) -> Result<CuratedSession, String> {
    let mut selected = BTreeMap::new();
    for (class, uid) in &report.selected {
        let rec = loaded
            .series
            .iter()
            .find(|r| &r.series_uid == uid)
            .ok_or_else(|| format!("selected series {uid} not found in input"))?;
        selected.insert(*class, rec.clone());
    }
    Ok(CuratedSession {
        session_id: report.session_id.clone(),
        selected,
        exclusions: report.series.iter().filter_map(|d| d.exclusion.map(|r| (d.series_uid.clone(), r))).collect(),
        session_excluded: report.session_excluded,
    })
}

/// Routes on the classes present and invokes the segmentation adapter on
/// the given (normalized, co-registered) images, writing `out`. The mask
/// is checked against the route's label scheme and the input grid.
pub fn segment_images(
    images: &BTreeMap<SequenceClass, PathBuf>,
    out: &Path,
    registry: &AdapterRegistry,
    thresholds: &MockThresholds,
    work_dir: &Path,
) -> Result<SegRoute, PipelineError> {
    let available: SequenceSet = images.keys().copied().collect();
    let route = route_segmentation(&available);
    if route.kind == RouteKind::NoSegmentation {
        return Ok(route);
    }
    let reg = registry
        .get(AdapterKind::Segmentation)
        .ok_or_else(|| AdapterError::Missing(AdapterKind::Segmentation.as_str().into()))?;
    std::fs::create_dir_all(work_dir).map_err(|e| PipelineError::Io(e.to_string()))?;
    let desc = segmentation_descriptor(images, out, &route, thresholds, &reg.params);
    reg.adapter.invoke(&desc, work_dir)?;
    validate_outputs(&desc)?;
    check_mask(out, images.values().next().expect("route implies images"), scheme_for(&route)).map_err(|m| {
        AdapterError::InvalidOutput {
            path: out.to_path_buf(),
            reason: m,
        }
    })?;
    Ok(route)
}

fn segmentation_descriptor(
    images: &BTreeMap<SequenceClass, PathBuf>,
    out: &Path,
    route: &SegRoute,
    thresholds: &MockThresholds,
    base: &serde_json::Map<String, Value>,
) -> InvocationDescriptor {
    let classes: Vec<&str> = images.keys().map(|c| c.as_str()).collect();
    InvocationDescriptor {
        kind: AdapterKind::Segmentation,
        inputs: images.values().cloned().collect(),
        params: merged_params(
            base,
            json!({ "classes": classes, "route": route.kind, "model_key": route.model_key, "thresholds": thresholds }),
        ),
        outputs: vec![out.to_path_buf()],
    }
}

fn check_mask(mask: &Path, reference: &Path, scheme: MaskScheme) -> Result<(), String> {
    let (labels, _) = read_labels(mask)?;
    let reference = nifti::read(reference).map_err(s)?;
    if !labels.geometry().same_grid(reference.volume.geometry()) {
        return Err("mask is not on the image grid".into());
    }
    SegMask::new(labels, scheme).map(|_| ()).map_err(s)
}

fn invoke(
    registry: &AdapterRegistry,
    kind: AdapterKind,
    inputs: &[PathBuf],
    outputs: &[PathBuf],
    extra: Value,
    work: &Path,
) -> (Value, Option<(String, bool)>, Box<dyn FnOnce() -> StageResult>) {
    let Some(reg) = registry.get(kind) else {
        return (extra, None, Box::new(move || Err(adapter_failure(kind))));
    };
    let params = merged_params(&reg.params, extra);
    let desc = InvocationDescriptor {
        kind,
        inputs: inputs.to_vec(),
        params: params.clone(),
        outputs: outputs.to_vec(),
    };
    let label = Some((reg.adapter.name(), reg.adapter.is_mock()));
    let adapter = reg.adapter.clone();
    let work = work.to_path_buf();
    let f = Box::new(move || {
        std::fs::create_dir_all(&work).map_err(s)?;
        adapter.invoke(&desc, &work).map_err(s)?;
        validate_outputs(&desc).map_err(s)?;
        Ok(Vec::new())
    });
    (params, label, f)
}

/// Target first, then the remaining classes in canonical order.
fn class_order(session: &CuratedSession, target: SequenceClass) -> Vec<SequenceClass> {
    let mut v = vec![target];
    v.extend(session.selected.keys().copied().filter(|c| *c != target));
    v
}

fn paths(dir: &Path, sub: &str, classes: &[SequenceClass]) -> Vec<PathBuf> {
    classes.iter().map(|c| dir.join(sub).join(format!("{c}.nii"))).collect()
}

fn run_stages(
    src: &SessionSource,
    ctx: &PipelineContext<'_>,
    r: &mut Runner,
) -> Result<SessionStatus, PipelineError> {
    let cfg = ctx.config;
    let dir = r.dir.clone();
    let work = dir.join("work");
    let id = src.session_id.clone();

    let loaded = load_session(src)?;
    r.hashes.extend(loaded.file_hashes.clone());

    // curation
    let curation_json = dir.join("curation.json");
    let classifier = ctx.registry.classifier(&work);
    let classifier_name = if classifier.is_some() { "process" } else { "fallback" };
    let spec = StageSpec::internal(
        "curate",
        loaded.file_hashes.keys().cloned().collect(),
        json!({ "ruleset": ctx.ruleset, "classifier": classifier_name }),
        vec![curation_json.clone()],
    );
    r.stage(spec, || {
        if classifier.is_some() {
            std::fs::create_dir_all(&work).map_err(s)?;
        }
        let c = curate(&id, loaded.series.clone(), ctx.ruleset, classifier.as_ref().map(|c| c as &dyn ClassifierAdapter))
            .map_err(s)?;
        let mut report = c.report;
        report.unreadable = loaded.unreadable.clone();
        let mut text = serde_json::to_string_pretty(&report).map_err(s)?;
        text.push('\n');
        std::fs::write(&curation_json, text).map_err(s)?;
        Ok(vec![format!("{} series, {} unreadable files", loaded.series.len(), loaded.unreadable.len())])
    })?;
    let report: CurationReport = serde_json::from_str(&std::fs::read_to_string(&curation_json).map_err(s).map_err(PipelineError::Io)?)
        .map_err(|e| PipelineError::Load(e.to_string()))?;
    let session = curated_from_report(&report, &loaded).map_err(PipelineError::Load)?;
    r.prov.curation = Some(report);
    if session.session_excluded {
        return Ok(SessionStatus::Excluded);
    }

    let target = select_registration_target(&session)?;
    r.prov.registration_target = Some(target);
    let classes = class_order(&session, target);

    // native volumes
    for &class in &classes {
        let series = &session.selected[&class];
        let out = dir.join("native").join(format!("{class}.nii"));
        let inputs: Vec<PathBuf> = series.instances.iter().filter_map(|m| loaded.files.get(&m.sop_uid).cloned()).collect();
        let spec = StageSpec::internal(format!("stack_{class}"), inputs, json!({ "series_uid": series.series_uid }), vec![out.clone()]);
        r.stage(spec, || {
            let payloads = series
                .instances
                .iter()
                .map(|m| {
                    loaded
                        .payloads
                        .get(&m.sop_uid)
                        .ok_or_else(|| format!("no decodable pixel data for instance {}", m.sop_uid))
                })
                .collect::<Result<Vec<_>, _>>()?;
            let stacked = series_to_volume(series, &payloads).map_err(s)?;
            nifti::write_image(&out, &stacked.volume).map_err(s)?;
            let mut notes = vec![format!("ordering {:?}, slice spacing {}", stacked.provenance.ordering, stacked.provenance.slice_spacing)];
            notes.extend(stacked.provenance.warnings);
            Ok(notes)
        })?;
    }

    // registration to the atlas (or the target grid)
    let native = paths(&dir, "native", &classes);
    let atlas_imgs = paths(&dir, "atlas", &classes);
    let mat = dir.join("patient2atlas.mat");
    let mut reg_inputs = native.clone();
    if let Some(a) = &cfg.atlas {
        reg_inputs.push(a.clone());
        r.prov.atlas_sha256 = Some(sha256_file(a).map_err(|e| PipelineError::Io(e.to_string()))?);
    }
    let mut reg_outputs = atlas_imgs.clone();
    reg_outputs.push(mat.clone());
    let cls: Vec<&str> = classes.iter().map(|c| c.as_str()).collect();
    let extra = json!({ "classes": cls, "atlas": cfg.atlas, "interpolation": "trilinear" });
    let (params, adapter, f) = invoke(ctx.registry, AdapterKind::Registration, &native, &reg_outputs, extra, &work);
    r.stage(
        StageSpec {
            name: "registration".into(),
            inputs: reg_inputs,
            params,
            outputs: reg_outputs,
            adapter,
        },
        f,
    )?;
    let xform: Affine4 = std::fs::read_to_string(&mat)
        .map_err(s)
        .and_then(|t| t.parse().map_err(s))
        .map_err(|m| PipelineError::Stage {
            stage: "registration".into(),
            message: format!("patient2atlas.mat: {m}"),
        })?;
    r.prov.patient2atlas = Some(xform);

    // bias-field correction
    let n4 = paths(&dir, "n4", &classes);
    let (params, adapter, f) = invoke(ctx.registry, AdapterKind::BiasCorrection, &atlas_imgs, &n4, json!({ "classes": cls }), &work);
    r.stage(
        StageSpec {
            name: "bias_correction".into(),
            inputs: atlas_imgs.clone(),
            params,
            outputs: n4.clone(),
            adapter,
        },
        f,
    )?;

    // skull stripping
    let brain = paths(&dir, "brain", &classes);
    let brain_mask = dir.join("brain_mask.nii");
    let mut ss_outputs = brain.clone();
    ss_outputs.push(brain_mask.clone());
    let (params, adapter, f) = invoke(ctx.registry, AdapterKind::SkullStrip, &n4, &ss_outputs, json!({ "classes": cls }), &work);
    r.stage(
        StageSpec {
            name: "skull_strip".into(),
            inputs: n4.clone(),
            params,
            outputs: ss_outputs,
            adapter,
        },
        f,
    )?;

    // intensity normalization
    let norm = paths(&dir, "norm", &classes);
    let mut norm_inputs = brain.clone();
    norm_inputs.push(brain_mask.clone());
    let spec = StageSpec::internal("normalize", norm_inputs, json!({ "method": "zscore_p5_p95" }), norm.clone());
    r.stage(spec, || {
        let (mask, _) = read_labels(&brain_mask)?;
        let mut notes = Vec::new();
        for ((class, inp), out) in classes.iter().zip(&brain).zip(&norm) {
            let vol = nifti::read(inp).map_err(s)?.volume;
            let (z, st) = normalize_intensity(&vol, &mask).map_err(|e| format!("{class}: {e}"))?;
            nifti::write_image(out, &z).map_err(s)?;
            notes.push(format!("{class}: p5={} p95={} mean={} std={} inliers={}", st.p5, st.p95, st.mean, st.std, st.n_inliers));
        }
        Ok(notes)
    })?;

    // routing
    let available: SequenceSet = classes.iter().copied().collect();
    let route = route_segmentation(&available);
    r.prov.route = Some(route.clone());
    if route.kind == RouteKind::NoSegmentation {
        return Ok(SessionStatus::Completed);
    }

    // segmentation in atlas space
    let by_class: BTreeMap<SequenceClass, PathBuf> = classes.iter().copied().zip(norm.iter().cloned()).collect();
    let seg_atlas = dir.join("seg_atlas.nii");
    let scheme = scheme_for(&route);
    let (name, spec_params, adapter) = match ctx.registry.get(AdapterKind::Segmentation) {
        Some(reg) => {
            let d = segmentation_descriptor(&by_class, &seg_atlas, &route, &cfg.mock_segmenter, &reg.params);
            ("segmentation", d.params, Some((reg.adapter.name(), reg.adapter.is_mock())))
        }
        None => ("segmentation", json!({ "model_key": route.model_key }), None),
    };
    r.stage(
        StageSpec {
            name: name.into(),
            inputs: by_class.values().cloned().collect(),
            params: spec_params,
            outputs: vec![seg_atlas.clone()],
            adapter,
        },
        || {
            segment_images(&by_class, &seg_atlas, ctx.registry, &cfg.mock_segmenter, &work)
                .map(|r| vec![format!("route {} model {}", r.kind, r.model_key)])
                .map_err(|e| match e {
                    PipelineError::Adapter(a) => a.to_string(),
                    other => other.to_string(),
                })
        },
    )?;

    // optional externally refined mask, already in atlas space
    let mut final_mask = seg_atlas.clone();
    let mut final_scheme = scheme;
    if let Some(refined) = cfg.refined_root.as_ref().map(|d| d.join(format!("{id}.nii"))).filter(|p| p.is_file()) {
        let out = dir.join("seg_refined.nii");
        let spec = StageSpec::internal(
            "ingest_refined",
            vec![refined.clone(), seg_atlas.clone()],
            json!({ "default_scheme": scheme }),
            vec![out.clone()],
        );
        r.stage(spec, || {
            let (labels, stored) = read_labels(&refined)?;
            let (reference, _) = read_labels(&seg_atlas)?;
            if !labels.geometry().same_grid(reference.geometry()) {
                return Err("refined mask is not on the atlas grid".into());
            }
            let sch = stored.unwrap_or(scheme);
            let m = SegMask::new(labels, sch).map_err(s)?;
            nifti::write_labels(&out, &m.labels, Some(sch)).map_err(s)?;
            Ok(vec![format!("refined mask scheme {}", sch.as_str())])
        })?;
        r.prov.refined_mask = true;
        final_scheme = read_labels(&out).map_err(PipelineError::Load)?.1.unwrap_or(scheme);
        final_mask = out;
    }

    // composite masks
    let tc = dir.join("masks").join("tc.nii");
    let wt = dir.join("masks").join("wt.nii");
    let spec = StageSpec::internal("composites", vec![final_mask.clone()], json!({ "scheme": final_scheme }), vec![tc.clone(), wt.clone()]);
    r.stage(spec, || {
        let (labels, _) = read_labels(&final_mask)?;
        let c = merge_mask_classes(&SegMask::new(labels, final_scheme).map_err(s)?).map_err(s)?;
        nifti::write_labels(&tc, &c.tc, None).map_err(s)?;
        nifti::write_labels(&wt, &c.wt, None).map_err(s)?;
        Ok(Vec::new())
    })?;

    // back to the native grid of the registration target
    let seg_patient = dir.join("seg_patient.nii");
    let target_native = dir.join("native").join(format!("{target}.nii"));
    let spec = StageSpec::internal(
        "inverse_warp",
        vec![final_mask.clone(), mat.clone(), target_native.clone()],
        json!({ "interpolation": "nearest" }),
        vec![seg_patient.clone()],
    );
    r.stage(spec, || {
        let (labels, _) = read_labels(&final_mask)?;
        let reference = nifti::read(&target_native).map_err(s)?.volume;
        let inv = invert_affine(&xform).map_err(s)?;
        let warped = apply_affine(&labels, &inv, reference.geometry(), Interpolation::Nearest).map_err(s)?;
        nifti::write_labels(&seg_patient, &warped, Some(final_scheme)).map_err(s)?;
        Ok(Vec::new())
    })?;

    // radiomics on the normalized atlas-space images
    if cfg.radiomics.enabled {
        let fj = dir.join("features.json");
        let fc = dir.join("features.csv");
        let mut inputs = norm.clone();
        inputs.push(final_mask.clone());
        let spec = StageSpec::internal(
            "radiomics",
            inputs,
            json!({ "bin_width": cfg.radiomics.bin_width }),
            vec![fj.clone(), fc.clone()],
        );
        r.stage(spec, || {
            let mut images = BTreeMap::new();
            for (class, p) in &by_class {
                images.insert(*class, nifti::read(p).map_err(s)?.volume);
            }
            let (labels, _) = read_labels(&final_mask)?;
            let mask = SegMask::new(labels, final_scheme).map_err(s)?;
            let params = RadiomicsParams {
                bin_width: cfg.radiomics.bin_width,
                ..Default::default()
            };
            let fv = extract_all(&id, &images, &mask, &params).map_err(s)?;
            let mut text = serde_json::to_string_pretty(&fv).map_err(s)?;
            text.push('\n');
            std::fs::write(&fj, text).map_err(s)?;
            let file = std::fs::File::create(&fc).map_err(s)?;
            write_features_csv(file, std::slice::from_ref(&fv)).map_err(s)?;
            Ok(vec![format!("{} features, {} null", fv.len(), fv.n_null())])
        })?;
    }
    Ok(SessionStatus::Completed)
}

/// Runs one session end to end. Provenance is always written, including
/// for excluded and failed sessions.
pub fn run_session(src: &SessionSource, ctx: &PipelineContext<'_>) -> SessionOutcome {
    let dir = ctx.config.output_root.join(&src.session_id);
    let prov_path = dir.join("provenance.json");
    let previous = SessionProvenance::read(&prov_path).ok();
    let mut r = Runner {
        dir: dir.clone(),
        previous,
        prov: SessionProvenance::new(&src.session_id),
        hashes: BTreeMap::new(),
        executed: Vec::new(),
        skipped: Vec::new(),
    };
    let result = std::fs::create_dir_all(&dir)
        .map_err(|e| PipelineError::Io(format!("{}: {e}", dir.display())))
        .and_then(|_| run_stages(src, ctx, &mut r));
    match result {
        Ok(status) => r.prov.status = status,
        Err(e) => {
            r.prov.status = SessionStatus::Failed;
            r.prov.failed_stage = Some(match &e {
                PipelineError::Stage { stage, .. } => stage.clone(),
                PipelineError::Load(_) | PipelineError::Io(_) => "load".into(),
                _ => "pipeline".into(),
            });
            r.prov.error = Some(e.to_string());
        }
    }
    if let Err(e) = r.prov.write(&prov_path) {
        warn!(session = %src.session_id, error = %e, "cannot write provenance");
        r.prov.status = SessionStatus::Failed;
        r.prov.error = Some(format!("cannot write provenance: {e}"));
    }
    SessionOutcome {
        session_id: src.session_id.clone(),
        status: r.prov.status,
        failed_stage: r.prov.failed_stage.clone(),
        error: r.prov.error.clone(),
        executed: r.executed,
        skipped: r.skipped,
        output_dir: dir,
    }
}

fn run_guarded(src: &SessionSource, ctx: &PipelineContext<'_>) -> SessionOutcome {
    catch_unwind(AssertUnwindSafe(|| run_session(src, ctx))).unwrap_or_else(|panic| {
        let msg = panic
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| panic.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_else(|| "panic".into());
        SessionOutcome {
            session_id: src.session_id.clone(),
            status: SessionStatus::Failed,
            failed_stage: Some("pipeline".into()),
            error: Some(format!("panic: {msg}")),
            executed: Vec::new(),
            skipped: Vec::new(),
            output_dir: ctx.config.output_root.join(&src.session_id),
        }
    })
}

/// Runs sessions on a pool of `config.workers` threads. A failing session
/// never aborts the others. Outcomes are sorted by session id.
pub fn run_batch(sources: &[SessionSource], ctx: &PipelineContext<'_>) -> Result<BatchSummary, PipelineError> {
    let mut ids = BTreeSet::new();
    for s in sources {
        if !ids.insert(&s.session_id) {
            return Err(PipelineError::DuplicateSession(s.session_id.clone()));
        }
    }
    std::fs::create_dir_all(&ctx.config.output_root).map_err(|e| PipelineError::Io(e.to_string()))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(ctx.config.workers)
        .build()
        .map_err(|e| PipelineError::Io(e.to_string()))?;
    let mut sessions: Vec<SessionOutcome> = pool.install(|| sources.par_iter().map(|s| run_guarded(s, ctx)).collect());
    sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
    let count = |st: SessionStatus| sessions.iter().filter(|o| o.status == st).count();
    Ok(BatchSummary {
        n_completed: count(SessionStatus::Completed),
        n_excluded: count(SessionStatus::Excluded),
        n_failed: count(SessionStatus::Failed),
        sessions,
    })
}
