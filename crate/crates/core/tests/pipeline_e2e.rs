use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use neurocurate::config::RunConfig;
use neurocurate::curation::Ruleset;
use neurocurate::evaluation::dice;
use neurocurate::pipeline::{
    discover_sessions, run_batch, sha256_bytes, AdapterError, AdapterKind, AdapterRegistry, InvocationDescriptor,
    MockSegmenterAdapter, PipelineContext, SessionProvenance, SessionStatus, StageAdapter, TranslationRegistration,
};
use neurocurate::synth::{write_phantom_session, PhantomSpec};
use neurocurate::volume::nifti;
use serde_json::json;

fn registry(shift: [f64; 3]) -> AdapterRegistry {
    let mut r = AdapterRegistry::builtin_mocks();
    let mut params = serde_json::Map::new();
    params.insert("shift".into(), json!(shift));
    r.insert(Arc::new(TranslationRegistration), params);
    r
}

#[test]
fn phantom_round_trip_and_resume() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    let spec = PhantomSpec::default();
    let phantom = write_phantom_session(&input.join("phantom01"), "phantom01", &spec, true).unwrap();

    let mut cfg = RunConfig::new(tmp.path().join("out"));
    cfg.input_roots = vec![input.clone()];
    cfg.workers = 2;
    cfg.radiomics.enabled = true;
    cfg.radiomics.bin_width = 0.5;
    let reg = registry([2.0, -3.0, 1.0]);
    let rules = Ruleset::default();
    let ctx = PipelineContext {
        config: &cfg,
        registry: &reg,
        ruleset: &rules,
    };
    let sources = discover_sessions(&cfg.input_roots).unwrap();
    assert_eq!(sources.len(), 1);

    let first = run_batch(&sources, &ctx).unwrap();
    let o = &first.sessions[0];
    assert_eq!(o.status, SessionStatus::Completed, "{:?}", o.error);
    assert!(o.skipped.is_empty());

    let dir = cfg.output_root.join("phantom01");
    let seg = nifti::read(&dir.join("seg_patient.nii")).unwrap().into_labels().unwrap();
    assert_eq!(seg.voxels(), phantom.truth.voxels());
    assert_eq!(dice(&seg, &phantom.truth).unwrap(), 1.0);

    let prov1 = std::fs::read(dir.join("provenance.json")).unwrap();
    let feats1 = std::fs::read(dir.join("features.csv")).unwrap();
    let second = run_batch(&sources, &ctx).unwrap();
    let o2 = &second.sessions[0];
    assert_eq!(o2.status, SessionStatus::Completed);
    assert!(o2.executed.is_empty(), "re-ran {:?}", o2.executed);
    assert_eq!(std::fs::read(dir.join("provenance.json")).unwrap(), prov1);
    assert_eq!(std::fs::read(dir.join("features.csv")).unwrap(), feats1);
}

#[test]
fn missing_segmenter_fails_session_but_keeps_curation() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_phantom_session(&input.join("s1"), "s1", &PhantomSpec::default(), false).unwrap();
    let cfg = RunConfig::new(tmp.path().join("out"));
    let mut reg = AdapterRegistry::builtin_mocks();
    reg.remove(AdapterKind::Segmentation);
    let rules = Ruleset::default();
    let ctx = PipelineContext {
        config: &cfg,
        registry: &reg,
        ruleset: &rules,
    };
    let summary = run_batch(&discover_sessions(&[input]).unwrap(), &ctx).unwrap();
    let o = &summary.sessions[0];
    assert_eq!(o.status, SessionStatus::Failed);
    assert_eq!(o.failed_stage.as_deref(), Some("segmentation"));
    assert!(o.error.as_deref().unwrap().contains("no segmentation adapter"));
    assert!(cfg.output_root.join("s1/curation.json").is_file());
    assert!(cfg.output_root.join("s1/provenance.json").is_file());
}

/// Segmenter that fails for one named session and otherwise delegates to
/// the builtin mock.
struct FailFor(&'static str);

impl StageAdapter for FailFor {
    fn name(&self) -> String {
        "test:fail-for".into()
    }

    fn kind(&self) -> AdapterKind {
        AdapterKind::Segmentation
    }

    fn invoke(&self, desc: &InvocationDescriptor, work_dir: &Path) -> Result<(), AdapterError> {
        if desc.inputs.iter().any(|p| p.components().any(|c| c.as_os_str() == self.0)) {
            return Err(AdapterError::Failed("injected failure".into()));
        }
        MockSegmenterAdapter.invoke(desc, work_dir)
    }
}

fn tree(root: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    walkdir::WalkDir::new(root)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.unwrap())
        .filter(|e| e.file_type().is_file())
        .map(|e| (e.path().strip_prefix(root).unwrap().to_path_buf(), std::fs::read(e.path()).unwrap()))
        .collect()
}

/// Provenance with the measured stage durations removed; the only field
/// that legitimately differs between two independent executions.
fn timeless(bytes: &[u8]) -> serde_json::Value {
    let mut v: serde_json::Value = serde_json::from_slice(bytes).unwrap();
    for stage in v["stages"].as_array_mut().unwrap() {
        stage.as_object_mut().unwrap().remove("wall_time_ms");
    }
    v
}

#[test]
fn failing_session_does_not_affect_others() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    for id in ["a", "b", "bad"] {
        write_phantom_session(&input.join(id), id, &PhantomSpec::default(), false).unwrap();
    }
    let mut cfg = RunConfig::new(tmp.path().join("out"));
    cfg.workers = 3;
    let mut reg = AdapterRegistry::builtin_mocks();
    reg.insert(Arc::new(FailFor("bad")), Default::default());
    let rules = Ruleset::default();
    let ctx = PipelineContext {
        config: &cfg,
        registry: &reg,
        ruleset: &rules,
    };
    let all = discover_sessions(&[input.clone()]).unwrap();
    let with_bad = run_batch(&all, &ctx).unwrap();
    assert_eq!((with_bad.n_completed, with_bad.n_failed), (2, 1));
    let bad = with_bad.sessions.iter().find(|s| s.session_id == "bad").unwrap();
    assert_eq!(bad.failed_stage.as_deref(), Some("segmentation"));
    let snapshot: Vec<_> = ["a", "b"].iter().map(|id| tree(&cfg.output_root.join(id))).collect();

    std::fs::remove_dir_all(&cfg.output_root).unwrap();
    let good: Vec<_> = all.into_iter().filter(|s| s.session_id != "bad").collect();
    let without = run_batch(&good, &ctx).unwrap();
    assert_eq!(without.n_completed, 2);
    for (id, before) in ["a", "b"].iter().zip(&snapshot) {
        let after = tree(&cfg.output_root.join(id));
        let prov = Path::new("provenance.json");
        assert_eq!(timeless(&before[prov]), timeless(&after[prov]), "session {id} provenance changed");
        let changed: Vec<_> = before
            .keys()
            .filter(|k| k.as_path() != prov && before.get(*k) != after.get(*k))
            .collect();
        assert!(changed.is_empty() && before.len() == after.len(), "session {id} changed: {changed:?}");
    }
}

#[test]
fn every_output_is_traceable_to_one_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let input = tmp.path().join("in");
    write_phantom_session(&input.join("p"), "p", &PhantomSpec::default(), false).unwrap();
    let mut cfg = RunConfig::new(tmp.path().join("out"));
    cfg.radiomics.enabled = true;
    cfg.radiomics.bin_width = 0.5;
    let reg = registry([1.0, 0.0, -2.0]);
    let rules = Ruleset::default();
    let ctx = PipelineContext {
        config: &cfg,
        registry: &reg,
        ruleset: &rules,
    };
    let summary = run_batch(&discover_sessions(&[input]).unwrap(), &ctx).unwrap();
    assert_eq!(summary.n_completed, 1);
    let dir = cfg.output_root.join("p");
    let prov = SessionProvenance::read(&dir.join("provenance.json")).unwrap();
    let mut produced = 0;
    for (rel, bytes) in tree(&dir) {
        if rel == Path::new("provenance.json") || rel.starts_with("work") {
            continue;
        }
        let full = dir.join(&rel);
        let owners: Vec<&str> = prov
            .stages
            .iter()
            .filter(|s| s.outputs.iter().any(|h| Path::new(&h.path) == full || Path::new(&h.path) == rel))
            .map(|s| s.name.as_str())
            .collect();
        assert_eq!(owners.len(), 1, "{} listed by {owners:?}", rel.display());
        let entry = prov.stage(owners[0]).unwrap();
        let h = entry
            .outputs
            .iter()
            .find(|h| Path::new(&h.path) == full || Path::new(&h.path) == rel)
            .unwrap();
        assert_eq!(h.sha256, sha256_bytes(&bytes));
        produced += 1;
    }
    assert!(produced >= 10);
}
