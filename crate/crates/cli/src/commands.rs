use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{anyhow, Context};
use clap::Args;
use neurocurate::config::RunConfig;
use neurocurate::curation::{curate as curate_session, ClassifierAdapter, Ruleset, SequenceClass};
use neurocurate::pipeline::{
    discover_sessions, load_session, run_batch, segment_images, AdapterRegistry, PipelineContext, SessionProvenance,
    SessionSource,
};
use neurocurate::radiomics::{extract_all, write_features_csv, RadiomicsParams};
use neurocurate::synth::{write_phantom_session, PhantomSpec};
use neurocurate::volume::{nifti, MaskScheme, SegMask};
use serde_json::json;
use tracing::{info, warn};

use crate::{ConfigArgs, SessionFilter};

pub enum CliError {
    Config(anyhow::Error),
    Runtime(anyhow::Error),
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Runtime(e)
    }
}

pub type CmdResult = Result<bool, CliError>;

pub struct Setup {
    pub config: RunConfig,
    pub registry: AdapterRegistry,
    pub ruleset: Ruleset,
}

impl Setup {
    fn ctx(&self) -> PipelineContext<'_> {
        PipelineContext {
            config: &self.config,
            registry: &self.registry,
            ruleset: &self.ruleset,
        }
    }
}

/// Loads, overrides and validates the configuration before any session
/// is touched. Every failure here is a configuration error.
pub fn setup(args: &ConfigArgs, inputs: &[PathBuf]) -> Result<Setup, CliError> {
    let cfg_err = |e: anyhow::Error| CliError::Config(e);
    let mut config = match (&args.config, &args.output_root) {
        (Some(p), _) => RunConfig::load(p).map_err(|e| cfg_err(e.into()))?,
        (None, Some(out)) => RunConfig::new(out.clone()),
        (None, None) => return Err(cfg_err(anyhow!("either --config or --output-root is required"))),
    };
    if let Some(out) = &args.output_root {
        config.output_root = out.clone();
    }
    if !inputs.is_empty() {
        config.input_roots = inputs.to_vec();
    }
    config.apply_env(|k| std::env::var(k).ok()).map_err(|e| cfg_err(e.into()))?;
    for root in &config.input_roots {
        if !root.exists() {
            return Err(cfg_err(anyhow!("input root {} does not exist", root.display())));
        }
    }
    let registry = AdapterRegistry::from_entries(&config.adapters, Duration::from_secs(config.adapter_timeout_secs))
        .map_err(|e| cfg_err(e.into()))?;
    let ruleset = match &config.ruleset {
        Some(p) => Ruleset::load(p).map_err(|e| cfg_err(e.into()))?,
        None => Ruleset::default(),
    };
    Ok(Setup {
        config,
        registry,
        ruleset,
    })
}

fn filtered(sources: Vec<SessionSource>, filter: &SessionFilter) -> Vec<SessionSource> {
    if filter.sessions.is_empty() {
        return sources;
    }
    sources.into_iter().filter(|s| filter.sessions.contains(&s.session_id)).collect()
}

fn print_json(v: &impl serde::Serialize) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_json(path: &Path, v: &impl serde::Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(v)?;
    text.push('\n');
    std::fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn sources_for(setup: &Setup, filter: &SessionFilter) -> anyhow::Result<Vec<SessionSource>> {
    let sources = filtered(discover_sessions(&setup.config.input_roots)?, filter);
    if sources.is_empty() {
        warn!("no sessions found under the input roots");
    }
    Ok(sources)
}

pub fn curate(args: &ConfigArgs, filter: &SessionFilter, inputs: &[PathBuf]) -> CmdResult {
    let setup = setup(args, inputs)?;
    let sources = sources_for(&setup, filter)?;
    let mut ok = true;
    let mut summary = Vec::new();
    for src in &sources {
        let dir = setup.config.output_root.join(&src.session_id);
        let result = (|| -> anyhow::Result<_> {
            std::fs::create_dir_all(&dir)?;
            let loaded = load_session(src)?;
            let classifier = setup.registry.classifier(&dir.join("work"));
            let c = curate_session(
                &src.session_id,
                loaded.series,
                &setup.ruleset,
                classifier.as_ref().map(|c| c as &dyn ClassifierAdapter),
            )?;
            let mut report = c.report;
            report.unreadable = loaded.unreadable;
            write_json(&dir.join("curation.json"), &report)?;
            Ok(report)
        })();
        match result {
            Ok(r) => {
                info!(session = %src.session_id, excluded = r.session_excluded, selected = r.selected.len(), "curated");
                summary.push(json!({ "session_id": src.session_id, "status": "ok", "excluded": r.session_excluded, "selected": r.selected }));
            }
            Err(e) => {
                ok = false;
                warn!(session = %src.session_id, error = %e, "curation failed");
                summary.push(json!({ "session_id": src.session_id, "status": "failed", "error": format!("{e:#}") }));
            }
        }
    }
    print_json(&json!({ "sessions": summary }))?;
    Ok(ok)
}

pub fn run(args: &ConfigArgs, filter: &SessionFilter, inputs: &[PathBuf]) -> CmdResult {
    let setup = setup(args, inputs)?;
    let sources = sources_for(&setup, filter)?;
    let summary = run_batch(&sources, &setup.ctx()).map_err(|e| CliError::Runtime(e.into()))?;
    print_json(&summary)?;
    Ok(summary.n_failed == 0)
}

/// Session output directories under the output root, sorted.
fn session_dirs(root: &Path, filter: &SessionFilter) -> anyhow::Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    if !root.is_dir() {
        warn!(root = %root.display(), "output root does not exist");
        return Ok(out);
    }
    for e in std::fs::read_dir(root)? {
        let p = e?.path();
        if p.is_dir() {
            let id = p.file_name().unwrap_or_default().to_string_lossy().into_owned();
            if filter.sessions.is_empty() || filter.sessions.contains(&id) {
                out.push((id, p));
            }
        }
    }
    out.sort();
    Ok(out)
}

fn normalized_images(dir: &Path) -> BTreeMap<SequenceClass, PathBuf> {
    SequenceClass::SEGMENTABLE
        .iter()
        .map(|c| (*c, dir.join("norm").join(format!("{c}.nii"))))
        .filter(|(_, p)| p.is_file())
        .collect()
}

/// Reads a label mask, taking the scheme from the file or, when absent,
/// from the labels present (any label above 1 means multi-class).
pub fn read_mask(path: &Path) -> anyhow::Result<SegMask> {
    let img = nifti::read(path).with_context(|| format!("reading {}", path.display()))?;
    let stored = img.mask_scheme();
    let labels = img.into_labels()?;
    let scheme = stored.unwrap_or_else(|| {
        if labels.voxels().iter().any(|&v| v > 1) {
            MaskScheme::MultiClass
        } else {
            MaskScheme::BinaryWt
        }
    });
    Ok(SegMask::new(labels, scheme)?)
}

pub fn segment(args: &ConfigArgs, filter: &SessionFilter) -> CmdResult {
    let setup = setup(args, &[])?;
    let mut ok = true;
    let mut summary = Vec::new();
    for (id, dir) in session_dirs(&setup.config.output_root, filter)? {
        let images = normalized_images(&dir);
        if images.is_empty() {
            warn!(session = %id, "no normalized images; skipped");
            continue;
        }
        let out = dir.join("seg_atlas.nii");
        match segment_images(&images, &out, &setup.registry, &setup.config.mock_segmenter, &dir.join("work")) {
            Ok(route) => summary.push(json!({ "session_id": id, "status": "ok", "route": route })),
            Err(e) => {
                ok = false;
                warn!(session = %id, error = %e, "segmentation failed");
                summary.push(json!({ "session_id": id, "status": "failed", "error": e.to_string() }));
            }
        }
    }
    print_json(&json!({ "sessions": summary }))?;
    Ok(ok)
}

pub fn radiomics(args: &ConfigArgs, filter: &SessionFilter) -> CmdResult {
    let setup = setup(args, &[])?;
    let params = RadiomicsParams {
        bin_width: setup.config.radiomics.bin_width,
        ..Default::default()
    };
    let mut ok = true;
    let mut vectors = Vec::new();
    let mut summary = Vec::new();
    for (id, dir) in session_dirs(&setup.config.output_root, filter)? {
        let mask_path = [dir.join("seg_refined.nii"), dir.join("seg_atlas.nii")].into_iter().find(|p| p.is_file());
        let images = normalized_images(&dir);
        let Some(mask_path) = mask_path.filter(|_| !images.is_empty()) else {
            warn!(session = %id, "no mask or normalized images; skipped");
            continue;
        };
        let result = (|| -> anyhow::Result<_> {
            let mask = read_mask(&mask_path)?;
            let mut vols = BTreeMap::new();
            for (c, p) in &images {
                vols.insert(*c, nifti::read(p)?.volume);
            }
            let fv = extract_all(&id, &vols, &mask, &params)?;
            write_json(&dir.join("features.json"), &fv)?;
            write_features_csv(std::fs::File::create(dir.join("features.csv"))?, std::slice::from_ref(&fv))?;
            Ok(fv)
        })();
        match result {
            Ok(fv) => {
                summary.push(json!({ "session_id": id, "status": "ok", "features": fv.len(), "null": fv.n_null() }));
                vectors.push(fv);
            }
            Err(e) => {
                ok = false;
                summary.push(json!({ "session_id": id, "status": "failed", "error": format!("{e:#}") }));
            }
        }
    }
    if !vectors.is_empty() {
        let path = setup.config.output_root.join("features.csv");
        write_features_csv(std::fs::File::create(&path).context("writing features.csv")?, &vectors)
            .map_err(|e| CliError::Runtime(e.into()))?;
    }
    print_json(&json!({ "sessions": summary }))?;
    Ok(ok)
}

pub fn inspect(path: &Path, stage: Option<&str>) -> CmdResult {
    let file = if path.is_dir() { path.join("provenance.json") } else { path.to_path_buf() };
    let prov = SessionProvenance::read(&file).with_context(|| format!("reading {}", file.display()))?;
    match stage {
        Some(name) => {
            let entry = prov.stage(name).ok_or_else(|| anyhow!("no stage {name:?} in {}", file.display()))?;
            print_json(entry)?;
        }
        None => print_json(&prov)?,
    }
    Ok(true)
}

#[derive(Args, Debug, Clone)]
pub struct PhantomArgs {
    /// Directory receiving dicom/, truth/ and config.toml.
    #[arg(long)]
    pub output: PathBuf,
    /// Number of sessions (ids phantom01, phantom02, ...).
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Integer translation (mm) applied by the mock registration.
    #[arg(long, value_delimiter = ',', num_args = 3, default_values_t = [2.0, -3.0, 1.0], allow_hyphen_values = true)]
    pub shift: Vec<f64>,
    /// Omit the scout and diffusion series.
    #[arg(long)]
    pub no_distractors: bool,
}

fn phantom_config(shift: &[f64]) -> String {
    format!(
        r#"input_roots = ["dicom"]
output_root = "out"
workers = 2

[radiomics]
enabled = true
bin_width = 0.5

[[adapters]]
kind = "registration"
builtin = "translation"
params = {{ shift = [{}, {}, {}] }}

[[adapters]]
kind = "bias_correction"
builtin = "identity"

[[adapters]]
kind = "skull_strip"
builtin = "threshold"

[[adapters]]
kind = "segmentation"
builtin = "mock_segmenter"
"#,
        shift[0], shift[1], shift[2]
    )
}

pub fn phantom(args: &PhantomArgs) -> CmdResult {
    if args.shift.len() != 3 || args.shift.iter().any(|v| !v.is_finite()) {
        return Err(CliError::Config(anyhow!("--shift needs three finite values")));
    }
    let spec = PhantomSpec::default();
    std::fs::create_dir_all(args.output.join("truth")).context("creating output")?;
    let mut ids = Vec::new();
    for i in 1..=args.count {
        let id = format!("phantom{i:02}");
        let p = write_phantom_session(&args.output.join("dicom").join(&id), &id, &spec, !args.no_distractors)
            .with_context(|| format!("writing {id}"))?;
        nifti::write_labels(&args.output.join("truth").join(format!("{id}.nii")), &p.truth, Some(MaskScheme::MultiClass))
            .context("writing truth mask")?;
        ids.push(id);
    }
    std::fs::write(args.output.join("config.toml"), phantom_config(&args.shift)).context("writing config.toml")?;
    print_json(&json!({ "sessions": ids, "config": args.output.join("config.toml") }))?;
    Ok(true)
}
