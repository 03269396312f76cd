//! Declarative run configuration loaded from one TOML file.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::curation::Ruleset;
use crate::pipeline::{AdapterKind, MockThresholds, BUILTIN_ADAPTERS};

pub const ENV_WORKERS: &str = "NEUROCURATE_WORKERS";
pub const ENV_ADAPTER_TIMEOUT: &str = "NEUROCURATE_ADAPTER_TIMEOUT";

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RadiomicsConfig {
    #[serde(default)]
    pub enabled: bool,
    #[serde(default = "default_bin_width")]
    pub bin_width: f64,
}

impl Default for RadiomicsConfig {
    fn default() -> Self {
        Self {
            enabled: false,
            bin_width: default_bin_width(),
        }
    }
}

/// One registered stage adapter: either a builtin by name or an external
/// command that receives the invocation descriptor path as its last
/// argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdapterEntry {
    pub kind: AdapterKind,
    #[serde(default)]
    pub builtin: Option<String>,
    #[serde(default)]
    pub command: Option<Vec<String>>,
    /// Extra parameters passed through in the invocation descriptor.
    #[serde(default)]
    pub params: serde_json::Map<String, serde_json::Value>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default)]
    pub input_roots: Vec<PathBuf>,
    pub output_root: PathBuf,
    #[serde(default)]
    pub ruleset: Option<PathBuf>,
    #[serde(default)]
    pub atlas: Option<PathBuf>,
    /// Directory of expert-refined masks named `<session>.nii`.
    #[serde(default)]
    pub refined_root: Option<PathBuf>,
    #[serde(default = "default_workers")]
    pub workers: usize,
    #[serde(default = "default_timeout")]
    pub adapter_timeout_secs: u64,
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub mock_segmenter: MockThresholds,
    #[serde(default)]
    pub radiomics: RadiomicsConfig,
    #[serde(default)]
    pub adapters: Vec<AdapterEntry>,
}

fn default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

fn default_timeout() -> u64 {
    3600
}

fn default_alpha() -> f64 {
    0.05
}

fn default_bin_width() -> f64 {
    25.0
}

impl RunConfig {
    /// Minimal configuration writing to `output_root` with no adapters.
    pub fn new(output_root: impl Into<PathBuf>) -> Self {
        Self {
            input_roots: Vec::new(),
            output_root: output_root.into(),
            ruleset: None,
            atlas: None,
            refined_root: None,
            workers: default_workers(),
            adapter_timeout_secs: default_timeout(),
            alpha: default_alpha(),
            mock_segmenter: MockThresholds::default(),
            radiomics: RadiomicsConfig::default(),
            adapters: Vec::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    /// Reads, resolves relative paths against the file's directory and
    /// validates.
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut cfg = Self::from_toml_str(&text)?;
        cfg.resolve_relative(path.parent().unwrap_or(Path::new(".")));
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn resolve_relative(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        self.input_roots.iter_mut().for_each(fix);
        fix(&mut self.output_root);
        for p in [&mut self.ruleset, &mut self.atlas, &mut self.refined_root].into_iter().flatten() {
            fix(p);
        }
    }

    /// Applies the worker-count and adapter-timeout environment overrides.
    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) -> Result<(), ConfigError> {
        if let Some(v) = get(ENV_WORKERS) {
            self.workers = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_WORKERS}={v:?} is not a positive integer")))?;
        }
        if let Some(v) = get(ENV_ADAPTER_TIMEOUT) {
            self.adapter_timeout_secs = v
                .trim()
                .parse()
                .map_err(|_| ConfigError::Invalid(format!("{ENV_ADAPTER_TIMEOUT}={v:?} is not a number of seconds")))?;
        }
        self.validate()
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.workers == 0 {
            return bad("workers must be at least 1".into());
        }
        if self.adapter_timeout_secs == 0 {
            return bad("adapter_timeout_secs must be positive".into());
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return bad(format!("alpha must lie in (0, 1), got {}", self.alpha));
        }
        if !(self.radiomics.bin_width > 0.0 && self.radiomics.bin_width.is_finite()) {
            return bad(format!("radiomics.bin_width must be positive, got {}", self.radiomics.bin_width));
        }
        if let Some(r) = &self.ruleset {
            Ruleset::load(r).map_err(|e| ConfigError::Invalid(format!("ruleset {}: {e}", r.display())))?;
        }
        if let Some(a) = &self.atlas {
            if !a.is_file() {
                return bad(format!("atlas {} does not exist", a.display()));
            }
        }
        let mut seen = Vec::new();
        for a in &self.adapters {
            if seen.contains(&a.kind) {
                return bad(format!("adapter kind {:?} registered twice", a.kind));
            }
            seen.push(a.kind);
            if a.kind == AdapterKind::SegObjectExport {
                return bad("seg_object_export adapters are not supported".into());
            }
            match (&a.builtin, &a.command) {
                (Some(b), None) => {
                    if !BUILTIN_ADAPTERS.iter().any(|(k, n)| *k == a.kind && n == b) {
                        return bad(format!("unknown builtin {b:?} for kind {:?}", a.kind));
                    }
                }
                (None, Some(c)) if !c.is_empty() => {}
                _ => return bad(format!("adapter {:?} needs exactly one of `builtin` or a non-empty `command`", a.kind)),
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const GOOD: &str = r#"
output_root = "out"
workers = 2
[mock_segmenter]
t_et = 2.5
[radiomics]
enabled = true
[[adapters]]
kind = "registration"
builtin = "translation"
params = { shift = [3.0, -2.0, 1.0] }
"#;

    #[test]
    fn parses_and_validates() {
        let c = RunConfig::from_toml_str(GOOD).unwrap();
        c.validate().unwrap();
        assert_eq!(c.workers, 2);
        assert_eq!(c.mock_segmenter.t_et, 2.5);
        assert_eq!(c.mock_segmenter.t_nc, -3.0);
        assert_eq!(c.radiomics.bin_width, 25.0);
        assert_eq!(c.adapter_timeout_secs, 3600);
        assert_eq!(c.adapters[0].params["shift"][1], -2.0);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(RunConfig::from_toml_str("output_root = \"o\"\nbogus = 1"), Err(ConfigError::Parse(_))));
        assert!(RunConfig::from_toml_str("output_root = \"o\"\n[radiomics]\nbins = 3").is_err());
    }

    #[test]
    fn invalid_values() {
        let mut c = RunConfig::new("o");
        c.workers = 0;
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml_str("output_root = \"o\"\n[[adapters]]\nkind = \"segmentation\"\nbuiltin = \"nope\"").unwrap();
        assert!(c.validate().is_err());
        let c = RunConfig::from_toml_str("output_root = \"o\"\n[[adapters]]\nkind = \"segmentation\"").unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn env_overrides() {
        let mut c = RunConfig::new("o");
        c.apply_env(|k| match k {
            ENV_WORKERS => Some("3".into()),
            ENV_ADAPTER_TIMEOUT => Some("10".into()),
            _ => None,
        })
        .unwrap();
        assert_eq!((c.workers, c.adapter_timeout_secs), (3, 10));
        assert!(c.apply_env(|k| (k == ENV_WORKERS).then(|| "x".into())).is_err());
    }
}
