use std::path::Path;

use serde::{Deserialize, Serialize};

use super::CurationError;

/// Keyword and threshold rules driving both cascade stages.
///
/// Loaded from TOML or JSON; every field is optional and falls back to the
/// built-in default list. Unknown keys are rejected.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ruleset {
    /// A description must contain one of these to be segmentable.
    pub allow_tokens: Vec<String>,
    /// Any of these makes a series non-segmentable.
    pub deny_tokens: Vec<String>,
    /// Post-contrast markers (stage 2).
    pub contrast_markers: Vec<String>,
    pub flair_tokens: Vec<String>,
    pub t2_tokens: Vec<String>,
    pub t1_tokens: Vec<String>,
    /// Series with fewer instances are non-segmentable.
    pub min_instances: usize,
}

fn strings(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

impl Default for Ruleset {
    fn default() -> Self {
        Self {
            allow_tokens: strings(&[
                "t1", "t1w", "t1wi", "t2", "t2w", "t2wi", "flair", "t2flair", "mprage", "spgr", "bravo", "gd",
                "post", "+c", "c+", "contrast", "gad",
            ]),
            deny_tokens: strings(&[
                "scout", "localizer", "localiser", "loc", "survey", "dwi", "adc", "trace", "diffusion", "dti",
                "tensor", "swi", "perfusion", "perf", "dsc", "dce", "asl", "mra", "tof", "angio", "bold", "fmri",
                "spectroscopy", "mrs", "svs", "csi", "calibration", "cal", "mip", "mpr", "reformat", "screensave",
            ]),
            contrast_markers: strings(&["post", "gd", "gad", "+c", "c+", "contrast", "postcontrast"]),
            flair_tokens: strings(&["flair", "t2flair"]),
            t2_tokens: strings(&["t2", "t2w", "t2wi"]),
            t1_tokens: strings(&["t1", "t1w", "t1wi", "mprage", "spgr", "bravo"]),
            min_instances: 10,
        }
    }
}

impl Ruleset {
    pub fn load(path: &Path) -> Result<Self, CurationError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CurationError::Ruleset(format!("{}: {e}", path.display())))?;
        let rs: Ruleset = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CurationError::Ruleset(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CurationError::Ruleset(format!("{}: {e}", path.display())))?
        };
        Ok(rs.normalized())
    }

    fn normalized(mut self) -> Self {
        for list in [
            &mut self.allow_tokens,
            &mut self.deny_tokens,
            &mut self.contrast_markers,
            &mut self.flair_tokens,
            &mut self.t2_tokens,
            &mut self.t1_tokens,
        ] {
            for t in list.iter_mut() {
                *t = t.to_lowercase();
            }
        }
        self
    }
}

/// Lowercases and splits a series description into tokens. Tokens that
/// contain `+` are also split at each `+`, keeping it attached to the
/// following piece, so "T1+C" yields `t1+c`, `t1` and `+c`.
pub fn tokenize(description: &str) -> Vec<String> {
    let lower = description.to_lowercase();
    let mut out = Vec::new();
    for tok in lower.split(|c: char| !(c.is_alphanumeric() || c == '+')) {
        if tok.is_empty() {
            continue;
        }
        out.push(tok.to_string());
        if tok.contains('+') {
            let mut piece = String::new();
            for c in tok.chars() {
                if c == '+' && !piece.is_empty() {
                    out.push(std::mem::take(&mut piece));
                }
                piece.push(c);
            }
            if !piece.is_empty() && piece != tok {
                out.push(piece);
            }
        }
    }
    out
}

pub(crate) fn any_token(tokens: &[String], list: &[String]) -> bool {
    tokens.iter().any(|t| list.iter().any(|l| l == t))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tokenizer() {
        assert_eq!(tokenize("AX T1 POST"), vec!["ax", "t1", "post"]);
        assert_eq!(tokenize("T1+C"), vec!["t1+c", "t1", "+c"]);
        assert_eq!(tokenize("sag_T2-FLAIR (3D)"), vec!["sag", "t2", "flair", "3d"]);
        assert_eq!(tokenize("T1 C+"), vec!["t1", "c+", "c", "+"]);
        assert!(tokenize("  ").is_empty());
    }

    #[test]
    fn load_partial_toml_and_reject_unknown() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("rules.toml");
        std::fs::write(&p, "min_instances = 3\ndeny_tokens = [\"SCOUT\"]\n").unwrap();
        let rs = Ruleset::load(&p).unwrap();
        assert_eq!(rs.min_instances, 3);
        assert_eq!(rs.deny_tokens, vec!["scout"]);
        assert_eq!(rs.t1_tokens, Ruleset::default().t1_tokens);
        std::fs::write(&p, "min_instance = 3\n").unwrap();
        assert!(Ruleset::load(&p).is_err());
        let pj = dir.path().join("rules.json");
        std::fs::write(&pj, r#"{"min_instances": 5}"#).unwrap();
        assert_eq!(Ruleset::load(&pj).unwrap().min_instances, 5);
    }
}
