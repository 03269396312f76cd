use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{classification_report, welch_t, ClassDice, ClassificationReport, ConfusionMatrix, EvalError, TTestResult};
use crate::stats::{mean, sample_variance};

/// Tumor classes reported, in display order.
const CLASSES: [&str; 3] = ["WT", "TC", "ET"];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionDice {
    pub session_id: String,
    pub grade: Option<String>,
    pub dice: ClassDice,
}

impl SessionDice {
    fn get(&self, class: &str) -> Option<f64> {
        match class {
            "WT" => Some(self.dice.wt),
            "TC" => self.dice.tc,
            "ET" => self.dice.et,
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation; 0 for a single value.
    pub sd: f64,
    /// e.g. "0.882 (±0.244)".
    pub formatted: String,
}

impl Aggregate {
    fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let m = mean(values);
        let sd = if values.len() > 1 { sample_variance(values).sqrt() } else { 0.0 };
        Some(Self {
            n: values.len(),
            mean: m,
            sd,
            formatted: format_mean_sd(m, sd),
        })
    }
}

pub fn format_mean_sd(mean: f64, sd: f64) -> String {
    format!("{mean:.3} (±{sd:.3})")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradeTest {
    pub class: String,
    pub group_a: String,
    pub group_b: String,
    pub result: Option<TTestResult>,
    /// Why the test could not be computed.
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassificationSection {
    pub confusion_matrix: ConfusionMatrix,
    pub report: ClassificationReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub sessions: Vec<SessionDice>,
    pub aggregate: BTreeMap<String, Aggregate>,
    pub by_grade: BTreeMap<String, BTreeMap<String, Aggregate>>,
    pub grade_tests: Vec<GradeTest>,
    /// Session ids present on only one side.
    pub unpaired: Vec<String>,
    pub classification: Option<ClassificationSection>,
    pub alpha: f64,
    pub test_sidedness: String,
}

fn aggregate(sessions: &[&SessionDice]) -> BTreeMap<String, Aggregate> {
    CLASSES
        .iter()
        .filter_map(|c| {
            let v: Vec<f64> = sessions.iter().filter_map(|s| s.get(c)).collect();
            Aggregate::of(&v).map(|a| (c.to_string(), a))
        })
        .collect()
}

impl EvalReport {
    /// Aggregates per-session scores, stratifies by grade when grades are
    /// present and runs Welch's test between every pair of grade groups.
    pub fn build(
        mut sessions: Vec<SessionDice>,
        unpaired: Vec<String>,
        classification: Option<ConfusionMatrix>,
        alpha: f64,
    ) -> Result<Self, EvalError> {
        sessions.sort_by(|a, b| a.session_id.cmp(&b.session_id));
        let all: Vec<&SessionDice> = sessions.iter().collect();
        let mut groups: BTreeMap<String, Vec<&SessionDice>> = BTreeMap::new();
        for s in &sessions {
            if let Some(g) = &s.grade {
                groups.entry(g.clone()).or_default().push(s);
            }
        }
        let by_grade = groups.iter().map(|(g, v)| (g.clone(), aggregate(v))).collect();
        let names: Vec<&String> = groups.keys().collect();
        let mut grade_tests = Vec::new();
        for class in CLASSES {
            for i in 0..names.len() {
                for j in i + 1..names.len() {
                    let x: Vec<f64> = groups[names[i]].iter().filter_map(|s| s.get(class)).collect();
                    let y: Vec<f64> = groups[names[j]].iter().filter_map(|s| s.get(class)).collect();
                    let (result, note) = match welch_t(&x, &y, alpha) {
                        Ok(r) => (Some(r), None),
                        Err(e) => (None, Some(e.to_string())),
                    };
                    grade_tests.push(GradeTest {
                        class: class.to_string(),
                        group_a: names[i].clone(),
                        group_b: names[j].clone(),
                        result,
                        note,
                    });
                }
            }
        }
        let classification = match classification {
            Some(cm) => Some(ClassificationSection {
                report: classification_report(&cm)?,
                confusion_matrix: cm,
            }),
            None => None,
        };
        let mut unpaired = unpaired;
        unpaired.sort();
        Ok(Self {
            aggregate: aggregate(&all),
            sessions,
            by_grade,
            grade_tests,
            unpaired,
            classification,
            alpha,
            test_sidedness: "two-sided".into(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn s(id: &str, grade: &str, wt: f64) -> SessionDice {
        SessionDice {
            session_id: id.into(),
            grade: Some(grade.into()),
            dice: ClassDice {
                wt,
                tc: Some(wt / 2.0),
                et: None,
            },
        }
    }

    #[test]
    fn formatting() {
        assert_eq!(format_mean_sd(0.8824, 0.2441), "0.882 (±0.244)");
    }

    #[test]
    fn build_stratifies_and_tests() {
        let sessions = vec![s("b", "2", 0.9), s("a", "2", 0.8), s("c", "4", 0.5), s("d", "4", 0.6)];
        let r = EvalReport::build(sessions, vec!["z".into()], None, 0.05).unwrap();
        assert_eq!(r.sessions[0].session_id, "a");
        assert!((r.aggregate["WT"].mean - 0.7).abs() < 1e-12);
        assert!(!r.aggregate.contains_key("ET"));
        assert_eq!(r.by_grade.len(), 2);
        assert_eq!(r.grade_tests.len(), 3);
        assert!(r.grade_tests[0].result.is_some());
        assert!(r.grade_tests[2].note.is_some());
        assert_eq!(r.unpaired, vec!["z".to_string()]);
    }
}
