//! Dice, confusion-matrix metrics, Welch's t-test and the evaluation
//! report.

mod classification;
mod dice;
mod report;
mod ttest;

pub use classification::{classification_report, ClassMetrics, ClassificationReport, ConfusionMatrix};
pub use dice::{dice, dice_by_class, ClassDice};
pub use report::{format_mean_sd, Aggregate, ClassificationSection, EvalReport, GradeTest, SessionDice};
pub use ttest::{welch_t, TTestResult};

use thiserror::Error;

use crate::volume::VolumeError;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("masks are on different grids")]
    GridMismatch,
    #[error("confusion matrix is empty")]
    EmptyMatrix,
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),
    #[error(transparent)]
    Volume(#[from] VolumeError),
}
