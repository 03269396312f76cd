use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::EvalError;
use crate::stats::{mean, sample_variance};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TTestResult {
    pub t: f64,
    /// Welch-Satterthwaite degrees of freedom.
    pub df: f64,
    pub p_two_sided: f64,
    pub alpha: f64,
    pub significant: bool,
}

/// `P(|T| >= |t|)` for `df` degrees of freedom.
fn two_sided_p(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("df is positive and finite");
    (2.0 * dist.cdf(-t.abs())).min(1.0)
}

/// Unequal-variance two-sample t-test with a two-sided p-value.
pub fn welch_t(x: &[f64], y: &[f64], alpha: f64) -> Result<TTestResult, EvalError> {
    if x.len() < 2 || y.len() < 2 {
        return Err(EvalError::DegenerateSample("each sample needs at least 2 values".into()));
    }
    let (vx, vy) = (sample_variance(x), sample_variance(y));
    if vx == 0.0 || vy == 0.0 || !vx.is_finite() || !vy.is_finite() {
        return Err(EvalError::DegenerateSample("zero or non-finite sample variance".into()));
    }
    let (nx, ny) = (x.len() as f64, y.len() as f64);
    let (sx, sy) = (vx / nx, vy / ny);
    let t = (mean(x) - mean(y)) / (sx + sy).sqrt();
    let df = (sx + sy).powi(2) / (sx * sx / (nx - 1.0) + sy * sy / (ny - 1.0));
    let p = two_sided_p(t, df);
    Ok(TTestResult {
        t,
        df,
        p_two_sided: p,
        alpha,
        significant: p < alpha,
    })
}
