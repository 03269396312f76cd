use serde::{Deserialize, Serialize};

use super::EvalError;
use crate::volume::{merge_mask_classes, MaskScheme, SegMask, Volume3D, LABEL_ET};

/// Dice coefficient of two binary masks (nonzero = foreground). Two empty
/// masks score 1.0.
pub fn dice(a: &Volume3D<u8>, b: &Volume3D<u8>) -> Result<f64, EvalError> {
    if !a.geometry().same_grid(b.geometry()) {
        return Err(EvalError::GridMismatch);
    }
    let (mut na, mut nb, mut both) = (0usize, 0usize, 0usize);
    for (&x, &y) in a.voxels().iter().zip(b.voxels()) {
        let (x, y) = (x != 0, y != 0);
        na += usize::from(x);
        nb += usize::from(y);
        both += usize::from(x && y);
    }
    if na + nb == 0 {
        return Ok(1.0);
    }
    Ok(2.0 * both as f64 / (na + nb) as f64)
}

/// Dice per composite class. TC and ET are `None` unless both masks are
/// multi-class.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassDice {
    pub wt: f64,
    pub tc: Option<f64>,
    pub et: Option<f64>,
}

pub fn dice_by_class(pred: &SegMask, truth: &SegMask) -> Result<ClassDice, EvalError> {
    let p = merge_mask_classes(pred)?;
    let t = merge_mask_classes(truth)?;
    let wt = dice(&p.wt, &t.wt)?;
    if pred.scheme == MaskScheme::MultiClass && truth.scheme == MaskScheme::MultiClass {
        Ok(ClassDice {
            wt,
            tc: Some(dice(&p.tc, &t.tc)?),
            et: Some(dice(&pred.select(LABEL_ET), &truth.select(LABEL_ET))?),
        })
    } else {
        Ok(ClassDice { wt, tc: None, et: None })
    }
}
