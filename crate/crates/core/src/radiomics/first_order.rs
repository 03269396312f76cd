use std::collections::BTreeMap;

use super::discretize::bin_level;
use super::RadiomicsError;
use crate::stats::{mean, percentile_sorted, sorted};
use crate::volume::Volume3D;

pub const FIRST_ORDER_NAMES: [&str; 18] = [
    "Energy",
    "Entropy",
    "Minimum",
    "10Percentile",
    "90Percentile",
    "Maximum",
    "Mean",
    "Median",
    "InterquartileRange",
    "Range",
    "MeanAbsoluteDeviation",
    "RobustMeanAbsoluteDeviation",
    "RootMeanSquared",
    "StandardDeviation",
    "Skewness",
    "Kurtosis",
    "Variance",
    "Uniformity",
];

/// In-mask intensities in grid order.
pub fn masked_values(image: &Volume3D<f64>, mask: &Volume3D<u8>) -> Result<Vec<f64>, RadiomicsError> {
    if !image.geometry().same_grid(mask.geometry()) {
        return Err(RadiomicsError::GridMismatch);
    }
    Ok(image
        .voxels()
        .iter()
        .zip(mask.voxels())
        .filter(|(_, &m)| m != 0)
        .map(|(&v, _)| v)
        .collect())
}

pub fn first_order_features(image: &Volume3D<f64>, mask: &Volume3D<u8>, bin_width: f64) -> Result<Vec<(&'static str, f64)>, RadiomicsError> {
    first_order_from_values(&masked_values(image, mask)?, bin_width)
}

/// First-order statistics of raw intensities. Entropy and uniformity use
/// the fixed-bin-width histogram; all other features use raw values.
pub fn first_order_from_values(values: &[f64], bin_width: f64) -> Result<Vec<(&'static str, f64)>, RadiomicsError> {
    if values.is_empty() {
        return Err(RadiomicsError::EmptyMask);
    }
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(RadiomicsError::InvalidBinWidth(bin_width));
    }
    let n = values.len() as f64;
    let s = sorted(values);
    let min = s[0];
    let max = s[s.len() - 1];
    let mu = mean(values);
    let p10 = percentile_sorted(&s, 10.0);
    let p90 = percentile_sorted(&s, 90.0);
    let p25 = percentile_sorted(&s, 25.0);
    let p75 = percentile_sorted(&s, 75.0);

    let mut m2 = 0.0;
    let mut m3 = 0.0;
    let mut m4 = 0.0;
    let mut mad = 0.0;
    let mut energy = 0.0;
    for &v in values {
        let d = v - mu;
        m2 += d * d;
        m3 += d * d * d;
        m4 += d * d * d * d;
        mad += d.abs();
        energy += v * v;
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    mad /= n;

    // with few distinct values no sample may fall in [p10, p90]; report 0
    let robust: Vec<f64> = values.iter().copied().filter(|&v| v >= p10 && v <= p90).collect();
    let rmad = if robust.is_empty() {
        0.0
    } else {
        let rmu = mean(&robust);
        robust.iter().map(|v| (v - rmu).abs()).sum::<f64>() / robust.len() as f64
    };

    let mut hist: BTreeMap<u32, usize> = BTreeMap::new();
    for &v in values {
        *hist.entry(bin_level(v, min, bin_width)).or_default() += 1;
    }
    let mut entropy = 0.0;
    let mut uniformity = 0.0;
    for &c in hist.values() {
        let p = c as f64 / n;
        entropy -= p * p.log2();
        uniformity += p * p;
    }

    let (skew, kurt) = if m2 > 0.0 { (m3 / m2.powf(1.5), m4 / (m2 * m2)) } else { (0.0, 0.0) };

    let out = [
        energy,
        entropy,
        min,
        p10,
        p90,
        max,
        mu,
        percentile_sorted(&s, 50.0),
        p75 - p25,
        max - min,
        mad,
        rmad,
        (energy / n).sqrt(),
        m2.sqrt(),
        skew,
        kurt,
        m2,
        uniformity,
    ];
    Ok(FIRST_ORDER_NAMES.iter().copied().zip(out).collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn get(f: &[(&str, f64)], name: &str) -> f64 {
        f.iter().find(|(n, _)| *n == name).unwrap().1
    }

    #[test]
    fn empty_robust_range_is_zero() {
        // p10 = 22, p90 = 142: neither value lies inside
        let f = first_order_from_values(&[7.0, 157.0], 25.0).unwrap();
        assert_eq!(get(&f, "RobustMeanAbsoluteDeviation"), 0.0);
    }

    #[test]
    fn constant_roi() {
        let f = first_order_from_values(&[7.0; 9], 25.0).unwrap();
        assert_eq!(get(&f, "Mean"), 7.0);
        assert_eq!(get(&f, "Variance"), 0.0);
        assert_eq!(get(&f, "Entropy"), 0.0);
        assert_eq!(get(&f, "Uniformity"), 1.0);
        assert_eq!(get(&f, "Skewness"), 0.0);
        assert_eq!(get(&f, "Kurtosis"), 0.0);
    }

    #[test]
    fn small_roi() {
        let f = first_order_from_values(&[1.0, 2.0, 3.0, 4.0], 1.0).unwrap();
        assert_eq!(get(&f, "Mean"), 2.5);
        assert_eq!(get(&f, "Median"), 2.5);
        assert_eq!(get(&f, "Range"), 3.0);
        assert_eq!(get(&f, "Energy"), 30.0);
        assert_eq!(get(&f, "Variance"), 1.25);
        assert_eq!(get(&f, "Entropy"), 2.0);
        assert_eq!(get(&f, "Uniformity"), 0.25);
        assert_eq!(get(&f, "MeanAbsoluteDeviation"), 1.0);
        assert_eq!(f.len(), 18);
    }

    #[test]
    fn empty_rejected() {
        assert!(matches!(first_order_from_values(&[], 25.0), Err(RadiomicsError::EmptyMask)));
    }
}
