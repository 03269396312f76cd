use nalgebra::{DMatrix, SymmetricEigen};

use super::super::RadiomicsError;
use super::matrix::{CountMatrix, TextureMatrix};

pub const GLCM_NAMES: [&str; 24] = [
    "Autocorrelation",
    "JointAverage",
    "ClusterProminence",
    "ClusterShade",
    "ClusterTendency",
    "Contrast",
    "Correlation",
    "DifferenceAverage",
    "DifferenceEntropy",
    "DifferenceVariance",
    "JointEnergy",
    "JointEntropy",
    "Imc1",
    "Imc2",
    "Idm",
    "MCC",
    "Idmn",
    "Id",
    "Idn",
    "InverseVariance",
    "MaximumProbability",
    "SumAverage",
    "SumEntropy",
    "SumSquares",
];

pub const GLRLM_NAMES: [&str; 16] = [
    "ShortRunEmphasis",
    "LongRunEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "RunLengthNonUniformity",
    "RunLengthNonUniformityNormalized",
    "RunPercentage",
    "GrayLevelVariance",
    "RunVariance",
    "RunEntropy",
    "LowGrayLevelRunEmphasis",
    "HighGrayLevelRunEmphasis",
    "ShortRunLowGrayLevelEmphasis",
    "ShortRunHighGrayLevelEmphasis",
    "LongRunLowGrayLevelEmphasis",
    "LongRunHighGrayLevelEmphasis",
];

pub const GLSZM_NAMES: [&str; 16] = [
    "SmallAreaEmphasis",
    "LargeAreaEmphasis",
    "GrayLevelNonUniformity",
    "GrayLevelNonUniformityNormalized",
    "SizeZoneNonUniformity",
    "SizeZoneNonUniformityNormalized",
    "ZonePercentage",
    "GrayLevelVariance",
    "ZoneVariance",
    "ZoneEntropy",
    "LowGrayLevelZoneEmphasis",
    "HighGrayLevelZoneEmphasis",
    "SmallAreaLowGrayLevelEmphasis",
    "SmallAreaHighGrayLevelEmphasis",
    "LargeAreaLowGrayLevelEmphasis",
    "LargeAreaHighGrayLevelEmphasis",
];

pub const GLDM_NAMES: [&str; 14] = [
    "SmallDependenceEmphasis",
    "LargeDependenceEmphasis",
    "GrayLevelNonUniformity",
    "DependenceNonUniformity",
    "DependenceNonUniformityNormalized",
    "GrayLevelVariance",
    "DependenceVariance",
    "DependenceEntropy",
    "LowGrayLevelEmphasis",
    "HighGrayLevelEmphasis",
    "SmallDependenceLowGrayLevelEmphasis",
    "SmallDependenceHighGrayLevelEmphasis",
    "LargeDependenceLowGrayLevelEmphasis",
    "LargeDependenceHighGrayLevelEmphasis",
];

pub const NGTDM_NAMES: [&str; 5] = ["Coarseness", "Contrast", "Busyness", "Complexity", "Strength"];

/// Value assigned to coarseness when the weighted difference sum is zero.
pub const COARSENESS_CAP: f64 = 1e6;

fn plog2(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

/// Probability matrix `P / ΣP`.
fn normalized(m: &CountMatrix) -> Vec<f64> {
    let total = m.total() as f64;
    m.data.iter().map(|&c| c as f64 / total).collect()
}

pub fn texture_features(matrix: &TextureMatrix) -> Result<Vec<(&'static str, f64)>, RadiomicsError> {
    if matrix.is_empty() {
        return Err(RadiomicsError::DegenerateMatrix(matrix.family()));
    }
    Ok(match matrix {
        TextureMatrix::Glcm(m) => GLCM_NAMES.iter().copied().zip(glcm_features(m)).collect(),
        TextureMatrix::Glrlm {
            counts,
            n_voxels,
            n_directions,
        } => {
            let pct = counts.total() as f64 / (*n_voxels as f64 * *n_directions as f64);
            GLRLM_NAMES.iter().copied().zip(size_features(counts, pct)).collect()
        }
        TextureMatrix::Glszm { counts, n_voxels } => {
            let pct = counts.total() as f64 / *n_voxels as f64;
            GLSZM_NAMES.iter().copied().zip(size_features(counts, pct)).collect()
        }
        TextureMatrix::Gldm { counts, .. } => {
            let f = size_features(counts, 1.0);
            // run/zone sums minus normalized gray-level nonuniformity (3)
            // and the percentage (6)
            let pick = [0, 1, 2, 4, 5, 7, 8, 9, 10, 11, 12, 13, 14, 15];
            GLDM_NAMES.iter().copied().zip(pick.iter().map(|&k| f[k])).collect()
        }
        TextureMatrix::Ngtdm { counts, sums } => NGTDM_NAMES.iter().copied().zip(ngtdm_features(counts, sums)).collect(),
    })
}

fn glcm_features(m: &CountMatrix) -> [f64; 24] {
    let ng = m.rows;
    let p = normalized(m);
    let at = |i: usize, j: usize| p[i * ng + j];
    let lv = |i: usize| (i + 1) as f64;

    let mut px = vec![0.0; ng];
    let mut py = vec![0.0; ng];
    for i in 0..ng {
        for j in 0..ng {
            px[i] += at(i, j);
            py[j] += at(i, j);
        }
    }
    let mux: f64 = (0..ng).map(|i| lv(i) * px[i]).sum();
    let muy: f64 = (0..ng).map(|j| lv(j) * py[j]).sum();
    let sx = (0..ng).map(|i| (lv(i) - mux).powi(2) * px[i]).sum::<f64>().sqrt();
    let sy = (0..ng).map(|j| (lv(j) - muy).powi(2) * py[j]).sum::<f64>().sqrt();

    let mut p_sum = vec![0.0; 2 * ng + 1];
    let mut p_diff = vec![0.0; ng];
    let mut f = [0.0f64; 24];
    let mut autocorr = 0.0;
    let mut prom = 0.0;
    let mut shade = 0.0;
    let mut tend = 0.0;
    let mut contrast = 0.0;
    let mut energy = 0.0;
    let mut hxy = 0.0;
    let mut hxy1 = 0.0;
    let mut hxy2 = 0.0;
    let mut idm = 0.0;
    let mut idmn = 0.0;
    let mut id = 0.0;
    let mut idn = 0.0;
    let mut inv_var = 0.0;
    let mut max_p = 0.0f64;
    let mut sum_sq = 0.0;
    let ngf = ng as f64;
    for i in 0..ng {
        for j in 0..ng {
            let v = at(i, j);
            let (a, b) = (lv(i), lv(j));
            let k = (a - b).abs();
            p_sum[i + j + 2] += v;
            p_diff[i.abs_diff(j)] += v;
            autocorr += v * a * b;
            let c = a + b - mux - muy;
            prom += c.powi(4) * v;
            shade += c.powi(3) * v;
            tend += c * c * v;
            contrast += k * k * v;
            energy += v * v;
            hxy -= plog2(v);
            let q = px[i] * py[j];
            if q > 0.0 {
                hxy1 -= v * q.log2();
            }
            hxy2 -= plog2(q);
            idm += v / (1.0 + k * k);
            idmn += v / (1.0 + k * k / (ngf * ngf));
            id += v / (1.0 + k);
            idn += v / (1.0 + k / ngf);
            if i != j {
                inv_var += v / (k * k);
            }
            max_p = max_p.max(v);
            sum_sq += (a - mux).powi(2) * v;
        }
    }
    let hx: f64 = -px.iter().map(|&v| plog2(v)).sum::<f64>();
    let hy: f64 = -py.iter().map(|&v| plog2(v)).sum::<f64>();
    let diff_avg: f64 = p_diff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let diff_ent: f64 = -p_diff.iter().map(|&v| plog2(v)).sum::<f64>();
    let diff_var: f64 = p_diff.iter().enumerate().map(|(k, v)| (k as f64 - diff_avg).powi(2) * v).sum();
    let sum_avg: f64 = p_sum.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let sum_ent: f64 = -p_sum.iter().map(|&v| plog2(v)).sum::<f64>();
    let correlation = if sx * sy > 0.0 { (autocorr - mux * muy) / (sx * sy) } else { 1.0 };
    let hmax = hx.max(hy);
    let imc1 = if hmax > 0.0 { (hxy - hxy1) / hmax } else { 0.0 };
    let imc2 = if hxy2 > hxy { (1.0 - (-2.0 * (hxy2 - hxy)).exp()).sqrt() } else { 0.0 };

    f[0] = autocorr;
    f[1] = mux;
    f[2] = prom;
    f[3] = shade;
    f[4] = tend;
    f[5] = contrast;
    f[6] = correlation;
    f[7] = diff_avg;
    f[8] = diff_ent;
    f[9] = diff_var;
    f[10] = energy;
    f[11] = hxy;
    f[12] = imc1;
    f[13] = imc2;
    f[14] = idm;
    f[15] = mcc(&p, &px, &py, ng);
    f[16] = idmn;
    f[17] = id;
    f[18] = idn;
    f[19] = inv_var;
    f[20] = max_p;
    f[21] = sum_avg;
    f[22] = sum_ent;
    f[23] = sum_sq;
    f
}

/// Square root of the second-largest eigenvalue of
/// `Q(i, j) = Σ_k p(i,k) p(j,k) / (px(i) py(k))`, via the similar
/// symmetric matrix `B Bᵀ` with `B(i,k) = p(i,k) / √(px(i) py(k))` over
/// the levels present. A single present level gives 1.
fn mcc(p: &[f64], px: &[f64], py: &[f64], ng: usize) -> f64 {
    let rows: Vec<usize> = (0..ng).filter(|&i| px[i] > 0.0).collect();
    let cols: Vec<usize> = (0..ng).filter(|&k| py[k] > 0.0).collect();
    if rows.len() < 2 {
        return 1.0;
    }
    let b = DMatrix::from_fn(rows.len(), cols.len(), |r, c| {
        let (i, k) = (rows[r], cols[c]);
        p[i * ng + k] / (px[i] * py[k]).sqrt()
    });
    let mut ev: Vec<f64> = SymmetricEigen::new(&b * b.transpose()).eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev[1].max(0.0).sqrt()
}

/// Shared sums for run-length, size-zone and dependence matrices, where
/// rows are gray levels and columns are lengths (both 1-based). Output
/// follows the run-length name order with `percentage` at index 6.
fn size_features(m: &CountMatrix, percentage: f64) -> [f64; 16] {
    let total = m.total() as f64;
    let p = normalized(m);
    let mut pg = vec![0.0; m.rows];
    let mut pl = vec![0.0; m.cols];
    for i in 0..m.rows {
        for j in 0..m.cols {
            pg[i] += m.get(i, j) as f64;
            pl[j] += m.get(i, j) as f64;
        }
    }
    let mut mu_g = 0.0;
    let mut mu_l = 0.0;
    let mut sums = [0.0f64; 8];
    let mut entropy = 0.0;
    for i in 0..m.rows {
        for j in 0..m.cols {
            let v = p[i * m.cols + j];
            if v == 0.0 {
                continue;
            }
            let (a, l) = ((i + 1) as f64, (j + 1) as f64);
            mu_g += a * v;
            mu_l += l * v;
            entropy -= plog2(v);
            sums[0] += v / (l * l);
            sums[1] += v * l * l;
            sums[2] += v / (a * a);
            sums[3] += v * a * a;
            sums[4] += v / (a * a * l * l);
            sums[5] += v * a * a / (l * l);
            sums[6] += v * l * l / (a * a);
            sums[7] += v * a * a * l * l;
        }
    }
    let mut var_g = 0.0;
    let mut var_l = 0.0;
    for i in 0..m.rows {
        for j in 0..m.cols {
            let v = p[i * m.cols + j];
            var_g += v * ((i + 1) as f64 - mu_g).powi(2);
            var_l += v * ((j + 1) as f64 - mu_l).powi(2);
        }
    }
    let gln: f64 = pg.iter().map(|v| v * v).sum::<f64>();
    let lnu: f64 = pl.iter().map(|v| v * v).sum::<f64>();
    [
        sums[0],
        sums[1],
        gln / total,
        gln / (total * total),
        lnu / total,
        lnu / (total * total),
        percentage,
        var_g,
        var_l,
        entropy,
        sums[2],
        sums[3],
        sums[4],
        sums[5],
        sums[6],
        sums[7],
    ]
}

fn ngtdm_features(counts: &[u64], sums: &[f64]) -> [f64; 5] {
    let nvp: f64 = counts.iter().sum::<u64>() as f64;
    let levels: Vec<usize> = (0..counts.len()).filter(|&i| counts[i] > 0).collect();
    let p = |i: usize| counts[i] as f64 / nvp;
    let lv = |i: usize| (i + 1) as f64;
    let ngp = levels.len() as f64;
    let ps: f64 = levels.iter().map(|&i| p(i) * sums[i]).sum();
    let s_total: f64 = levels.iter().map(|&i| sums[i]).sum();

    let coarseness = if ps > 0.0 { 1.0 / ps } else { COARSENESS_CAP };
    let mut pair_contrast = 0.0;
    let mut busy_den = 0.0;
    let mut complexity = 0.0;
    let mut strength_num = 0.0;
    for &i in &levels {
        for &j in &levels {
            let d = lv(i) - lv(j);
            pair_contrast += p(i) * p(j) * d * d;
            busy_den += (lv(i) * p(i) - lv(j) * p(j)).abs();
            complexity += d.abs() * (p(i) * sums[i] + p(j) * sums[j]) / (p(i) + p(j));
            strength_num += (p(i) + p(j)) * d * d;
        }
    }
    let contrast = if ngp > 1.0 {
        pair_contrast / (ngp * (ngp - 1.0)) * s_total / nvp
    } else {
        0.0
    };
    let busyness = if busy_den > 0.0 { ps / busy_den } else { 0.0 };
    let strength = if s_total > 0.0 { strength_num / s_total } else { 0.0 };
    [coarseness, contrast, busyness, complexity / nvp, strength]
}
