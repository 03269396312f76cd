//! Brute-force reference implementations of the first-order and texture
//! features. Everything here works on a sparse voxel map and follows the
//! textbook definitions directly, sharing no code with the library.

use std::collections::{BTreeMap, HashMap};

pub type Pos = [i64; 3];

/// Discretized ROI as a sparse map from position to gray level.
pub struct Roi {
    pub levels: HashMap<Pos, u32>,
    pub ng: u32,
}

impl Roi {
    /// Fixed-bin-width levels, `floor(v/w) - floor(min/w) + 1`.
    pub fn from_values(vals: &[(Pos, f64)], w: f64) -> Roi {
        let min = vals.iter().map(|v| v.1).fold(f64::INFINITY, f64::min);
        let base = (min / w).floor() as i64;
        let levels: HashMap<Pos, u32> = vals
            .iter()
            .map(|&(p, v)| (p, ((v / w).floor() as i64 - base + 1) as u32))
            .collect();
        let ng = levels.values().copied().max().unwrap_or(0);
        Roi { levels, ng }
    }

    fn positions(&self) -> Vec<Pos> {
        let mut v: Vec<Pos> = self.levels.keys().copied().collect();
        v.sort();
        v
    }
}

fn all_offsets() -> Vec<Pos> {
    let mut out = Vec::new();
    for dx in -1..=1 {
        for dy in -1..=1 {
            for dz in -1..=1 {
                if (dx, dy, dz) != (0, 0, 0) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

/// One representative of each opposite pair: (dz, dy, dx) lexicographically positive.
fn half_offsets() -> Vec<Pos> {
    all_offsets()
        .into_iter()
        .filter(|d| (d[2], d[1], d[0]) > (0, 0, 0))
        .collect()
}

fn add(a: Pos, b: Pos) -> Pos {
    [a[0] + b[0], a[1] + b[1], a[2] + b[2]]
}

fn xlog2(p: f64) -> f64 {
    if p > 0.0 {
        p * p.log2()
    } else {
        0.0
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn new(n: usize) -> Self {
        UnionFind((0..n).collect())
    }

    fn find(&mut self, mut a: usize) -> usize {
        while self.0[a] != a {
            self.0[a] = self.0[self.0[a]];
            a = self.0[a];
        }
        a
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra] = rb;
        }
    }

    fn sizes(&mut self) -> BTreeMap<usize, usize> {
        let mut out = BTreeMap::new();
        for i in 0..self.0.len() {
            *out.entry(self.find(i)).or_insert(0) += 1;
        }
        out
    }
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn jacobi_eigenvalues(mut a: Vec<Vec<f64>>) -> Vec<f64> {
    let n = a.len();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[k][p], a[k][q]);
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[p][k], a[q][k]);
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
            }
        }
    }
    (0..n).map(|i| a[i][i]).collect()
}

// ---------------------------------------------------------------- GLCM

/// Co-occurrence features, or `None` when no voxel has an in-ROI neighbor.
pub fn glcm(roi: &Roi) -> Option<Vec<(&'static str, f64)>> {
    let ng = roi.ng as usize;
    let pos = roi.positions();
    let mut c = vec![vec![0.0f64; ng]; ng];
    for a in &pos {
        for b in &pos {
            let cheb = (0..3).map(|k| (a[k] - b[k]).abs()).max().unwrap();
            if cheb == 1 {
                c[roi.levels[a] as usize - 1][roi.levels[b] as usize - 1] += 1.0;
            }
        }
    }
    let total: f64 = c.iter().flatten().sum();
    if total == 0.0 {
        return None;
    }
    let p: Vec<Vec<f64>> = c.iter().map(|r| r.iter().map(|v| v / total).collect()).collect();
    let g = |i: usize| (i + 1) as f64;
    let px: Vec<f64> = (0..ng).map(|i| p[i].iter().sum()).collect();
    let py: Vec<f64> = (0..ng).map(|j| (0..ng).map(|i| p[i][j]).sum()).collect();
    let mux: f64 = (0..ng).map(|i| g(i) * px[i]).sum();
    let muy: f64 = (0..ng).map(|j| g(j) * py[j]).sum();
    let sdx = (0..ng).map(|i| px[i] * (g(i) - mux).powi(2)).sum::<f64>().sqrt();
    let sdy = (0..ng).map(|j| py[j] * (g(j) - muy).powi(2)).sum::<f64>().sqrt();
    let ngf = ng as f64;

    let cells = || (0..ng).flat_map(|i| (0..ng).map(move |j| (i, j)));
    let sum_over = |f: &dyn Fn(usize, usize) -> f64| cells().map(|(i, j)| f(i, j)).sum::<f64>();

    let mut pdiff = vec![0.0; ng];
    let mut psum = vec![0.0; 2 * ng + 1];
    for (i, j) in cells() {
        pdiff[i.abs_diff(j)] += p[i][j];
        psum[i + j + 2] += p[i][j];
    }
    let da: f64 = pdiff.iter().enumerate().map(|(k, v)| k as f64 * v).sum();
    let sa: f64 = psum.iter().enumerate().map(|(k, v)| k as f64 * v).sum();

    let hx = -px.iter().map(|&v| xlog2(v)).sum::<f64>();
    let hy = -py.iter().map(|&v| xlog2(v)).sum::<f64>();
    let hxy = -sum_over(&|i, j| xlog2(p[i][j]));
    let hxy1 = -sum_over(&|i, j| {
        let q = px[i] * py[j];
        if p[i][j] > 0.0 {
            p[i][j] * q.log2()
        } else {
            0.0
        }
    });
    let hxy2 = -sum_over(&|i, j| xlog2(px[i] * py[j]));

    let correlation = if sdx * sdy == 0.0 {
        1.0
    } else {
        sum_over(&|i, j| (g(i) - mux) * (g(j) - muy) * p[i][j]) / (sdx * sdy)
    };
    let imc1 = if hx.max(hy) == 0.0 { 0.0 } else { (hxy - hxy1) / hx.max(hy) };
    let imc2 = if hxy2 <= hxy {
        0.0
    } else {
        (1.0 - (-2.0 * (hxy2 - hxy)).exp()).sqrt()
    };

    let present: Vec<usize> = (0..ng).filter(|&i| px[i] > 0.0).collect();
    let mcc = if present.len() < 2 {
        1.0
    } else {
        let s: Vec<Vec<f64>> = present
            .iter()
            .map(|&a| {
                present
                    .iter()
                    .map(|&b| {
                        present
                            .iter()
                            .map(|&k| p[a][k] * p[b][k] / ((px[a] * px[b]).sqrt() * py[k]))
                            .sum()
                    })
                    .collect()
            })
            .collect();
        let mut ev = jacobi_eigenvalues(s);
        ev.sort_by(|a, b| b.partial_cmp(a).unwrap());
        ev[1].max(0.0).sqrt()
    };

    Some(vec![
        ("Autocorrelation", sum_over(&|i, j| g(i) * g(j) * p[i][j])),
        ("JointAverage", mux),
        ("ClusterProminence", sum_over(&|i, j| (g(i) + g(j) - mux - muy).powi(4) * p[i][j])),
        ("ClusterShade", sum_over(&|i, j| (g(i) + g(j) - mux - muy).powi(3) * p[i][j])),
        ("ClusterTendency", sum_over(&|i, j| (g(i) + g(j) - mux - muy).powi(2) * p[i][j])),
        ("Contrast", sum_over(&|i, j| (g(i) - g(j)).powi(2) * p[i][j])),
        ("Correlation", correlation),
        ("DifferenceAverage", da),
        ("DifferenceEntropy", -pdiff.iter().map(|&v| xlog2(v)).sum::<f64>()),
        ("DifferenceVariance", pdiff.iter().enumerate().map(|(k, v)| (k as f64 - da).powi(2) * v).sum()),
        ("JointEnergy", sum_over(&|i, j| p[i][j] * p[i][j])),
        ("JointEntropy", hxy),
        ("Imc1", imc1),
        ("Imc2", imc2),
        ("Idm", sum_over(&|i, j| p[i][j] / (1.0 + (g(i) - g(j)).powi(2)))),
        ("MCC", mcc),
        ("Idmn", sum_over(&|i, j| p[i][j] / (1.0 + (g(i) - g(j)).powi(2) / (ngf * ngf)))),
        ("Id", sum_over(&|i, j| p[i][j] / (1.0 + (g(i) - g(j)).abs()))),
        ("Idn", sum_over(&|i, j| p[i][j] / (1.0 + (g(i) - g(j)).abs() / ngf))),
        (
            "InverseVariance",
            sum_over(&|i, j| if i == j { 0.0 } else { p[i][j] / (g(i) - g(j)).powi(2) }),
        ),
        ("MaximumProbability", p.iter().flatten().fold(0.0f64, |m, &v| m.max(v))),
        ("SumAverage", sa),
        ("SumEntropy", -psum.iter().map(|&v| xlog2(v)).sum::<f64>()),
        ("SumSquares", sum_over(&|i, j| (g(i) - mux).powi(2) * p[i][j])),
    ])
}

// ------------------------------------------- run / zone / dependence

/// Emphasis and nonuniformity sums over a sparse (level, length) table.
/// Returns (name suffix key, value) in a fixed key order.
struct SizeStats {
    small: f64,
    large: f64,
    gln: f64,
    glnn: f64,
    lnu: f64,
    lnun: f64,
    glv: f64,
    lv: f64,
    entropy: f64,
    low_gl: f64,
    high_gl: f64,
    small_low: f64,
    small_high: f64,
    large_low: f64,
    large_high: f64,
    n: f64,
}

fn size_stats(table: &BTreeMap<(u32, usize), u64>) -> SizeStats {
    let n: f64 = table.values().sum::<u64>() as f64;
    let mut by_level: BTreeMap<u32, f64> = BTreeMap::new();
    let mut by_len: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(i, j), &c) in table {
        *by_level.entry(i).or_default() += c as f64;
        *by_len.entry(j).or_default() += c as f64;
    }
    let e = |f: &dyn Fn(f64, f64) -> f64| -> f64 {
        table
            .iter()
            .map(|(&(i, j), &c)| c as f64 / n * f(i as f64, j as f64))
            .sum()
    };
    let mu_i = e(&|i, _| i);
    let mu_j = e(&|_, j| j);
    SizeStats {
        small: e(&|_, j| 1.0 / (j * j)),
        large: e(&|_, j| j * j),
        gln: by_level.values().map(|v| v * v).sum::<f64>() / n,
        glnn: by_level.values().map(|v| v * v).sum::<f64>() / (n * n),
        lnu: by_len.values().map(|v| v * v).sum::<f64>() / n,
        lnun: by_len.values().map(|v| v * v).sum::<f64>() / (n * n),
        glv: e(&|i, _| (i - mu_i).powi(2)),
        lv: e(&|_, j| (j - mu_j).powi(2)),
        entropy: -table.values().map(|&c| xlog2(c as f64 / n)).sum::<f64>(),
        low_gl: e(&|i, _| 1.0 / (i * i)),
        high_gl: e(&|i, _| i * i),
        small_low: e(&|i, j| 1.0 / (i * i * j * j)),
        small_high: e(&|i, j| i * i / (j * j)),
        large_low: e(&|i, j| j * j / (i * i)),
        large_high: e(&|i, j| i * i * j * j),
        n,
    }
}

fn run_like(s: &SizeStats, names: [&'static str; 16], percentage: f64) -> Vec<(&'static str, f64)> {
    let vals = [
        s.small,
        s.large,
        s.gln,
        s.glnn,
        s.lnu,
        s.lnun,
        percentage,
        s.glv,
        s.lv,
        s.entropy,
        s.low_gl,
        s.high_gl,
        s.small_low,
        s.small_high,
        s.large_low,
        s.large_high,
    ];
    names.into_iter().zip(vals).collect()
}

pub fn glrlm(roi: &Roi) -> Option<Vec<(&'static str, f64)>> {
    let pos = roi.positions();
    let index: HashMap<Pos, usize> = pos.iter().enumerate().map(|(k, p)| (*p, k)).collect();
    let dirs = half_offsets();
    let mut table: BTreeMap<(u32, usize), u64> = BTreeMap::new();
    for d in &dirs {
        let mut uf = UnionFind::new(pos.len());
        for (k, p) in pos.iter().enumerate() {
            let q = add(*p, *d);
            if let Some(&m) = index.get(&q) {
                if roi.levels[&q] == roi.levels[p] {
                    uf.union(k, m);
                }
            }
        }
        for (root, size) in uf.sizes() {
            *table.entry((roi.levels[&pos[root]], size)).or_default() += 1;
        }
    }
    let s = size_stats(&table);
    let pct = s.n / (pos.len() as f64 * dirs.len() as f64);
    Some(run_like(
        &s,
        [
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
        ],
        pct,
    ))
}

pub fn glszm(roi: &Roi) -> Option<Vec<(&'static str, f64)>> {
    let pos = roi.positions();
    let index: HashMap<Pos, usize> = pos.iter().enumerate().map(|(k, p)| (*p, k)).collect();
    let mut uf = UnionFind::new(pos.len());
    for (k, p) in pos.iter().enumerate() {
        for d in all_offsets() {
            let q = add(*p, d);
            if let Some(&m) = index.get(&q) {
                if roi.levels[&q] == roi.levels[p] {
                    uf.union(k, m);
                }
            }
        }
    }
    let mut table: BTreeMap<(u32, usize), u64> = BTreeMap::new();
    for (root, size) in uf.sizes() {
        *table.entry((roi.levels[&pos[root]], size)).or_default() += 1;
    }
    let s = size_stats(&table);
    let pct = s.n / pos.len() as f64;
    Some(run_like(
        &s,
        [
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
        ],
        pct,
    ))
}

pub fn gldm(roi: &Roi) -> Option<Vec<(&'static str, f64)>> {
    let mut table: BTreeMap<(u32, usize), u64> = BTreeMap::new();
    for (p, &l) in &roi.levels {
        let same = all_offsets()
            .into_iter()
            .filter(|d| roi.levels.get(&add(*p, *d)) == Some(&l))
            .count();
        *table.entry((l, same + 1)).or_default() += 1;
    }
    let s = size_stats(&table);
    Some(vec![
        ("SmallDependenceEmphasis", s.small),
        ("LargeDependenceEmphasis", s.large),
        ("GrayLevelNonUniformity", s.gln),
        ("DependenceNonUniformity", s.lnu),
        ("DependenceNonUniformityNormalized", s.lnun),
        ("GrayLevelVariance", s.glv),
        ("DependenceVariance", s.lv),
        ("DependenceEntropy", s.entropy),
        ("LowGrayLevelEmphasis", s.low_gl),
        ("HighGrayLevelEmphasis", s.high_gl),
        ("SmallDependenceLowGrayLevelEmphasis", s.small_low),
        ("SmallDependenceHighGrayLevelEmphasis", s.small_high),
        ("LargeDependenceLowGrayLevelEmphasis", s.large_low),
        ("LargeDependenceHighGrayLevelEmphasis", s.large_high),
    ])
}

// ---------------------------------------------------------------- NGTDM

pub fn ngtdm(roi: &Roi) -> Option<Vec<(&'static str, f64)>> {
    let mut n: BTreeMap<u32, f64> = BTreeMap::new();
    let mut s: BTreeMap<u32, f64> = BTreeMap::new();
    for (p, &l) in &roi.levels {
        let neigh: Vec<f64> = all_offsets()
            .into_iter()
            .filter_map(|d| roi.levels.get(&add(*p, d)).map(|&v| v as f64))
            .collect();
        if neigh.is_empty() {
            continue;
        }
        let avg = neigh.iter().sum::<f64>() / neigh.len() as f64;
        *n.entry(l).or_default() += 1.0;
        *s.entry(l).or_default() += (l as f64 - avg).abs();
    }
    if n.is_empty() {
        return None;
    }
    let nvp: f64 = n.values().sum();
    let lv: Vec<u32> = n.keys().copied().collect();
    let p = |i: u32| n[&i] / nvp;
    let si = |i: u32| s[&i];
    let ngp = lv.len() as f64;
    let sum_ps: f64 = lv.iter().map(|&i| p(i) * si(i)).sum();
    let sum_s: f64 = lv.iter().map(|&i| si(i)).sum();
    let pairs = || lv.iter().flat_map(|&i| lv.iter().map(move |&j| (i, j)));

    let coarseness = if sum_ps == 0.0 { 1e6 } else { 1.0 / sum_ps };
    let contrast = if ngp < 2.0 {
        0.0
    } else {
        pairs().map(|(i, j)| p(i) * p(j) * (i as f64 - j as f64).powi(2)).sum::<f64>() / (ngp * (ngp - 1.0)) * sum_s / nvp
    };
    let busy_den: f64 = pairs().map(|(i, j)| (i as f64 * p(i) - j as f64 * p(j)).abs()).sum();
    let busyness = if busy_den == 0.0 { 0.0 } else { sum_ps / busy_den };
    let complexity = pairs()
        .map(|(i, j)| (i as f64 - j as f64).abs() * (p(i) * si(i) + p(j) * si(j)) / (p(i) + p(j)))
        .sum::<f64>()
        / nvp;
    let strength = if sum_s == 0.0 {
        0.0
    } else {
        pairs().map(|(i, j)| (p(i) + p(j)) * (i as f64 - j as f64).powi(2)).sum::<f64>() / sum_s
    };
    Some(vec![
        ("Coarseness", coarseness),
        ("Contrast", contrast),
        ("Busyness", busyness),
        ("Complexity", complexity),
        ("Strength", strength),
    ])
}

// ---------------------------------------------------------- first order

/// numpy `percentile` with the default linear method.
pub fn np_percentile(values: &[f64], q: f64) -> f64 {
    let mut s = values.to_vec();
    s.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (s.len() - 1) as f64 * q / 100.0;
    let lo = h.floor();
    let i = lo as usize;
    if i + 1 >= s.len() {
        return s[s.len() - 1];
    }
    s[i] + (h - lo) * (s[i + 1] - s[i])
}

pub fn first_order(values: &[f64], w: f64) -> Vec<(&'static str, f64)> {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let central = |k: i32| values.iter().map(|v| (v - mean).powi(k)).sum::<f64>() / n;
    let var = central(2);
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let p10 = np_percentile(values, 10.0);
    let p90 = np_percentile(values, 90.0);
    let robust: Vec<f64> = values.iter().copied().filter(|v| (p10..=p90).contains(v)).collect();
    let rmean = robust.iter().sum::<f64>() / robust.len() as f64;
    let mut bins: HashMap<i64, f64> = HashMap::new();
    for v in values {
        *bins.entry((v / w).floor() as i64).or_default() += 1.0;
    }
    let energy: f64 = values.iter().map(|v| v * v).sum();
    vec![
        ("Energy", energy),
        ("Entropy", -bins.values().map(|c| xlog2(c / n)).sum::<f64>()),
        ("Minimum", min),
        ("10Percentile", p10),
        ("90Percentile", p90),
        ("Maximum", max),
        ("Mean", mean),
        ("Median", np_percentile(values, 50.0)),
        ("InterquartileRange", np_percentile(values, 75.0) - np_percentile(values, 25.0)),
        ("Range", max - min),
        ("MeanAbsoluteDeviation", values.iter().map(|v| (v - mean).abs()).sum::<f64>() / n),
        (
            "RobustMeanAbsoluteDeviation",
            if robust.is_empty() {
                0.0
            } else {
                robust.iter().map(|v| (v - rmean).abs()).sum::<f64>() / robust.len() as f64
            },
        ),
        ("RootMeanSquared", (energy / n).sqrt()),
        ("StandardDeviation", var.sqrt()),
        ("Skewness", if var == 0.0 { 0.0 } else { central(3) / var.powf(1.5) }),
        ("Kurtosis", if var == 0.0 { 0.0 } else { central(4) / (var * var) }),
        ("Variance", var),
        ("Uniformity", bins.values().map(|c| (c / n).powi(2)).sum()),
    ]
}
