use std::collections::VecDeque;

use super::super::DiscretizedRoi;
use super::TextureFamily;

/// Dense `rows × cols` count matrix, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CountMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<u64>,
}

impl CountMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0; rows * cols],
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> u64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    fn bump(&mut self, r: usize, c: usize) {
        self.data[r * self.cols + c] += 1;
    }

    pub fn total(&self) -> u64 {
        self.data.iter().sum()
    }

    /// Drops trailing all-zero columns (run lengths, zone sizes never seen).
    fn trim_cols(mut self) -> Self {
        let last = (0..self.cols).rev().find(|&c| (0..self.rows).any(|r| self.get(r, c) > 0));
        let keep = last.map_or(0, |c| c + 1);
        if keep == self.cols {
            return self;
        }
        let mut data = Vec::with_capacity(self.rows * keep);
        for r in 0..self.rows {
            data.extend_from_slice(&self.data[r * self.cols..r * self.cols + keep]);
        }
        self.data = data;
        self.cols = keep;
        self
    }
}

/// A texture matrix. Row `r` holds gray level `r + 1`; for run, zone and
/// dependence matrices column `c` holds length/size/dependence `c + 1`.
#[derive(Debug, Clone, PartialEq)]
pub enum TextureMatrix {
    /// Symmetric co-occurrence counts summed over the offsets.
    Glcm(CountMatrix),
    Glrlm { counts: CountMatrix, n_voxels: usize, n_directions: usize },
    Glszm { counts: CountMatrix, n_voxels: usize },
    Gldm { counts: CountMatrix, n_voxels: usize },
    /// Per gray level: number of voxels with at least one in-mask neighbor,
    /// and the summed absolute difference to their neighborhood mean.
    Ngtdm { counts: Vec<u64>, sums: Vec<f64> },
}

impl TextureMatrix {
    pub fn family(&self) -> TextureFamily {
        match self {
            TextureMatrix::Glcm(_) => TextureFamily::Glcm,
            TextureMatrix::Glrlm { .. } => TextureFamily::Glrlm,
            TextureMatrix::Glszm { .. } => TextureFamily::Glszm,
            TextureMatrix::Gldm { .. } => TextureFamily::Gldm,
            TextureMatrix::Ngtdm { .. } => TextureFamily::Ngtdm,
        }
    }

    pub fn is_empty(&self) -> bool {
        match self {
            TextureMatrix::Glcm(m)
            | TextureMatrix::Glrlm { counts: m, .. }
            | TextureMatrix::Glszm { counts: m, .. }
            | TextureMatrix::Gldm { counts: m, .. } => m.total() == 0,
            TextureMatrix::Ngtdm { counts, .. } => counts.iter().all(|&c| c == 0),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TextureParams {
    /// Offsets for co-occurrence and run-length matrices.
    pub directions: Vec<[isize; 3]>,
}

impl Default for TextureParams {
    fn default() -> Self {
        Self {
            directions: directions_13(),
        }
    }
}

/// One offset per opposite pair of the 26-neighborhood.
pub fn directions_13() -> Vec<[isize; 3]> {
    let mut out = Vec::with_capacity(13);
    for dz in -1..=1isize {
        for dy in -1..=1isize {
            for dx in -1..=1isize {
                if dz > 0 || (dz == 0 && dy > 0) || (dz == 0 && dy == 0 && dx > 0) {
                    out.push([dx, dy, dz]);
                }
            }
        }
    }
    out
}

const NEIGHBORS_26: [[isize; 3]; 26] = {
    let mut out = [[0isize; 3]; 26];
    let mut k = 0;
    let mut i = 0;
    while i < 27 {
        let d = [(i % 3) as isize - 1, ((i / 3) % 3) as isize - 1, (i / 9) as isize - 1];
        if !(d[0] == 0 && d[1] == 0 && d[2] == 0) {
            out[k] = d;
            k += 1;
        }
        i += 1;
    }
    out
};

pub fn texture_matrix(roi: &DiscretizedRoi, family: TextureFamily, params: &TextureParams) -> TextureMatrix {
    match family {
        TextureFamily::Glcm => glcm(roi, &params.directions),
        TextureFamily::Glrlm => glrlm(roi, &params.directions),
        TextureFamily::Glszm => glszm(roi),
        TextureFamily::Gldm => gldm(roi),
        TextureFamily::Ngtdm => ngtdm(roi),
    }
}

fn glcm(roi: &DiscretizedRoi, dirs: &[[isize; 3]]) -> TextureMatrix {
    let ng = roi.ng() as usize;
    let mut m = CountMatrix::zeros(ng, ng);
    for (x, y, z, i) in roi.voxels() {
        for d in dirs {
            let j = roi.level(x + d[0], y + d[1], z + d[2]);
            if j > 0 {
                m.bump(i as usize - 1, j as usize - 1);
                m.bump(j as usize - 1, i as usize - 1);
            }
        }
    }
    TextureMatrix::Glcm(m)
}

fn glrlm(roi: &DiscretizedRoi, dirs: &[[isize; 3]]) -> TextureMatrix {
    let ng = roi.ng() as usize;
    let max_len = roi.dims().into_iter().max().unwrap_or(1);
    let mut m = CountMatrix::zeros(ng, max_len);
    for d in dirs {
        for (x, y, z, i) in roi.voxels() {
            // a run starts where the previous voxel along d differs
            if roi.level(x - d[0], y - d[1], z - d[2]) == i {
                continue;
            }
            let mut len = 1;
            while roi.level(x + len as isize * d[0], y + len as isize * d[1], z + len as isize * d[2]) == i {
                len += 1;
            }
            m.bump(i as usize - 1, len - 1);
        }
    }
    TextureMatrix::Glrlm {
        counts: m.trim_cols(),
        n_voxels: roi.n_voxels(),
        n_directions: dirs.len(),
    }
}

fn glszm(roi: &DiscretizedRoi) -> TextureMatrix {
    let [nx, ny, _] = roi.dims();
    let ng = roi.ng() as usize;
    let n = roi.n_voxels();
    let mut m = CountMatrix::zeros(ng, n.max(1));
    let mut seen = vec![false; roi.levels().len()];
    let idx = |x: isize, y: isize, z: isize| x as usize + nx * (y as usize + ny * z as usize);
    let mut queue = VecDeque::new();
    for (x, y, z, l) in roi.voxels() {
        if seen[idx(x, y, z)] {
            continue;
        }
        seen[idx(x, y, z)] = true;
        queue.push_back((x, y, z));
        let mut size = 0;
        while let Some((cx, cy, cz)) = queue.pop_front() {
            size += 1;
            for d in NEIGHBORS_26 {
                let (qx, qy, qz) = (cx + d[0], cy + d[1], cz + d[2]);
                if roi.level(qx, qy, qz) == l && !seen[idx(qx, qy, qz)] {
                    seen[idx(qx, qy, qz)] = true;
                    queue.push_back((qx, qy, qz));
                }
            }
        }
        m.bump(l as usize - 1, size - 1);
    }
    TextureMatrix::Glszm {
        counts: m.trim_cols(),
        n_voxels: n,
    }
}

fn gldm(roi: &DiscretizedRoi) -> TextureMatrix {
    let ng = roi.ng() as usize;
    let mut m = CountMatrix::zeros(ng, 27);
    for (x, y, z, l) in roi.voxels() {
        let dep = NEIGHBORS_26
            .iter()
            .filter(|d| roi.level(x + d[0], y + d[1], z + d[2]) == l)
            .count();
        m.bump(l as usize - 1, dep);
    }
    TextureMatrix::Gldm {
        counts: m.trim_cols(),
        n_voxels: roi.n_voxels(),
    }
}

fn ngtdm(roi: &DiscretizedRoi) -> TextureMatrix {
    let ng = roi.ng() as usize;
    let mut counts = vec![0u64; ng];
    let mut sums = vec![0.0; ng];
    for (x, y, z, l) in roi.voxels() {
        let mut total = 0u64;
        let mut k = 0u64;
        for d in NEIGHBORS_26 {
            let j = roi.level(x + d[0], y + d[1], z + d[2]);
            if j > 0 {
                total += u64::from(j);
                k += 1;
            }
        }
        if k == 0 {
            continue;
        }
        counts[l as usize - 1] += 1;
        sums[l as usize - 1] += (f64::from(l) - total as f64 / k as f64).abs();
    }
    TextureMatrix::Ngtdm { counts, sums }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn roi(dims: [usize; 3], levels: Vec<u32>) -> DiscretizedRoi {
        DiscretizedRoi::from_levels(dims, levels).unwrap()
    }

    #[test]
    fn thirteen_unique_directions() {
        let d = directions_13();
        assert_eq!(d.len(), 13);
        for a in &d {
            assert!(!d.contains(&[-a[0], -a[1], -a[2]]));
        }
    }

    #[test]
    fn glcm_row_single_offset() {
        let r = roi([4, 1, 1], vec![1, 2, 1, 2]);
        let p = TextureParams { directions: vec![[1, 0, 0]] };
        let TextureMatrix::Glcm(m) = texture_matrix(&r, TextureFamily::Glcm, &p) else { unreachable!() };
        assert_eq!((m.get(0, 1), m.get(1, 0), m.get(0, 0), m.get(1, 1)), (3, 3, 0, 0));
    }

    #[test]
    fn glszm_constant_cube_is_one_zone() {
        let r = roi([3, 3, 3], vec![1; 27]);
        let TextureMatrix::Glszm { counts, .. } = texture_matrix(&r, TextureFamily::Glszm, &TextureParams::default()) else {
            unreachable!()
        };
        assert_eq!(counts.total(), 1);
        assert_eq!(counts.get(0, 26), 1);
    }

    #[test]
    fn glrlm_horizontal_runs() {
        let r = roi([2, 2, 1], vec![1, 1, 2, 2]);
        let p = TextureParams { directions: vec![[1, 0, 0]] };
        let TextureMatrix::Glrlm { counts, .. } = texture_matrix(&r, TextureFamily::Glrlm, &p) else { unreachable!() };
        assert_eq!(counts.get(0, 1), 1);
        assert_eq!(counts.get(1, 1), 1);
        assert_eq!(counts.total(), 2);
    }

    #[test]
    fn isolated_voxel_glcm_is_empty() {
        let r = roi([1, 1, 1], vec![1]);
        assert!(texture_matrix(&r, TextureFamily::Glcm, &TextureParams::default()).is_empty());
        assert!(texture_matrix(&r, TextureFamily::Ngtdm, &TextureParams::default()).is_empty());
        assert!(!texture_matrix(&r, TextureFamily::Gldm, &TextureParams::default()).is_empty());
    }
}
