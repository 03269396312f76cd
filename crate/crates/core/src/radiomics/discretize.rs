use super::RadiomicsError;
use crate::volume::Volume3D;

/// In-mask voxels cropped to the mask bounding box, with gray levels
/// `1..=ng` from fixed-width binning. Level 0 marks voxels outside the
/// mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedRoi {
    dims: [usize; 3],
    levels: Vec<u32>,
    ng: u32,
    bin_width: f64,
}

impl DiscretizedRoi {
    /// Builds an ROI directly from levels (0 = outside), x fastest.
    pub fn from_levels(dims: [usize; 3], levels: Vec<u32>) -> Result<Self, RadiomicsError> {
        assert_eq!(dims[0] * dims[1] * dims[2], levels.len(), "level buffer size");
        let ng = levels.iter().copied().max().unwrap_or(0);
        if ng == 0 {
            return Err(RadiomicsError::EmptyMask);
        }
        Ok(Self {
            dims,
            levels,
            ng,
            bin_width: 1.0,
        })
    }

    pub fn dims(&self) -> [usize; 3] {
        self.dims
    }

    /// Highest gray level present.
    pub fn ng(&self) -> u32 {
        self.ng
    }

    pub fn bin_width(&self) -> f64 {
        self.bin_width
    }

    pub fn levels(&self) -> &[u32] {
        &self.levels
    }

    /// Level at a possibly out-of-box position; 0 outside the mask.
    #[inline]
    pub fn level(&self, x: isize, y: isize, z: isize) -> u32 {
        let [nx, ny, nz] = self.dims;
        if x < 0 || y < 0 || z < 0 || x as usize >= nx || y as usize >= ny || z as usize >= nz {
            return 0;
        }
        self.levels[x as usize + nx * (y as usize + ny * z as usize)]
    }

    /// `(x, y, z, level)` for every in-mask voxel, x fastest.
    pub fn voxels(&self) -> impl Iterator<Item = (isize, isize, isize, u32)> + '_ {
        let [nx, ny, _] = self.dims;
        self.levels.iter().enumerate().filter(|(_, &l)| l > 0).map(move |(i, &l)| {
            let x = i % nx;
            let y = (i / nx) % ny;
            let z = i / (nx * ny);
            (x as isize, y as isize, z as isize, l)
        })
    }

    pub fn n_voxels(&self) -> usize {
        self.levels.iter().filter(|&&l| l > 0).count()
    }
}

/// Gray level of `value` for bin width `w` given the ROI minimum.
pub fn bin_level(value: f64, min: f64, w: f64) -> u32 {
    ((value / w).floor() - (min / w).floor()) as u32 + 1
}

/// Fixed-bin-width discretization of the in-mask voxels.
pub fn discretize(image: &Volume3D<f64>, mask: &Volume3D<u8>, bin_width: f64) -> Result<DiscretizedRoi, RadiomicsError> {
    if !(bin_width > 0.0 && bin_width.is_finite()) {
        return Err(RadiomicsError::InvalidBinWidth(bin_width));
    }
    if !image.geometry().same_grid(mask.geometry()) {
        return Err(RadiomicsError::GridMismatch);
    }
    let [nx, ny, nz] = mask.dims();
    let mut lo = [usize::MAX; 3];
    let mut hi = [0usize; 3];
    let mut min = f64::INFINITY;
    for z in 0..nz {
        for y in 0..ny {
            for x in 0..nx {
                if mask.get(x, y, z) != 0 {
                    for (a, v) in [x, y, z].into_iter().enumerate() {
                        lo[a] = lo[a].min(v);
                        hi[a] = hi[a].max(v);
                    }
                    min = min.min(image.get(x, y, z));
                }
            }
        }
    }
    if lo[0] == usize::MAX {
        return Err(RadiomicsError::EmptyMask);
    }
    let dims = [hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1];
    let mut levels = vec![0u32; dims[0] * dims[1] * dims[2]];
    for z in 0..dims[2] {
        for y in 0..dims[1] {
            for x in 0..dims[0] {
                let (gx, gy, gz) = (x + lo[0], y + lo[1], z + lo[2]);
                if mask.get(gx, gy, gz) != 0 {
                    levels[x + dims[0] * (y + dims[1] * z)] = bin_level(image.get(gx, gy, gz), min, bin_width);
                }
            }
        }
    }
    let ng = levels.iter().copied().max().unwrap_or(1);
    Ok(DiscretizedRoi {
        dims,
        levels,
        ng,
        bin_width,
    })
}
