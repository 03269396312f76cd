//! Deterministic fixtures shared by the benchmarks.

use neurocurate::volume::{Geometry, Volume3D};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn geometry(n: usize) -> Geometry {
    Geometry::new([n; 3], [1.0; 3], [0.0; 3]).expect("positive dims")
}

/// Uniform noise in `[0, 1000)`.
pub fn noise_volume(n: usize, seed: u64) -> Volume3D<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Volume3D::from_fn(geometry(n), |_, _, _| rng.gen_range(0.0..1000.0))
}

/// Centered ball of the given radius in voxels.
pub fn ball_mask(n: usize, radius: f64) -> Volume3D<u8> {
    let c = (n as f64 - 1.0) / 2.0;
    Volume3D::from_fn(geometry(n), |x, y, z| {
        let d2 = [x, y, z].iter().map(|&v| (v as f64 - c).powi(2)).sum::<f64>();
        u8::from(d2 <= radius * radius)
    })
}
