#![allow(dead_code)]

use cavfb::{DensityMatrix, FockDim, C64};
use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random full-rank state on levels `0..n_max`, with the top level `n_max` left empty.
pub fn random_state(seed: u64, n_max: usize) -> DensityMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let size = n_max + 1;
    let g = DMatrix::from_fn(size, size, |i, _| {
        if i == n_max {
            C64::new(0.0, 0.0)
        } else {
            C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))
        }
    });
    let m = &g * g.adjoint();
    let tr = m.trace().re;
    DensityMatrix::from_matrix(m / C64::from(tr)).unwrap()
}

/// Drops every element with odd `m - n` and renormalizes.
pub fn parity_definite(rho: &DensityMatrix) -> DensityMatrix {
    let el = rho.elements();
    let size = el.nrows();
    let m = DMatrix::from_fn(size, size, |i, j| {
        if (i + j) % 2 == 0 {
            el[(i, j)]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let tr = m.trace().re;
    DensityMatrix::from_matrix(m / C64::from(tr)).unwrap()
}

pub fn dim(n_max: usize) -> FockDim {
    FockDim::new(n_max).unwrap()
}
