//! Shared generators for randomized integration tests. All randomness is
//! seeded so failures reproduce.
#![allow(dead_code)]

use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use steadyctl_core::linalg::mat::Mat;
use steadyctl_core::linalg::spectral_abscissa;
use steadyctl_core::plant::{CostWeights, DisturbedLtiSystem};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rand_mat(rng: &mut ChaCha8Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| rng.gen_range(-scale..scale))
}

pub fn rand_vec(rng: &mut ChaCha8Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.gen_range(-scale..scale)).collect()
}

/// Random matrix shifted so every eigenvalue satisfies Re λ ≤ -margin.
pub fn rand_hurwitz(rng: &mut ChaCha8Rng, n: usize, margin: f64) -> Mat {
    let g = rand_mat(rng, n, n, 1.0);
    let shift = spectral_abscissa(&g).unwrap() + margin;
    let mut a = g;
    for i in 0..n {
        a[(i, i)] -= shift;
    }
    a
}

/// GᵀG: symmetric positive semidefinite (full rank almost surely).
pub fn rand_psd(rng: &mut ChaCha8Rng, n: usize) -> Mat {
    let g = rand_mat(rng, n, n, 1.0);
    (&g.t() * &g).sym_part()
}

/// GᵀG + floor·I: symmetric positive definite.
pub fn rand_spd(rng: &mut ChaCha8Rng, n: usize, floor: f64) -> Mat {
    let mut m = rand_psd(rng, n);
    for i in 0..n {
        m[(i, i)] += floor;
    }
    m
}

/// Random plant satisfying the stabilizability/detectability assumption:
/// dense B makes (A, B) controllable almost surely and full-rank Q keeps
/// (A, Q) observable. A mild stability shift keeps the Riccati solutions
/// well scaled (most draws still have unstable open-loop modes); without it
/// the occasional barely-controllable draw produces ‖P‖ ~ 10⁴, where no
/// double-precision solver can meet the absolute cross-check tolerances.
pub fn rand_plant(
    rng: &mut ChaCha8Rng,
    n: usize,
    m: usize,
) -> (DisturbedLtiSystem, CostWeights) {
    let mut a = rand_mat(rng, n, n, 1.0);
    for i in 0..n {
        a[(i, i)] -= 0.3;
    }
    let b = rand_mat(rng, n, m, 1.0);
    let c = rand_mat(rng, n, 1, 1.0);
    let d = vec![rng.gen_range(-1.0..1.0)];
    let sys = DisturbedLtiSystem::new(a, b, c, d).unwrap();
    let w = CostWeights::new(rand_psd(rng, n), rand_spd(rng, m, 0.1)).unwrap();
    (sys, w)
}
