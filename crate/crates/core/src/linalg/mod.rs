//! Dense real-matrix kernel: factorizations, spectra, matrix equations, and
//! subspace computations. Everything is plain `f64` with no external solver
//! dependencies; problem sizes in this crate stay far below the point where
//! that choice would matter.

mod care;
mod cmat;
mod eig;
mod expm;
mod lu;
mod lyap;
pub mod mat;
mod svd;

pub use care::{care_residual, care_solve};
pub use eig::{eigenvalues, is_hurwitz, spectral_abscissa};
pub use expm::matrix_exponential;
pub use lu::{inverse, solve_linear, solve_linear_vec, Lu};
pub use lyap::{lyapunov_residual, lyapunov_solve};
pub use mat::{Mat, Subspace};
pub use svd::{null_space_basis, range_basis, rank_rtol, singular_values, svd, Svd};

pub use num_complex::Complex64;

use crate::error::Result;

/// Default relative tolerance for rank decisions.
pub const RANK_RTOL: f64 = 1e-10;

/// Orthonormal basis of ker([C; CA; …; CA^{n-1}]): the states invisible to
/// the output map for all time.
pub fn unobservable_subspace(a: &Mat, c: &Mat) -> Result<Subspace> {
    assert!(a.is_square(), "A must be square");
    assert_eq!(c.cols(), a.rows(), "C must have n columns");
    let n = a.rows();
    let mut blocks: Vec<Mat> = Vec::with_capacity(n);
    let mut current = c.clone();
    for _ in 0..n {
        blocks.push(current.clone());
        current = &current * a;
    }
    let refs: Vec<&Mat> = blocks.iter().collect();
    let obs = Mat::vstack(&refs);
    let basis = null_space_basis(&obs, RANK_RTOL)?;
    Subspace::new(n, basis)
}
