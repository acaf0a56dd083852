//! Continuous Lyapunov equation P·A + Aᵀ·P + Q = 0 for Hurwitz A, solved by
//! Kronecker vectorization: (I⊗Aᵀ + Aᵀ⊗I)·vec(P) = -vec(Q). The largest
//! instance in this crate is a few hundred unknowns, where the dense solve is
//! both trivial and the simplest correct code.

use crate::error::{Error, Result};
use crate::linalg::eig::spectral_abscissa;
use crate::linalg::lu::Lu;
use crate::linalg::mat::Mat;

const SYMMETRY_RTOL: f64 = 1e-10;
const RESIDUAL_RTOL: f64 = 1e-9;

/// Residual ‖PA + AᵀP + Q‖_F of a candidate solution.
pub fn lyapunov_residual(a: &Mat, q: &Mat, p: &Mat) -> f64 {
    let pa = p * a;
    let atp = &a.t() * p;
    (&(&pa + &atp) + q).norm_fro()
}

/// Core Kronecker solve without the Hurwitz pre-check; the caller guarantees
/// that the spectrum keeps λ_i + λ_j away from zero.
pub(crate) fn lyapunov_solve_unchecked(a: &Mat, q: &Mat) -> Result<Mat> {
    let n = a.rows();
    let mut big = Mat::zeros(n * n, n * n);
    // row-major vec(P): entries indexed by (i*n + j)
    for i in 0..n {
        for j in 0..n {
            let r = i * n + j;
            for k in 0..n {
                big[(r, i * n + k)] += a[(k, j)]; // (P·A) term
                big[(r, k * n + j)] += a[(k, i)]; // (Aᵀ·P) term
            }
        }
    }
    let rhs: Vec<f64> = q.as_slice().iter().map(|v| -v).collect();
    let sol = Lu::factor(&big)?.solve_vec(&rhs);
    let p = Mat::new(n, n, sol).expect("solver output is finite")
        .sym_part();

    let resid = lyapunov_residual(a, q, &p);
    let tol = RESIDUAL_RTOL * q.norm_fro().max(1.0);
    if resid > tol {
        return Err(Error::ResidualTooLarge {
            what: "Lyapunov solve",
            residual: resid,
            tol,
        });
    }
    Ok(p)
}

/// Unique symmetric solution of P·A + Aᵀ·P + Q = 0.
pub fn lyapunov_solve(a: &Mat, q: &Mat) -> Result<Mat> {
    assert!(a.is_square(), "Lyapunov equation needs a square A");
    if q.rows() != a.rows() || q.cols() != a.cols() {
        return Err(Error::InvalidInput(format!(
            "Q is {}x{}, expected {}x{}",
            q.rows(),
            q.cols(),
            a.rows(),
            a.rows()
        )));
    }
    if !q.is_symmetric(SYMMETRY_RTOL) {
        return Err(Error::InvalidInput("Q must be symmetric".to_string()));
    }
    let abscissa = spectral_abscissa(a)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { max_real: abscissa });
    }
    lyapunov_solve_unchecked(a, q)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn negated_identity() {
        // A = -I: PA + AᵀP = -2P, so P = Q/2
        let p = lyapunov_solve(&Mat::diag(&[-1.0, -1.0]), &Mat::identity(2)).unwrap();
        assert!((&p - &Mat::identity(2).scale(0.5)).max_abs() < 1e-12);
    }

    #[test]
    fn decoupled_scalars() {
        let a = Mat::diag(&[-1.0, -2.0]);
        let p = lyapunov_solve(&a, &Mat::identity(2)).unwrap();
        assert!((p[(0, 0)] - 0.5).abs() < 1e-12);
        assert!((p[(1, 1)] - 0.25).abs() < 1e-12);
        assert!(p[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn rejects_non_hurwitz() {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        match lyapunov_solve(&a, &Mat::identity(2)) {
            Err(Error::NotHurwitz { .. }) => {}
            other => panic!("expected NotHurwitz, got {other:?}"),
        }
    }

    #[test]
    fn rejects_asymmetric_q() {
        let q = Mat::from_rows(&[vec![1.0, 1.0], vec![0.0, 1.0]]).unwrap();
        assert!(lyapunov_solve(&Mat::diag(&[-1.0, -1.0]), &q).is_err());
    }

    #[test]
    fn coupled_system_residual() {
        let a = Mat::from_rows(&[
            vec![-2.0, 1.0, 0.0],
            vec![0.5, -3.0, 0.2],
            vec![0.0, -0.4, -1.0],
        ])
        .unwrap();
        let q = Mat::from_rows(&[
            vec![2.0, 0.1, 0.0],
            vec![0.1, 1.0, 0.3],
            vec![0.0, 0.3, 4.0],
        ])
        .unwrap();
        let p = lyapunov_solve(&a, &q).unwrap();
        assert!(lyapunov_residual(&a, &q, &p) < 1e-12 * q.norm_fro().max(1.0));
        assert!(p.is_symmetric(1e-12));
    }
}
