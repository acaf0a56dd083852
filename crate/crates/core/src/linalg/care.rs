//! Continuous algebraic Riccati equation
//!     PA + AᵀP - P·B·R⁻¹·Bᵀ·P + Q = 0.
//!
//! The stabilizing solution is extracted from the stable invariant subspace
//! of the Hamiltonian H = [[A, -G], [-Q, -Aᵀ]], G = B·R⁻¹·Bᵀ. The spectral
//! projector onto that subspace comes from the matrix sign function (Roberts'
//! iteration with determinant scaling); stacking an orthonormal basis
//! [X₁; X₂] of its range gives P = X₂·X₁⁻¹. A short Newton–Kleinman loop
//! (one Lyapunov solve per step at the current gain) then polishes the
//! residual down to machine precision.

use crate::error::{Error, Result};
use crate::linalg::eig::{eigenvalues, spectral_abscissa};
use crate::linalg::lu::{solve_linear, Lu};
use crate::linalg::lyap::lyapunov_solve_unchecked;
use crate::linalg::mat::Mat;
use crate::linalg::svd::svd;

const SIGN_MAX_ITERS: usize = 100;
const SIGN_TOL: f64 = 1e-13;
const NEWTON_MAX_ITERS: usize = 20;
const SYMMETRY_RTOL: f64 = 1e-10;
/// Residual contract: ‖PA + AᵀP - PGP + Q‖_F ≤ 1e-8·max(1, ‖Q‖_F).
const RESIDUAL_RTOL: f64 = 1e-8;

/// Residual ‖PA + AᵀP - P·G·P + Q‖_F where G = B·R⁻¹·Bᵀ.
pub fn care_residual(a: &Mat, g: &Mat, q: &Mat, p: &Mat) -> f64 {
    let pa = p * a;
    let term = &(&pa + &pa.t()) - &(&(p * g) * p);
    (&term + q).norm_fro()
}

fn matrix_sign(h: &Mat) -> Result<Mat> {
    let dim = h.rows();
    let mut z = h.clone();
    for _ in 0..SIGN_MAX_ITERS {
        let lu = Lu::factor(&z).map_err(|_| Error::NoStabilizingSolution {
            reason: "sign iteration hit a singular iterate (eigenvalue on the imaginary axis)",
        })?;
        let zinv = lu.solve_mat(&Mat::identity(dim));
        // determinant scaling accelerates convergence without changing the limit
        let gamma = (-lu.log_abs_det() / dim as f64).exp();
        let gamma = if gamma.is_finite() && gamma > 1e-8 && gamma < 1e8 {
            gamma
        } else {
            1.0
        };
        let next = &z.scale(0.5 * gamma) + &zinv.scale(0.5 / gamma);
        let step = (&next - &z).norm_fro();
        let scale = next.norm_fro().max(1.0);
        z = next;
        if step <= SIGN_TOL * scale {
            return Ok(z);
        }
    }
    Err(Error::NoStabilizingSolution {
        reason: "matrix sign iteration did not converge",
    })
}

/// Unique stabilizing (positive semidefinite) solution of the CARE.
///
/// The caller is responsible for stabilizability of (A, B) and detectability
/// of (A, Q); violations surface as `NoStabilizingSolution`.
pub fn care_solve(a: &Mat, b: &Mat, q: &Mat, r: &Mat) -> Result<Mat> {
    let n = a.rows();
    assert!(a.is_square(), "A must be square");
    if b.rows() != n {
        return Err(Error::InvalidInput("B row count must match A".to_string()));
    }
    if q.rows() != n || q.cols() != n || !q.is_symmetric(SYMMETRY_RTOL) {
        return Err(Error::InvalidInput("Q must be symmetric n x n".to_string()));
    }
    let m = b.cols();
    if r.rows() != m || r.cols() != m || !r.is_symmetric(SYMMETRY_RTOL) {
        return Err(Error::InvalidInput("R must be symmetric m x m".to_string()));
    }
    let r_eigs = eigenvalues(r)?;
    if !r_eigs.iter().all(|z| z.re > 0.0) {
        return Err(Error::InvalidInput("R must be positive definite".to_string()));
    }

    // G = B·R⁻¹·Bᵀ
    let rinv_bt = solve_linear(r, &b.t())?;
    let g = (b * &rinv_bt).sym_part();

    let hamiltonian = {
        let mut h = Mat::zeros(2 * n, 2 * n);
        h.set_block(0, 0, a);
        h.set_block(0, n, &-&g);
        h.set_block(n, 0, &-q);
        h.set_block(n, n, &-&a.t());
        h
    };

    let sign = matrix_sign(&hamiltonian)?;
    // projector onto the stable invariant subspace
    let proj = (&Mat::identity(2 * n) - &sign).scale(0.5);
    let fac = svd(&proj)?;
    // nonzero singular values of an idempotent matrix are ≥ 1
    let rank = fac.sigma.iter().filter(|&&s| s > 0.5).count();
    if rank != n {
        return Err(Error::NoStabilizingSolution {
            reason: "stable invariant subspace has wrong dimension",
        });
    }
    let basis = fac.u.block(0, 0, 2 * n, n);
    let x1 = basis.block(0, 0, n, n);
    let x2 = basis.block(n, 0, n, n);
    // P = X₂·X₁⁻¹  ⇔  X₁ᵀ·Pᵀ = X₂ᵀ
    let p0 = solve_linear(&x1.t(), &x2.t())
        .map_err(|_| Error::NoStabilizingSolution {
            reason: "stable subspace basis has singular upper block",
        })?
        .t()
        .sym_part();

    // Newton–Kleinman refinement: each step solves the closed-loop Lyapunov
    // equation P(A-BK) + (A-BK)ᵀP + Q + KᵀRK = 0 at the current gain. The
    // loop runs to the numerical fixed point of that map, so the returned P
    // coincides with the closed-loop Lyapunov solution at its own gain.
    let mut p = p0;
    let mut prev_step = f64::INFINITY;
    for iter in 0..NEWTON_MAX_ITERS {
        let k = solve_linear(r, &(&b.t() * &p))?;
        let a_cl = a - &(b * &k);
        if spectral_abscissa(&a_cl)? >= 0.0 {
            if iter == 0 {
                return Err(Error::NoStabilizingSolution {
                    reason: "invariant-subspace candidate is not stabilizing",
                });
            }
            break;
        }
        let q_cl = (q + &(&(&k.t() * r) * &k)).sym_part();
        let next = match lyapunov_solve_unchecked(&a_cl, &q_cl) {
            Ok(pn) => pn,
            Err(_) => break,
        };
        let step = (&next - &p).norm_fro();
        p = next;
        if step <= 1e-14 * p.norm_fro().max(1.0) {
            break;
        }
        if iter >= 3 && step >= prev_step {
            break; // rounding floor reached
        }
        prev_step = step;
    }

    let tol = RESIDUAL_RTOL * q.norm_fro().max(1.0);
    let resid = care_residual(a, &g, q, &p);
    if resid > tol {
        return Err(Error::ResidualTooLarge {
            what: "Riccati solve",
            residual: resid,
            tol,
        });
    }
    let k = solve_linear(r, &(&b.t() * &p))?;
    let a_cl = a - &(b * &k);
    let margin = spectral_abscissa(&a_cl)?;
    if margin >= 0.0 {
        return Err(Error::NoStabilizingSolution {
            reason: "closed loop is not Hurwitz after refinement",
        });
    }
    Ok(p)
}
