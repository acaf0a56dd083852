//! Singular values and orthonormal subspace bases via one-sided Jacobi
//! rotations. Quadratically convergent and accurate at the small sizes used
//! here; the right factor V is an exact product of rotations, so null-space
//! bases come out orthonormal to machine precision.

use crate::error::{Error, Result};
use crate::linalg::mat::Mat;

const MAX_SWEEPS: usize = 60;

/// Thin SVD A = U·diag(σ)·Vᵀ with σ sorted descending.
///
/// Columns of `u` corresponding to zero singular values are left as zero and
/// must not be used as basis vectors.
pub struct Svd {
    pub u: Mat,
    pub sigma: Vec<f64>,
    pub v: Mat,
}

fn jacobi(a: &Mat) -> Result<(Mat, Vec<f64>, Mat)> {
    let (m, n) = (a.rows(), a.cols());
    let mut w = a.clone();
    let mut v = Mat::identity(n);
    let eps = f64::EPSILON;
    // Rotations preserve the Frobenius norm, so this floor is invariant.
    // Columns below eps·‖A‖_F are numerically zero; freezing them avoids
    // underflow stalls where the orthogonality test can never be met.
    let col_floor = (eps * a.norm_fro()).powi(2);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        converged = true;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    app += w[(i, p)] * w[(i, p)];
                    aqq += w[(i, q)] * w[(i, q)];
                    apq += w[(i, p)] * w[(i, q)];
                }
                if apq == 0.0
                    || app <= col_floor
                    || aqq <= col_floor
                    || apq.abs() <= eps * app.sqrt() * aqq.sqrt()
                {
                    continue;
                }
                converged = false;
                let zeta = (aqq - app) / (2.0 * apq);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let x = w[(i, p)];
                    let y = w[(i, q)];
                    w[(i, p)] = c * x - s * y;
                    w[(i, q)] = s * x + c * y;
                }
                for i in 0..n {
                    let x = v[(i, p)];
                    let y = v[(i, q)];
                    v[(i, p)] = c * x - s * y;
                    v[(i, q)] = s * x + c * y;
                }
            }
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::ConvergenceFailure {
            what: "Jacobi SVD sweeps",
        });
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n)
        .map(|j| (0..m).map(|i| w[(i, j)] * w[(i, j)]).sum::<f64>().sqrt())
        .collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = Mat::zeros(m, n);
    let mut vv = Mat::zeros(n, n);
    let mut sigma = vec![0.0; n];
    for (new_j, &old_j) in order.iter().enumerate() {
        sigma[new_j] = norms[old_j];
        if norms[old_j] > 0.0 {
            for i in 0..m {
                u[(i, new_j)] = w[(i, old_j)] / norms[old_j];
            }
        }
        for i in 0..n {
            vv[(i, new_j)] = v[(i, old_j)];
        }
    }
    Ok((u, sigma, vv))
}

pub fn svd(a: &Mat) -> Result<Svd> {
    if a.rows() >= a.cols() {
        let (u, sigma, v) = jacobi(a)?;
        Ok(Svd { u, sigma, v })
    } else {
        // wide case: pad with zero rows so the full V is produced; the
        // singular values and right vectors are unchanged, and the extra
        // rows of U are zero on every nonzero singular direction
        let pad = Mat::zeros(a.cols() - a.rows(), a.cols());
        let (u_pad, sigma, v) = jacobi(&Mat::vstack(&[a, &pad]))?;
        Ok(Svd {
            u: u_pad.block(0, 0, a.rows(), a.cols()),
            sigma,
            v,
        })
    }
}

pub fn singular_values(a: &Mat) -> Result<Vec<f64>> {
    Ok(svd(a)?.sigma)
}

/// Number of singular values above rtol·σ_max.
pub fn rank_rtol(a: &Mat, rtol: f64) -> Result<usize> {
    let sigma = singular_values(a)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    if smax == 0.0 {
        return Ok(0);
    }
    Ok(sigma.iter().filter(|&&s| s > rtol * smax).count())
}

/// Orthonormal basis of the null space: right singular vectors with
/// σ ≤ rtol·σ_max (all of them when A = 0).
pub fn null_space_basis(a: &Mat, rtol: f64) -> Result<Mat> {
    let Svd { sigma, v, .. } = svd(a)?;
    let n = a.cols();
    let smax = sigma.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 {
        0
    } else {
        sigma.iter().filter(|&&s| s > rtol * smax).count()
    };
    Ok(v.block(0, rank, n, n - rank))
}

/// Orthonormal basis of the column space: left singular vectors with
/// σ > rtol·σ_max.
pub fn range_basis(a: &Mat, rtol: f64) -> Result<Mat> {
    let Svd { u, sigma, .. } = svd(a)?;
    let smax = sigma.first().copied().unwrap_or(0.0);
    let rank = if smax == 0.0 {
        0
    } else {
        sigma.iter().filter(|&&s| s > rtol * smax).count()
    };
    Ok(u.block(0, 0, a.rows(), rank))
}
