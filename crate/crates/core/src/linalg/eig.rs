//! Eigenvalues of real square matrices: Householder reduction to Hessenberg
//! form followed by shifted QR iteration with Wilkinson shifts. Every
//! returned eigenvalue is verified through an inverse-iteration eigenpair
//! residual check.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::cmat::CMat;
use crate::linalg::mat::Mat;

/// QR sweep budget per matrix dimension.
const SWEEPS_PER_DIM: usize = 100;
/// Eigenpair residual bound, relative to ‖A‖_F.
const PAIR_RTOL: f64 = 1e-8;

/// Reduce a square matrix to upper Hessenberg form by Householder reflections.
pub(crate) fn hessenberg(a: &Mat) -> Mat {
    assert!(a.is_square());
    let n = a.rows();
    let mut h = a.clone();
    if n < 3 {
        return h;
    }
    for k in 0..n - 2 {
        // Householder vector for column k below the subdiagonal.
        let mut alpha = 0.0;
        for i in (k + 1)..n {
            alpha += h[(i, k)] * h[(i, k)];
        }
        alpha = alpha.sqrt();
        if alpha == 0.0 {
            continue;
        }
        if h[(k + 1, k)] > 0.0 {
            alpha = -alpha;
        }
        let mut v = vec![0.0; n];
        v[k + 1] = h[(k + 1, k)] - alpha;
        for i in (k + 2)..n {
            v[i] = h[(i, k)];
        }
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 == 0.0 {
            continue;
        }
        // H ← (I - 2vvᵀ/vᵀv) H (I - 2vvᵀ/vᵀv)
        for j in 0..n {
            let mut s = 0.0;
            for i in (k + 1)..n {
                s += v[i] * h[(i, j)];
            }
            s *= 2.0 / vnorm2;
            for i in (k + 1)..n {
                h[(i, j)] -= s * v[i];
            }
        }
        for i in 0..n {
            let mut s = 0.0;
            for j in (k + 1)..n {
                s += h[(i, j)] * v[j];
            }
            s *= 2.0 / vnorm2;
            for j in (k + 1)..n {
                h[(i, j)] -= s * v[j];
            }
        }
        for i in (k + 2)..n {
            h[(i, k)] = 0.0;
        }
    }
    h
}

fn roots_of_2x2(a: Complex64, b: Complex64, c: Complex64, d: Complex64) -> (Complex64, Complex64) {
    let mean = (a + d) * 0.5;
    let disc = ((a - d) * 0.5).powu(2) + b * c;
    let root = disc.sqrt();
    (mean + root, mean - root)
}

/// Shifted QR iteration on a complex Hessenberg matrix. Works entirely in
/// complex arithmetic so real and complex eigenvalues deflate uniformly.
fn qr_eigenvalues(mut h: CMat, budget: usize) -> Result<Vec<Complex64>> {
    let n = h.n;
    let mut eigs: Vec<Complex64> = Vec::with_capacity(n);
    let mut hi = n;
    let mut sweeps = 0usize;
    let mut stalled = 0usize;
    let eps = f64::EPSILON;
    let hnorm: f64 = h.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();

    let negligible = |h: &CMat, i: usize| -> bool {
        let s = h[(i - 1, i - 1)].norm() + h[(i, i)].norm();
        let s = if s == 0.0 { hnorm } else { s };
        h[(i, i - 1)].norm() <= eps * s
    };

    while hi > 0 {
        if hi == 1 {
            eigs.push(h[(0, 0)]);
            break;
        }
        // Locate the trailing unreduced block [lo, hi).
        let mut lo = hi - 1;
        while lo > 0 && !negligible(&h, lo) {
            lo -= 1;
        }
        if lo == hi - 1 {
            eigs.push(h[(hi - 1, hi - 1)]);
            hi -= 1;
            stalled = 0;
            continue;
        }
        if lo == hi - 2 {
            let (r1, r2) = roots_of_2x2(
                h[(hi - 2, hi - 2)],
                h[(hi - 2, hi - 1)],
                h[(hi - 1, hi - 2)],
                h[(hi - 1, hi - 1)],
            );
            eigs.push(r1);
            eigs.push(r2);
            hi -= 2;
            stalled = 0;
            continue;
        }
        if sweeps >= budget {
            return Err(Error::ConvergenceFailure {
                what: "QR eigenvalue iteration",
            });
        }
        sweeps += 1;
        stalled += 1;

        // Wilkinson shift: the root of the trailing 2x2 closest to the corner.
        let (r1, r2) = roots_of_2x2(
            h[(hi - 2, hi - 2)],
            h[(hi - 2, hi - 1)],
            h[(hi - 1, hi - 2)],
            h[(hi - 1, hi - 1)],
        );
        let corner = h[(hi - 1, hi - 1)];
        let mut shift = if (r1 - corner).norm() <= (r2 - corner).norm() { r1 } else { r2 };
        if stalled > 0 && stalled.is_multiple_of(15) {
            // exceptional shift to break rare cycling; block size is ≥ 3 here
            let kick = h[(hi - 1, hi - 2)].norm() + h[(hi - 2, hi - 3)].norm();
            shift += Complex64::new(kick, 0.0);
        }

        // Explicit single-shift QR step on the active block via Givens rotations.
        for i in lo..hi {
            h[(i, i)] -= shift;
        }
        let mut rot: Vec<(f64, Complex64)> = Vec::with_capacity(hi - lo - 1);
        for k in lo..hi - 1 {
            let a = h[(k, k)];
            let b = h[(k + 1, k)];
            let r = (a.norm_sqr() + b.norm_sqr()).sqrt();
            let (c, s) = if r == 0.0 {
                (1.0, Complex64::new(0.0, 0.0))
            } else if a.norm() == 0.0 {
                (0.0, b.conj() / b.norm())
            } else {
                let phase = a / a.norm();
                (a.norm() / r, phase * b.conj() / r)
            };
            // rows k, k+1
            for j in k..hi {
                let x = h[(k, j)];
                let y = h[(k + 1, j)];
                h[(k, j)] = x * c + y * s;
                h[(k + 1, j)] = -x * s.conj() + y * c;
            }
            rot.push((c, s));
        }
        for (k, &(c, s)) in (lo..hi - 1).zip(rot.iter()) {
            // columns k, k+1
            let top = (k + 2).min(hi);
            for i in lo..top {
                let x = h[(i, k)];
                let y = h[(i, k + 1)];
                h[(i, k)] = x * c + y * s.conj();
                h[(i, k + 1)] = -x * s + y * c;
            }
        }
        for i in lo..hi {
            h[(i, i)] += shift;
        }
    }

    eigs.sort_by(|a, b| {
        a.re.partial_cmp(&b.re)
            .unwrap()
            .then(a.im.partial_cmp(&b.im).unwrap())
    });
    Ok(eigs)
}

/// Inverse-iteration residual for one computed eigenvalue.
fn eigenpair_residual(a: &CMat, lambda: Complex64, scale: f64) -> f64 {
    let n = a.n;
    // deterministic pseudo-random start vector
    let mut v: Vec<Complex64> = (0..n)
        .map(|i| {
            let x = ((i.wrapping_mul(2654435761).wrapping_add(1013904223)) % 65536) as f64 / 65536.0;
            Complex64::new(x + 0.5, 0.25 * x)
        })
        .collect();
    let mut delta = 0.0;
    for attempt in 0..4 {
        let mut shifted = a.clone();
        let shift = lambda + Complex64::new(delta, delta);
        for i in 0..n {
            shifted[(i, i)] -= shift;
        }
        let mut ok = true;
        for _ in 0..2 {
            match shifted.lu_solve(&v) {
                Some(w) => {
                    let nw: f64 = w.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
                    if !nw.is_finite() || nw == 0.0 {
                        ok = false;
                        break;
                    }
                    v = w.iter().map(|z| z / nw).collect();
                }
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if ok {
            break;
        }
        // exactly singular shift: nudge and retry
        delta = scale * 1e-14 * 10f64.powi(attempt);
    }
    let av = a.matvec(&v);
    let mut resid = 0.0;
    for i in 0..n {
        resid += (av[i] - lambda * v[i]).norm_sqr();
    }
    resid.sqrt()
}

/// Eigenvalues of a square matrix, sorted by (real, imaginary) part.
pub fn eigenvalues(a: &Mat) -> Result<Vec<Complex64>> {
    assert!(a.is_square(), "eigenvalues requires a square matrix");
    let n = a.rows();
    if n == 0 {
        return Ok(Vec::new());
    }
    let h = hessenberg(a);
    let eigs = qr_eigenvalues(CMat::from_real(&h), SWEEPS_PER_DIM * n)?;

    let scale = a.norm_fro();
    if scale > 0.0 {
        let ac = CMat::from_real(a);
        for &lambda in &eigs {
            let resid = eigenpair_residual(&ac, lambda, scale);
            if resid > PAIR_RTOL * scale {
                return Err(Error::ConvergenceFailure {
                    what: "eigenpair residual verification",
                });
            }
        }
    }
    Ok(eigs)
}

/// Largest real part over the spectrum.
pub fn spectral_abscissa(a: &Mat) -> Result<f64> {
    Ok(eigenvalues(a)?
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// True iff every eigenvalue satisfies Re λ < -margin.
pub fn is_hurwitz(a: &Mat, margin: f64) -> Result<bool> {
    assert!(margin >= 0.0, "margin must be nonnegative");
    Ok(spectral_abscissa(a)? < -margin)
}
