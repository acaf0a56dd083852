use crate::error::{Error, Result};
use crate::linalg::mat::Mat;

/// Relative pivot threshold: a pivot below this fraction of ‖A‖_F is singular.
const PIVOT_RTOL: f64 = 1e-12;

/// LU factorization with partial pivoting, packed L\U storage.
pub struct Lu {
    lu: Mat,
    perm: Vec<usize>,
    swaps_odd: bool,
}

impl Lu {
    pub fn factor(a: &Mat) -> Result<Self> {
        assert!(a.is_square(), "LU requires a square matrix");
        let n = a.rows();
        let threshold = PIVOT_RTOL * a.norm_fro();
        let mut lu = a.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        let mut swaps_odd = false;

        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].abs();
            for i in (k + 1)..n {
                let v = lu[(i, k)].abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best < threshold || best == 0.0 {
                return Err(Error::SingularMatrix {
                    pivot: best,
                    threshold,
                });
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                perm.swap(k, p);
                swaps_odd = !swaps_odd;
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let factor = lu[(i, k)] / pivot;
                lu[(i, k)] = factor;
                for j in (k + 1)..n {
                    lu[(i, j)] -= factor * lu[(k, j)];
                }
            }
        }
        Ok(Self { lu, perm, swaps_odd })
    }

    pub fn solve_vec(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.rows();
        assert_eq!(b.len(), n, "rhs length mismatch");
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 1..n {
            let mut s = x[i];
            for (j, xj) in x.iter().enumerate().take(i) {
                s -= self.lu[(i, j)] * xj;
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for (j, xj) in x.iter().enumerate().skip(i + 1) {
                s -= self.lu[(i, j)] * xj;
            }
            x[i] = s / self.lu[(i, i)];
        }
        x
    }

    pub fn solve_mat(&self, b: &Mat) -> Mat {
        let mut out = Mat::zeros(b.rows(), b.cols());
        for j in 0..b.cols() {
            let col = self.solve_vec(&b.column(j));
            for i in 0..b.rows() {
                out[(i, j)] = col[i];
            }
        }
        out
    }

    /// ln|det A|, used for determinant-based scaling of matrix iterations.
    pub fn log_abs_det(&self) -> f64 {
        (0..self.lu.rows()).map(|i| self.lu[(i, i)].abs().ln()).sum()
    }

    pub fn det_sign(&self) -> f64 {
        let mut s = if self.swaps_odd { -1.0 } else { 1.0 };
        for i in 0..self.lu.rows() {
            if self.lu[(i, i)] < 0.0 {
                s = -s;
            }
        }
        s
    }
}

/// Solve A·X = B by partial-pivoting elimination.
pub fn solve_linear(a: &Mat, b: &Mat) -> Result<Mat> {
    if !a.is_square() {
        return Err(Error::InvalidInput("solve_linear needs a square A".to_string()));
    }
    if b.rows() != a.rows() {
        return Err(Error::InvalidInput(format!(
            "rhs has {} rows, expected {}",
            b.rows(),
            a.rows()
        )));
    }
    Ok(Lu::factor(a)?.solve_mat(b))
}

pub fn solve_linear_vec(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    if !a.is_square() {
        return Err(Error::InvalidInput("solve_linear needs a square A".to_string()));
    }
    if b.len() != a.rows() {
        return Err(Error::InvalidInput(format!(
            "rhs has length {}, expected {}",
            b.len(),
            a.rows()
        )));
    }
    Ok(Lu::factor(a)?.solve_vec(b))
}

pub fn inverse(a: &Mat) -> Result<Mat> {
    solve_linear(a, &Mat::identity(a.rows()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::mat;

    #[test]
    fn identity_solve_returns_rhs() {
        let b = Mat::from_rows(&[vec![1.5], vec![-2.0], vec![0.25]]).unwrap();
        let x = solve_linear(&Mat::identity(3), &b).unwrap();
        assert!((&x - &b).max_abs() < 1e-15);
    }

    #[test]
    fn diagonal_solve() {
        let a = Mat::from_rows(&[vec![2.0, 0.0], vec![0.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[vec![2.0], vec![8.0]]).unwrap();
        let x = solve_linear(&a, &b).unwrap();
        assert!((x[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((x[(1, 0)] - 2.0).abs() < 1e-15);
    }

    #[test]
    fn singular_matrix_is_reported() {
        let a = Mat::from_rows(&[vec![1.0, 2.0], vec![2.0, 4.0]]).unwrap();
        let b = Mat::from_rows(&[vec![1.0], vec![1.0]]).unwrap();
        match solve_linear(&a, &b) {
            Err(Error::SingularMatrix { .. }) => {}
            other => panic!("expected SingularMatrix, got {other:?}"),
        }
    }

    #[test]
    fn residual_meets_contract() {
        // fixed 5x5 system with entries of mixed scale
        let n = 5;
        let a = Mat::from_fn(n, n, |i, j| {
            ((i * 7 + j * 3 + 1) as f64).sin() + if i == j { 4.0 } else { 0.0 }
        });
        let b = Mat::from_fn(n, 2, |i, j| ((i + 2 * j) as f64).cos());
        let x = solve_linear(&a, &b).unwrap();
        let resid = (&(&a * &x) - &b).norm_fro();
        assert!(resid <= 1e-10 * b.norm_fro().max(1.0), "residual {resid}");
    }

    #[test]
    fn log_abs_det_matches_product() {
        let a = Mat::from_rows(&[vec![3.0, 1.0], vec![0.0, -2.0]]).unwrap();
        let lu = Lu::factor(&a).unwrap();
        assert!((lu.log_abs_det() - 6.0f64.ln()).abs() < 1e-14);
        assert_eq!(lu.det_sign(), -1.0);
        let _ = mat::dot(&[1.0], &[1.0]);
    }
}
