//! Minimal complex dense-matrix support for the eigenvalue kernel:
//! square storage, LU solve for inverse iteration, nothing more.

use num_complex::Complex64;

#[derive(Clone)]
pub(crate) struct CMat {
    pub n: usize,
    pub data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![Complex64::new(0.0, 0.0); n * n],
        }
    }

    pub fn from_real(a: &super::mat::Mat) -> Self {
        assert!(a.is_square());
        let n = a.rows();
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in 0..n {
                m[(i, j)] = Complex64::new(a[(i, j)], 0.0);
            }
        }
        m
    }

    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        let n = self.n;
        let mut out = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 0..n {
                s += self[(i, j)] * x[j];
            }
            out[i] = s;
        }
        out
    }

    /// In-place LU with partial pivoting; returns None when a pivot vanishes.
    pub fn lu_solve(&self, b: &[Complex64]) -> Option<Vec<Complex64>> {
        let n = self.n;
        let mut lu = self.clone();
        let mut x: Vec<Complex64> = b.to_vec();
        for k in 0..n {
            let mut p = k;
            let mut best = lu[(k, k)].norm();
            for i in (k + 1)..n {
                let v = lu[(i, k)].norm();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if best == 0.0 {
                return None;
            }
            if p != k {
                for j in 0..n {
                    let tmp = lu[(k, j)];
                    lu[(k, j)] = lu[(p, j)];
                    lu[(p, j)] = tmp;
                }
                x.swap(k, p);
            }
            let pivot = lu[(k, k)];
            for i in (k + 1)..n {
                let f = lu[(i, k)] / pivot;
                lu[(i, k)] = f;
                for j in (k + 1)..n {
                    let sub = f * lu[(k, j)];
                    lu[(i, j)] -= sub;
                }
                let sub = f * x[k];
                x[i] -= sub;
            }
        }
        for i in (0..n).rev() {
            let mut s = x[i];
            for j in (i + 1)..n {
                s -= lu[(i, j)] * x[j];
            }
            x[i] = s / lu[(i, i)];
        }
        Some(x)
    }
}

impl std::ops::Index<(usize, usize)> for CMat {
    type Output = Complex64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &Complex64 {
        &self.data[i * self.n + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut Complex64 {
        &mut self.data[i * self.n + j]
    }
}
