//! Disturbed LTI plant ẋ = Ax + Bu + Cd, its quadratic steady-state program
//!     min ½(yᵀQy + uᵀRu)  s.t.  Ay + Bu + Cd = 0,
//! stabilizability/detectability validation, and the KKT solve that produces
//! the unique optimal steady state (x̄, ū, λ̄).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::mat::{self, Mat};
use crate::linalg::{eigenvalues, rank_rtol, Complex64, Lu, RANK_RTOL};

/// Modes with real part above this are treated as unstable-or-marginal and
/// must pass the Hautus rank test.
const HAUTUS_MARGIN: f64 = -1e-9;

const SYMMETRY_RTOL: f64 = 1e-10;
const PSD_TOL: f64 = 1e-10;

/// Plant matrices and a fixed disturbance vector.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DisturbedLtiSystem {
    pub a: Mat,
    pub b: Mat,
    pub c: Mat,
    pub d: Vec<f64>,
}

impl DisturbedLtiSystem {
    pub fn new(a: Mat, b: Mat, c: Mat, d: Vec<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidInput("A must be square".to_string()));
        }
        let n = a.rows();
        if b.rows() != n {
            return Err(Error::InvalidInput("B must have n rows".to_string()));
        }
        if c.rows() != n {
            return Err(Error::InvalidInput("C must have n rows".to_string()));
        }
        if c.cols() != d.len() {
            return Err(Error::InvalidInput(
                "d length must match the column count of C".to_string(),
            ));
        }
        if !d.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidInput("d must be finite".to_string()));
        }
        Ok(Self { a, b, c, d })
    }

    pub fn state_dim(&self) -> usize {
        self.a.rows()
    }

    pub fn input_dim(&self) -> usize {
        self.b.cols()
    }

    pub fn disturbance_dim(&self) -> usize {
        self.c.cols()
    }

    /// The constant forcing term C·d.
    pub fn cd(&self) -> Vec<f64> {
        self.c.matvec(&self.d)
    }

    /// Same plant with a different disturbance vector.
    pub fn with_disturbance(&self, d: Vec<f64>) -> Result<Self> {
        Self::new(self.a.clone(), self.b.clone(), self.c.clone(), d)
    }
}

/// Quadratic cost weights: Q ⪰ 0 on the state, R ≻ 0 on the input.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CostWeights {
    pub q: Mat,
    pub r: Mat,
}

impl CostWeights {
    pub fn new(q: Mat, r: Mat) -> Result<Self> {
        if !q.is_symmetric(SYMMETRY_RTOL) {
            return Err(Error::InvalidInput("Q must be symmetric".to_string()));
        }
        if !r.is_symmetric(SYMMETRY_RTOL) {
            return Err(Error::InvalidInput("R must be symmetric".to_string()));
        }
        let q_min = min_real_eig(&q)?;
        if q_min < -PSD_TOL * q.norm_fro().max(1.0) {
            return Err(Error::InvalidInput(format!(
                "Q must be positive semidefinite (min eigenvalue {q_min:.3e})"
            )));
        }
        let r_min = min_real_eig(&r)?;
        if r_min <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "R must be positive definite (min eigenvalue {r_min:.3e})"
            )));
        }
        Ok(Self { q, r })
    }

    /// Running cost f(x, u) = ½(xᵀQx + uᵀRu).
    pub fn stage_cost(&self, x: &[f64], u: &[f64]) -> f64 {
        0.5 * (self.q.quad_form(x, x) + self.r.quad_form(u, u))
    }
}

fn min_real_eig(m: &Mat) -> Result<f64> {
    Ok(eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min))
}

/// Optimal steady state together with the constraint multiplier.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SteadyStateSolution {
    pub x_bar: Vec<f64>,
    pub u_bar: Vec<f64>,
    pub lambda_bar: Vec<f64>,
}

impl SteadyStateSolution {
    /// Residual norms of the three stationarity/feasibility conditions:
    /// (‖Qx̄ + Aᵀλ̄‖, ‖Rū + Bᵀλ̄‖, ‖Ax̄ + Bū + Cd‖).
    pub fn kkt_residuals(&self, sys: &DisturbedLtiSystem, w: &CostWeights) -> [f64; 3] {
        let r1 = mat::add(&w.q.matvec(&self.x_bar), &sys.a.tr_matvec(&self.lambda_bar));
        let r2 = mat::add(&w.r.matvec(&self.u_bar), &sys.b.tr_matvec(&self.lambda_bar));
        let mut r3 = mat::add(&sys.a.matvec(&self.x_bar), &sys.b.matvec(&self.u_bar));
        r3 = mat::add(&r3, &sys.cd());
        [mat::norm(&r1), mat::norm(&r2), mat::norm(&r3)]
    }
}

/// Rank over the complex field of [A - λI, B] via realification:
/// rank_C(M) = rank_R([[Re M, -Im M], [Im M, Re M]]) / 2.
fn hautus_rank(a: &Mat, b: &Mat, lambda: Complex64) -> Result<usize> {
    let n = a.rows();
    let m = b.cols();
    let mut re = Mat::zeros(n, n + m);
    let mut im = Mat::zeros(n, n + m);
    for i in 0..n {
        for j in 0..n {
            re[(i, j)] = a[(i, j)];
        }
        re[(i, i)] -= lambda.re;
        im[(i, i)] = -lambda.im;
        for j in 0..m {
            re[(i, n + j)] = b[(i, j)];
        }
    }
    let top = Mat::hstack(&[&re, &-&im]);
    let bottom = Mat::hstack(&[&im, &re]);
    let real_rank = rank_rtol(&Mat::vstack(&[&top, &bottom]), RANK_RTOL)?;
    Ok(real_rank / 2)
}

/// Eigenvalues of A with Re λ ≥ -1e-9 at which [A - λI, B] loses row rank.
pub fn unstabilizable_modes(a: &Mat, b: &Mat) -> Result<Vec<Complex64>> {
    assert!(a.is_square());
    assert_eq!(b.rows(), a.rows(), "B must have n rows");
    let n = a.rows();
    let mut failures = Vec::new();
    for lambda in eigenvalues(a)? {
        if lambda.re >= HAUTUS_MARGIN && hautus_rank(a, b, lambda)? < n {
            failures.push(lambda);
        }
    }
    Ok(failures)
}

/// Hautus test: every unstable-or-marginal mode of A is controllable from B.
pub fn check_stabilizable(a: &Mat, b: &Mat) -> Result<bool> {
    Ok(unstabilizable_modes(a, b)?.is_empty())
}

/// Detectability of (A, Q) as stabilizability of the transposed pair.
pub fn check_detectable(a: &Mat, q: &Mat) -> Result<bool> {
    Ok(unstabilizable_modes(&a.t(), &q.t())?.is_empty())
}

/// Solve the (2n+m)-dimensional KKT system
///     [[Q, 0, Aᵀ], [0, R, Bᵀ], [A, B, 0]]·(x̄, ū, λ̄) = (0, 0, -Cd).
///
/// Rank deficiency of this matrix signals a violated stabilizability or
/// detectability assumption and is reported as `SingularKkt`.
pub fn steady_state_solve(
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Result<SteadyStateSolution> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    if w.q.rows() != n || w.r.rows() != m {
        return Err(Error::InvalidInput(
            "cost weight dimensions do not match the plant".to_string(),
        ));
    }
    let dim = 2 * n + m;
    let mut kkt = Mat::zeros(dim, dim);
    kkt.set_block(0, 0, &w.q);
    kkt.set_block(0, n + m, &sys.a.t());
    kkt.set_block(n, n, &w.r);
    kkt.set_block(n, n + m, &sys.b.t());
    kkt.set_block(n + m, 0, &sys.a);
    kkt.set_block(n + m, n, &sys.b);

    let mut rhs = vec![0.0; dim];
    let cd = sys.cd();
    for i in 0..n {
        rhs[n + m + i] = -cd[i];
    }

    let lu = Lu::factor(&kkt).map_err(|_| Error::SingularKkt)?;
    let sol = lu.solve_vec(&rhs);
    let out = SteadyStateSolution {
        x_bar: sol[..n].to_vec(),
        u_bar: sol[n..n + m].to_vec(),
        lambda_bar: sol[n + m..].to_vec(),
    };

    let res = out.kkt_residuals(sys, w);
    let scale = mat::norm(&cd).max(mat::norm(&sol)).max(1.0);
    if res.iter().any(|&r| r > 1e-8 * scale) {
        return Err(Error::SingularKkt);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// System definition file (JSON): keys A, B, C, d, Q, R as nested row-major
// arrays. Ragged rows and non-finite numbers are rejected.
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct SystemFile {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Vec<Vec<f64>>,
    d: Vec<f64>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
}

pub fn system_from_json(text: &str) -> Result<(DisturbedLtiSystem, CostWeights)> {
    let raw: SystemFile = serde_json::from_str(text)
        .map_err(|e| Error::InvalidInput(format!("system file: {e}")))?;
    let sys = DisturbedLtiSystem::new(
        Mat::from_rows(&raw.a)?,
        Mat::from_rows(&raw.b)?,
        Mat::from_rows(&raw.c)?,
        raw.d,
    )?;
    let w = CostWeights::new(Mat::from_rows(&raw.q)?, Mat::from_rows(&raw.r)?)?;
    if w.q.rows() != sys.state_dim() {
        return Err(Error::InvalidInput("Q dimension must match A".to_string()));
    }
    if w.r.rows() != sys.input_dim() {
        return Err(Error::InvalidInput("R dimension must match B".to_string()));
    }
    Ok((sys, w))
}

pub fn system_to_json(sys: &DisturbedLtiSystem, w: &CostWeights) -> String {
    let to_rows = |m: &Mat| -> Vec<Vec<f64>> { (0..m.rows()).map(|i| m.row(i).to_vec()).collect() };
    let raw = SystemFile {
        a: to_rows(&sys.a),
        b: to_rows(&sys.b),
        c: to_rows(&sys.c),
        d: sys.d.clone(),
        q: to_rows(&w.q),
        r: to_rows(&w.r),
    };
    serde_json::to_string_pretty(&raw).expect("system serialization cannot fail")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn example_double_integrator() -> (DisturbedLtiSystem, CostWeights) {
        let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
        let b = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let c = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        let sys = DisturbedLtiSystem::new(a, b, c, vec![1.0]).unwrap();
        let w = CostWeights::new(Mat::identity(2), Mat::identity(1)).unwrap();
        (sys, w)
    }

    #[test]
    fn hurwitz_plant_with_no_input_is_stabilizable() {
        let a = Mat::diag(&[-1.0, -2.0]);
        let b = Mat::zeros(2, 1);
        assert!(check_stabilizable(&a, &b).unwrap());
    }

    #[test]
    fn decoupled_unstable_mode_is_caught() {
        let a = Mat::diag(&[1.0, -1.0]);
        let b = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
        assert!(!check_stabilizable(&a, &b).unwrap());
        let modes = unstabilizable_modes(&a, &b).unwrap();
        assert_eq!(modes.len(), 1);
        assert!((modes[0].re - 1.0).abs() < 1e-10);
    }

    #[test]
    fn full_rank_output_is_detectable() {
        let a = Mat::from_rows(&[vec![3.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(check_detectable(&a, &Mat::identity(2)).unwrap());
        assert!(!check_detectable(&Mat::diag(&[1.0, -1.0]), &Mat::zeros(2, 2)).unwrap());
    }

    #[test]
    fn zero_disturbance_gives_zero_optimum() {
        let (sys, w) = example_double_integrator();
        let sys = sys.with_disturbance(vec![0.0]).unwrap();
        let ss = steady_state_solve(&sys, &w).unwrap();
        assert!(mat::norm(&ss.x_bar) < 1e-12);
        assert!(mat::norm(&ss.u_bar) < 1e-12);
        assert!(mat::norm(&ss.lambda_bar) < 1e-12);
    }

    #[test]
    fn double_integrator_steady_state() {
        let (sys, w) = example_double_integrator();
        let ss = steady_state_solve(&sys, &w).unwrap();
        assert!(mat::norm(&ss.x_bar) < 1e-12);
        assert!((ss.u_bar[0] + 1.0).abs() < 1e-12);
        assert!(ss.lambda_bar[0].abs() < 1e-12);
        assert!((ss.lambda_bar[1] - 1.0).abs() < 1e-12);
        let res = ss.kkt_residuals(&sys, &w);
        assert!(res.iter().all(|&r| r < 1e-12));
    }

    #[test]
    fn disturbance_scaling_is_linear() {
        let (sys, w) = example_double_integrator();
        let ss1 = steady_state_solve(&sys, &w).unwrap();
        let sys2 = sys.with_disturbance(vec![2.0]).unwrap();
        let ss2 = steady_state_solve(&sys2, &w).unwrap();
        for i in 0..2 {
            assert!((ss2.x_bar[i] - 2.0 * ss1.x_bar[i]).abs() < 1e-10);
            assert!((ss2.lambda_bar[i] - 2.0 * ss1.lambda_bar[i]).abs() < 1e-10);
        }
        assert!((ss2.u_bar[0] - 2.0 * ss1.u_bar[0]).abs() < 1e-10);
    }

    #[test]
    fn cost_weights_validation() {
        assert!(CostWeights::new(Mat::diag(&[1.0, -0.5]), Mat::identity(1)).is_err());
        assert!(CostWeights::new(Mat::identity(2), Mat::diag(&[0.0])).is_err());
        let asym = Mat::from_rows(&[vec![1.0, 0.5], vec![0.0, 1.0]]).unwrap();
        assert!(CostWeights::new(asym, Mat::identity(2)).is_err());
    }

    #[test]
    fn json_round_trip_and_rejections() {
        let (sys, w) = example_double_integrator();
        let text = system_to_json(&sys, &w);
        let (sys2, w2) = system_from_json(&text).unwrap();
        assert_eq!(sys2.a, sys.a);
        assert_eq!(w2.r, w.r);

        let ragged = r#"{"A": [[0,1],[0]], "B": [[0],[1]], "C": [[0],[1]],
                         "d": [1], "Q": [[1,0],[0,1]], "R": [[1]]}"#;
        assert!(system_from_json(ragged).is_err());
        let bad_dim = r#"{"A": [[0,1],[0,0]], "B": [[0],[1]], "C": [[0],[1]],
                          "d": [1], "Q": [[1]], "R": [[1]]}"#;
        assert!(system_from_json(bad_dim).is_err());
    }
}
