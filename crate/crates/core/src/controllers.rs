//! Controller synthesis.
//!
//! Two controllers are built for the same plant and cost:
//!
//! * the disturbance-aware controller u = -K(x - x̄) + ū with K from the
//!   Riccati equation, optimal in the overtaking sense among all admissible
//!   inputs, and
//! * a near-optimal controller that replaces (x̄, ū) by the live state of
//!   primal-dual gradient dynamics on the reduced Lagrangian of the
//!   steady-state program, so no disturbance information is needed.
//!
//! The primal-dual controller exists in two algebraically equivalent
//! realizations: the λ-form (analysis only, its multiplier equation needs d)
//! and the implementable μ-form obtained by the change of variables
//! μ = λ - K^λ·x, which removes d from every controller equation.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::linalg::mat::{self, Mat};
use crate::linalg::{eigenvalues, solve_linear, spectral_abscissa};
use crate::plant::{
    check_detectable, steady_state_solve, unstabilizable_modes, CostWeights, DisturbedLtiSystem,
    SteadyStateSolution,
};

const SPD_SYMMETRY_RTOL: f64 = 1e-10;

/// Riccati state feedback plus the optimal steady state it regulates to.
#[derive(Clone, Debug)]
pub struct OvertakingController {
    /// K = R⁻¹·Bᵀ·P*.
    pub gain: Mat,
    /// Stabilizing Riccati solution.
    pub p_star: Mat,
    pub steady_state: SteadyStateSolution,
}

impl OvertakingController {
    /// u = -K(x - x̄) + ū.
    pub fn control(&self, x: &[f64]) -> Vec<f64> {
        let dx = mat::sub(x, &self.steady_state.x_bar);
        mat::sub(&self.steady_state.u_bar, &self.gain.matvec(&dx))
    }

    /// A - B·K.
    pub fn closed_loop_matrix(&self, sys: &DisturbedLtiSystem) -> Mat {
        &sys.a - &(&sys.b * &self.gain)
    }
}

fn require_assumption_one(sys: &DisturbedLtiSystem, w: &CostWeights) -> Result<()> {
    if let Some(mode) = unstabilizable_modes(&sys.a, &sys.b)?.first() {
        return Err(Error::NotStabilizable {
            mode: (mode.re, mode.im),
        });
    }
    if !check_detectable(&sys.a, &w.q)? {
        let mode = unstabilizable_modes(&sys.a.t(), &w.q.t())?[0];
        return Err(Error::NotDetectable {
            mode: (mode.re, mode.im),
        });
    }
    Ok(())
}

/// Solve the Riccati equation and the steady-state program for the plant.
pub fn synthesize_overtaking(
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Result<OvertakingController> {
    require_assumption_one(sys, w)?;
    let p_star = crate::linalg::care_solve(&sys.a, &sys.b, &w.q, &w.r)?;
    let gain = solve_linear(&w.r, &(&sys.b.t() * &p_star))?;
    let steady_state = steady_state_solve(sys, w)?;
    Ok(OvertakingController {
        gain,
        p_star,
        steady_state,
    })
}

/// Positive definite step matrices of the primal-dual dynamics, paired with
/// the Riccati feedback they wrap.
#[derive(Clone, Debug)]
pub struct NearOptimalGains {
    /// Riccati feedback K, shared with the overtaking controller.
    pub feedback: Mat,
    pub k_y: Mat,
    pub k_lambda: Mat,
}

fn require_spd(m: &Mat, name: &str) -> Result<()> {
    if !m.is_symmetric(SPD_SYMMETRY_RTOL) {
        return Err(Error::InvalidInput(format!("{name} must be symmetric")));
    }
    let min = eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if min <= 0.0 {
        return Err(Error::InvalidInput(format!(
            "{name} must be positive definite (min eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

impl NearOptimalGains {
    pub fn new(ctrl: &OvertakingController, k_y: Mat, k_lambda: Mat) -> Result<Self> {
        let n = ctrl.gain.cols();
        if k_y.rows() != n || k_lambda.rows() != n {
            return Err(Error::InvalidInput(
                "gain matrices must be n x n".to_string(),
            ));
        }
        require_spd(&k_y, "K^y")?;
        require_spd(&k_lambda, "K^lambda")?;
        Ok(Self {
            feedback: ctrl.gain.clone(),
            k_y,
            k_lambda,
        })
    }

    /// Diagonal parameterization used by the command-line interface.
    pub fn from_diagonals(ctrl: &OvertakingController, ky: &[f64], klambda: &[f64]) -> Result<Self> {
        Self::new(ctrl, Mat::diag(ky), Mat::diag(klambda))
    }

    /// Both step matrices scaled by the same positive factor.
    pub fn scaled(&self, k: f64) -> Result<Self> {
        if !(k > 0.0 && k.is_finite()) {
            return Err(Error::InvalidInput(format!(
                "gain scale must be positive, got {k}"
            )));
        }
        Ok(Self {
            feedback: self.feedback.clone(),
            k_y: self.k_y.scale(k),
            k_lambda: self.k_lambda.scale(k),
        })
    }
}

/// B·R⁻¹·Bᵀ.
pub(crate) fn input_gram(sys: &DisturbedLtiSystem, w: &CostWeights) -> Mat {
    let rinv_bt = solve_linear(&w.r, &sys.b.t()).expect("R is positive definite by construction");
    (&sys.b * &rinv_bt).sym_part()
}

/// Saddle matrix of the reduced Lagrangian: [[-Q, -Aᵀ], [A, -B·R⁻¹·Bᵀ]].
pub fn build_t(sys: &DisturbedLtiSystem, w: &CostWeights) -> Mat {
    let n = sys.state_dim();
    let g = input_gram(sys, w);
    let mut t = Mat::zeros(2 * n, 2 * n);
    t.set_block(0, 0, &-&w.q);
    t.set_block(0, n, &-&sys.a.t());
    t.set_block(n, 0, &sys.a);
    t.set_block(n, n, &-&g);
    t
}

/// Primal-dual state matrix S = blockdiag(K^y, K^λ)·T.
pub fn build_s(gains: &NearOptimalGains, sys: &DisturbedLtiSystem, w: &CostWeights) -> Mat {
    let k_s = Mat::block_diag(&[&gains.k_y, &gains.k_lambda]);
    &k_s * &build_t(sys, w)
}

/// Which closed loop a realization describes.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub enum ClosedLoopForm {
    /// Plant under the overtaking-optimal controller; n states.
    Optimal,
    /// Plant plus primal-dual dynamics in (x, y, λ) coordinates; 3n states.
    /// Analysis only: the multiplier equation drives itself with C·d.
    Lambda,
    /// Implementable form in (x, y, μ) coordinates; 3n states. The
    /// disturbance enters the plant block only.
    Mu,
}

/// Affine closed loop ż = A_cl·z + b_cl·1{t ≥ t₀} with the algebraic input
/// map u = F·z + g·1{t ≥ t₀}; the indicator models the disturbance switching
/// on at t₀ (before onset the steady-state targets are the origin, so both
/// forcing terms vanish together).
#[derive(Clone, Debug, Serialize)]
pub struct ClosedLoopRealization {
    pub form: ClosedLoopForm,
    pub a_cl: Mat,
    pub b_cl: Vec<f64>,
    pub input_map: Mat,
    pub input_bias: Vec<f64>,
    /// Names of the state blocks, in order.
    pub labels: Vec<String>,
}

impl ClosedLoopRealization {
    pub fn state_dim(&self) -> usize {
        self.a_cl.rows()
    }

    /// JSON snapshot of the realization (drift, forcing, input map, labels)
    /// for reproducibility alongside exported trajectories.
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("realization serialization cannot fail")
    }

    /// Equilibrium with the disturbance on: the solution of A_cl·z + b_cl = 0.
    pub fn equilibrium(&self) -> Result<Vec<f64>> {
        let minus_b: Vec<f64> = self.b_cl.iter().map(|v| -v).collect();
        crate::linalg::solve_linear_vec(&self.a_cl, &minus_b)
    }

    /// Input at a state, with the disturbance indicator resolved.
    pub fn input_at(&self, z: &[f64], disturbed: bool) -> Vec<f64> {
        let mut u = self.input_map.matvec(z);
        if disturbed {
            u = mat::add(&u, &self.input_bias);
        }
        u
    }
}

/// Plant under u = -K(x - x̄) + ū, reduced with the steady-state feasibility
/// identity to ẋ = (A-BK)x - (A-BK)x̄.
pub fn optimal_closed_loop(
    ctrl: &OvertakingController,
    sys: &DisturbedLtiSystem,
) -> ClosedLoopRealization {
    let a_cl = ctrl.closed_loop_matrix(sys);
    let b_cl: Vec<f64> = a_cl.matvec(&ctrl.steady_state.x_bar).iter().map(|v| -v).collect();
    let input_bias = mat::add(
        &ctrl.gain.matvec(&ctrl.steady_state.x_bar),
        &ctrl.steady_state.u_bar,
    );
    ClosedLoopRealization {
        form: ClosedLoopForm::Optimal,
        a_cl,
        b_cl,
        input_map: -&ctrl.gain,
        input_bias,
        labels: vec!["x".to_string()],
    }
}

fn require_hurwitz_s(s: &Mat) -> Result<()> {
    let abscissa = spectral_abscissa(s)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitzS { max_real: abscissa });
    }
    Ok(())
}

/// λ-form closed loop: state (x, y, λ), block upper-triangular drift
/// [[A-BK, N], [0, S]] with N = [BK, -B·R⁻¹·Bᵀ].
pub fn lambda_closed_loop(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Result<ClosedLoopRealization> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    let s = build_s(gains, sys, w);
    require_hurwitz_s(&s)?;

    let k = &gains.feedback;
    let g = input_gram(sys, w);
    let bk = &sys.b * k;
    let mut a_cl = Mat::zeros(3 * n, 3 * n);
    a_cl.set_block(0, 0, &(&sys.a - &bk));
    a_cl.set_block(0, n, &bk);
    a_cl.set_block(0, 2 * n, &-&g);
    a_cl.set_block(n, n, &s.block(0, 0, n, n));
    a_cl.set_block(n, 2 * n, &s.block(0, n, n, n));
    a_cl.set_block(2 * n, n, &s.block(n, 0, n, n));
    a_cl.set_block(2 * n, 2 * n, &s.block(n, n, n, n));

    let cd = sys.cd();
    let b_cl = mat::concat(&[&cd, &vec![0.0; n], &gains.k_lambda.matvec(&cd)]);

    let rinv_bt = solve_linear(&w.r, &sys.b.t())?;
    let mut input_map = Mat::zeros(m, 3 * n);
    input_map.set_block(0, 0, &-k);
    input_map.set_block(0, n, k);
    input_map.set_block(0, 2 * n, &-&rinv_bt);

    Ok(ClosedLoopRealization {
        form: ClosedLoopForm::Lambda,
        a_cl,
        b_cl,
        input_map,
        input_bias: vec![0.0; m],
        labels: vec!["x".to_string(), "y".to_string(), "lambda".to_string()],
    })
}

/// Implementable μ-form closed loop: state (x, y, μ) with
///     ẋ = Ax + Bu + Cd
///     ẏ = -K^y(Qy + Aᵀ(μ + K^μ x))
///     μ̇ = K^μ(A - BK)(y - x)
///     u = -K(x - y) - R⁻¹Bᵀ(μ + K^μ x)
/// where K^μ is a copy of K^λ. No controller equation reads d.
pub fn mu_closed_loop(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Result<ClosedLoopRealization> {
    let n = sys.state_dim();
    let m = sys.input_dim();
    require_hurwitz_s(&build_s(gains, sys, w))?;

    let k = &gains.feedback;
    let k_mu = &gains.k_lambda;
    let g = input_gram(sys, w);
    let bk = &sys.b * k;
    let a_minus_bk = &sys.a - &bk;
    let kmu_acl = k_mu * &a_minus_bk;

    let mut a_cl = Mat::zeros(3 * n, 3 * n);
    a_cl.set_block(0, 0, &(&a_minus_bk - &(&g * k_mu)));
    a_cl.set_block(0, n, &bk);
    a_cl.set_block(0, 2 * n, &-&g);
    a_cl.set_block(n, 0, &-&(&(&gains.k_y * &sys.a.t()) * k_mu));
    a_cl.set_block(n, n, &-&(&gains.k_y * &w.q));
    a_cl.set_block(n, 2 * n, &-&(&gains.k_y * &sys.a.t()));
    a_cl.set_block(2 * n, 0, &-&kmu_acl);
    a_cl.set_block(2 * n, n, &kmu_acl);

    let cd = sys.cd();
    let b_cl = mat::concat(&[&cd, &vec![0.0; 2 * n]]);

    let rinv_bt = solve_linear(&w.r, &sys.b.t())?;
    let mut input_map = Mat::zeros(m, 3 * n);
    input_map.set_block(0, 0, &-&(k + &(&rinv_bt * k_mu)));
    input_map.set_block(0, n, k);
    input_map.set_block(0, 2 * n, &-&rinv_bt);

    Ok(ClosedLoopRealization {
        form: ClosedLoopForm::Mu,
        a_cl,
        b_cl,
        input_map,
        input_bias: vec![0.0; m],
        labels: vec!["x".to_string(), "y".to_string(), "mu".to_string()],
    })
}

/// Initial state of the μ-form that matches a λ-form start:
/// μ₀ = λ₀ - K^λ·x₀, other components copied.
pub fn mu_initial_from_lambda(
    x0: &[f64],
    y0: &[f64],
    lambda0: &[f64],
    k_lambda: &Mat,
) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mu0 = mat::sub(lambda0, &k_lambda.matvec(x0));
    (x0.to_vec(), y0.to_vec(), mu0)
}

/// Reduced Lagrangian L̃(y, λ) = ½(yᵀQy + λᵀBR⁻¹Bᵀλ) + λᵀ(Ay - BR⁻¹Bᵀλ + Cd).
pub fn reduced_lagrangian(
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    y: &[f64],
    lambda: &[f64],
) -> f64 {
    let g = input_gram(sys, w);
    let g_lam = g.matvec(lambda);
    let quad = 0.5 * (w.q.quad_form(y, y) + mat::dot(lambda, &g_lam));
    let mut constraint = mat::sub(&sys.a.matvec(y), &g_lam);
    constraint = mat::add(&constraint, &sys.cd());
    quad + mat::dot(lambda, &constraint)
}

/// Running Bellman defect 𝕃(x, u) = f(x, u) + ∂V/∂t + (∂V/∂x)ᵀ(Ax + Bu + Cd)
/// for the candidate value function
/// V(x, t) = -L̃(x̄, λ̄)·t + ½(x-x̄)ᵀP*(x-x̄) + λ̄ᵀ(x-x̄);
/// it factors as ½‖u - ū + K(x - x̄)‖²_R and vanishes at the minimizing input.
pub fn hjb_integrand(
    ctrl: &OvertakingController,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    x: &[f64],
    u: &[f64],
) -> f64 {
    let ss = &ctrl.steady_state;
    let dx = mat::sub(x, &ss.x_bar);
    // ∂V/∂x = P*(x - x̄) + λ̄ ;  ∂V/∂t = -L̃(x̄, λ̄)
    let grad = mat::add(&ctrl.p_star.matvec(&dx), &ss.lambda_bar);
    let dv_dt = -reduced_lagrangian(sys, w, &ss.x_bar, &ss.lambda_bar);
    let mut xdot = mat::add(&sys.a.matvec(x), &sys.b.matvec(u));
    xdot = mat::add(&xdot, &sys.cd());
    w.stage_cost(x, u) + dv_dt + mat::dot(&grad, &xdot)
}

/// |𝕃| evaluated at the minimizing input h(x) = -K(x - x̄) + ū. Zero (to
/// round-off) for every state; the residual is independent of time because
/// ∂V/∂t is constant.
pub fn hjb_residual(
    ctrl: &OvertakingController,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    x: &[f64],
) -> f64 {
    hjb_integrand(ctrl, sys, w, x, &ctrl.control(x)).abs()
}
