//! Analytic transient-performance calculus.
//!
//! Infinite-horizon integrals of quadratic or linear functions along a
//! stable affine flow ψ̇ = 𝒜ψ + β diverge whenever the limit point is not a
//! zero of the integrand. Such costs are represented as an [`ExtendedValue`]
//! b + c·Θ, where Θ stands for the divergent integral ∫₀^∞ 1 dt: c is the
//! steady growth rate and b the bounded transient excess. Closed forms:
//!
//! ```text
//! ∫ ψᵀ𝒬ψ dt = ‖ψ₀+𝒜⁻¹β‖²_𝒫 + 2βᵀ𝒜⁻ᵀ𝒬𝒜⁻¹(ψ₀+𝒜⁻¹β) + ‖𝒜⁻¹β‖²_𝒬·Θ
//! ∫ αᵀψ dt  = -αᵀ𝒜⁻¹(ψ₀+𝒜⁻¹β) - αᵀ𝒜⁻¹β·Θ
//! ```
//!
//! with 𝒫 the solution of 𝒫𝒜 + 𝒜ᵀ𝒫 + 𝒬 = 0. Specializing to the two
//! closed loops yields the exact transient gap of the near-optimal
//! controller: both rates cancel and the difference is the plain number
//! ½‖(y₀-x̄, λ₀-λ̄)‖² weighted by the primal-dual Lyapunov solution.

use serde::Serialize;

use crate::controllers::{
    build_s, input_gram, lambda_closed_loop, synthesize_overtaking, NearOptimalGains,
    OvertakingController,
};
use crate::error::{Error, Result};
use crate::linalg::mat::{self, Mat};
use crate::linalg::{
    eigenvalues, inverse, lyapunov_solve, solve_linear_vec, spectral_abscissa,
    unobservable_subspace,
};
use crate::plant::{CostWeights, DisturbedLtiSystem};

/// Cost value b + c·Θ with bounded part b and growth rate c.
///
/// Comparison is lexicographic on (rate, bounded part): any difference in
/// growth rate dominates every bounded offset.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct ExtendedValue {
    pub bounded: f64,
    pub theta_coeff: f64,
}

impl ExtendedValue {
    pub fn new(bounded: f64, theta_coeff: f64) -> Result<Self> {
        if !(bounded.is_finite() && theta_coeff.is_finite()) {
            return Err(Error::InvalidInput(
                "extended value parts must be finite".to_string(),
            ));
        }
        Ok(Self {
            bounded,
            theta_coeff,
        })
    }

    /// Finite-horizon reading b + c·T, useful against simulated costs.
    pub fn at_horizon(&self, t: f64) -> f64 {
        self.bounded + self.theta_coeff * t
    }
}

impl PartialEq for ExtendedValue {
    fn eq(&self, other: &Self) -> bool {
        self.theta_coeff == other.theta_coeff && self.bounded == other.bounded
    }
}

impl PartialOrd for ExtendedValue {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        match self.theta_coeff.partial_cmp(&other.theta_coeff) {
            Some(std::cmp::Ordering::Equal) => self.bounded.partial_cmp(&other.bounded),
            ord => ord,
        }
    }
}

impl std::ops::Add for ExtendedValue {
    type Output = ExtendedValue;
    fn add(self, rhs: ExtendedValue) -> ExtendedValue {
        ExtendedValue {
            bounded: self.bounded + rhs.bounded,
            theta_coeff: self.theta_coeff + rhs.theta_coeff,
        }
    }
}

impl std::ops::Sub for ExtendedValue {
    type Output = ExtendedValue;
    fn sub(self, rhs: ExtendedValue) -> ExtendedValue {
        ExtendedValue {
            bounded: self.bounded - rhs.bounded,
            theta_coeff: self.theta_coeff - rhs.theta_coeff,
        }
    }
}

fn require_hurwitz(acal: &Mat) -> Result<()> {
    let abscissa = spectral_abscissa(acal)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitz { max_real: abscissa });
    }
    Ok(())
}

fn require_psd(m: &Mat, name: &str) -> Result<()> {
    if !m.is_symmetric(1e-10) {
        return Err(Error::InvalidInput(format!("{name} must be symmetric")));
    }
    let min = eigenvalues(m)?
        .iter()
        .map(|z| z.re)
        .fold(f64::INFINITY, f64::min);
    if min < -1e-9 * m.norm_fro().max(1.0) {
        return Err(Error::InvalidInput(format!(
            "{name} must be positive semidefinite (min eigenvalue {min:.3e})"
        )));
    }
    Ok(())
}

/// ∫₀^∞ ψᵀ𝒬ψ dt along ψ̇ = 𝒜ψ + β from ψ₀, for Hurwitz 𝒜 and 𝒬 ⪰ 0.
pub fn quad_cost_index(
    acal: &Mat,
    qcal: &Mat,
    beta: &[f64],
    psi0: &[f64],
) -> Result<ExtendedValue> {
    require_hurwitz(acal)?;
    require_psd(qcal, "cost matrix")?;
    let w = solve_linear_vec(acal, beta)?;
    let s = mat::add(psi0, &w);
    let v = solve_linear_vec(acal, &s)?;
    let p = lyapunov_solve(acal, qcal)?;
    let bounded = p.quad_form(&s, &s) + 2.0 * qcal.quad_form(&w, &v);
    let theta = qcal.quad_form(&w, &w);
    ExtendedValue::new(bounded, theta)
}

/// ∫₀^∞ αᵀψ dt along ψ̇ = 𝒜ψ + β from ψ₀, for Hurwitz 𝒜.
pub fn lin_cost_index(
    acal: &Mat,
    alpha: &[f64],
    beta: &[f64],
    psi0: &[f64],
) -> Result<ExtendedValue> {
    require_hurwitz(acal)?;
    let w = solve_linear_vec(acal, beta)?;
    let s = mat::add(psi0, &w);
    let v = solve_linear_vec(acal, &s)?;
    ExtendedValue::new(-mat::dot(alpha, &v), -mat::dot(alpha, &w))
}

/// Infinite-horizon cost of the overtaking-optimal closed loop from x₀:
/// bounded part ½(x₀-x̄)ᵀP*(x₀-x̄) + (-x̄ᵀQ + ūᵀRK)(A-BK)⁻¹(x₀-x̄),
/// rate ½(x̄ᵀQx̄ + ūᵀRū) — the optimal steady-state cost.
pub fn optimal_index(
    ctrl: &OvertakingController,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    x0: &[f64],
) -> Result<ExtendedValue> {
    let ss = &ctrl.steady_state;
    let dx = mat::sub(x0, &ss.x_bar);
    let a_cl = ctrl.closed_loop_matrix(sys);
    let g = solve_linear_vec(&a_cl, &dx)?;
    // row vector -x̄ᵀQ + ūᵀRK applied to (A-BK)⁻¹(x₀-x̄)
    let row = mat::sub(
        &ctrl.gain.tr_matvec(&w.r.matvec(&ss.u_bar)),
        &w.q.matvec(&ss.x_bar),
    );
    let bounded = 0.5 * ctrl.p_star.quad_form(&dx, &dx) + mat::dot(&row, &g);
    let theta = w.stage_cost(&ss.x_bar, &ss.u_bar);
    ExtendedValue::new(bounded, theta)
}

/// Lower-right 2n x 2n block of the lifted cost matrix:
/// [[KᵀRK, -KᵀBᵀ], [-BK, BR⁻¹Bᵀ]].
pub(crate) fn q_tilde_2(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Mat {
    let k = &gains.feedback;
    let n = sys.state_dim();
    let ktrk = &(&k.t() * &w.r) * k;
    let ktbt = &k.t() * &sys.b.t();
    let mut q2 = Mat::zeros(2 * n, 2 * n);
    q2.set_block(0, 0, &ktrk);
    q2.set_block(0, n, &-&ktbt);
    q2.set_block(n, 0, &-&ktbt.t());
    q2.set_block(n, n, &input_gram(sys, w));
    q2
}

/// Full 3n x 3n lifted cost matrix of the λ-form loop, assembled blockwise.
pub(crate) fn q_tilde(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Mat {
    let k = &gains.feedback;
    let n = sys.state_dim();
    let ktrk = &(&k.t() * &w.r) * k;
    let ktbt = &k.t() * &sys.b.t();
    let mut qt = Mat::zeros(3 * n, 3 * n);
    qt.set_block(0, 0, &(&w.q + &ktrk));
    qt.set_block(0, n, &-&ktrk);
    qt.set_block(0, 2 * n, &ktbt);
    qt.set_block(n, 0, &-&ktrk);
    qt.set_block(n, n, &ktrk);
    qt.set_block(n, 2 * n, &-&ktbt);
    qt.set_block(2 * n, 0, &ktbt.t());
    qt.set_block(2 * n, n, &-&ktbt.t());
    qt.set_block(2 * n, 2 * n, &input_gram(sys, w));
    qt
}

/// Lyapunov solution of the primal-dual block: P̃^S·S + Sᵀ·P̃^S + Q̃₂ = 0.
fn primal_dual_lyapunov(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Result<Mat> {
    let s = build_s(gains, sys, w);
    let abscissa = spectral_abscissa(&s)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitzS { max_real: abscissa });
    }
    lyapunov_solve(&s, &q_tilde_2(gains, sys, w))
}

fn gap_from_parts(
    gains: &NearOptimalGains,
    ctrl: &OvertakingController,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    y0: &[f64],
    lambda0: &[f64],
) -> Result<f64> {
    let p_s = primal_dual_lyapunov(gains, sys, w)?;
    let offset = mat::concat(&[
        &mat::sub(y0, &ctrl.steady_state.x_bar),
        &mat::sub(lambda0, &ctrl.steady_state.lambda_bar),
    ]);
    Ok(0.5 * p_s.quad_form(&offset, &offset))
}

/// Exact transient excess ½‖(y₀-x̄, λ₀-λ̄)‖²_{P̃^{S*}} of the near-optimal
/// controller over the overtaking-optimal one.
pub fn analytic_gap(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    y0: &[f64],
    lambda0: &[f64],
) -> Result<f64> {
    let ctrl = synthesize_overtaking(sys, w)?;
    gap_from_parts(gains, &ctrl, sys, w, y0, lambda0)
}

/// Infinite-horizon cost of the near-optimal closed loop: the optimal index
/// plus a bounded, initial-state-dependent excess. The growth rates agree
/// exactly, so the comparison of the two controllers is a plain number.
pub fn near_optimal_index(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    x0: &[f64],
    y0: &[f64],
    lambda0: &[f64],
) -> Result<ExtendedValue> {
    let ctrl = synthesize_overtaking(sys, w)?;
    let base = optimal_index(&ctrl, sys, w, x0)?;
    let gap = gap_from_parts(gains, &ctrl, sys, w, y0, lambda0)?;
    Ok(base + ExtendedValue::new(gap, 0.0)?)
}

/// Outputs of the lifted-cost analysis of the λ-form loop.
#[derive(Clone, Debug)]
pub struct TildeAnalysis {
    /// 3n x 3n lifted cost matrix.
    pub q_tilde: Mat,
    /// Block-diagonal Lyapunov solution blockdiag(P*, P̃^{S*}).
    pub p_tilde_star: Mat,
    /// Explicit inverse of the λ-form drift matrix.
    pub a_tilde_inv: Mat,
}

/// Assemble the lifted cost matrix, verify the block-diagonal structure of
/// its Lyapunov solution against a direct solve, and build the block-wise
/// inverse of the λ-form drift.
pub fn full_tilde_analysis(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Result<TildeAnalysis> {
    let n = sys.state_dim();
    let ctrl = synthesize_overtaking(sys, w)?;
    let rel = lambda_closed_loop(gains, sys, w)?;
    let a_tilde = &rel.a_cl;

    let qt = q_tilde(gains, sys, w);
    let p_s = primal_dual_lyapunov(gains, sys, w)?;
    let p_tilde_star = Mat::block_diag(&[&ctrl.p_star, &p_s]);

    let direct = lyapunov_solve(a_tilde, &qt)?;
    let dev = (&direct - &p_tilde_star).norm_fro();
    let tol = 1e-8 * p_tilde_star.norm_fro().max(1.0);
    if dev > tol {
        return Err(Error::ResidualTooLarge {
            what: "block-diagonal Lyapunov structure",
            residual: dev,
            tol,
        });
    }

    // Ã⁻¹ = [[M⁻¹, -M⁻¹·N·S⁻¹], [0, S⁻¹]] with M = A-BK, N = [BK, -BR⁻¹Bᵀ]
    let m_inv = inverse(&a_tilde.block(0, 0, n, n))?;
    let n_blk = a_tilde.block(0, n, n, 2 * n);
    let s_inv = inverse(&a_tilde.block(n, n, 2 * n, 2 * n))?;
    let mut a_tilde_inv = Mat::zeros(3 * n, 3 * n);
    a_tilde_inv.set_block(0, 0, &m_inv);
    a_tilde_inv.set_block(0, n, &-&(&(&m_inv * &n_blk) * &s_inv));
    a_tilde_inv.set_block(n, n, &s_inv);

    let identity_dev = (&(a_tilde * &a_tilde_inv) - &Mat::identity(3 * n)).max_abs();
    if identity_dev > 1e-9 {
        return Err(Error::ResidualTooLarge {
            what: "drift inverse",
            residual: identity_dev,
            tol: 1e-9,
        });
    }

    Ok(TildeAnalysis {
        q_tilde: qt,
        p_tilde_star,
        a_tilde_inv,
    })
}

/// True iff the controller's initial offset (y₀-x̄, λ₀-λ̄) costs nothing:
/// equivalently, it lies in the unobservable subspace of (S, [RK, -Bᵀ]).
pub fn zero_gap_check(
    gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    y0: &[f64],
    lambda0: &[f64],
) -> Result<bool> {
    let ctrl = synthesize_overtaking(sys, w)?;
    let s = build_s(gains, sys, w);
    let abscissa = spectral_abscissa(&s)?;
    if abscissa >= 0.0 {
        return Err(Error::NotHurwitzS { max_real: abscissa });
    }
    let offset = mat::concat(&[
        &mat::sub(y0, &ctrl.steady_state.x_bar),
        &mat::sub(lambda0, &ctrl.steady_state.lambda_bar),
    ]);
    if mat::norm(&offset) == 0.0 {
        return Ok(true);
    }
    let c_tilde = Mat::hstack(&[&(&w.r * &gains.feedback), &-&sys.b.t()]);
    let hidden = unobservable_subspace(&s, &c_tilde)?;
    Ok(hidden.contains(&offset, 1e-8))
}

/// One point of the gain-scaling sweep.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapSweepPoint {
    pub k: f64,
    pub gap: f64,
    /// k·gap(k); constant across the sweep when the inverse-gain law holds.
    pub k_times_gap: f64,
}

/// Analytic gap under gains (k·K^y, k·K^λ) for each k in `ks`.
pub fn gap_scaling_sweep(
    base_gains: &NearOptimalGains,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    x0: &[f64],
    y0: &[f64],
    lambda0: &[f64],
    ks: &[f64],
) -> Result<Vec<GapSweepPoint>> {
    let ctrl = synthesize_overtaking(sys, w)?;
    let base = optimal_index(&ctrl, sys, w, x0)?;
    let mut out = Vec::with_capacity(ks.len());
    for &k in ks {
        let gains = base_gains.scaled(k)?;
        let gap = gap_from_parts(&gains, &ctrl, sys, w, y0, lambda0)?;
        let near = base + ExtendedValue::new(gap, 0.0)?;
        // the rates cancel by construction; the gap is the bounded difference
        debug_assert_eq!(near.theta_coeff, base.theta_coeff);
        out.push(GapSweepPoint {
            k,
            gap: near.bounded - base.bounded,
            k_times_gap: k * gap,
        });
    }
    Ok(out)
}

/// Analytic-vs-simulated comparison of the transient gap at one horizon.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapReport {
    pub analytic_gap: f64,
    pub simulated_gap_at_t: f64,
    pub horizon: f64,
    pub relative_error: f64,
}

impl GapReport {
    pub fn new(analytic_gap: f64, simulated_gap_at_t: f64, horizon: f64) -> Result<Self> {
        if analytic_gap < -1e-9 {
            return Err(Error::InvalidInput(format!(
                "analytic gap must be nonnegative, got {analytic_gap:.3e}"
            )));
        }
        let diff = (simulated_gap_at_t - analytic_gap).abs();
        let relative_error = if analytic_gap.abs() > 1e-12 * simulated_gap_at_t.abs().max(1.0) {
            diff / analytic_gap.abs()
        } else {
            diff
        };
        Ok(Self {
            analytic_gap,
            simulated_gap_at_t,
            horizon,
            relative_error,
        })
    }
}
