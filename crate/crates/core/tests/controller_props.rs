//! Closed-loop structure and equivalence properties, exercised on the
//! benchmark network and the double-integrator example.

mod common;

use common::*;
use steadyctl_core::casestudy::{to_lti, PowerNetwork};
use steadyctl_core::controllers::{
    build_s, hjb_integrand, hjb_residual, lambda_closed_loop, mu_closed_loop,
    mu_initial_from_lambda, optimal_closed_loop, synthesize_overtaking, NearOptimalGains,
};
use steadyctl_core::linalg::mat::{self, Mat};
use steadyctl_core::linalg::{is_hurwitz, matrix_exponential, solve_linear_vec};
use steadyctl_core::plant::{CostWeights, DisturbedLtiSystem};
use steadyctl_core::sim::{simulate, SimConfig};

fn benchmark() -> (DisturbedLtiSystem, CostWeights, Vec<f64>, Vec<f64>) {
    let net = PowerNetwork::four_bus();
    let (sys0, w) = to_lti(&net).unwrap();
    let sys = sys0.with_disturbance(net.benchmark_disturbance()).unwrap();
    let (ky, kl) = net.default_gain_diagonals();
    (sys, w, ky, kl)
}

fn example_one() -> (DisturbedLtiSystem, CostWeights) {
    let a = Mat::from_rows(&[vec![0.0, 1.0], vec![0.0, 0.0]]).unwrap();
    let b = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
    let c = Mat::from_rows(&[vec![0.0], vec![1.0]]).unwrap();
    let sys = DisturbedLtiSystem::new(a, b, c, vec![1.0]).unwrap();
    let w = CostWeights::new(Mat::identity(2), Mat::identity(1)).unwrap();
    (sys, w)
}

#[test]
fn lambda_form_is_hurwitz_with_matching_equilibrium() {
    let (sys, w, ky, kl) = benchmark();
    let ctrl = synthesize_overtaking(&sys, &w).unwrap();
    let gains = NearOptimalGains::from_diagonals(&ctrl, &ky, &kl).unwrap();

    assert!(is_hurwitz(&ctrl.closed_loop_matrix(&sys), 0.0).unwrap());
    assert!(is_hurwitz(&build_s(&gains, &sys, &w), 0.0).unwrap());

    let rel = lambda_closed_loop(&gains, &sys, &w).unwrap();
    assert!(is_hurwitz(&rel.a_cl, 0.0).unwrap());

    let ss = &ctrl.steady_state;
    let z_bar = mat::concat(&[&ss.x_bar, &ss.x_bar, &ss.lambda_bar]);
    let resid = mat::norm(&mat::add(&rel.a_cl.matvec(&z_bar), &rel.b_cl));
    assert!(resid <= 1e-8, "equilibrium residual {resid}");
}

#[test]
fn optimal_loop_reaches_the_steady_state() {
    let (sys, w, _, _) = benchmark();
    let ctrl = synthesize_overtaking(&sys, &w).unwrap();
    let rel = optimal_closed_loop(&ctrl, &sys);
    let cfg = SimConfig::new(40.0, 1e-3, 1.0, 200).unwrap();
    let traj = simulate(&rel, &sys, &w, &vec![0.0; sys.state_dim()], &cfg).unwrap();
    let err = mat::norm(&mat::sub(traj.final_state(), &ctrl.steady_state.x_bar));
    assert!(err <= 1e-4, "distance to optimum at the horizon: {err}");
    // the input settles at the optimal steady input
    let u_err = mat::norm(&mat::sub(
        traj.inputs.last().unwrap(),
        &ctrl.steady_state.u_bar,
    ));
    assert!(u_err <= 1e-4, "input distance {u_err}");
}

#[test]
fn primal_dual_dynamics_alone_converge() {
    // (y, λ) flow: ψ̇ = Sψ + (0, K^λ·Cd), evaluated through the exponential
    let (sys, w, ky, kl) = benchmark();
    let ctrl = synthesize_overtaking(&sys, &w).unwrap();
    let gains = NearOptimalGains::from_diagonals(&ctrl, &ky, &kl).unwrap();
    let n = sys.state_dim();
    let s = build_s(&gains, &sys, &w);
    let beta = mat::concat(&[&vec![0.0; n], &gains.k_lambda.matvec(&sys.cd())]);

    let s_inv_beta = solve_linear_vec(&s, &beta).unwrap();
    let horizon = 39.0;
    let flow = matrix_exponential(&s, horizon);
    let psi = mat::sub(&flow.matvec(&s_inv_beta), &s_inv_beta);

    let ss = &ctrl.steady_state;
    let y_err = mat::norm(&mat::sub(&psi[..n], &ss.x_bar));
    let l_err = mat::norm(&mat::sub(&psi[n..], &ss.lambda_bar));
    assert!(y_err <= 1e-3, "primal state error {y_err}");
    assert!(l_err <= 1e-3, "multiplier error {l_err}");

    // the recovered input -R⁻¹Bᵀλ settles at ū
    let rinv_bt =
        steadyctl_core::linalg::solve_linear(&w.r, &sys.b.t()).unwrap();
    let u = mat::scale(&rinv_bt.matvec(&psi[n..]), -1.0);
    assert!(mat::norm(&mat::sub(&u, &ss.u_bar)) <= 1e-3);
}

#[test]
fn mu_and_lambda_forms_trace_the_same_trajectories() {
    let (sys, w, ky, kl) = benchmark();
    let ctrl = synthesize_overtaking(&sys, &w).unwrap();
    let gains = NearOptimalGains::from_diagonals(&ctrl, &ky, &kl).unwrap();
    let n = sys.state_dim();

    let rel_l = lambda_closed_loop(&gains, &sys, &w).unwrap();
    let rel_m = mu_closed_loop(&gains, &sys, &w).unwrap();

    // nonzero initial conditions exercise the transform properly
    let mut rng = rng(7);
    let x0 = rand_vec(&mut rng, n, 0.5);
    let y0 = rand_vec(&mut rng, n, 0.5);
    let l0 = rand_vec(&mut rng, n, 0.5);
    let (xm, ym, mu0) = mu_initial_from_lambda(&x0, &y0, &l0, &gains.k_lambda);

    let cfg = SimConfig::new(40.0, 1e-3, 1.0, 100).unwrap();
    let z0_l = mat::concat(&[&x0, &y0, &l0]);
    let z0_m = mat::concat(&[&xm, &ym, &mu0]);
    let traj_l = simulate(&rel_l, &sys, &w, &z0_l, &cfg).unwrap();
    let traj_m = simulate(&rel_m, &sys, &w, &z0_m, &cfg).unwrap();

    let mut worst_x = 0.0f64;
    let mut worst_mu = 0.0f64;
    for (zl, zm) in traj_l.states.iter().zip(&traj_m.states) {
        let dx = mat::norm(&mat::sub(&zm[..n], &zl[..n]));
        worst_x = worst_x.max(dx);
        // μ(t) = λ(t) - K^λ·x(t) along the whole path
        let mu_from_lambda = mat::sub(&zl[2 * n..], &gains.k_lambda.matvec(&zl[..n]));
        let dmu = mat::norm(&mat::sub(&zm[2 * n..], &mu_from_lambda));
        worst_mu = worst_mu.max(dmu);
    }
    assert!(worst_x <= 1e-6, "plant trajectories diverge: {worst_x}");
    assert!(worst_mu <= 1e-6, "transform violated: {worst_mu}");
}

#[test]
fn saddle_matrix_inverse_satisfies_the_block_identities() {
    // with T⁻¹ = [[T₁, T₂], [T₃, T₄]]:
    //   -Q·T₁ - Aᵀ·T₃ = I      -Q·T₂ - Aᵀ·T₄ = 0
    //    A·T₁ - G·T₃  = 0       A·T₂ - G·T₄  = I
    let mut cases: Vec<(DisturbedLtiSystem, CostWeights)> = vec![example_one()];
    let (sys_b, w_b, _, _) = benchmark();
    cases.push((sys_b, w_b));
    let mut rng = rng(17);
    for _ in 0..5 {
        cases.push(rand_plant(&mut rng, 4, 2));
    }

    for (sys, w) in &cases {
        let n = sys.state_dim();
        let t = steadyctl_core::controllers::build_t(sys, w);
        let Ok(t_inv) = steadyctl_core::linalg::inverse(&t) else {
            continue; // singular saddle matrix: skip (A singular with Q ⪰ 0 only)
        };
        let t1 = t_inv.block(0, 0, n, n);
        let t2 = t_inv.block(0, n, n, n);
        let t3 = t_inv.block(n, 0, n, n);
        let t4 = t_inv.block(n, n, n, n);
        let g = {
            let rinv_bt = steadyctl_core::linalg::solve_linear(&w.r, &sys.b.t()).unwrap();
            (&sys.b * &rinv_bt).sym_part()
        };
        let eye = Mat::identity(n);
        let at = sys.a.t();
        let r1 = (&(&(&w.q * &t1) + &(&at * &t3)).scale(-1.0) - &eye).max_abs();
        let r2 = (&(&w.q * &t2) + &(&at * &t4)).max_abs();
        let r3 = (&(&sys.a * &t1) - &(&g * &t3)).max_abs();
        let r4 = (&(&(&sys.a * &t2) - &(&g * &t4)) - &eye).max_abs();
        for (idx, dev) in [r1, r2, r3, r4].into_iter().enumerate() {
            assert!(dev <= 1e-9, "block identity {idx} residual {dev}");
        }
    }
}

#[test]
fn mu_realization_never_reads_the_disturbance_in_the_controller() {
    // the forcing enters the plant block only; both controller blocks and
    // the input map are disturbance-free
    let (sys, w, ky, kl) = benchmark();
    let ctrl = synthesize_overtaking(&sys, &w).unwrap();
    let gains = NearOptimalGains::from_diagonals(&ctrl, &ky, &kl).unwrap();
    let rel = mu_closed_loop(&gains, &sys, &w).unwrap();
    let n = sys.state_dim();
    assert!(mat::norm(&rel.b_cl[n..]) == 0.0);
    assert!(mat::norm(&rel.input_bias) == 0.0);
    // and the plant block forcing is exactly C·d
    assert!(mat::norm(&mat::sub(&rel.b_cl[..n], &sys.cd())) == 0.0);
}

#[test]
fn bellman_defect_factors_as_weighted_distance_to_the_feedback_law() {
    // 𝕃(x, u) = ½‖u - ū + K(x - x̄)‖²_R for arbitrary (x, u)
    for (label, (sys, w), scale, tol) in [
        ("double integrator", example_one(), 3.0, 1e-8),
        ("benchmark", {
            let (sys, w, _, _) = benchmark();
            (sys, w)
        }, 2.0, 1e-7),
    ] {
        let ctrl = synthesize_overtaking(&sys, &w).unwrap();
        let ss = &ctrl.steady_state;
        let mut rng = rng(99);
        for _ in 0..100 {
            let x = rand_vec(&mut rng, sys.state_dim(), scale);
            let u = rand_vec(&mut rng, sys.input_dim(), scale);
            let lhs = hjb_integrand(&ctrl, &sys, &w, &x, &u);
            let mismatch = mat::add(
                &mat::sub(&u, &ss.u_bar),
                &ctrl.gain.matvec(&mat::sub(&x, &ss.x_bar)),
            );
            let rhs = 0.5 * w.r.quad_form(&mismatch, &mismatch);
            assert!(
                (lhs - rhs).abs() <= tol * rhs.max(1.0),
                "{label}: defect identity violated: {lhs} vs {rhs}"
            );
        }
    }
}

#[test]
fn bellman_residual_vanishes_at_the_feedback_law() {
    let (sys_b, w_b, _, _) = benchmark();
    for (label, (sys, w), tol) in [
        ("double integrator", example_one(), 1e-8),
        ("benchmark", (sys_b, w_b), 1e-7),
    ] {
        let ctrl = synthesize_overtaking(&sys, &w).unwrap();
        let mut rng = rng(123);
        for _ in 0..100 {
            let x = rand_vec(&mut rng, sys.state_dim(), 3.0);
            let r = hjb_residual(&ctrl, &sys, &w, &x);
            assert!(r <= tol, "{label}: residual {r}");
        }
    }
}
