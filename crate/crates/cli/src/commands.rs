use std::fs;
use std::path::{Path, PathBuf};

use steadyctl_core::casestudy::{run_experiments, to_lti, PowerNetwork};
use steadyctl_core::controllers::{
    build_s, lambda_closed_loop, mu_closed_loop, mu_initial_from_lambda, optimal_closed_loop,
    synthesize_overtaking, NearOptimalGains, OvertakingController,
};
use steadyctl_core::error::Error as CoreError;
use steadyctl_core::linalg::{
    care_residual, solve_linear, spectral_abscissa, Mat,
};
use steadyctl_core::perf::{near_optimal_index, optimal_index, GapReport};
use steadyctl_core::plant::{
    steady_state_solve, system_from_json, unstabilizable_modes, CostWeights, DisturbedLtiSystem,
};
use steadyctl_core::sim::{fmt_g9, simulate, SimConfig};

use crate::config::{Cli, CliError, Command, FormArg, GainArgs, InputArgs, SimArgs};
use crate::output::{matrix_rows, print_vector, vector_rows, ConfigHash, CsvFile};

pub fn dispatch(cli: &Cli) -> Result<(), CliError> {
    match &cli.command {
        Command::Steady { input, out } => cmd_steady(input, out),
        Command::Synthesize {
            input,
            gains,
            k,
            out,
        } => cmd_synthesize(input, gains, *k, out),
        Command::Simulate {
            input,
            gains,
            sim,
            form,
            k,
            x0,
            y0,
            lambda0,
            out,
        } => cmd_simulate(input, gains, sim, *form, *k, x0, y0, lambda0, out),
        Command::Perf {
            input,
            gains,
            sim,
            k,
            x0,
            y0,
            lambda0,
            out,
        } => cmd_perf(input, gains, sim, k, x0, y0, lambda0, out),
        Command::Casestudy {
            network,
            d,
            gains,
            sim,
            k,
            out,
        } => cmd_casestudy(network, d, gains, sim, k, out),
    }
}

struct Resolved {
    sys: DisturbedLtiSystem,
    weights: CostWeights,
    default_ky: Vec<f64>,
    default_klambda: Vec<f64>,
    hash: ConfigHash,
}

fn resolve_input(input: &InputArgs) -> Result<Resolved, CliError> {
    let mut hash = ConfigHash::new();
    let (sys, weights, default_ky, default_klambda) = match (&input.system, &input.network) {
        (Some(path), None) => {
            let text = fs::read_to_string(path)?;
            hash.add_bytes("system", text.as_bytes());
            let (sys, weights) = system_from_json(&text)?;
            let n = sys.state_dim();
            (sys, weights, vec![1.0; n], vec![1.0; n])
        }
        (None, Some(path)) => {
            let text = fs::read_to_string(path)?;
            hash.add_bytes("network", text.as_bytes());
            let net = PowerNetwork::from_json(&text)?;
            let (sys, weights) = to_lti(&net)?;
            let (ky, kl) = net.default_gain_diagonals();
            (sys, weights, ky, kl)
        }
        (None, None) => {
            return Err(CliError::Config(
                "one of --system or --network is required".to_string(),
            ))
        }
        (Some(_), Some(_)) => unreachable!("clap rejects both inputs at once"),
    };
    let sys = match &input.d {
        Some(d) => {
            hash.add_list("d", d);
            sys.with_disturbance(d.clone())?
        }
        None => sys,
    };
    Ok(Resolved {
        sys,
        weights,
        default_ky,
        default_klambda,
        hash,
    })
}

fn resolve_gains(
    args: &GainArgs,
    defaults: (&[f64], &[f64]),
    scale: f64,
    ctrl: &OvertakingController,
    hash: &mut ConfigHash,
) -> Result<NearOptimalGains, CliError> {
    let ky = args.ky.clone().unwrap_or_else(|| defaults.0.to_vec());
    let klambda = args.klambda.clone().unwrap_or_else(|| defaults.1.to_vec());
    hash.add_list("ky", &ky);
    hash.add_list("klambda", &klambda);
    hash.add_param("k", fmt_g9(scale));
    let gains = NearOptimalGains::from_diagonals(ctrl, &ky, &klambda)?;
    Ok(gains.scaled(scale)?)
}

/// Fail with the first Hautus diagnostic so the exit code and message name
/// the offending eigenvalue.
fn require_assumptions(sys: &DisturbedLtiSystem, w: &CostWeights) -> Result<(), CliError> {
    if let Some(mode) = unstabilizable_modes(&sys.a, &sys.b)?.first() {
        return Err(CoreError::NotStabilizable {
            mode: (mode.re, mode.im),
        }
        .into());
    }
    if let Some(mode) = unstabilizable_modes(&sys.a.t(), &w.q.t())?.first() {
        return Err(CoreError::NotDetectable {
            mode: (mode.re, mode.im),
        }
        .into());
    }
    Ok(())
}

fn write_steady_csv(
    dir: &Path,
    hash: &str,
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
) -> Result<(), CliError> {
    let ss = steady_state_solve(sys, w)?;
    let res = ss.kkt_residuals(sys, w);
    let mut file = CsvFile::create(dir, "steady_state.csv", hash)?;
    file.line("quantity,index,value")?;
    vector_rows(&mut file, "x_bar", &ss.x_bar)?;
    vector_rows(&mut file, "u_bar", &ss.u_bar)?;
    vector_rows(&mut file, "lambda_bar", &ss.lambda_bar)?;
    vector_rows(&mut file, "kkt_residual", &res)?;
    Ok(())
}

fn cmd_steady(input: &InputArgs, out: &Path) -> Result<(), CliError> {
    let resolved = resolve_input(input)?;
    require_assumptions(&resolved.sys, &resolved.weights)?;
    let ss = steady_state_solve(&resolved.sys, &resolved.weights)?;
    let res = ss.kkt_residuals(&resolved.sys, &resolved.weights);

    print_vector("x_bar", &ss.x_bar);
    print_vector("u_bar", &ss.u_bar);
    print_vector("lambda_bar", &ss.lambda_bar);
    print_vector("kkt_residuals", &res);

    write_steady_csv(out, &resolved.hash.finish(), &resolved.sys, &resolved.weights)?;
    Ok(())
}

#[allow(clippy::type_complexity)]
fn synthesis_report(
    sys: &DisturbedLtiSystem,
    w: &CostWeights,
    gains: &NearOptimalGains,
    ctrl: &OvertakingController,
) -> Result<(f64, f64, f64, Mat), CliError> {
    let rinv_bt = solve_linear(&w.r, &sys.b.t())?;
    let gram = (&sys.b * &rinv_bt).sym_part();
    let residual = care_residual(&sys.a, &gram, &w.q, &ctrl.p_star);
    let margin_cl = spectral_abscissa(&ctrl.closed_loop_matrix(sys))?;
    let s = build_s(gains, sys, w);
    let margin_s = spectral_abscissa(&s)?;
    Ok((residual, margin_cl, margin_s, s))
}

fn write_synthesis_csv(
    dir: &Path,
    hash: &str,
    ctrl: &OvertakingController,
    residual: f64,
    margin_cl: f64,
    margin_s: f64,
) -> Result<(), CliError> {
    let mut file = CsvFile::create(dir, "synthesis.csv", hash)?;
    file.line("quantity,row,col,value")?;
    matrix_rows(&mut file, "K", &ctrl.gain)?;
    matrix_rows(&mut file, "P_star", &ctrl.p_star)?;
    file.row(&[
        "are_residual".into(),
        "1".into(),
        "1".into(),
        fmt_g9(residual),
    ])?;
    file.row(&[
        "closed_loop_margin".into(),
        "1".into(),
        "1".into(),
        fmt_g9(margin_cl),
    ])?;
    file.row(&["s_margin".into(), "1".into(), "1".into(), fmt_g9(margin_s)])?;
    Ok(())
}

fn cmd_synthesize(
    input: &InputArgs,
    gain_args: &GainArgs,
    k: f64,
    out: &Path,
) -> Result<(), CliError> {
    let mut resolved = resolve_input(input)?;
    require_assumptions(&resolved.sys, &resolved.weights)?;
    let ctrl = synthesize_overtaking(&resolved.sys, &resolved.weights)?;
    let gains = resolve_gains(
        gain_args,
        (&resolved.default_ky, &resolved.default_klambda),
        k,
        &ctrl,
        &mut resolved.hash,
    )?;
    let (residual, margin_cl, margin_s, _) =
        synthesis_report(&resolved.sys, &resolved.weights, &gains, &ctrl)?;
    if margin_s >= 0.0 {
        return Err(CoreError::NotHurwitzS {
            max_real: margin_s,
        }
        .into());
    }

    println!("feedback gain K:");
    for i in 0..ctrl.gain.rows() {
        let row: Vec<String> = ctrl.gain.row(i).iter().map(|v| fmt_g9(*v)).collect();
        println!("  [{}]", row.join(", "));
    }
    println!("are_residual = {}", fmt_g9(residual));
    println!("closed_loop_margin = {}", fmt_g9(margin_cl));
    println!("s_margin = {}", fmt_g9(margin_s));

    write_synthesis_csv(
        out,
        &resolved.hash.finish(),
        &ctrl,
        residual,
        margin_cl,
        margin_s,
    )?;
    Ok(())
}

fn default_or(v: &Option<Vec<f64>>, n: usize, what: &str) -> Result<Vec<f64>, CliError> {
    match v {
        Some(values) if values.len() == n => Ok(values.clone()),
        Some(values) => Err(CliError::Config(format!(
            "{what} has length {}, expected {n}",
            values.len()
        ))),
        None => Ok(vec![0.0; n]),
    }
}

#[allow(clippy::too_many_arguments)]
fn cmd_simulate(
    input: &InputArgs,
    gain_args: &GainArgs,
    sim_args: &SimArgs,
    form: FormArg,
    k: f64,
    x0: &Option<Vec<f64>>,
    y0: &Option<Vec<f64>>,
    lambda0: &Option<Vec<f64>>,
    out: &Path,
) -> Result<(), CliError> {
    let mut resolved = resolve_input(input)?;
    let cfg = SimConfig::new(sim_args.t_end, sim_args.dt, sim_args.t_disturb, sim_args.stride)?;
    require_assumptions(&resolved.sys, &resolved.weights)?;
    let ctrl = synthesize_overtaking(&resolved.sys, &resolved.weights)?;
    let gains = resolve_gains(
        gain_args,
        (&resolved.default_ky, &resolved.default_klambda),
        k,
        &ctrl,
        &mut resolved.hash,
    )?;
    let n = resolved.sys.state_dim();
    let x0 = default_or(x0, n, "--x0")?;
    let y0 = default_or(y0, n, "--y0")?;
    let lambda0 = default_or(lambda0, n, "--lambda0")?;

    for (label, value) in [
        ("t_end", sim_args.t_end),
        ("dt", sim_args.dt),
        ("t_disturb", sim_args.t_disturb),
    ] {
        resolved.hash.add_param(label, fmt_g9(value));
    }
    resolved.hash.add_param("stride", sim_args.stride);
    resolved.hash.add_param("form", format!("{form:?}"));
    resolved.hash.add_list("x0", &x0);
    resolved.hash.add_list("y0", &y0);
    resolved.hash.add_list("lambda0", &lambda0);

    let (rel, z0, name) = match form {
        FormArg::Optimal => (
            optimal_closed_loop(&ctrl, &resolved.sys),
            x0.clone(),
            "trajectory_optimal.csv",
        ),
        FormArg::Lambda => {
            let rel = lambda_closed_loop(&gains, &resolved.sys, &resolved.weights)?;
            let z0 = [x0.clone(), y0.clone(), lambda0.clone()].concat();
            (rel, z0, "trajectory_lambda.csv")
        }
        FormArg::Mu => {
            let rel = mu_closed_loop(&gains, &resolved.sys, &resolved.weights)?;
            let (x, y, mu) = mu_initial_from_lambda(&x0, &y0, &lambda0, &gains.k_lambda);
            let z0 = [x, y, mu].concat();
            (rel, z0, "trajectory_mu.csv")
        }
    };

    let traj = simulate(&rel, &resolved.sys, &resolved.weights, &z0, &cfg)?;
    println!("samples = {}", traj.len());
    println!("final_cost = {}", fmt_g9(traj.final_cost()));
    print_vector("final_state", traj.final_state());

    let mut file = CsvFile::create(out, name, &resolved.hash.finish())?;
    traj.write_csv(file.writer()).map_err(CoreError::from)?;
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_perf(
    input: &InputArgs,
    gain_args: &GainArgs,
    sim_args: &SimArgs,
    ks: &[f64],
    x0: &Option<Vec<f64>>,
    y0: &Option<Vec<f64>>,
    lambda0: &Option<Vec<f64>>,
    out: &Path,
) -> Result<(), CliError> {
    let mut resolved = resolve_input(input)?;
    let cfg = SimConfig::new(sim_args.t_end, sim_args.dt, sim_args.t_disturb, sim_args.stride)?;
    require_assumptions(&resolved.sys, &resolved.weights)?;
    let ctrl = synthesize_overtaking(&resolved.sys, &resolved.weights)?;
    let gains = resolve_gains(
        gain_args,
        (&resolved.default_ky, &resolved.default_klambda),
        1.0,
        &ctrl,
        &mut resolved.hash,
    )?;
    let n = resolved.sys.state_dim();
    let x0 = default_or(x0, n, "--x0")?;
    let y0 = default_or(y0, n, "--y0")?;
    let lambda0 = default_or(lambda0, n, "--lambda0")?;
    resolved.hash.add_list("x0", &x0);
    resolved.hash.add_list("y0", &y0);
    resolved.hash.add_list("lambda0", &lambda0);
    resolved.hash.add_list("ks", ks);
    for (label, value) in [
        ("t_end", sim_args.t_end),
        ("dt", sim_args.dt),
        ("t_disturb", sim_args.t_disturb),
    ] {
        resolved.hash.add_param(label, fmt_g9(value));
    }

    let sys = &resolved.sys;
    let w = &resolved.weights;
    let opt = optimal_index(&ctrl, sys, w, &x0)?;
    println!(
        "optimal index: bounded = {}, rate = {}",
        fmt_g9(opt.bounded),
        fmt_g9(opt.theta_coeff)
    );

    // shared horizon for the simulated comparison: start at the plant origin
    // pre-disturbance so the recorded cost matches the analytic shifted view
    let rel_opt = optimal_closed_loop(&ctrl, sys);
    let traj_opt = simulate(&rel_opt, sys, w, &x0, &cfg)?;

    let mut file = CsvFile::create(out, "gap_report.csv", &resolved.hash.finish())?;
    file.line("k,analytic_gap,simulated_gap_T,relative_error")?;
    for &k in ks {
        let gains_k = gains.scaled(k)?;
        let near = near_optimal_index(&gains_k, sys, w, &x0, &y0, &lambda0)?;
        let analytic = near.bounded - opt.bounded;

        let rel_mu = mu_closed_loop(&gains_k, sys, w)?;
        let (xm, ym, mu0) = mu_initial_from_lambda(&x0, &y0, &lambda0, &gains_k.k_lambda);
        let z0 = [xm, ym, mu0].concat();
        let traj_mu = simulate(&rel_mu, sys, w, &z0, &cfg)?;
        let simulated = traj_mu.final_cost() - traj_opt.final_cost();
        let report = GapReport::new(analytic, simulated, cfg.t_end)?;

        println!(
            "k = {}: near-optimal bounded = {}, rate = {}, analytic gap = {}, simulated gap = {}, relative error = {}",
            fmt_g9(k),
            fmt_g9(near.bounded),
            fmt_g9(near.theta_coeff),
            fmt_g9(report.analytic_gap),
            fmt_g9(report.simulated_gap_at_t),
            fmt_g9(report.relative_error)
        );
        file.row(&[
            fmt_g9(k),
            fmt_g9(report.analytic_gap),
            fmt_g9(report.simulated_gap_at_t),
            fmt_g9(report.relative_error),
        ])?;
    }
    Ok(())
}

fn cmd_casestudy(
    network: &Option<PathBuf>,
    d: &Option<Vec<f64>>,
    gain_args: &GainArgs,
    sim_args: &SimArgs,
    ks: &[f64],
    out: &Path,
) -> Result<(), CliError> {
    let mut hash = ConfigHash::new();
    let net = match network {
        Some(path) => {
            let text = fs::read_to_string(path)?;
            hash.add_bytes("network", text.as_bytes());
            PowerNetwork::from_json(&text)?
        }
        None => {
            hash.add_param("network", "builtin-four-bus");
            PowerNetwork::four_bus()
        }
    };
    let d = d.clone().unwrap_or_else(|| net.benchmark_disturbance());
    let (default_ky, default_klambda) = net.default_gain_diagonals();
    let ky = gain_args.ky.clone().unwrap_or(default_ky);
    let klambda = gain_args.klambda.clone().unwrap_or(default_klambda);

    hash.add_list("d", &d);
    hash.add_list("ky", &ky);
    hash.add_list("klambda", &klambda);
    hash.add_list("ks", ks);
    for (label, value) in [
        ("t_end", sim_args.t_end),
        ("dt", sim_args.dt),
        ("t_disturb", sim_args.t_disturb),
    ] {
        hash.add_param(label, fmt_g9(value));
    }
    hash.add_param("stride", sim_args.stride);
    let hash = hash.finish();

    let cfg = SimConfig::new(sim_args.t_end, sim_args.dt, sim_args.t_disturb, sim_args.stride)?;
    let (sys0, w) = to_lti(&net)?;
    let sys = sys0.with_disturbance(d.clone())?;
    require_assumptions(&sys, &w)?;

    let summary = run_experiments(&net, &d, &ky, &klambda, ks, &cfg, out, &hash)?;

    write_steady_csv(out, &hash, &sys, &w)?;
    let ctrl = synthesize_overtaking(&sys, &w)?;
    let gains = NearOptimalGains::from_diagonals(&ctrl, &ky, &klambda)?;
    let (residual, margin_cl, margin_s, _) = synthesis_report(&sys, &w, &gains, &ctrl)?;
    if margin_s >= 0.0 {
        return Err(CoreError::NotHurwitzS {
            max_real: margin_s,
        }
        .into());
    }
    write_synthesis_csv(out, &hash, &ctrl, residual, margin_cl, margin_s)?;

    print_vector("x_bar", &summary.steady_state.x_bar);
    print_vector("u_bar", &summary.steady_state.u_bar);
    println!("steady_rate = {}", fmt_g9(summary.steady_rate));
    println!("k,analytic_gap,simulated_gap_T,relative_error,k_times_analytic_gap");
    for row in &summary.gap_table {
        println!(
            "{},{},{},{},{}",
            fmt_g9(row.k),
            fmt_g9(row.analytic_gap),
            fmt_g9(row.simulated_gap_at_t),
            fmt_g9(row.relative_error),
            fmt_g9(row.k_times_analytic_gap)
        );
    }
    println!("wrote {} CSV files to {}", summary.written.len() + 2, out.display());
    Ok(())
}
