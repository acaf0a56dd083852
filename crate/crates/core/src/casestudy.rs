//! Multi-machine power-system frequency control as the worked example.
//!
//! Each bus carries swing dynamics
//!     θ̇_i = ω_i,
//!     M_i·ω̇_i = u_i - d_i - D_i·ω_i - Σ_j B_ij(θ_i - θ_j),
//! and the cost penalizes frequency deviation and control power,
//! f = ½Σ(q_i·ω_i² + r_i·u_i²). The absolute angles are redundant, so one
//! reference bus is eliminated: with δ_i = θ_i - θ_ref the state becomes
//! (δ over non-reference buses, ω over all buses), n = 2N-1. The
//! disturbance enters the frequency rows as -d_i/M_i, i.e. C = -B.
//!
//! The angle states carry no cost weight, so Q is singular; the primal-dual
//! state matrix is Hurwitz regardless, which the experiment bundle checks
//! explicitly.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::controllers::{
    mu_closed_loop, optimal_closed_loop, synthesize_overtaking, NearOptimalGains,
};
use crate::error::{Error, Result};
use crate::linalg::mat::Mat;
use crate::perf::{gap_scaling_sweep, GapReport};
use crate::plant::{CostWeights, DisturbedLtiSystem, SteadyStateSolution};
use crate::sim::{fmt_g9, simulate, SimConfig, Trajectory};

/// One generator/load bus: inertia, damping, frequency weight, input weight.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Bus {
    #[serde(rename = "M")]
    pub inertia: f64,
    #[serde(rename = "D")]
    pub damping: f64,
    #[serde(rename = "q")]
    pub freq_weight: f64,
    #[serde(rename = "r")]
    pub input_weight: f64,
}

/// Transmission line between two 1-based bus indices.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Line {
    pub i: usize,
    pub j: usize,
    #[serde(rename = "B")]
    pub susceptance: f64,
}

/// Power network description; bus and line indices are 1-based.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PowerNetwork {
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    #[serde(rename = "reference")]
    pub reference_bus: usize,
}

impl PowerNetwork {
    pub fn new(buses: Vec<Bus>, lines: Vec<Line>, reference_bus: usize) -> Result<Self> {
        let net = Self {
            buses,
            lines,
            reference_bus,
        };
        net.validate()?;
        Ok(net)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.buses.len();
        if n == 0 {
            return Err(Error::InvalidInput("network needs at least one bus".to_string()));
        }
        for (idx, bus) in self.buses.iter().enumerate() {
            let finite = bus.inertia.is_finite()
                && bus.damping.is_finite()
                && bus.freq_weight.is_finite()
                && bus.input_weight.is_finite();
            if !finite || bus.inertia <= 0.0 || bus.damping <= 0.0 || bus.input_weight <= 0.0 {
                return Err(Error::InvalidInput(format!(
                    "bus {}: M, D, r must be positive and finite",
                    idx + 1
                )));
            }
            if bus.freq_weight < 0.0 {
                return Err(Error::InvalidInput(format!(
                    "bus {}: q must be nonnegative",
                    idx + 1
                )));
            }
        }
        if !(1..=n).contains(&self.reference_bus) {
            return Err(Error::InvalidInput(format!(
                "reference bus {} out of range 1..={}",
                self.reference_bus, n
            )));
        }
        let mut adjacency = vec![Vec::new(); n];
        for line in &self.lines {
            if !(1..=n).contains(&line.i) || !(1..=n).contains(&line.j) || line.i == line.j {
                return Err(Error::InvalidInput(format!(
                    "line ({}, {}) has invalid endpoints",
                    line.i, line.j
                )));
            }
            if !(line.susceptance > 0.0 && line.susceptance.is_finite()) {
                return Err(Error::InvalidInput(format!(
                    "line ({}, {}): susceptance must be positive",
                    line.i, line.j
                )));
            }
            adjacency[line.i - 1].push(line.j - 1);
            adjacency[line.j - 1].push(line.i - 1);
        }
        // breadth-first reachability from bus 1
        let mut seen = vec![false; n];
        let mut queue = vec![0usize];
        seen[0] = true;
        while let Some(v) = queue.pop() {
            for &u in &adjacency[v] {
                if !seen[u] {
                    seen[u] = true;
                    queue.push(u);
                }
            }
        }
        if seen.iter().any(|&s| !s) {
            return Err(Error::InvalidInput("line graph is not connected".to_string()));
        }
        Ok(())
    }

    pub fn bus_count(&self) -> usize {
        self.buses.len()
    }

    /// The four-bus benchmark network used throughout the crate.
    pub fn four_bus() -> Self {
        let buses = vec![
            Bus { inertia: 2.0, damping: 2.0, freq_weight: 15.0, input_weight: 1.0 },
            Bus { inertia: 1.5, damping: 2.0, freq_weight: 10.0, input_weight: 1.0 },
            Bus { inertia: 1.8, damping: 3.0, freq_weight: 12.0, input_weight: 2.0 },
            Bus { inertia: 3.0, damping: 4.0, freq_weight: 18.0, input_weight: 1.5 },
        ];
        let lines = vec![
            Line { i: 1, j: 2, susceptance: 1.5 },
            Line { i: 2, j: 3, susceptance: 1.0 },
            Line { i: 3, j: 4, susceptance: 2.0 },
            Line { i: 4, j: 1, susceptance: 1.8 },
            Line { i: 2, j: 4, susceptance: 2.5 },
        ];
        Self::new(buses, lines, 4).expect("benchmark network is valid")
    }

    /// Benchmark disturbance: step loads on buses 1 and 4.
    pub fn benchmark_disturbance(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.bus_count()];
        if d.len() == 4 {
            d[0] = 3.5;
            d[3] = 4.5;
        }
        d
    }

    /// Default primal-dual step sizes: 0.2 on angle states, 0.5 on frequency
    /// states for K^y, and 10 everywhere for K^λ.
    pub fn default_gain_diagonals(&self) -> (Vec<f64>, Vec<f64>) {
        let nb = self.bus_count();
        let n = 2 * nb - 1;
        let mut ky = vec![0.2; nb - 1];
        ky.extend(std::iter::repeat_n(0.5, nb));
        (ky, vec![10.0; n])
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let net: Self = serde_json::from_str(text)
            .map_err(|e| Error::InvalidInput(format!("network file: {e}")))?;
        net.validate()?;
        Ok(net)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("network serialization cannot fail")
    }
}

/// Assemble the reduced-state LTI model and cost weights. The disturbance
/// vector of the returned system is zero; install one with
/// [`DisturbedLtiSystem::with_disturbance`].
pub fn to_lti(net: &PowerNetwork) -> Result<(DisturbedLtiSystem, CostWeights)> {
    net.validate()?;
    let nb = net.bus_count();
    let n = 2 * nb - 1;
    let reference = net.reference_bus - 1;
    let non_ref: Vec<usize> = (0..nb).filter(|&i| i != reference).collect();

    // weighted Laplacian of the line graph
    let mut lap = Mat::zeros(nb, nb);
    for line in &net.lines {
        let (i, j, b) = (line.i - 1, line.j - 1, line.susceptance);
        lap[(i, i)] += b;
        lap[(j, j)] += b;
        lap[(i, j)] -= b;
        lap[(j, i)] -= b;
    }

    let mut a = Mat::zeros(n, n);
    let mut b = Mat::zeros(n, nb);
    // angle rows: δ̇_k = ω_bus(k) - ω_ref
    for (k, &bus) in non_ref.iter().enumerate() {
        a[(k, nb - 1 + bus)] = 1.0;
        a[(k, nb - 1 + reference)] = -1.0;
    }
    // frequency rows: M_i ω̇_i = u_i - d_i - D_i ω_i - Σ_j L_ij δ_j (δ_ref = 0)
    for i in 0..nb {
        let row = nb - 1 + i;
        let m_i = net.buses[i].inertia;
        for (k, &bus) in non_ref.iter().enumerate() {
            a[(row, k)] = -lap[(i, bus)] / m_i;
        }
        a[(row, row)] = -net.buses[i].damping / m_i;
        b[(row, i)] = 1.0 / m_i;
    }
    let c = -&b;

    let mut q_diag = vec![0.0; nb - 1];
    q_diag.extend(net.buses.iter().map(|bus| bus.freq_weight));
    let q = Mat::diag(&q_diag);
    let r = Mat::diag(&net.buses.iter().map(|bus| bus.input_weight).collect::<Vec<_>>());

    let sys = DisturbedLtiSystem::new(a, b, c, vec![0.0; nb])?;
    let w = CostWeights::new(q, r)?;
    Ok((sys, w))
}

/// One row of the gain-sweep table.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct GapRow {
    pub k: f64,
    pub analytic_gap: f64,
    pub simulated_gap_at_t: f64,
    pub relative_error: f64,
    pub k_times_analytic_gap: f64,
}

/// What `run_experiments` computed, with the list of files it wrote.
#[derive(Debug)]
pub struct ExperimentSummary {
    pub steady_state: SteadyStateSolution,
    pub feedback_gain: Mat,
    /// Steady cost rate f̄ = ½(x̄ᵀQx̄ + ūᵀRū).
    pub steady_rate: f64,
    pub gap_table: Vec<GapRow>,
    pub written: Vec<PathBuf>,
}

fn create(path: &Path, comments: &[String]) -> Result<std::io::BufWriter<fs::File>> {
    let file = fs::File::create(path)?;
    let mut out = std::io::BufWriter::new(file);
    for line in comments {
        writeln!(out, "# {line}")?;
    }
    Ok(out)
}

/// Run the three benchmark experiments against a network:
///
/// 1. closed-loop trajectories under the overtaking-optimal controller and
///    the implementable near-optimal controller (`trajectory_optimal.csv`,
///    `trajectory_nearopt.csv`),
/// 2. running-cost curves and their excess over the steady rate
///    (`jt_curves.csv`),
/// 3. analytic vs simulated transient gap across gain scales k
///    (`gap_vs_k.csv`).
///
/// Both loops start at the pre-disturbance equilibrium (origin), with the
/// controller states initialized to zero as recorded in the file comments.
#[allow(clippy::too_many_arguments)]
pub fn run_experiments(
    net: &PowerNetwork,
    d: &[f64],
    ky_diag: &[f64],
    klambda_diag: &[f64],
    ks: &[f64],
    cfg: &SimConfig,
    out_dir: &Path,
    config_hash: &str,
) -> Result<ExperimentSummary> {
    if d.len() != net.bus_count() {
        return Err(Error::InvalidInput(format!(
            "disturbance has length {}, expected one entry per bus ({})",
            d.len(),
            net.bus_count()
        )));
    }
    let (sys0, w) = to_lti(net)?;
    let sys = sys0.with_disturbance(d.to_vec())?;
    let n = sys.state_dim();

    let ctrl = synthesize_overtaking(&sys, &w)?;
    let gains = NearOptimalGains::from_diagonals(&ctrl, ky_diag, klambda_diag)?;
    let ss = ctrl.steady_state.clone();
    let f_bar = w.stage_cost(&ss.x_bar, &ss.u_bar);

    let rel_opt = optimal_closed_loop(&ctrl, &sys);
    let rel_mu = mu_closed_loop(&gains, &sys, &w)?;

    let x0 = vec![0.0; n];
    let z0 = vec![0.0; 3 * n];
    let traj_opt = simulate(&rel_opt, &sys, &w, &x0, cfg)?;
    let traj_mu = simulate(&rel_mu, &sys, &w, &z0, cfg)?;

    fs::create_dir_all(out_dir)?;
    let mut written = Vec::new();
    let meta = vec![
        format!("config-hash: {config_hash}"),
        "initial states: plant at origin, controller states y0 = 0, mu0 = 0".to_string(),
        format!("disturbance onset t0 = {} s", cfg.t_disturb),
    ];

    let write_traj = |name: &str, traj: &Trajectory, written: &mut Vec<PathBuf>| -> Result<()> {
        let path = out_dir.join(name);
        let mut out = create(&path, &meta)?;
        traj.write_csv(&mut out)?;
        written.push(path);
        Ok(())
    };
    write_traj("trajectory_optimal.csv", &traj_opt, &mut written)?;
    write_traj("trajectory_nearopt.csv", &traj_mu, &mut written)?;

    // running-cost curves with the steady rate removed after onset
    {
        let path = out_dir.join("jt_curves.csv");
        let mut out = create(&path, &meta)?;
        writeln!(
            out,
            "t,jt_optimal,jt_nearopt,excess_optimal,excess_nearopt"
        )?;
        for (idx, &t) in traj_opt.times.iter().enumerate() {
            let ramp = f_bar * (t - cfg.t_disturb).max(0.0);
            let jo = traj_opt.running_cost[idx];
            let jn = traj_mu.running_cost[idx];
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_g9(t),
                fmt_g9(jo),
                fmt_g9(jn),
                fmt_g9(jo - ramp),
                fmt_g9(jn - ramp)
            )?;
        }
        written.push(path);
    }

    // gain sweep: analytic gap against the simulated cost difference at T
    let y0 = vec![0.0; n];
    let lambda0 = vec![0.0; n];
    let analytic = gap_scaling_sweep(&gains, &sys, &w, &x0, &y0, &lambda0, ks)?;
    let mut gap_table = Vec::with_capacity(ks.len());
    for point in &analytic {
        let gains_k = gains.scaled(point.k)?;
        let rel_k = mu_closed_loop(&gains_k, &sys, &w)?;
        let traj_k = simulate(&rel_k, &sys, &w, &z0, cfg)?;
        let simulated = traj_k.final_cost() - traj_opt.final_cost();
        let report = GapReport::new(point.gap, simulated, cfg.t_end)?;
        gap_table.push(GapRow {
            k: point.k,
            analytic_gap: report.analytic_gap,
            simulated_gap_at_t: report.simulated_gap_at_t,
            relative_error: report.relative_error,
            k_times_analytic_gap: point.k_times_gap,
        });
    }
    {
        let path = out_dir.join("gap_vs_k.csv");
        let mut out = create(&path, &meta)?;
        writeln!(out, "k,analytic_gap,simulated_gap_T,relative_error,k_times_analytic_gap")?;
        for row in &gap_table {
            writeln!(
                out,
                "{},{},{},{},{}",
                fmt_g9(row.k),
                fmt_g9(row.analytic_gap),
                fmt_g9(row.simulated_gap_at_t),
                fmt_g9(row.relative_error),
                fmt_g9(row.k_times_analytic_gap)
            )?;
        }
        written.push(path);
    }

    Ok(ExperimentSummary {
        steady_state: ss,
        feedback_gain: ctrl.gain.clone(),
        steady_rate: f_bar,
        gap_table,
        written,
    })
}
