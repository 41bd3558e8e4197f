//! Tracking cost and reduced gradient.
//!
//! The state part of the cost uses the trapezoid rule in time, age and
//! space. The control is piecewise constant per step, so its penalty uses the
//! rectangle rule. Gradients are returned as `L²(0, T)` representatives: the
//! partial derivative with respect to `u_n` divided by `dt`.

use crate::adjoint::BackwardSolver;
pub use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::field::{AdjointField, StateField};
use crate::problem::Problem;
use crate::state::{ForwardSolver, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostReport {
    pub j_total: f64,
    pub j_state: f64,
    pub j_control: f64,
}

/// `∫∫ (g · y)²` over one layer.
fn tracking_density(layer: &StateField, problem: &Problem) -> f64 {
    let grid = &problem.grid;
    let g = problem.params.g;
    let mut acc = 0.0;
    for k in 0..grid.na {
        let wa = grid.age_trap_w[k];
        let mut row = 0.0;
        for m in 0..grid.nx {
            let y = layer.node(k, m);
            let gy: f64 = (0..4).map(|c| g[c] * y[c]).sum();
            row += grid.space_trap_w[m] * gy * gy;
        }
        acc += wa * row;
    }
    acc
}

/// `(α/2) Σ_n dt ‖u_n‖²`, with the entry weights of the configured norm.
pub fn control_cost(schedule: &ControlSchedule, problem: &Problem) -> f64 {
    let w = problem.control_weights();
    let sq: f64 =
        schedule.values().chunks(w.len()).map(|layer| layer.iter().zip(w).map(|(v, w)| w * v * v).sum::<f64>()).sum();
    0.5 * problem.params.alpha * problem.grid.dt() * sq
}

/// Time-trapezoid accumulator of the state term.
struct StateCost {
    sum: f64,
    weights: Vec<f64>,
}

impl StateCost {
    fn new(problem: &Problem) -> Self {
        StateCost { sum: 0.0, weights: problem.grid.time_trap_w() }
    }

    fn add(&mut self, n: usize, layer: &StateField, problem: &Problem) {
        self.sum += self.weights[n] * tracking_density(layer, problem);
    }

    fn report(&self, schedule: &ControlSchedule, problem: &Problem) -> CostReport {
        let j_state = 0.5 * self.sum;
        let j_control = control_cost(schedule, problem);
        CostReport { j_total: j_state + j_control, j_state, j_control }
    }
}

pub fn cost(traj: &Trajectory, schedule: &ControlSchedule, problem: &Problem) -> Result<CostReport> {
    if traj.layers.len() != problem.grid.nt {
        return Err(Error::shape("cost (trajectory layers)", problem.grid.nt, traj.layers.len()));
    }
    schedule.check(problem)?;
    let mut acc = StateCost::new(problem);
    for (n, layer) in traj.layers.iter().enumerate() {
        acc.add(n, layer, problem);
    }
    Ok(acc.report(schedule, problem))
}

/// Cost of the schedule without storing the trajectory.
pub fn cost_streaming(y0: &StateField, schedule: &ControlSchedule, problem: &Problem) -> Result<CostReport> {
    let mut acc = StateCost::new(problem);
    ForwardSolver::new(problem).run(y0, schedule, None, |n, layer, _| {
        acc.add(n, layer, problem);
        Ok(())
    })?;
    Ok(acc.report(schedule, problem))
}

/// Per-layer adjoint pairing `G_n[i, j] = ∫_{class j} ∫_{Ω_i} S (p_S - p_V)`.
fn pairing(y: &StateField, p: &AdjointField, problem: &Problem, out: &mut [f64]) {
    let grid = &problem.grid;
    let mem = &problem.membership;
    out.iter_mut().for_each(|v| *v = 0.0);
    for (k, class) in mem.class_of_age.iter().enumerate() {
        let Some(j) = *class else { continue };
        let wa = grid.age_trap_w[k];
        let (s, ps, pv) = (y.s().row(k), p.s().row(k), p.v().row(k));
        for (m, region) in mem.region_of_x.iter().enumerate() {
            let Some(i) = *region else { continue };
            out[mem.index(i, j)] += wa * grid.space_trap_w[m] * s[m] * (ps[m] - pv[m]);
        }
    }
}

/// Assembles `α w u_n + ½ (G_n + G_{n+1})` from per-layer pairings, `w`
/// being the penalty weight of each entry.
fn assemble(schedule: &ControlSchedule, pairings: &[f64], problem: &Problem) -> ControlSchedule {
    let len = schedule.layer_len();
    let alpha = problem.params.alpha;
    let w = problem.control_weights();
    let mut grad = schedule.clone();
    for n in 0..schedule.steps() {
        let (g0, g1) = (&pairings[n * len..(n + 1) * len], &pairings[(n + 1) * len..(n + 2) * len]);
        let u = schedule.layer(n).to_vec();
        let out = &mut grad.values_mut()[n * len..(n + 1) * len];
        for q in 0..len {
            out[q] = alpha * w[q] * u[q] + 0.5 * (g0[q] + g1[q]);
        }
    }
    grad
}

/// Reduced gradient from a stored trajectory and adjoint.
pub fn reduced_gradient(
    schedule: &ControlSchedule,
    traj: &Trajectory,
    adjoint: &[AdjointField],
    problem: &Problem,
) -> Result<ControlSchedule> {
    let nt = problem.grid.nt;
    schedule.check(problem)?;
    if traj.layers.len() != nt || adjoint.len() != nt {
        return Err(Error::shape("reduced_gradient (layers)", nt, traj.layers.len().min(adjoint.len())));
    }
    let len = schedule.layer_len();
    let mut pairings = vec![0.0; nt * len];
    for n in 0..nt {
        pairing(&traj.layers[n], &adjoint[n], problem, &mut pairings[n * len..(n + 1) * len]);
    }
    Ok(assemble(schedule, &pairings, problem))
}

/// Cost, gradient and trajectory of one schedule. The adjoint is streamed,
/// never stored.
pub fn cost_and_gradient(
    y0: &StateField,
    schedule: &ControlSchedule,
    problem: &Problem,
) -> Result<(CostReport, ControlSchedule, Trajectory)> {
    let traj = crate::state::solve_forward(y0, schedule, problem)?;
    let report = cost(&traj, schedule, problem)?;
    let len = schedule.layer_len();
    let mut pairings = vec![0.0; problem.grid.nt * len];
    BackwardSolver::new(problem).run(&traj.layers, schedule, |n, y, p| {
        pairing(y, p, problem, &mut pairings[n * len..(n + 1) * len]);
        Ok(())
    })?;
    Ok((report, assemble(schedule, &pairings, problem), traj))
}
