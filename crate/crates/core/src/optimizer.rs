//! Projected gradient descent with Barzilai–Borwein steps and a nonmonotone
//! Armijo line search over box-constrained schedules `0 ≤ u ≤ ū`.

use serde::{Deserialize, Serialize};

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::field::StateField;
use crate::objective::{cost_and_gradient, cost_streaming, CostReport};
use crate::problem::Problem;
use crate::state::{solve_forward, Trajectory};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum BbVariant {
    /// `⟨s, s⟩ / ⟨s, y⟩`.
    Bb1,
    /// `⟨s, y⟩ / ⟨y, y⟩`.
    Bb2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub max_iters: usize,
    pub rel_tol: f64,
    /// Length of the nonmonotone reference window.
    pub memory: usize,
    pub sufficient_decrease: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    pub bb_min: f64,
    pub bb_max: f64,
    pub bb_variant: BbVariant,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_iters: 200,
            rel_tol: 1e-8,
            memory: 10,
            sufficient_decrease: 1e-4,
            backtrack: 0.5,
            max_backtracks: 60,
            bb_min: 1e-8,
            bb_max: 1e8,
            bb_variant: BbVariant::Bb1,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        let open_unit = |field: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::config(field, format!("must lie in (0, 1), got {v}")))
            }
        };
        open_unit("backtrack", self.backtrack)?;
        open_unit("sufficient_decrease", self.sufficient_decrease)?;
        if !(self.bb_min > 0.0 && self.bb_min < self.bb_max && self.bb_max.is_finite()) {
            return Err(Error::config(
                "bb_min",
                format!("need 0 < bb_min < bb_max < inf, got [{}, {}]", self.bb_min, self.bb_max),
            ));
        }
        if self.memory == 0 {
            return Err(Error::config("memory", "must be at least 1"));
        }
        if !(self.rel_tol >= 0.0) {
            return Err(Error::config("rel_tol", format!("must be nonnegative, got {}", self.rel_tol)));
        }
        Ok(())
    }
}

/// Elementwise clamp to `[0, u_bar]`.
pub fn project(u: &[f64], u_bar: f64) -> Vec<f64> {
    u.iter().map(|&v| v.max(0.0).min(u_bar)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Barzilai–Borwein step from an iterate difference `s` and a gradient
/// difference `y`, safeguarded into `[bb_min, bb_max]`.
pub fn bb_step(s: &[f64], y: &[f64], cfg: &OptimizerConfig) -> f64 {
    let sy = dot(s, y);
    if !(sy > 0.0) {
        return cfg.bb_max;
    }
    let step = match cfg.bb_variant {
        BbVariant::Bb1 => dot(s, s) / sy,
        BbVariant::Bb2 => sy / dot(y, y),
    };
    if step.is_nan() {
        cfg.bb_max
    } else {
        step.clamp(cfg.bb_min, cfg.bb_max)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchOutcome {
    pub point: Vec<f64>,
    pub step: f64,
    pub backtracks: usize,
    pub cost: f64,
}

/// Finds the first `t = trial · backtrackᵐ` with
/// `J(P(u - t g)) ≤ max(window) - c ‖P(u - t g) - u‖² / t`.
///
/// `metric` scales the squared norm, so a quadrature weight turns the
/// Euclidean norm into the one the gradient is represented in. Trial points
/// whose evaluation fails numerically are rejected like uphill points.
#[allow(clippy::too_many_arguments)]
pub fn nonmonotone_search(
    u: &[f64],
    grad: &[f64],
    trial_step: f64,
    cost_history: &[f64],
    cfg: &OptimizerConfig,
    u_bar: f64,
    metric: f64,
    mut eval: impl FnMut(&[f64]) -> Result<f64>,
) -> Result<LineSearchOutcome> {
    let window = &cost_history[cost_history.len().saturating_sub(cfg.memory)..];
    let reference = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if window.is_empty() {
        return Err(Error::config("cost_history", "must be nonempty"));
    }
    let mut step = trial_step;
    let mut last = f64::NAN;
    for m in 0..=cfg.max_backtracks {
        let candidate: Vec<f64> = project(&u.iter().zip(grad).map(|(x, g)| x - step * g).collect::<Vec<_>>(), u_bar);
        let moved = distance(&candidate, u);
        let cost = match eval(&candidate) {
            Ok(c) => c,
            Err(Error::Numerical(_)) => f64::INFINITY,
            Err(e) => return Err(e),
        };
        last = cost;
        let decrease = cfg.sufficient_decrease * metric * moved * moved / step;
        if cost <= reference - decrease {
            return Ok(LineSearchOutcome { point: candidate, step, backtracks: m, cost });
        }
        step *= cfg.backtrack;
    }
    Err(Error::LineSearch { backtracks: cfg.max_backtracks + 1, step, reference, trial: last })
}

#[derive(Debug, Clone, PartialEq)]
pub struct IterationRecord {
    pub iter: usize,
    pub cost: f64,
    pub grad_norm: f64,
    pub step: f64,
    pub backtracks: usize,
    pub change: f64,
    /// `‖P(u - grad) - u‖ / max(1, ‖u‖)`.
    pub stationarity: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    /// Relative iterate change fell below `rel_tol`.
    Converged,
    /// The projected gradient vanished exactly.
    Stationary,
    MaxIters,
    LineSearchFailed,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Converged => "converged",
            StopReason::Stationary => "stationary",
            StopReason::MaxIters => "max_iters",
            StopReason::LineSearchFailed => "line_search_failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizeLog {
    /// Record 0 describes the initial schedule.
    pub records: Vec<IterationRecord>,
    pub stop: Option<StopReason>,
    pub initial_guess: String,
}

impl OptimizeLog {
    pub fn iterations(&self) -> usize {
        self.records.last().map_or(0, |r| r.iter)
    }
}

#[derive(Debug, Clone)]
pub struct Optimum {
    pub schedule: ControlSchedule,
    pub trajectory: Trajectory,
    pub report: CostReport,
    pub log: OptimizeLog,
}

/// An optimization that stopped on an error, with the log up to that point.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{error} (after {} iterations)", log.iterations())]
pub struct OptimizeFailure {
    pub error: Error,
    pub log: OptimizeLog,
}

fn stationarity(u: &[f64], grad: &[f64], u_bar: f64) -> f64 {
    let shifted: Vec<f64> = u.iter().zip(grad).map(|(x, g)| x - g).collect();
    distance(&project(&shifted, u_bar), u) / norm(u).max(1.0)
}

/// Minimizes the reduced cost starting from `initial` (projected first).
/// Returns the best iterate seen.
pub fn optimize(
    y0: &StateField,
    initial: &ControlSchedule,
    problem: &Problem,
    cfg: &OptimizerConfig,
) -> std::result::Result<Optimum, OptimizeFailure> {
    let mut log = OptimizeLog { records: Vec::new(), stop: None, initial_guess: describe_guess(initial) };
    match run(y0, initial, problem, cfg, &mut log) {
        Ok((schedule, trajectory, report)) => Ok(Optimum { schedule, trajectory, report, log }),
        Err(error) => {
            if matches!(error, Error::LineSearch { .. }) {
                log.stop = Some(StopReason::LineSearchFailed);
            }
            Err(OptimizeFailure { error, log })
        }
    }
}

fn describe_guess(initial: &ControlSchedule) -> String {
    let v = initial.values();
    match v.first() {
        Some(&first) if v.iter().all(|&x| x == first) => format!("constant {first}"),
        None => "empty".into(),
        _ => "custom".into(),
    }
}

fn run(
    y0: &StateField,
    initial: &ControlSchedule,
    problem: &Problem,
    cfg: &OptimizerConfig,
    log: &mut OptimizeLog,
) -> Result<(ControlSchedule, Trajectory, CostReport)> {
    cfg.validate()?;
    initial.check(problem)?;
    let u_bar = problem.params.u_bar;
    let metric = problem.grid.dt();
    let (steps, regions, classes) = (initial.steps(), initial.regions(), initial.classes());
    let wrap = |v: Vec<f64>| ControlSchedule::from_values(steps, regions, classes, v);

    let mut u = wrap(project(initial.values(), u_bar))?;
    let (mut report, mut grad, mut traj) = cost_and_gradient(y0, &u, problem)?;
    let mut history = vec![report.j_total];
    let mut best = (u.clone(), report, true);
    let grad_inf = grad.values().iter().fold(0.0_f64, |a, g| a.max(g.abs()));
    log.records.push(IterationRecord {
        iter: 0,
        cost: report.j_total,
        grad_norm: norm(grad.values()),
        step: 0.0,
        backtracks: 0,
        change: 0.0,
        stationarity: stationarity(u.values(), grad.values(), u_bar),
    });
    if log.records[0].stationarity == 0.0 || grad_inf == 0.0 {
        log.stop = Some(StopReason::Stationary);
        return Ok((u, traj, report));
    }
    let mut trial = 1.0 / grad_inf;

    for iter in 1..=cfg.max_iters {
        let search = nonmonotone_search(u.values(), grad.values(), trial, &history, cfg, u_bar, metric, |cand| {
            Ok(cost_streaming(y0, &wrap(cand.to_vec())?, problem)?.j_total)
        })?;
        let scale = norm(u.values());
        let moved = distance(&search.point, u.values());
        let change = if scale > 0.0 { moved / scale } else { moved };
        let next = wrap(search.point)?;
        let (next_report, next_grad, next_traj) = cost_and_gradient(y0, &next, problem)?;

        let s: Vec<f64> = next.values().iter().zip(u.values()).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = next_grad.values().iter().zip(grad.values()).map(|(a, b)| a - b).collect();
        trial = bb_step(&s, &y, cfg);

        log.records.push(IterationRecord {
            iter,
            cost: next_report.j_total,
            grad_norm: norm(next_grad.values()),
            step: search.step,
            backtracks: search.backtracks,
            change,
            stationarity: stationarity(next.values(), next_grad.values(), u_bar),
        });
        history.push(next_report.j_total);
        u = next;
        grad = next_grad;
        report = next_report;
        traj = next_traj;
        let improved = report.j_total < best.1.j_total;
        if improved {
            best = (u.clone(), report, true);
        } else {
            best.2 = false;
        }

        if change < cfg.rel_tol {
            log.stop = Some(StopReason::Converged);
            break;
        }
    }
    if log.stop.is_none() {
        log.stop = Some(StopReason::MaxIters);
    }
    let (best_u, best_report, is_last) = best;
    if is_last {
        Ok((best_u, traj, best_report))
    } else {
        let traj = solve_forward(y0, &best_u, problem)?;
        Ok((best_u, traj, best_report))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn projection_clamps() {
        assert_eq!(project(&[-3.0, 5.0, 62.2, 0.0, 10.0], 10.0), vec![0.0, 5.0, 10.0, 0.0, 10.0]);
        assert_eq!(project(&[62.2], 50.0), vec![50.0]);
        let inside = [0.0, 1.0, 9.5];
        assert_eq!(project(&inside, 10.0), inside.to_vec());
        assert_eq!(project(&[1e300], f64::INFINITY), vec![1e300]);
    }

    #[test]
    fn bb_steps() {
        let cfg = OptimizerConfig::default();
        assert_eq!(bb_step(&[1.0, -2.0], &[1.0, -2.0], &cfg), 1.0);
        assert_eq!(bb_step(&[1.0, 0.0], &[0.0, 1.0], &cfg), cfg.bb_max);
        assert_eq!(bb_step(&[1.0, 0.0], &[-1.0, 0.0], &cfg), cfg.bb_max);
        assert_eq!(bb_step(&[2.0, 4.0], &[1.0, 2.0], &cfg), 2.0);
        assert_eq!(bb_step(&[1e-12], &[1e3], &cfg), cfg.bb_min);
        let bb2 = OptimizerConfig { bb_variant: BbVariant::Bb2, ..cfg };
        assert_eq!(bb_step(&[2.0, 4.0], &[1.0, 2.0], &bb2), 2.0);
    }

    #[test]
    fn config_validation() {
        assert!(OptimizerConfig::default().validate().is_ok());
        let bad = [
            OptimizerConfig { backtrack: 1.0, ..Default::default() },
            OptimizerConfig { sufficient_decrease: 0.0, ..Default::default() },
            OptimizerConfig { bb_min: 2.0, bb_max: 1.0, ..Default::default() },
            OptimizerConfig { memory: 0, ..Default::default() },
        ];
        let fields = ["backtrack", "sufficient_decrease", "bb_min", "memory"];
        for (cfg, field) in bad.iter().zip(fields) {
            match cfg.validate() {
                Err(Error::Config { field: f, .. }) => assert_eq!(f, field),
                other => panic!("expected config error, got {other:?}"),
            }
        }
    }

    fn quadratic(u: &[f64]) -> Result<f64> {
        Ok(0.5 * dot(u, u))
    }

    #[test]
    fn search_reaches_quadratic_minimizer() {
        let cfg = OptimizerConfig::default();
        let out = nonmonotone_search(&[1.0], &[1.0], 1.0, &[0.5], &cfg, f64::INFINITY, 1.0, quadratic).unwrap();
        assert_eq!(out.backtracks, 0);
        assert_eq!(out.point, vec![0.0]);
    }

    #[test]
    fn search_with_zero_gradient_stays_put() {
        let cfg = OptimizerConfig::default();
        let out = nonmonotone_search(&[3.0, 1.0], &[0.0, 0.0], 1.0, &[5.0], &cfg, 10.0, 1.0, quadratic).unwrap();
        assert_eq!(out.backtracks, 0);
        assert_eq!(out.point, vec![3.0, 1.0]);
    }

    #[test]
    fn search_is_nonmonotone() {
        // The newest cost (4.5) is below an older one (8); a step that lands
        // at 5.0 is uphill from the newest but accepted against the window max.
        let cfg = OptimizerConfig::default();
        let u = [3.0];
        let history = [8.0, 6.0, 4.5];
        let out =
            nonmonotone_search(&u, &[-1.0], 0.162_277_660_168_379_4, &history, &cfg, 100.0, 1.0, quadratic).unwrap();
        assert_eq!(out.backtracks, 0);
        assert!(out.cost > 4.5 && out.cost < 8.0);
        // A monotone window only accepts once the step has underflowed to a
        // standstill, never an uphill point.
        let strict = OptimizerConfig { memory: 1, ..cfg };
        let out =
            nonmonotone_search(&u, &[-1.0], 0.162_277_660_168_379_4, &history, &strict, 100.0, 1.0, quadratic).unwrap();
        assert!(out.backtracks > 0);
        assert_eq!(out.point, u.to_vec());
    }

    #[test]
    fn search_failure_reports_diagnostics() {
        let cfg = OptimizerConfig::default();
        let err = nonmonotone_search(&[1.0], &[1.0], 1.0, &[0.0], &cfg, 10.0, 1.0, |_| Ok(1.0)).unwrap_err();
        match err {
            Error::LineSearch { backtracks, reference, trial, .. } => {
                assert_eq!(backtracks, 61);
                assert_eq!(reference, 0.0);
                assert_eq!(trial, 1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn numerical_failures_are_backtracked() {
        let cfg = OptimizerConfig::default();
        let out = nonmonotone_search(&[4.0], &[1.0], 8.0, &[8.0], &cfg, 10.0, 1.0, |u| {
            if u[0] < 1.0 {
                Err(Error::Numerical("blow-up".into()))
            } else {
                quadratic(u)
            }
        })
        .unwrap();
        assert!(out.point[0] >= 1.0 && out.backtracks >= 1);
    }
}
