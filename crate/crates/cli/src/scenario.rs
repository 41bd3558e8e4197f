//! The three experiment types and the files each one writes.

use std::path::Path;

use epictrl_core::{
    build_grid, optimize, total_infectious, ControlSchedule, CostReport, ForwardSolver, Layer, Optimum, Problem,
    StateField,
};
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{ExperimentConfig, InitialCondition};
use crate::output::{self, fmt_float, ManifestEntry, OutputDir};
use crate::CliError;

/// A validated configuration with its discretized problem and initial state.
pub struct Experiment {
    pub config: ExperimentConfig,
    pub problem: Problem,
    pub y0: StateField,
}

impl Experiment {
    pub fn new(config: ExperimentConfig) -> Result<Self, CliError> {
        let grid = build_grid(config.grid).map_err(CliError::setup)?;
        let problem = Problem::new(grid, config.model.clone(), config.layout.clone()).map_err(CliError::setup)?;
        config.optimizer.validate().map_err(CliError::setup)?;
        let y0 = match &config.initial {
            InitialCondition::Uniform(values) => Layer::uniform(&problem.grid, *values),
            InitialCondition::Table(path) => read_initial_table(path, &problem)?,
        };
        problem.check_layer(&y0, "initial condition").map_err(CliError::setup)?;
        Ok(Experiment { config, problem, y0 })
    }

    /// The same experiment with another upper bound on the control.
    pub fn with_bound(&self, u_bar: f64) -> Result<Self, CliError> {
        let mut config = self.config.clone();
        config.model.u_bar = u_bar;
        let problem = Problem::new(self.problem.grid.clone(), config.model.clone(), config.layout.clone())
            .map_err(CliError::setup)?;
        Ok(Experiment { config, problem, y0: self.y0.clone() })
    }

    fn initial_schedule(&self) -> ControlSchedule {
        ControlSchedule::constant_for(&self.problem, self.config.initial_control)
    }

    /// Total infectious population per time node, without storing the trajectory.
    pub fn infectious_series(&self, schedule: &ControlSchedule) -> Result<Vec<f64>, CliError> {
        let g = &self.problem.grid;
        let mut totals = Vec::with_capacity(g.nt);
        ForwardSolver::new(&self.problem)
            .run(&self.y0, schedule, None, |_, layer, _| {
                totals.push(layer.i().integrate(g));
                Ok(())
            })
            .map_err(CliError::Solver)?;
        Ok(totals)
    }
}

fn read_initial_table(path: &Path, problem: &Problem) -> Result<StateField, CliError> {
    let bad = |reason: String| CliError::config("initial.table", format!("{}: {reason}", path.display()));
    let mut reader = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let g = &problem.grid;
    let mut layer = Layer::zeros(g);
    let mut count = 0;
    for (row, record) in reader.records().enumerate() {
        let record = record.map_err(|e| bad(e.to_string()))?;
        if record.len() != 6 {
            return Err(bad(format!("row {} has {} columns, expected 6", row + 1, record.len())));
        }
        let mut v = [0.0; 6];
        for (slot, field) in v.iter_mut().zip(record.iter()) {
            *slot = field.trim().parse().map_err(|_| bad(format!("row {}: `{field}` is not a number", row + 1)))?;
        }
        if row >= g.layer_len() {
            return Err(bad(format!("more than {} rows", g.layer_len())));
        }
        let (k, m) = (row / g.nx, row % g.nx);
        let tol = 1e-9 * g.a_max().max(g.spec.x_hi - g.spec.x_lo);
        if (v[0] - g.a_nodes[k]).abs() > tol || (v[1] - g.x_nodes[m]).abs() > tol {
            return Err(bad(format!(
                "row {} is at (a, x) = ({}, {}), expected ({}, {})",
                row + 1,
                v[0],
                v[1],
                g.a_nodes[k],
                g.x_nodes[m]
            )));
        }
        layer.set_node(k, m, [v[2], v[3], v[4], v[5]]);
        count += 1;
    }
    if count != g.layer_len() {
        return Err(bad(format!("{count} rows, expected {}", g.layer_len())));
    }
    Ok(layer)
}

#[derive(Debug, Clone, Serialize)]
pub struct CostSummary {
    pub j_total: f64,
    pub j_state: f64,
    pub j_control: f64,
}

impl From<&CostReport> for CostSummary {
    fn from(r: &CostReport) -> Self {
        CostSummary { j_total: r.j_total, j_state: r.j_state, j_control: r.j_control }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GridSummary {
    pub nt: usize,
    pub na: usize,
    pub nx: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub scenario: &'static str,
    pub grid: GridSummary,
    /// `null` when unbounded.
    pub u_bar: Option<f64>,
    pub cost: CostSummary,
    pub max_u: f64,
    pub infectious_final_controlled: f64,
    pub infectious_final_uncontrolled: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub iterations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub stop: Option<&'static str>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_guess: Option<String>,
}

fn grid_summary(p: &Problem) -> GridSummary {
    GridSummary { nt: p.grid.nt, na: p.grid.na, nx: p.grid.nx }
}

fn finite_or_null(v: f64) -> Option<f64> {
    v.is_finite().then_some(v)
}

pub struct SimulateOutcome {
    pub report: CostReport,
    pub controlled: Vec<f64>,
    pub uncontrolled: Vec<f64>,
}

pub fn simulate(exp: &Experiment, out: &mut OutputDir) -> Result<SimulateOutcome, CliError> {
    let p = &exp.problem;
    let schedule = exp.initial_schedule();
    let traj = epictrl_core::solve_forward(&exp.y0, &schedule, p).map_err(CliError::Solver)?;
    let report = epictrl_core::cost(&traj, &schedule, p).map_err(CliError::Solver)?;
    let controlled = total_infectious(&traj, &p.grid);
    let uncontrolled = if schedule.max_value() == 0.0 {
        controlled.clone()
    } else {
        exp.infectious_series(&ControlSchedule::zeros_for(p))?
    };
    out.write_json(
        "summary.json",
        &RunSummary {
            scenario: "simulate",
            grid: grid_summary(p),
            u_bar: finite_or_null(p.params.u_bar),
            cost: (&report).into(),
            max_u: schedule.max_value(),
            infectious_final_controlled: *controlled.last().expect("at least one layer"),
            infectious_final_uncontrolled: *uncontrolled.last().expect("at least one layer"),
            iterations: None,
            stop: None,
            initial_guess: None,
        },
    )?;
    out.write_csv(
        "infectious_total.csv",
        &output::INFECTIOUS_HEADER,
        output::infectious_rows(&p.grid, &controlled, &uncontrolled),
    )?;
    out.write_csv("snapshot_final.csv", &output::SNAPSHOT_HEADER, output::snapshot_rows(&p.grid, traj.final_layer()))?;
    Ok(SimulateOutcome { report, controlled, uncontrolled })
}

pub struct OptimizeOutcome {
    pub optimum: Optimum,
    pub controlled: Vec<f64>,
    pub uncontrolled: Vec<f64>,
}

pub fn optimize_run(exp: &Experiment, out: &mut OutputDir) -> Result<OptimizeOutcome, CliError> {
    let p = &exp.problem;
    let optimum = match optimize(&exp.y0, &exp.initial_schedule(), p, &exp.config.optimizer) {
        Ok(o) => o,
        Err(failure) => {
            // Keep the partial history for diagnosis before reporting.
            out.write_csv("optimize_log.csv", &output::LOG_HEADER, output::log_rows(&failure.log.records))?;
            return Err(CliError::Solver(failure.error));
        }
    };
    let controlled = total_infectious(&optimum.trajectory, &p.grid);
    let uncontrolled = exp.infectious_series(&ControlSchedule::zeros_for(p))?;
    let iterations = optimum.log.records.len().saturating_sub(1);
    out.write_json(
        "summary.json",
        &RunSummary {
            scenario: "optimize",
            grid: grid_summary(p),
            u_bar: finite_or_null(p.params.u_bar),
            cost: (&optimum.report).into(),
            max_u: optimum.schedule.max_value(),
            infectious_final_controlled: *controlled.last().expect("at least one layer"),
            infectious_final_uncontrolled: *uncontrolled.last().expect("at least one layer"),
            iterations: Some(iterations),
            stop: optimum.log.stop.map(|s| s.as_str()),
            initial_guess: Some(optimum.log.initial_guess.clone()),
        },
    )?;
    out.write_csv(
        "infectious_total.csv",
        &output::INFECTIOUS_HEADER,
        output::infectious_rows(&p.grid, &controlled, &uncontrolled),
    )?;
    out.write_csv(
        "snapshot_final.csv",
        &output::SNAPSHOT_HEADER,
        output::snapshot_rows(&p.grid, optimum.trajectory.final_layer()),
    )?;
    out.write_csv("control_schedule.csv", &output::SCHEDULE_HEADER, output::schedule_rows(&p.grid, &optimum.schedule))?;
    out.write_csv("optimize_log.csv", &output::LOG_HEADER, output::log_rows(&optimum.log.records))?;
    Ok(OptimizeOutcome { optimum, controlled, uncontrolled })
}

/// Directory name of a sweep member, e.g. `u_bar_10` or `u_bar_inf`.
pub fn member_dir(u_bar: f64) -> String {
    if u_bar.is_finite() {
        format!("u_bar_{u_bar}")
    } else {
        "u_bar_inf".to_string()
    }
}

#[derive(Debug, Clone, Serialize)]
struct SweepMember {
    u_bar: Option<f64>,
    dir: String,
    cost: CostSummary,
    max_u: f64,
    iterations: usize,
    stop: Option<&'static str>,
}

#[derive(Debug, Clone, Serialize)]
struct SweepSummary {
    scenario: &'static str,
    grid: GridSummary,
    members: Vec<SweepMember>,
}

/// One optimization per bound, each in its own subdirectory. Members run in
/// parallel on the current rayon pool; results are reported in list order.
pub fn sweep(exp: &Experiment, out: &mut OutputDir) -> Result<Vec<(f64, OptimizeOutcome)>, CliError> {
    let bounds = &exp.config.sweep;
    let mut names: Vec<String> = bounds.iter().map(|&b| member_dir(b)).collect();
    names.sort();
    names.dedup();
    if names.len() != bounds.len() {
        return Err(CliError::config("sweep", "bounds must be distinct"));
    }
    let subdirs = bounds.iter().map(|&b| out.subdir(&member_dir(b))).collect::<Result<Vec<_>, _>>()?;
    let results: Vec<Result<(OutputDir, f64, OptimizeOutcome), CliError>> = bounds
        .par_iter()
        .zip(subdirs.into_par_iter())
        .map(|(&b, mut dir)| {
            let member = exp.with_bound(b)?;
            let outcome = optimize_run(&member, &mut dir)?;
            Ok((dir, b, outcome))
        })
        .collect();
    let mut members = Vec::with_capacity(bounds.len());
    let mut rows = Vec::with_capacity(bounds.len());
    let mut outcomes = Vec::with_capacity(bounds.len());
    for result in results {
        let (dir, b, outcome) = result?;
        out.absorb(dir);
        let o = &outcome.optimum;
        let iterations = o.log.records.len().saturating_sub(1);
        rows.push(vec![
            fmt_float(b),
            fmt_float(o.report.j_total),
            fmt_float(o.report.j_state),
            fmt_float(o.report.j_control),
            fmt_float(o.schedule.max_value()),
            iterations.to_string(),
        ]);
        members.push(SweepMember {
            u_bar: finite_or_null(b),
            dir: member_dir(b),
            cost: (&o.report).into(),
            max_u: o.schedule.max_value(),
            iterations,
            stop: o.log.stop.map(|s| s.as_str()),
        });
        outcomes.push((b, outcome));
    }
    out.write_json("summary.json", &SweepSummary { scenario: "sweep", grid: grid_summary(&exp.problem), members })?;
    out.write_csv("sweep_summary.csv", &output::SWEEP_HEADER, rows)?;
    Ok(outcomes)
}

/// Results of one scenario, as returned by [`crate::execute`].
pub enum Outcome {
    Simulate(SimulateOutcome),
    Optimize(Box<OptimizeOutcome>),
    Sweep(Vec<(f64, OptimizeOutcome)>),
}

pub type Manifest = Vec<ManifestEntry>;
