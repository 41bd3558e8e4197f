//! Independent oracles: naive quadrature, finite-difference gradients,
//! manufactured solutions and a space-time duality check.
//!
//! Everything here favors the plainest algorithm over speed and is guarded
//! against accidental use on large grids.

use crate::adjoint::{adjoint_birth_source, explicit_adjoint_term};
use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::field::{Field, Layer, StateField};
use crate::grid::Grid;
use crate::linalg::neumann_laplacian;
use crate::model::{kernel_eval, reaction_matrix, ModelParams};
use crate::nonlocal::{infection_coupling, ForceOfInfection, SpaceProfile};
use crate::objective::cost_streaming;
use crate::problem::Problem;
use crate::state::Trajectory;

/// Largest `na · nx` the brute-force oracles accept.
pub const BRUTE_FORCE_NODE_LIMIT: usize = 10_000;

/// Outcome of comparing a computed quantity with its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct OracleReport {
    pub name: String,
    pub computed: Vec<f64>,
    pub reference: Vec<f64>,
    /// `‖computed - reference‖₂`.
    pub abs_error: f64,
    /// `abs_error / ‖reference‖₂`, or `abs_error` when the reference is zero.
    pub rel_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    /// Compares in the relative ℓ² sense.
    pub fn relative(name: impl Into<String>, computed: Vec<f64>, reference: Vec<f64>, tolerance: f64) -> Self {
        let abs_error = computed.iter().zip(&reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let scale = reference.iter().map(|v| v * v).sum::<f64>().sqrt();
        let rel_error = if scale > 0.0 { abs_error / scale } else { abs_error };
        let length_ok = computed.len() == reference.len();
        OracleReport {
            name: name.into(),
            computed,
            reference,
            abs_error,
            rel_error,
            tolerance,
            pass: length_ok && rel_error <= tolerance,
        }
    }

    /// Checks a scalar against an upper bound.
    pub fn at_most(name: impl Into<String>, value: f64, bound: f64) -> Self {
        OracleReport {
            name: name.into(),
            computed: vec![value],
            reference: vec![bound],
            abs_error: value,
            rel_error: value,
            tolerance: bound,
            pass: value <= bound,
        }
    }
}

/// Central differences of the reduced cost, one coordinate at a time,
/// divided by `dt` so they are comparable with the `L²(0, T)` gradient.
pub fn fd_gradient(
    y0: &StateField,
    schedule: &ControlSchedule,
    problem: &Problem,
    epsilon: f64,
) -> Result<ControlSchedule> {
    if !(epsilon > 0.0) {
        return Err(Error::config("epsilon", format!("must be positive, got {epsilon}")));
    }
    let dt = problem.grid.dt();
    let mut out = schedule.clone();
    let mut probe = schedule.clone();
    for q in 0..schedule.values().len() {
        let base = schedule.values()[q];
        probe.values_mut()[q] = base + epsilon;
        let up = cost_streaming(y0, &probe, problem)?.j_total;
        probe.values_mut()[q] = base - epsilon;
        let down = cost_streaming(y0, &probe, problem)?.j_total;
        probe.values_mut()[q] = base;
        out.values_mut()[q] = (up - down) / (2.0 * epsilon) / dt;
    }
    Ok(out)
}

fn guard(grid: &Grid, what: &str) -> Result<()> {
    let nodes = grid.na * grid.nx;
    if nodes > BRUTE_FORCE_NODE_LIMIT {
        return Err(Error::Guard(format!("{what} needs na * nx <= {BRUTE_FORCE_NODE_LIMIT}, got {nodes}")));
    }
    Ok(())
}

/// The force of infection by a direct loop over every (output, input) node
/// pair, with no precomputed kernel matrix.
pub fn brute_force_lambda(infectious: &Field, grid: &Grid, params: &ModelParams) -> Result<ForceOfInfection> {
    guard(grid, "brute_force_lambda")?;
    infectious.check_grid(grid, "brute_force_lambda")?;
    let mut values = vec![0.0; grid.nx];
    for (m, out) in values.iter_mut().enumerate() {
        let x = grid.x_nodes[m];
        let mut acc = 0.0;
        for n in 0..grid.nx {
            for k in 0..grid.na {
                acc += grid.age_trap_w[k]
                    * grid.space_trap_w[n]
                    * kernel_eval(grid.x_nodes[n], x, params)
                    * infectious[(k, n)];
            }
        }
        *out = acc;
    }
    Ok(SpaceProfile { values })
}

type Closed = Box<dyn Fn(f64, f64, f64) -> [f64; 4] + Send + Sync>;

/// A closed-form target `y*(t, a, x)` together with its transport
/// derivative `(∂_t + ∂_a) y*` and its Laplacian `∂_xx y*`.
pub struct Manufactured {
    pub value: Closed,
    pub transport: Closed,
    pub laplacian: Closed,
}

impl Manufactured {
    /// `y*_c = A_c e^{-t-a} (1 + cos πx)`, which satisfies the Neumann
    /// condition at `x = 0` and `x = 1` exactly.
    pub fn exp_cos(amplitudes: [f64; 4]) -> Self {
        use std::f64::consts::PI;
        let value = move |t: f64, a: f64, x: f64| {
            let e = (-t - a).exp() * (1.0 + (PI * x).cos());
            amplitudes.map(|c| c * e)
        };
        Manufactured {
            value: Box::new(value),
            transport: Box::new(move |t, a, x| value(t, a, x).map(|v| -2.0 * v)),
            laplacian: Box::new(move |t, a, x| {
                let e = -PI * PI * (-t - a).exp() * (PI * x).cos();
                amplitudes.map(|c| c * e)
            }),
        }
    }

    /// A constant target.
    pub fn constant(values: [f64; 4]) -> Self {
        Manufactured {
            value: Box::new(move |_, _, _| values),
            transport: Box::new(|_, _, _| [0.0; 4]),
            laplacian: Box::new(|_, _, _| [0.0; 4]),
        }
    }
}

/// How the forcing treats space.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForcingMode {
    /// Exact Laplacian and exact space integral: the grid solution converges
    /// to `y*` in both `dt` and `dx`.
    Continuous,
    /// Discrete Laplacian and discrete space quadrature: `y*` sampled at the
    /// space nodes solves the semi-discrete problem, leaving only the error
    /// of the time-age march.
    SpaceDiscrete,
}

/// Tabulated forcing `f = δy* + L y* + Λ(y*) y* - σΔy*` (zero control).
pub struct ManufacturedForcing<'a> {
    target: &'a Manufactured,
    problem: &'a Problem,
    mode: ForcingMode,
    /// Force of infection of `y*` per time node and space node.
    lambda: Vec<Vec<f64>>,
}

const AGE_PANELS: usize = 32;
const SPACE_PANELS: usize = 16;

/// Composite Simpson rule on `[lo, hi]`.
fn simpson(lo: f64, hi: f64, panels: usize, f: impl Fn(f64) -> f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    let n = 2 * panels;
    let h = (hi - lo) / n as f64;
    let mut acc = f(lo) + f(hi);
    for i in 1..n {
        let w = if i % 2 == 1 { 4.0 } else { 2.0 };
        acc += w * f(lo + i as f64 * h);
    }
    acc * h / 3.0
}

/// Builds the forcing for `target` on the problem's grid.
pub fn manufactured_forcing<'a>(
    target: &'a Manufactured,
    problem: &'a Problem,
    mode: ForcingMode,
) -> Result<ManufacturedForcing<'a>> {
    let g = &problem.grid;
    let params = &problem.params;
    let a_max = g.a_max();
    let (x_lo, x_hi) = (g.spec.x_lo, g.spec.x_hi);
    let age_integral = |t: f64, xi: f64| simpson(0.0, a_max, AGE_PANELS, |a| (target.value)(t, a, xi)[2]);
    let mut lambda = Vec::with_capacity(g.nt);
    for &t in &g.t_nodes {
        let row = match mode {
            ForcingMode::Continuous => g
                .x_nodes
                .iter()
                .map(|&x| {
                    // The kernel has kinks at ξ = x and ξ = x ± width.
                    let w = params.kernel_width;
                    let f = |xi: f64| kernel_eval(xi, x, params) * age_integral(t, xi);
                    simpson((x - w).max(x_lo), x, SPACE_PANELS, f) + simpson(x, (x + w).min(x_hi), SPACE_PANELS, f)
                })
                .collect(),
            ForcingMode::SpaceDiscrete => {
                let integrated: Vec<f64> = g.x_nodes.iter().map(|&xi| age_integral(t, xi)).collect();
                g.x_nodes
                    .iter()
                    .map(|&x| {
                        (0..g.nx)
                            .map(|n| g.space_trap_w[n] * kernel_eval(g.x_nodes[n], x, params) * integrated[n])
                            .sum()
                    })
                    .collect()
            }
        };
        lambda.push(row);
    }
    Ok(ManufacturedForcing { target, problem, mode, lambda })
}

impl ManufacturedForcing<'_> {
    fn laplacian(&self, t: f64, a: f64, x: f64) -> [f64; 4] {
        match self.mode {
            ForcingMode::Continuous => (self.target.laplacian)(t, a, x),
            ForcingMode::SpaceDiscrete => {
                let g = &self.problem.grid;
                let h = g.dx();
                let (x_lo, x_hi) = (g.spec.x_lo, g.spec.x_hi);
                // Mirrored ghost nodes, as in the solver.
                let left = if x - h < x_lo - 1e-12 { x + h } else { x - h };
                let right = if x + h > x_hi + 1e-12 { x - h } else { x + h };
                let (yl, y0, yr) =
                    ((self.target.value)(t, a, left), (self.target.value)(t, a, x), (self.target.value)(t, a, right));
                std::array::from_fn(|c| (yl[c] - 2.0 * y0[c] + yr[c]) / (h * h))
            }
        }
    }

    /// Source term at a grid node.
    pub fn source(&self, t: f64, a: f64, x: f64) -> [f64; 4] {
        let pb = self.problem;
        let g = &pb.grid;
        let n = (t / g.dt()).round() as usize;
        let m = ((x - g.spec.x_lo) / g.dx()).round() as usize;
        let y = (self.target.value)(t, a, x);
        let dy = (self.target.transport)(t, a, x);
        let lap = self.laplacian(t, a, x);
        let l = reaction_matrix(a, x, &pb.params, g.a_max()).expect("grid ages lie in range");
        let coupling = infection_coupling(y, pb.params.phi1, pb.params.phi2);
        let sigma = pb.params.sigma().map(|d| d.eval(a));
        let lam = self.lambda[n.min(g.nt - 1)][m.min(g.nx - 1)];
        std::array::from_fn(|c| {
            let ly: f64 = (0..4).map(|d| l[c][d] * y[d]).sum();
            dy[c] + ly + lam * coupling[c] - sigma[c] * lap[c]
        })
    }

    /// Exact newborn values `y*(t, 0, x)`.
    pub fn boundary(&self, t: f64, x: f64) -> [f64; 4] {
        (self.target.value)(t, 0.0, x)
    }

    /// `y*` sampled on the grid at time node `n`.
    pub fn exact_layer(&self, n: usize) -> StateField {
        let g = &self.problem.grid;
        let t = g.t_nodes[n];
        Layer::from_fn(g, |a, x| (self.target.value)(t, a, x))
    }
}

/// Closed-form space-time fields for the duality check.
pub struct DualityFields {
    /// Frozen state about which the model is linearized.
    pub state: Closed,
    /// Perturbation `h` with `h(0, ·) = 0`.
    pub perturbation: Closed,
    /// Adjoint test function `p` with `p(T, ·) = 0` and `p(·, a_max, ·) = 0`.
    pub adjoint: Closed,
}

impl DualityFields {
    /// A smooth, non-separable default satisfying the edge conditions on
    /// `[0, T] × [0, a_max] × [0, 1]`.
    pub fn smooth(t_final: f64, a_max: f64) -> Self {
        use std::f64::consts::PI;
        DualityFields {
            state: Box::new(|t, a, x| {
                let b = 1.0 + 0.3 * (PI * x).cos() * (-a).exp();
                [800.0 * b, 50.0 * (1.0 + a), 20.0 * b * (1.0 + t), 30.0 * a]
            }),
            perturbation: Box::new(|t, a, x| {
                let s = (0.5 * PI * t).sin();
                let c = (PI * x).cos();
                [s * (1.0 + a) * c, s * (1.0 - a), s * (1.0 + c) * (1.0 + a * a), s * a * c]
            }),
            adjoint: Box::new(move |t, a, x| {
                let edge = (t_final - t) * (a_max - a);
                let c = (2.0 * PI * x).cos();
                [edge * (1.0 + c), edge * (0.5 - a), edge * (2.0 + (PI * x).cos()), edge * (1.0 + a) * c]
            }),
        }
    }
}

/// Result of one duality check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DualityGap {
    /// `⟨𝓛h, p⟩ + ∫∫ p(t, 0, x) · (h(t, 0, x) - ∫ β h da)`.
    pub forward: f64,
    /// `⟨h, 𝓛* p⟩`.
    pub adjoint: f64,
    /// `|forward - adjoint| / max(|forward|, |adjoint|)`.
    pub relative: f64,
}

/// Directional derivative along characteristics by differences on the grid.
fn transport_derivative(layers: &[Layer], grid: &Grid, n: usize, k: usize, c: usize, m: usize) -> f64 {
    let dt = grid.dt();
    let at = |n: usize, k: usize| layers[n].comps[c][(k, m)];
    let ahead = n + 1 < grid.nt && k + 1 < grid.na;
    let behind = n >= 1 && k >= 1;
    match (behind, ahead) {
        (true, true) => (at(n + 1, k + 1) - at(n - 1, k - 1)) / (2.0 * dt),
        (false, true) => (at(n + 1, k + 1) - at(n, k)) / dt,
        (true, false) => (at(n, k) - at(n - 1, k - 1)) / dt,
        (false, false) => 0.0,
    }
}

/// Compares the linearized state operator with the adjoint operator on
/// grid samples of closed-form fields. Both sides share the solvers'
/// reaction, control, Laplacian and nonlocal building blocks; transport is
/// differenced along characteristics and every integral is a trapezoid.
pub fn duality_check(problem: &Problem, schedule: &ControlSchedule, fields: &DualityFields) -> Result<DualityGap> {
    let g = &problem.grid;
    let params = &problem.params;
    schedule.check(problem)?;
    let (nt, na, nx) = (g.nt, g.na, g.nx);
    let sample =
        |f: &Closed| -> Vec<Layer> { g.t_nodes.iter().map(|&t| Layer::from_fn(g, |a, x| f(t, a, x))).collect() };
    let y = sample(&fields.state);
    let h = sample(&fields.perturbation);
    let p = sample(&fields.adjoint);
    let inv_dx2 = 1.0 / (g.dx() * g.dx());
    let time_w = g.time_trap_w();
    let (phi1, phi2) = (params.phi1, params.phi2);

    let mut forward = 0.0;
    let mut adjoint = 0.0;
    let mut lap_h = vec![vec![0.0; nx]; 4];
    let mut lap_p = vec![vec![0.0; nx]; 4];
    for n in 0..nt {
        // A control step covers [t_n, t_{n+1}); the final node reuses the last step.
        let u = schedule.expand(n.min(schedule.steps() - 1), problem)?;
        let lam_y = problem.nonlocal.force(y[n].i());
        let lam_h = problem.nonlocal.force(h[n].i());
        let lam_adj = problem.nonlocal.adjoint(&y[n], &p[n]);
        let birth_src = adjoint_birth_source(&p[n], problem);
        let mut layer_fwd = 0.0;
        let mut layer_adj = 0.0;
        for k in 0..na {
            let l = problem.reaction(k);
            for c in 0..4 {
                neumann_laplacian(h[n].comps[c].row(k), inv_dx2, &mut lap_h[c]);
                neumann_laplacian(p[n].comps[c].row(k), inv_dx2, &mut lap_p[c]);
            }
            for m in 0..nx {
                let (yn, hn, pn) = (y[n].node(k, m), h[n].node(k, m), p[n].node(k, m));
                let uk = u[(k, m)];
                let ch = infection_coupling(hn, phi1, phi2);
                let cy = infection_coupling(yn, phi1, phi2);
                let infection = explicit_adjoint_term(pn, lam_y.at(k, m), lam_adj.at(k, m), phi1, phi2);
                let mut lin = [0.0; 4];
                let mut dual = [0.0; 4];
                for c in 0..4 {
                    let lh: f64 = (0..4).map(|d| l[c][d] * hn[d]).sum();
                    let ltp: f64 = (0..4).map(|d| l[d][c] * pn[d]).sum();
                    let sigma = problem.sigma(c)[k];
                    lin[c] =
                        transport_derivative(&h, g, n, k, c, m) + lh + lam_y.at(k, m) * ch[c] + lam_h.at(k, m) * cy[c]
                            - sigma * lap_h[c][m];
                    dual[c] = -transport_derivative(&p, g, n, k, c, m) + ltp
                        - infection[c]
                        - sigma * lap_p[c][m]
                        - birth_src[(k, m)];
                }
                lin[0] += uk * hn[0];
                lin[1] -= uk * hn[0];
                dual[0] += uk * (pn[0] - pn[1]);
                let w = g.cell_weight(k, m);
                layer_fwd += w * (0..4).map(|c| lin[c] * pn[c]).sum::<f64>();
                layer_adj += w * (0..4).map(|c| hn[c] * dual[c]).sum::<f64>();
            }
        }
        // Birth residual h(t, 0, x) - ∫ β h da, paired with p(t, 0, x).
        let mut boundary = 0.0;
        for m in 0..nx {
            let births: f64 =
                (0..na).map(|k| g.age_trap_w[k] * problem.fertility()[k] * h[n].node(k, m).iter().sum::<f64>()).sum();
            let h0 = h[n].node(0, m);
            let p0 = p[n].node(0, m);
            let residual = [h0[0] - births, h0[1], h0[2], h0[3]];
            boundary += g.space_trap_w[m] * (0..4).map(|c| p0[c] * residual[c]).sum::<f64>();
        }
        forward += time_w[n] * (layer_fwd + boundary);
        adjoint += time_w[n] * layer_adj;
    }
    let scale = forward.abs().max(adjoint.abs());
    Ok(DualityGap { forward, adjoint, relative: if scale > 0.0 { (forward - adjoint).abs() / scale } else { 0.0 } })
}

/// Per-step residual of the discrete population balance
/// `M_{n+1} - M_n = dt/2 (B_n + B_{n+1}) - dt/2 (E_n + E_{n+1})`, where `M` is
/// the total population, `B` the newborn flux at `a = 0` and `E` the flux
/// leaving at `a = a_max`. Only meaningful without deaths, where the balance
/// holds exactly and the residual measures roundoff and splitting error.
pub fn mass_balance_residuals(traj: &Trajectory, grid: &Grid) -> Vec<f64> {
    let edge_flux = |layer: &Layer, k: usize| -> f64 {
        (0..grid.nx).map(|m| grid.space_trap_w[m] * layer.node(k, m).iter().sum::<f64>()).sum()
    };
    let last = grid.na - 1;
    traj.layers
        .windows(2)
        .map(|w| {
            let (now, next) = (&w[0], &w[1]);
            let inflow = 0.5 * grid.dt() * (edge_flux(now, 0) + edge_flux(next, 0));
            let outflow = 0.5 * grid.dt() * (edge_flux(now, last) + edge_flux(next, last));
            (next.total_mass(grid) - now.total_mass(grid) - inflow + outflow).abs()
        })
        .collect()
}

/// Observed order `log₂(e_coarse / e_fine)` for each consecutive pair of a
/// halving ladder.
pub fn observed_orders(errors: &[f64]) -> Vec<f64> {
    errors.windows(2).map(|w| (w[0] / w[1]).log2()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use crate::model::ControlLayout;
    use crate::nonlocal::apply_lambda;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn problem(spec: GridSpec, params: ModelParams) -> Problem {
        Problem::new(build_grid(spec).unwrap(), params, ControlLayout::default()).unwrap()
    }

    #[test]
    fn brute_force_matches_operator() {
        let g = build_grid(GridSpec::new(1.0, 1.0, 0.05, 0.05)).unwrap();
        let params = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let i = Field::from_fn(&g, |_, _| rng.gen_range(0.0..10.0));
        let fast = apply_lambda(&i, &g, &params).unwrap();
        let slow = brute_force_lambda(&i, &g, &params).unwrap();
        for (a, b) in fast.values.iter().zip(&slow.values) {
            assert!((a - b).abs() <= 1e-13 * a.abs().max(1.0));
        }
        let zero = brute_force_lambda(&Field::on_grid(&g), &g, &params).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn brute_force_of_ones_matches_closed_form() {
        // Kinks of the hat kernel fall on nodes, so the trapezoid rule is exact.
        let params = ModelParams::default();
        for dx in [0.02, 0.01, 0.005] {
            let g = build_grid(GridSpec::new(1.0, 1.0, 0.1, dx)).unwrap();
            let f = brute_force_lambda(&Field::constant(g.na, g.nx, 1.0), &g, &params).unwrap();
            assert!((f.values[g.nx / 2] - 0.01).abs() < 1e-14);
            assert!((f.values[0] - 0.005).abs() < 1e-14);
        }
    }

    #[test]
    fn brute_force_guard() {
        let g = build_grid(GridSpec::new(1.0, 1.0, 0.005, 0.01)).unwrap();
        let err = brute_force_lambda(&Field::on_grid(&g), &g, &ModelParams::default());
        assert!(matches!(err, Err(Error::Guard(_))));
    }

    #[test]
    fn fd_gradient_of_control_penalty_alone() {
        let p = problem(GridSpec::new(0.5, 1.0, 0.05, 0.1), ModelParams::default());
        let zero = Layer::zeros(&p.grid);
        let mut sched = ControlSchedule::zeros_for(&p);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        sched.values_mut().iter_mut().for_each(|v| *v = rng.gen_range(0.0..5.0));
        let fd = fd_gradient(&zero, &sched, &p, 1e-3).unwrap();
        let n = sched.layer_len();
        for (q, (f, u)) in fd.values().iter().zip(sched.values()).enumerate() {
            let exact = p.params.alpha * p.control_weights()[q % n] * u;
            assert!((f - exact).abs() <= 1e-8 * exact.abs().max(1.0), "{f} vs {exact}");
        }
        assert!(fd_gradient(&zero, &sched, &p, 0.0).is_err());
    }

    #[test]
    fn fd_gradient_richardson_consistency() {
        let p = problem(GridSpec::new(0.5, 1.0, 0.05, 0.1), ModelParams::default());
        let y0 = Layer::uniform(&p.grid, [1000.0, 0.0, 10.0, 0.0]);
        let sched = ControlSchedule::constant_for(&p, 3.0);
        let a = fd_gradient(&y0, &sched, &p, 2e-2).unwrap();
        let b = fd_gradient(&y0, &sched, &p, 1e-2).unwrap();
        let c = fd_gradient(&y0, &sched, &p, 5e-3).unwrap();
        let diff = |x: &ControlSchedule, y: &ControlSchedule| {
            x.values().iter().zip(y.values()).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max)
        };
        let (d1, d2) = (diff(&a, &b), diff(&b, &c));
        // Central differences: halving ε quarters the gap, up to roundoff.
        assert!(d2 <= 0.3 * d1 + 1e-6, "{d1} {d2}");
    }

    #[test]
    fn constant_target_with_inert_model_needs_no_forcing() {
        let p = problem(GridSpec::new(0.2, 1.0, 0.05, 0.1), ModelParams::inert());
        let target = Manufactured::constant([1.0, 2.0, 3.0, 4.0]);
        for mode in [ForcingMode::Continuous, ForcingMode::SpaceDiscrete] {
            let f = manufactured_forcing(&target, &p, mode).unwrap();
            for &t in &p.grid.t_nodes {
                for &a in &p.grid.a_nodes {
                    for &x in &p.grid.x_nodes {
                        assert_eq!(f.source(t, a, x), [0.0; 4]);
                    }
                }
            }
        }
    }

    #[test]
    fn exp_cos_target_is_neumann_compatible() {
        let target = Manufactured::exp_cos([1.0, 0.5, 0.2, 0.3]);
        let h = 1e-6;
        for x in [0.0, 1.0] {
            let d = |t: f64, a: f64| ((target.value)(t, a, x + h)[0] - (target.value)(t, a, x - h)[0]) / (2.0 * h);
            assert!(d(0.3, 0.2).abs() < 1e-8);
        }
        // The closed-form derivatives agree with differences.
        let (t, a, x) = (0.3, 0.2, 0.37);
        let fd_transport = ((target.value)(t + h, a + h, x)[1] - (target.value)(t - h, a - h, x)[1]) / (2.0 * h);
        assert!((fd_transport - (target.transport)(t, a, x)[1]).abs() < 1e-7);
        let h = 1e-4;
        let fd_lap = ((target.value)(t, a, x + h)[2] - 2.0 * (target.value)(t, a, x)[2]
            + (target.value)(t, a, x - h)[2])
            / (h * h);
        assert!((fd_lap - (target.laplacian)(t, a, x)[2]).abs() < 1e-5);
    }

    #[test]
    fn simpson_integrates_cubics_exactly() {
        let v = simpson(0.0, 2.0, 3, |x| x * x * x - x);
        assert!((v - 2.0).abs() < 1e-13);
        assert_eq!(simpson(1.0, 1.0, 4, |x| x), 0.0);
    }

    #[test]
    fn orders_from_ladder() {
        let o = observed_orders(&[1.0, 0.25, 0.0625]);
        assert_eq!(o, vec![2.0, 2.0]);
    }

    #[test]
    fn report_semantics() {
        let r = OracleReport::relative("x", vec![1.0, 2.0], vec![1.0, 2.0], 0.0);
        assert!(r.pass && r.abs_error == 0.0);
        let r = OracleReport::relative("x", vec![1.1], vec![1.0], 0.05);
        assert!(!r.pass);
        assert!((r.rel_error - 0.1).abs() < 1e-12);
        assert!(OracleReport::at_most("b", 1.0, 1.0).pass);
        assert!(!OracleReport::relative("len", vec![1.0], vec![1.0, 0.0], 1.0).pass);
    }

    #[test]
    fn duality_gap_shrinks_under_refinement() {
        let mut gaps = Vec::new();
        for (dt, dx) in [(0.05, 0.1), (0.025, 0.05), (0.0125, 0.025)] {
            let p = problem(GridSpec::new(0.5, 1.0, dt, dx), ModelParams::default());
            let fields = DualityFields::smooth(0.5, 1.0);
            let sched = ControlSchedule::constant_for(&p, 4.0);
            gaps.push(duality_check(&p, &sched, &fields).unwrap().relative);
        }
        assert!(gaps[1] < gaps[0] && gaps[2] < gaps[1], "{gaps:?}");
        let orders = observed_orders(&gaps);
        assert!(orders.iter().all(|&o| o > 0.8), "{orders:?}");
    }
}
