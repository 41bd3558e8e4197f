//! Forward SVIR solver along characteristics.
//!
//! Each step moves every cohort from `(t_n, a_{k-1})` to `(t_{n+1}, a_k)`.
//! Reaction, control and diffusion are treated by Crank–Nicolson; the
//! bilinear infection term is extrapolated with second-order
//! Adams–Bashforth along the same characteristic. The newborn node `a = 0`
//! is filled by the birth law after the sweep.
//!
//! The Crank–Nicolson system is solved exactly: `(S, V)` couple through the
//! vaccination and waning terms and are solved as one block-tridiagonal
//! system, then `I`, then `R` with the new `I` on its right-hand side.

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::field::{Field, Layer, StateField};
use crate::grid::Grid;
use crate::linalg::{neumann_laplacian, solve_neumann_pair, solve_neumann_scalar};
use crate::model::ModelParams;
use crate::nonlocal::{infection_coupling, ForceOfInfection};
use crate::problem::Problem;

/// Additive source and boundary override for verification runs.
///
/// Not reachable from configuration files; manufactured-solution tests
/// construct it directly.
pub struct Forcing<'a> {
    /// `f(t, a, x)` added to the right-hand side of every compartment.
    pub source: &'a dyn Fn(f64, f64, f64) -> [f64; 4],
    /// Replaces the birth law at `a = 0` when present.
    pub boundary: Option<&'a dyn Fn(f64, f64) -> [f64; 4]>,
}

/// Time history of the state.
#[derive(Debug, Clone)]
pub struct Trajectory {
    pub layers: Vec<StateField>,
    /// Newborn values `B(t_n, x)` per time node and space node.
    pub births: Vec<Vec<[f64; 4]>>,
}

impl Trajectory {
    pub fn final_layer(&self) -> &StateField {
        self.layers.last().expect("trajectory has at least one layer")
    }
}

/// Births of one layer: `B_S(x) = Σ_k w_k β̃(a_k) (S+V+I+R)(a_k, x)`,
/// `B_V = B_I = B_R = 0`.
///
/// The `k = 0` term carries `β̃(0) = 0`, so the value stored at the newborn
/// node never feeds back into its own birth count.
pub fn compute_birth(layer: &StateField, problem: &Problem) -> Vec<[f64; 4]> {
    let grid = &problem.grid;
    let mut out = vec![[0.0; 4]; grid.nx];
    for k in 1..grid.na {
        let weight = grid.age_trap_w[k] * problem.fertility[k];
        if weight == 0.0 {
            continue;
        }
        for (m, b) in out.iter_mut().enumerate() {
            let total: f64 = layer.comps.iter().map(|f| f[(k, m)]).sum();
            b[0] += weight * total;
        }
    }
    out
}

/// Double trapezoid of `I` on every time node.
pub fn total_infectious(traj: &Trajectory, grid: &Grid) -> Vec<f64> {
    traj.layers.iter().map(|l| l.i().integrate(grid)).collect()
}

/// Explicit term `N = -Λ(I) · (S, φ₁V, -(S+φ₁V+φ₂R), φ₂R)` at one node.
#[inline]
fn explicit_term(y: [f64; 4], lambda: f64, params: &ModelParams) -> [f64; 4] {
    let c = infection_coupling(y, params.phi1, params.phi2);
    [-lambda * c[0], -lambda * c[1], -lambda * c[2], -lambda * c[3]]
}

/// Forward stepper bound to one problem.
pub struct ForwardSolver<'a> {
    problem: &'a Problem,
}

impl<'a> ForwardSolver<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        ForwardSolver { problem }
    }

    pub fn problem(&self) -> &Problem {
        self.problem
    }

    /// Advances one time step from layer `n` to layer `n + 1`.
    ///
    /// `previous` is layer `n - 1` with its force of infection `lambda_prev`;
    /// without it the explicit term falls back to first order. `u_now` and
    /// `u_next` are the nodal controls used at the start and end of each
    /// characteristic segment. The newborn node of the returned layer is left
    /// at zero for the caller to fill.
    #[allow(clippy::too_many_arguments)]
    pub fn step(
        &self,
        current: &StateField,
        previous: Option<&StateField>,
        lambda_now: &ForceOfInfection,
        lambda_prev: &ForceOfInfection,
        u_now: &Field,
        u_next: &Field,
        n: usize,
        forcing: Option<&Forcing<'_>>,
    ) -> Result<StateField> {
        let p = self.problem;
        let g = &p.grid;
        let params = &p.params;
        let (na, nx) = (g.na, g.nx);
        let dt = g.dt();
        let theta = 0.5 * dt;
        let inv_dx2 = 1.0 / (g.dx() * g.dx());
        let t0 = g.t_nodes[n];
        let t1 = g.t_nodes[n + 1];

        let mut next = Layer::zeros(g);
        let mut lap = [vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]];
        let mut pair_base = vec![[0.0; 4]; nx];
        let mut pair_rhs = vec![[0.0; 2]; nx];
        let mut pair_out = vec![[0.0; 2]; nx];
        let mut scalar_base = vec![0.0; nx];
        let mut scalar_rhs = vec![0.0; nx];
        let mut scalar_out = vec![0.0; nx];
        let mut rhs = vec![[0.0; 4]; nx];

        for k in 1..na {
            let src = k - 1;
            let l0 = p.reaction(src);
            let l1 = p.reaction(k);
            for c in 0..4 {
                neumann_laplacian(current.comps[c].row(src), inv_dx2, &mut lap[c]);
            }
            let history = match previous {
                Some(prev) if k >= 2 => Some(prev),
                _ => None,
            };
            for m in 0..nx {
                let y0 = current.node(src, m);
                let u0 = u_now[(src, m)];
                // A y = σΔy - L y - K(u) y, with K(u) y = (uS, -uS, 0, 0).
                let mut a0y = [0.0; 4];
                for c in 0..4 {
                    let ly: f64 = (0..4).map(|d| l0[c][d] * y0[d]).sum();
                    a0y[c] = p.sigma[c][src] * lap[c][m] - ly;
                }
                a0y[0] -= u0 * y0[0];
                a0y[1] += u0 * y0[0];

                let now = explicit_term(y0, lambda_now.at(src, m), params);
                let extrap = match history {
                    Some(prev) => {
                        let old = explicit_term(prev.node(k - 2, m), lambda_prev.at(k - 2, m), params);
                        std::array::from_fn(|c| 1.5 * now[c] - 0.5 * old[c])
                    }
                    None => now,
                };
                let mut r: [f64; 4] = std::array::from_fn(|c| y0[c] + theta * a0y[c] + dt * extrap[c]);
                if let Some(f) = forcing {
                    let f0 = (f.source)(t0, g.a_nodes[src], g.x_nodes[m]);
                    let f1 = (f.source)(t1, g.a_nodes[k], g.x_nodes[m]);
                    for c in 0..4 {
                        r[c] += theta * (f0[c] + f1[c]);
                    }
                }
                rhs[m] = r;

                let u1 = u_next[(k, m)];
                pair_base[m] =
                    [1.0 + theta * (l1[0][0] + u1), theta * l1[0][1], theta * (l1[1][0] - u1), 1.0 + theta * l1[1][1]];
                pair_rhs[m] = [r[0], r[1]];
            }

            let r_s = theta * p.sigma[0][k] * inv_dx2;
            let r_v = theta * p.sigma[1][k] * inv_dx2;
            solve_neumann_pair(&pair_base, [r_s, r_v], &pair_rhs, &mut pair_out)?;
            for m in 0..nx {
                next.comps[0][(k, m)] = pair_out[m][0];
                next.comps[1][(k, m)] = pair_out[m][1];
            }

            for m in 0..nx {
                scalar_base[m] = 1.0 + theta * l1[2][2];
                scalar_rhs[m] = rhs[m][2];
            }
            solve_neumann_scalar(&scalar_base, theta * p.sigma[2][k] * inv_dx2, &scalar_rhs, &mut scalar_out)?;
            next.comps[2].row_mut(k).copy_from_slice(&scalar_out);

            for m in 0..nx {
                scalar_base[m] = 1.0 + theta * l1[3][3];
                scalar_rhs[m] = rhs[m][3] - theta * l1[3][2] * next.comps[2][(k, m)];
            }
            solve_neumann_scalar(&scalar_base, theta * p.sigma[3][k] * inv_dx2, &scalar_rhs, &mut scalar_out)?;
            next.comps[3].row_mut(k).copy_from_slice(&scalar_out);
        }
        if !next.is_finite() {
            return Err(Error::Numerical(format!("non-finite state at t = {t1}")));
        }
        Ok(next)
    }

    fn fill_newborns(&self, layer: &mut StateField, n: usize, forcing: Option<&Forcing<'_>>) -> Vec<[f64; 4]> {
        let g = &self.problem.grid;
        let births = match forcing.and_then(|f| f.boundary) {
            Some(b) => g.x_nodes.iter().map(|&x| b(g.t_nodes[n], x)).collect(),
            None => compute_birth(layer, self.problem),
        };
        for (m, b) in births.iter().enumerate() {
            layer.set_node(0, m, *b);
        }
        births
    }

    /// Marches from `y0` to the final time, handing each completed layer to
    /// `visit` in order. Only two layers are kept in memory.
    pub fn run(
        &self,
        y0: &StateField,
        schedule: &ControlSchedule,
        forcing: Option<&Forcing<'_>>,
        mut visit: impl FnMut(usize, &StateField, &[[f64; 4]]) -> Result<()>,
    ) -> Result<()> {
        let p = self.problem;
        p.check_layer(y0, "initial state")?;
        schedule.check(p)?;
        let mut current = y0.clone();
        let births = self.fill_newborns(&mut current, 0, forcing);
        visit(0, &current, &births)?;
        let mut lambda_now = p.nonlocal.force(current.i());
        let mut previous: Option<(StateField, ForceOfInfection)> = None;
        for n in 0..p.grid.nt - 1 {
            let u = schedule.expand(n, p)?;
            let (prev_layer, lambda_prev) = match &previous {
                Some((l, lam)) => (Some(l), lam),
                None => (None, &lambda_now),
            };
            let mut next = self.step(&current, prev_layer, &lambda_now, lambda_prev, &u, &u, n, forcing)?;
            let births = self.fill_newborns(&mut next, n + 1, forcing);
            visit(n + 1, &next, &births)?;
            let lambda_next = p.nonlocal.force(next.i());
            let old = std::mem::replace(&mut current, next);
            previous = Some((old, std::mem::replace(&mut lambda_now, lambda_next)));
        }
        Ok(())
    }
}

/// Full forward solve, storing every layer.
pub fn solve_forward(y0: &StateField, schedule: &ControlSchedule, problem: &Problem) -> Result<Trajectory> {
    solve_forward_forced(y0, schedule, problem, None)
}

pub fn solve_forward_forced(
    y0: &StateField,
    schedule: &ControlSchedule,
    problem: &Problem,
    forcing: Option<&Forcing<'_>>,
) -> Result<Trajectory> {
    let mut layers = Vec::with_capacity(problem.grid.nt);
    let mut births = Vec::with_capacity(problem.grid.nt);
    ForwardSolver::new(problem).run(y0, schedule, forcing, |_, layer, b| {
        layers.push(layer.clone());
        births.push(b.to_vec());
        Ok(())
    })?;
    Ok(Trajectory { layers, births })
}
