//! Backward adjoint solver.
//!
//! The adjoint runs from `t = T` down to `t = 0` along reversed
//! characteristics `(t_n, a_k) ← (t_{n+1}, a_{k+1})`, so the oldest age node
//! of each layer is the inflow boundary and carries `p = 0`. The linear part
//! `σΔ - (L + K(u))ᵀ` is Crank–Nicolson; the infection terms
//! `Λ(y)ᵀ p + Λ̃_y(p)` are Adams–Bashforth along the reversed characteristic.
//!
//! The transposed birth law feeds `β̃(a) p_S(t, 0, x)` into every compartment.
//! Node `a = 0` of a layer depends only on the previous layer, so it is
//! solved first and the birth source enters the rest of the layer without
//! lag.

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::field::{AdjointField, Field, Layer, StateField};
use crate::linalg::{neumann_laplacian, solve_neumann_pair, solve_neumann_scalar};
use crate::nonlocal::{ForceOfInfection, SpaceProfile};
use crate::problem::Problem;
use crate::state::Trajectory;

/// `(a, x) ↦ β̃(a) · p_S(a = 0, x)`.
pub fn adjoint_birth_source(p_layer: &AdjointField, problem: &Problem) -> Field {
    let g = &problem.grid;
    let mut out = Field::on_grid(g);
    let newborn = p_layer.s().row(0);
    for k in 0..g.na {
        let b = problem.fertility[k];
        for (o, ps) in out.row_mut(k).iter_mut().zip(newborn) {
            *o = b * ps;
        }
    }
    out
}

/// Infection terms of the adjoint equation moved to the right-hand side:
/// `-Λ(y) · (p_S - p_I, φ₁(p_V - p_I), 0, φ₂(p_R - p_I))`, with `-Λ̃_y(p)`
/// added in the I slot.
#[inline]
pub fn explicit_adjoint_term(p: [f64; 4], lambda: f64, lambda_adj: f64, phi1: f64, phi2: f64) -> [f64; 4] {
    let [ps, pv, pi, pr] = p;
    [-lambda * (ps - pi), -lambda * phi1 * (pv - pi), -lambda_adj, -lambda * phi2 * (pr - pi)]
}

/// Known data of one adjoint layer: the state, its force of infection and
/// the nonlocal adjoint evaluated with the adjoint on the same layer.
struct Frozen<'l> {
    y: &'l StateField,
    lambda: ForceOfInfection,
    lambda_adj: SpaceProfile,
}

pub struct BackwardSolver<'a> {
    problem: &'a Problem,
}

impl<'a> BackwardSolver<'a> {
    pub fn new(problem: &'a Problem) -> Self {
        BackwardSolver { problem }
    }

    /// `-g (g · y)` at one node.
    #[inline]
    fn tracking_source(&self, y: [f64; 4]) -> [f64; 4] {
        let g = self.problem.params.g;
        let gy: f64 = (0..4).map(|c| g[c] * y[c]).sum();
        std::array::from_fn(|c| -g[c] * gy)
    }

    /// Computes layer `n` from layer `n + 1`.
    ///
    /// `later` holds layer `n + 2` when it exists; without it the explicit
    /// term drops to first order.
    fn step(
        &self,
        n: usize,
        y_now: &StateField,
        upper: (&AdjointField, &Frozen<'_>),
        later: Option<(&AdjointField, &Frozen<'_>)>,
        u: &Field,
    ) -> Result<AdjointField> {
        let pb = self.problem;
        let g = &pb.grid;
        let (na, nx) = (g.na, g.nx);
        let dt = g.dt();
        let theta = 0.5 * dt;
        let inv_dx2 = 1.0 / (g.dx() * g.dx());
        let (phi1, phi2) = (pb.params.phi1, pb.params.phi2);
        let (p_up, fz_up) = upper;

        let mut out = Layer::zeros(g);
        let mut lap = [vec![0.0; nx], vec![0.0; nx], vec![0.0; nx], vec![0.0; nx]];
        let mut rhs = vec![[0.0; 4]; nx];
        let mut pair_base = vec![[0.0; 4]; nx];
        let mut pair_rhs = vec![[0.0; 2]; nx];
        let mut pair_out = vec![[0.0; 2]; nx];
        let mut scalar_base = vec![0.0; nx];
        let mut scalar_rhs = vec![0.0; nx];
        let mut scalar_out = vec![0.0; nx];
        let up_birth = p_up.s().row(0).to_vec();
        let mut now_birth = vec![0.0; nx];

        // Newborn node first: its birth source vanishes and it supplies the
        // birth source of every other node.
        let order = std::iter::once(0).chain(1..na - 1);
        for k in order {
            let src = k + 1;
            let l0 = pb.reaction(src);
            let l1 = pb.reaction(k);
            for c in 0..4 {
                neumann_laplacian(p_up.comps[c].row(src), inv_dx2, &mut lap[c]);
            }
            let history = later.filter(|_| k + 2 < na);
            for m in 0..nx {
                let p0 = p_up.node(src, m);
                let u0 = u[(src, m)];
                // B p = σΔp - (L + K(u))ᵀ p.
                let mut b0p = [0.0; 4];
                for c in 0..4 {
                    let ltp: f64 = (0..4).map(|d| l0[d][c] * p0[d]).sum();
                    b0p[c] = pb.sigma[c][src] * lap[c][m] - ltp;
                }
                b0p[0] -= u0 * (p0[0] - p0[1]);

                let now = explicit_adjoint_term(p0, fz_up.lambda.at(src, m), fz_up.lambda_adj.at(src, m), phi1, phi2);
                let extrap = match history {
                    Some((p_late, fz_late)) => {
                        let old = explicit_adjoint_term(
                            p_late.node(k + 2, m),
                            fz_late.lambda.at(k + 2, m),
                            fz_late.lambda_adj.at(k + 2, m),
                            phi1,
                            phi2,
                        );
                        std::array::from_fn(|c| 1.5 * now[c] - 0.5 * old[c])
                    }
                    None => now,
                };
                let s_up = self.tracking_source(fz_up.y.node(src, m));
                let s_now = self.tracking_source(y_now.node(k, m));
                let birth = pb.fertility[src] * up_birth[m] + pb.fertility[k] * now_birth[m];
                let r: [f64; 4] = std::array::from_fn(|c| {
                    p0[c] + theta * b0p[c] + dt * extrap[c] + theta * (s_up[c] + s_now[c] + birth)
                });
                rhs[m] = r;

                let u1 = u[(k, m)];
                // Rows of (I + θ(L + K)ᵀ) restricted to (p_S, p_V).
                pair_base[m] =
                    [1.0 + theta * (l1[0][0] + u1), theta * (l1[1][0] - u1), theta * l1[0][1], 1.0 + theta * l1[1][1]];
                pair_rhs[m] = [r[0], r[1]];
            }

            let r_s = theta * pb.sigma[0][k] * inv_dx2;
            let r_v = theta * pb.sigma[1][k] * inv_dx2;
            solve_neumann_pair(&pair_base, [r_s, r_v], &pair_rhs, &mut pair_out)?;
            for m in 0..nx {
                out.comps[0][(k, m)] = pair_out[m][0];
                out.comps[1][(k, m)] = pair_out[m][1];
            }

            for m in 0..nx {
                scalar_base[m] = 1.0 + theta * l1[3][3];
                scalar_rhs[m] = rhs[m][3];
            }
            solve_neumann_scalar(&scalar_base, theta * pb.sigma[3][k] * inv_dx2, &scalar_rhs, &mut scalar_out)?;
            out.comps[3].row_mut(k).copy_from_slice(&scalar_out);

            for m in 0..nx {
                scalar_base[m] = 1.0 + theta * l1[2][2];
                scalar_rhs[m] = rhs[m][2] - theta * l1[3][2] * out.comps[3][(k, m)];
            }
            solve_neumann_scalar(&scalar_base, theta * pb.sigma[2][k] * inv_dx2, &scalar_rhs, &mut scalar_out)?;
            out.comps[2].row_mut(k).copy_from_slice(&scalar_out);

            if k == 0 {
                now_birth.copy_from_slice(out.s().row(0));
            }
        }
        if !out.is_finite() {
            return Err(Error::Numerical(format!("non-finite adjoint at t = {}", g.t_nodes[n])));
        }
        Ok(out)
    }

    fn freeze<'l>(&self, y: &'l StateField, p: &AdjointField) -> Frozen<'l> {
        let op = &self.problem.nonlocal;
        Frozen { y, lambda: op.force(y.i()), lambda_adj: op.adjoint(y, p) }
    }

    /// Marches from `t = T` to `t = 0`, handing each layer to `visit` in
    /// decreasing time order together with the matching state layer.
    pub fn run(
        &self,
        layers: &[StateField],
        schedule: &ControlSchedule,
        mut visit: impl FnMut(usize, &StateField, &AdjointField) -> Result<()>,
    ) -> Result<()> {
        let pb = self.problem;
        let nt = pb.grid.nt;
        if layers.len() != nt {
            return Err(Error::shape("solve_backward (trajectory layers)", nt, layers.len()));
        }
        schedule.check(pb)?;
        let terminal = Layer::zeros(&pb.grid);
        visit(nt - 1, &layers[nt - 1], &terminal)?;
        let mut upper = (terminal, self.freeze(&layers[nt - 1], &Layer::zeros(&pb.grid)));
        let mut later: Option<(AdjointField, Frozen<'_>)> = None;
        for n in (0..nt - 1).rev() {
            let u = schedule.expand(n, pb)?;
            let p = self.step(n, &layers[n], (&upper.0, &upper.1), later.as_ref().map(|(p, f)| (p, f)), &u)?;
            visit(n, &layers[n], &p)?;
            let frozen = self.freeze(&layers[n], &p);
            later = Some(std::mem::replace(&mut upper, (p, frozen)));
        }
        Ok(())
    }
}

/// Full backward solve; element `n` of the result is the adjoint at `t_n`.
pub fn solve_backward(traj: &Trajectory, schedule: &ControlSchedule, problem: &Problem) -> Result<Vec<AdjointField>> {
    let mut out: Vec<Option<AdjointField>> = vec![None; problem.grid.nt];
    BackwardSolver::new(problem).run(&traj.layers, schedule, |n, _, p| {
        out[n] = Some(p.clone());
        Ok(())
    })?;
    Ok(out.into_iter().map(|p| p.expect("every layer visited")).collect())
}
