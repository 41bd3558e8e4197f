//! The nonlocal force of infection `Λ` and its adjoint `Λ̃`.
//!
//! Both integrals use the composite trapezoid rule in age and space with the
//! grid's weights, so the discrete pairing identity
//! `⟨Λ(h) y, p⟩ = ⟨h, Λ̃_y(p)⟩` holds to roundoff.
//!
//! The kernel depends on space only, hence `Λ` is constant in age and is
//! stored once per space node.

use crate::error::Result;
use crate::field::{Field, Layer};
use crate::grid::Grid;
use crate::model::{kernel_eval, ModelParams};

/// A per-space-node profile, broadcast over all age nodes.
#[derive(Debug, Clone, PartialEq)]
pub struct SpaceProfile {
    pub values: Vec<f64>,
}

/// Infection rate `Λ(I)` per space node (1/yr).
pub type ForceOfInfection = SpaceProfile;

impl SpaceProfile {
    pub fn zeros(nx: usize) -> Self {
        SpaceProfile { values: vec![0.0; nx] }
    }

    /// Value at node `(k, m)`; independent of the age node `k`.
    #[inline]
    pub fn at(&self, _k: usize, m: usize) -> f64 {
        self.values[m]
    }

    pub fn to_field(&self, na: usize) -> Field {
        let nx = self.values.len();
        let mut out = Field::zeros(na, nx);
        for k in 0..na {
            out.row_mut(k).copy_from_slice(&self.values);
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Kernel matrix with the space quadrature weights folded in:
/// `weighted[m][n] = w_x[n] · λ(x_n, x_m)`.
#[derive(Debug, Clone)]
pub struct NonlocalOperator {
    nx: usize,
    weighted: Vec<f64>,
    age_w: Vec<f64>,
    phi1: f64,
    phi2: f64,
}

impl NonlocalOperator {
    pub fn new(grid: &Grid, params: &ModelParams) -> Self {
        let nx = grid.nx;
        let mut weighted = vec![0.0; nx * nx];
        for m in 0..nx {
            for n in 0..nx {
                weighted[m * nx + n] = grid.space_trap_w[n] * kernel_eval(grid.x_nodes[n], grid.x_nodes[m], params);
            }
        }
        NonlocalOperator { nx, weighted, age_w: grid.age_trap_w.clone(), phi1: params.phi1, phi2: params.phi2 }
    }

    /// Largest row sum `max_x Σ_ξ w_ξ λ(x, ξ)`.
    pub fn row_sum_bound(&self) -> f64 {
        (0..self.nx).map(|m| self.weighted[m * self.nx..(m + 1) * self.nx].iter().sum::<f64>()).fold(0.0, f64::max)
    }

    fn convolve(&self, age_integrated: &[f64]) -> SpaceProfile {
        let nx = self.nx;
        let values = (0..nx)
            .map(|m| self.weighted[m * nx..(m + 1) * nx].iter().zip(age_integrated).map(|(w, v)| w * v).sum())
            .collect();
        SpaceProfile { values }
    }

    /// `Λ(x) = Σ_α Σ_ξ w_α w_ξ λ(x_ξ, x) I(α, ξ)`.
    pub fn force(&self, infectious: &Field) -> ForceOfInfection {
        let mut integrated = vec![0.0; self.nx];
        for (k, &wa) in self.age_w.iter().enumerate() {
            for (acc, v) in integrated.iter_mut().zip(infectious.row(k)) {
                *acc += wa * v;
            }
        }
        self.convolve(&integrated)
    }

    /// I-slot of `Λ̃_y(p)`; the S, V and R slots vanish identically.
    pub fn adjoint(&self, y: &Layer, p: &Layer) -> SpaceProfile {
        let (phi1, phi2) = (self.phi1, self.phi2);
        let mut integrated = vec![0.0; self.nx];
        for (k, &wa) in self.age_w.iter().enumerate() {
            let (s, v, r) = (y.s().row(k), y.v().row(k), y.r().row(k));
            let (ps, pv, pi, pr) = (p.s().row(k), p.v().row(k), p.i().row(k), p.r().row(k));
            for m in 0..self.nx {
                let bracket = s[m] * ps[m] + phi1 * v[m] * pv[m] - (s[m] + phi1 * v[m] + phi2 * r[m]) * pi[m]
                    + phi2 * r[m] * pr[m];
                integrated[m] += wa * bracket;
            }
        }
        self.convolve(&integrated)
    }
}

/// Local coupling of `Λ(I) y`: the vector `(S, φ₁V, -(S + φ₁V + φ₂R), φ₂R)`
/// that multiplies the scalar force of infection on the left-hand side.
#[inline]
pub fn infection_coupling(y: [f64; 4], phi1: f64, phi2: f64) -> [f64; 4] {
    let [s, v, _, r] = y;
    [s, phi1 * v, -(s + phi1 * v + phi2 * r), phi2 * r]
}

pub fn apply_lambda(infectious: &Field, grid: &Grid, params: &ModelParams) -> Result<ForceOfInfection> {
    infectious.check_grid(grid, "apply_lambda")?;
    Ok(NonlocalOperator::new(grid, params).force(infectious))
}

pub fn apply_lambda_adjoint(y: &Layer, p: &Layer, grid: &Grid, params: &ModelParams) -> Result<SpaceProfile> {
    y.check_grid(grid, "apply_lambda_adjoint (state)")?;
    p.check_grid(grid, "apply_lambda_adjoint (adjoint)")?;
    Ok(NonlocalOperator::new(grid, params).adjoint(y, p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::{build_grid, GridSpec};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn grid(dt: f64, dx: f64) -> Grid {
        build_grid(GridSpec::new(1.0, 1.0, dt, dx)).unwrap()
    }

    fn random_layer(g: &Grid, rng: &mut ChaCha8Rng) -> Layer {
        Layer::from_fn(g, |_, _| std::array::from_fn(|_| rng.gen_range(-1.0..1.0)))
    }

    #[test]
    fn zero_infection_gives_zero_force() {
        let g = grid(0.1, 0.05);
        let f = apply_lambda(&Field::on_grid(&g), &g, &ModelParams::default()).unwrap();
        assert_eq!(f.max_abs(), 0.0);
    }

    #[test]
    fn unit_infection_converges_to_analytic_force() {
        let p = ModelParams::default();
        let mut prev_err = f64::INFINITY;
        for &dx in &[0.01, 0.005, 0.0025] {
            let g = grid(0.1, dx);
            let ones = Field::constant(g.na, g.nx, 1.0);
            let f = apply_lambda(&ones, &g, &p).unwrap();
            let mid = g.nx / 2;
            let err = (f.values[mid] - 0.01).abs().max((f.values[0] - 0.005).abs());
            assert!(err < 1e-4, "dx={dx} err={err}");
            assert!(err <= prev_err);
            prev_err = err;
        }
    }

    #[test]
    fn force_is_linear() {
        let g = grid(0.1, 0.05);
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let i = Field::from_fn(&g, |_, _| rng.gen_range(0.0..5.0));
        let mut twice = i.clone();
        twice.scale(2.0);
        let a = apply_lambda(&i, &g, &p).unwrap();
        let b = apply_lambda(&twice, &g, &p).unwrap();
        for (x, y) in a.values.iter().zip(&b.values) {
            assert_eq!(2.0 * x, *y);
        }
    }

    #[test]
    fn adjoint_vanishes_for_zero_inputs() {
        let g = grid(0.1, 0.1);
        let p = ModelParams::default();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = random_layer(&g, &mut rng);
        let zero = Layer::zeros(&g);
        assert_eq!(apply_lambda_adjoint(&y, &zero, &g, &p).unwrap().max_abs(), 0.0);
        assert_eq!(apply_lambda_adjoint(&zero, &y, &g, &p).unwrap().max_abs(), 0.0);
    }

    #[test]
    fn pairing_identity_holds_to_roundoff() {
        let g = grid(0.1, 0.05);
        let params = ModelParams::default();
        let op = NonlocalOperator::new(&g, &params);
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let y = random_layer(&g, &mut rng);
        let p = random_layer(&g, &mut rng);
        let h = Field::from_fn(&g, |_, _| rng.gen_range(-1.0..1.0));
        let force = op.force(&h);
        let mut lhs = 0.0;
        for k in 0..g.na {
            for m in 0..g.nx {
                let cpl = infection_coupling(y.node(k, m), params.phi1, params.phi2);
                let pn = p.node(k, m);
                let dot: f64 = (0..4).map(|c| cpl[c] * pn[c]).sum();
                lhs += g.cell_weight(k, m) * force.at(k, m) * dot;
            }
        }
        let adj = op.adjoint(&y, &p);
        let mut rhs = 0.0;
        for k in 0..g.na {
            for m in 0..g.nx {
                rhs += g.cell_weight(k, m) * h[(k, m)] * adj.at(k, m);
            }
        }
        assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(rhs.abs()));
    }

    #[test]
    fn s_only_state_with_i_only_adjoint_reduces_to_minus_s_pi() {
        let g = grid(0.25, 0.1);
        let params = ModelParams::default();
        let op = NonlocalOperator::new(&g, &params);
        let y = Layer::from_fn(&g, |a, x| [1.0 + a + x, 0.0, 0.0, 0.0]);
        let p = Layer::from_fn(&g, |a, x| [0.0, 0.0, 2.0 - a * x, 0.0]);
        let adj = op.adjoint(&y, &p);
        for xi in 0..g.nx {
            let mut expect = 0.0;
            for k in 0..g.na {
                for m in 0..g.nx {
                    let lam = kernel_eval(g.x_nodes[m], g.x_nodes[xi], &params);
                    expect -= g.cell_weight(k, m) * lam * y.s()[(k, m)] * p.i()[(k, m)];
                }
            }
            assert!((adj.values[xi] - expect).abs() < 1e-14);
        }
    }

    #[test]
    fn bilinear_bound_holds() {
        // Cauchy–Schwarz per node: |Λ(y1)(x)| ≤ sqrt(a_max · λ_max · C(λ)) · |y1|.
        let g = grid(0.1, 0.05);
        let params = ModelParams::default();
        let op = NonlocalOperator::new(&g, &params);
        let constant = (g.a_max() * params.kernel_width * params.kernel_scale * op.row_sum_bound()).sqrt();
        let norm = |f: &Field| {
            let mut sq = f.clone();
            sq.as_mut_slice().iter_mut().for_each(|v| *v *= *v);
            sq.integrate(&g).sqrt()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..20 {
            let y1 = Field::from_fn(&g, |_, _| rng.gen_range(-2.0..2.0));
            let y2 = Field::from_fn(&g, |_, _| rng.gen_range(-2.0..2.0));
            let force = op.force(&y1);
            let mut prod = Field::on_grid(&g);
            for k in 0..g.na {
                for m in 0..g.nx {
                    prod[(k, m)] = force.at(k, m) * y2[(k, m)];
                }
            }
            assert!(norm(&prod) <= constant * norm(&y1) * norm(&y2) * (1.0 + 1e-12));
        }
    }
}
