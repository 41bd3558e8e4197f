//! Precomputed coefficients shared by the state and adjoint solvers.

use crate::error::{Error, Result};
use crate::field::Layer;
use crate::grid::Grid;
use crate::model::{birth_weight, reaction_matrix, ControlLayout, ControlMembership, ControlNorm, ModelParams};
use crate::nonlocal::NonlocalOperator;

/// A grid, a parameter set and a control layout, with every age-dependent
/// coefficient tabulated on the age nodes.
#[derive(Debug, Clone)]
pub struct Problem {
    pub grid: Grid,
    pub params: ModelParams,
    pub layout: ControlLayout,
    pub membership: ControlMembership,
    pub nonlocal: NonlocalOperator,
    /// `L(a_k)` per age node.
    pub(crate) reaction: Vec<[[f64; 4]; 4]>,
    /// `σ_c(a_k)` per compartment and age node.
    pub(crate) sigma: [Vec<f64>; 4],
    /// `β̃(a_k)` per age node.
    pub(crate) fertility: Vec<f64>,
    /// Penalty weight of each `(i, j)` control entry.
    pub(crate) control_weights: Vec<f64>,
}

impl Problem {
    pub fn new(grid: Grid, params: ModelParams, layout: ControlLayout) -> Result<Self> {
        params.validate()?;
        let membership = layout.membership(&grid)?;
        let a_max = grid.a_max();
        let reaction =
            grid.a_nodes.iter().map(|&a| reaction_matrix(a, 0.0, &params, a_max)).collect::<Result<Vec<_>>>()?;
        let fertility = grid.a_nodes.iter().map(|&a| birth_weight(a, &params, a_max)).collect::<Result<Vec<_>>>()?;
        let sigma = params.sigma().map(|d| grid.a_nodes.iter().map(|&a| d.eval(a)).collect());
        if fertility[0] != 0.0 {
            return Err(Error::config("fertility_scale", "fertility must vanish at age zero"));
        }
        let nonlocal = NonlocalOperator::new(&grid, &params);
        let control_weights = match params.control_norm {
            ControlNorm::Frobenius => vec![1.0; membership.regions * membership.classes],
            ControlNorm::Integral => {
                let mut class_len = vec![0.0; membership.classes];
                for (k, c) in membership.class_of_age.iter().enumerate() {
                    if let Some(j) = c {
                        class_len[*j] += grid.age_trap_w[k];
                    }
                }
                let mut region_len = vec![0.0; membership.regions];
                for (m, r) in membership.region_of_x.iter().enumerate() {
                    if let Some(i) = r {
                        region_len[*i] += grid.space_trap_w[m];
                    }
                }
                region_len.iter().flat_map(|r| class_len.iter().map(move |c| r * c)).collect()
            }
        };
        Ok(Problem { grid, params, layout, membership, nonlocal, reaction, sigma, fertility, control_weights })
    }

    pub fn fertility(&self) -> &[f64] {
        &self.fertility
    }

    /// Penalty weight per control entry, row-major by region.
    pub fn control_weights(&self) -> &[f64] {
        &self.control_weights
    }

    pub fn sigma(&self, compartment: usize) -> &[f64] {
        &self.sigma[compartment]
    }

    pub fn reaction(&self, k: usize) -> &[[f64; 4]; 4] {
        &self.reaction[k]
    }

    /// Number of control steps, one per time interval.
    pub fn control_steps(&self) -> usize {
        self.grid.nt - 1
    }

    pub fn check_layer(&self, layer: &Layer, context: &'static str) -> Result<()> {
        layer.check_grid(&self.grid, context)
    }
}
