//! Time-discrete vaccination schedule.

use crate::error::{Error, Result};
use crate::field::Field;
use crate::model::expand_control;
use crate::problem::Problem;

/// `u_ij(t)`: one `M × N` layer per time step, piecewise constant on
/// `[t_n, t_{n+1})`. Layers are row-major by region.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    steps: usize,
    regions: usize,
    classes: usize,
    values: Vec<f64>,
}

impl ControlSchedule {
    pub fn zeros(steps: usize, regions: usize, classes: usize) -> Self {
        ControlSchedule { steps, regions, classes, values: vec![0.0; steps * regions * classes] }
    }

    pub fn zeros_for(problem: &Problem) -> Self {
        Self::zeros(problem.control_steps(), problem.membership.regions, problem.membership.classes)
    }

    pub fn constant_for(problem: &Problem, value: f64) -> Self {
        let mut s = Self::zeros_for(problem);
        s.values.iter_mut().for_each(|v| *v = value);
        s
    }

    pub fn from_values(steps: usize, regions: usize, classes: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != steps * regions * classes {
            return Err(Error::shape("ControlSchedule", steps * regions * classes, values.len()));
        }
        Ok(ControlSchedule { steps, regions, classes, values })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn regions(&self) -> usize {
        self.regions
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn layer_len(&self) -> usize {
        self.regions * self.classes
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    /// The `M × N` layer active on step `n`.
    pub fn layer(&self, n: usize) -> &[f64] {
        let len = self.layer_len();
        &self.values[n * len..(n + 1) * len]
    }

    #[inline]
    pub fn get(&self, n: usize, region: usize, class: usize) -> f64 {
        self.values[(n * self.regions + region) * self.classes + class]
    }

    pub fn max_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn check(&self, problem: &Problem) -> Result<()> {
        let m = &problem.membership;
        if self.steps != problem.control_steps() || self.regions != m.regions || self.classes != m.classes {
            return Err(Error::shape(
                "ControlSchedule",
                format!("{}x{}x{}", problem.control_steps(), m.regions, m.classes),
                format!("{}x{}x{}", self.steps, self.regions, self.classes),
            ));
        }
        Ok(())
    }

    /// Nodal control field on step `n`.
    pub fn expand(&self, n: usize, problem: &Problem) -> Result<Field> {
        expand_control(self.layer(n), &problem.membership, &problem.grid)
    }
}
