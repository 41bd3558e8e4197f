//! Age × space field containers.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::grid::Grid;

/// Scalar values on the age × space nodes of one time layer, age-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Field {
    na: usize,
    nx: usize,
    data: Vec<f64>,
}

impl Field {
    pub fn zeros(na: usize, nx: usize) -> Self {
        Field { na, nx, data: vec![0.0; na * nx] }
    }

    pub fn constant(na: usize, nx: usize, value: f64) -> Self {
        Field { na, nx, data: vec![value; na * nx] }
    }

    pub fn on_grid(grid: &Grid) -> Self {
        Self::zeros(grid.na, grid.nx)
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> f64) -> Self {
        let mut out = Self::on_grid(grid);
        for k in 0..grid.na {
            for m in 0..grid.nx {
                out[(k, m)] = f(grid.a_nodes[k], grid.x_nodes[m]);
            }
        }
        out
    }

    pub fn from_vec(na: usize, nx: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != na * nx {
            return Err(Error::shape("Field::from_vec", na * nx, data.len()));
        }
        Ok(Field { na, nx, data })
    }

    pub fn na(&self) -> usize {
        self.na
    }

    pub fn nx(&self) -> usize {
        self.nx
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Values at age node `k`, one per space node.
    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.nx..(k + 1) * self.nx]
    }

    pub fn row_mut(&mut self, k: usize) -> &mut [f64] {
        &mut self.data[k * self.nx..(k + 1) * self.nx]
    }

    pub fn check_grid(&self, grid: &Grid, context: &'static str) -> Result<()> {
        if self.na != grid.na || self.nx != grid.nx {
            return Err(Error::shape(context, format!("{}x{}", grid.na, grid.nx), format!("{}x{}", self.na, self.nx)));
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        self.data.iter_mut().for_each(|v| *v *= factor);
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |acc, v| acc.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Double trapezoid over age and space.
    pub fn integrate(&self, grid: &Grid) -> f64 {
        let mut total = 0.0;
        for k in 0..self.na {
            let row: f64 = self.row(k).iter().zip(&grid.space_trap_w).map(|(v, w)| v * w).sum();
            total += grid.age_trap_w[k] * row;
        }
        total
    }
}

impl Index<(usize, usize)> for Field {
    type Output = f64;

    #[inline]
    fn index(&self, (k, m): (usize, usize)) -> &f64 {
        &self.data[k * self.nx + m]
    }
}

impl IndexMut<(usize, usize)> for Field {
    #[inline]
    fn index_mut(&mut self, (k, m): (usize, usize)) -> &mut f64 {
        &mut self.data[k * self.nx + m]
    }
}

/// Compartment order used by every four-component field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Compartment {
    S = 0,
    V = 1,
    I = 2,
    R = 3,
}

impl Compartment {
    pub const ALL: [Compartment; 4] = [Compartment::S, Compartment::V, Compartment::I, Compartment::R];

    pub fn name(self) -> &'static str {
        match self {
            Compartment::S => "S",
            Compartment::V => "V",
            Compartment::I => "I",
            Compartment::R => "R",
        }
    }
}

/// Four compartment fields on one time layer.
///
/// Used both for the state `(S, V, I, R)` and for the adjoint
/// `(p_S, p_V, p_I, p_R)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Layer {
    pub comps: [Field; 4],
}

/// State `(S, V, I, R)` on one time layer.
pub type StateField = Layer;
/// Adjoint `(p_S, p_V, p_I, p_R)` on one time layer.
pub type AdjointField = Layer;

impl Layer {
    pub fn zeros(grid: &Grid) -> Self {
        Layer { comps: std::array::from_fn(|_| Field::on_grid(grid)) }
    }

    /// Constant value per compartment over all nodes.
    pub fn uniform(grid: &Grid, values: [f64; 4]) -> Self {
        Layer { comps: values.map(|v| Field::constant(grid.na, grid.nx, v)) }
    }

    pub fn from_fn(grid: &Grid, mut f: impl FnMut(f64, f64) -> [f64; 4]) -> Self {
        let mut out = Self::zeros(grid);
        for k in 0..grid.na {
            for m in 0..grid.nx {
                let v = f(grid.a_nodes[k], grid.x_nodes[m]);
                for c in 0..4 {
                    out.comps[c][(k, m)] = v[c];
                }
            }
        }
        out
    }

    pub fn s(&self) -> &Field {
        &self.comps[0]
    }
    pub fn v(&self) -> &Field {
        &self.comps[1]
    }
    pub fn i(&self) -> &Field {
        &self.comps[2]
    }
    pub fn r(&self) -> &Field {
        &self.comps[3]
    }

    pub fn get(&self, c: Compartment) -> &Field {
        &self.comps[c as usize]
    }

    #[inline]
    pub fn node(&self, k: usize, m: usize) -> [f64; 4] {
        [self.comps[0][(k, m)], self.comps[1][(k, m)], self.comps[2][(k, m)], self.comps[3][(k, m)]]
    }

    #[inline]
    pub fn set_node(&mut self, k: usize, m: usize, v: [f64; 4]) {
        for c in 0..4 {
            self.comps[c][(k, m)] = v[c];
        }
    }

    pub fn check_grid(&self, grid: &Grid, context: &'static str) -> Result<()> {
        self.comps.iter().try_for_each(|f| f.check_grid(grid, context))
    }

    pub fn is_finite(&self) -> bool {
        self.comps.iter().all(Field::is_finite)
    }

    pub fn max_abs(&self) -> f64 {
        self.comps.iter().fold(0.0, |acc, f| acc.max(f.max_abs()))
    }

    /// Trapezoid integral of the summed compartments.
    pub fn total_mass(&self, grid: &Grid) -> f64 {
        self.comps.iter().map(|f| f.integrate(grid)).sum()
    }
}
