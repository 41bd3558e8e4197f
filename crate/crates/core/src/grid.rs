//! Aligned time–age–space discretization.
//!
//! Time and age share one step so that every node `(t_n, a_k)` lies on the
//! characteristic line `t - a = const`. Space is a uniform mesh on a 1-D
//! interval. All node coordinates are built by multiplication, never by
//! repeated addition.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative tolerance for a span/step ratio to count as an integer.
const NODE_COUNT_RTOL: f64 = 1e-9;

/// User-facing description of the discretization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridSpec {
    /// Final time `T` in years.
    #[serde(rename = "T")]
    pub t_final: f64,
    /// Maximal age in years.
    pub a_max: f64,
    /// Time step, equal to the age step.
    pub dt: f64,
    /// Spatial step.
    pub dx: f64,
    pub x_lo: f64,
    pub x_hi: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        GridSpec { t_final: 5.0, a_max: 1.0, dt: 0.01, dx: 0.1, x_lo: 0.0, x_hi: 1.0 }
    }
}

impl GridSpec {
    pub fn new(t_final: f64, a_max: f64, dt: f64, dx: f64) -> Self {
        GridSpec { t_final, a_max, dt, dx, x_lo: 0.0, x_hi: 1.0 }
    }
}

/// The built discretization. Immutable once constructed.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub spec: GridSpec,
    pub nt: usize,
    pub na: usize,
    pub nx: usize,
    pub t_nodes: Vec<f64>,
    pub a_nodes: Vec<f64>,
    pub x_nodes: Vec<f64>,
    pub age_trap_w: Vec<f64>,
    pub space_trap_w: Vec<f64>,
}

fn positive(field: &str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::config(field, format!("must be a positive finite number, got {value}")))
    }
}

fn interval_count(field: &str, span: f64, step: f64) -> Result<usize> {
    let ratio = span / step;
    let rounded = ratio.round();
    if rounded < 1.0 || (ratio - rounded).abs() > NODE_COUNT_RTOL * rounded {
        return Err(Error::config(
            field,
            format!("span {span} is not an integer multiple of the step {step} (ratio {ratio})"),
        ));
    }
    Ok(rounded as usize)
}

fn trapezoid_weights(n: usize, h: f64) -> Vec<f64> {
    let mut w = vec![h; n];
    if n == 1 {
        w[0] = 0.0;
    } else {
        w[0] = 0.5 * h;
        w[n - 1] = 0.5 * h;
    }
    w
}

/// Builds the grid, validating that every node count is exact.
pub fn build_grid(spec: GridSpec) -> Result<Grid> {
    positive("T", spec.t_final)?;
    positive("a_max", spec.a_max)?;
    positive("dt", spec.dt)?;
    positive("dx", spec.dx)?;
    if !(spec.x_lo.is_finite() && spec.x_hi.is_finite() && spec.x_hi > spec.x_lo) {
        return Err(Error::config("x_hi", format!("spatial interval [{}, {}] is empty", spec.x_lo, spec.x_hi)));
    }
    // A mismatch is reported against the step when the step is the natural culprit.
    let nt = interval_count("T", spec.t_final, spec.dt)? + 1;
    let na = interval_count("a_max", spec.a_max, spec.dt)? + 1;
    let nx = interval_count("dx", spec.x_hi - spec.x_lo, spec.dx)? + 1;

    let t_nodes = (0..nt).map(|i| i as f64 * spec.dt).collect();
    let a_nodes = (0..na).map(|k| k as f64 * spec.dt).collect();
    let x_nodes = (0..nx).map(|m| spec.x_lo + m as f64 * spec.dx).collect();

    Ok(Grid {
        spec,
        nt,
        na,
        nx,
        t_nodes,
        a_nodes,
        x_nodes,
        age_trap_w: trapezoid_weights(na, spec.dt),
        space_trap_w: trapezoid_weights(nx, spec.dx),
    })
}

impl Grid {
    pub fn dt(&self) -> f64 {
        self.spec.dt
    }

    pub fn dx(&self) -> f64 {
        self.spec.dx
    }

    pub fn a_max(&self) -> f64 {
        self.spec.a_max
    }

    /// Number of values in one age × space layer.
    pub fn layer_len(&self) -> usize {
        self.na * self.nx
    }

    /// Trapezoid weights over time, used by the cost functional.
    pub fn time_trap_w(&self) -> Vec<f64> {
        trapezoid_weights(self.nt, self.spec.dt)
    }

    /// Product weight of node `(k, m)` in the age × space trapezoid rule.
    #[inline]
    pub fn cell_weight(&self, k: usize, m: usize) -> f64 {
        self.age_trap_w[k] * self.space_trap_w[m]
    }

    pub fn characteristics(&self) -> CharacteristicMap {
        characteristic_shift(self.na)
    }
}

/// Predecessor map for one time step along unit-speed characteristics.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CharacteristicMap {
    /// `(target, source)`: age node `target` of the next layer is reached
    /// from age node `source = target - 1` of the current layer.
    pub pairs: Vec<(usize, usize)>,
    /// Age node on the next layer fed by the birth law rather than transport.
    pub birth_node: usize,
}

pub fn characteristic_shift(na: usize) -> CharacteristicMap {
    CharacteristicMap { pairs: (1..na).map(|k| (k, k - 1)).collect(), birth_node: 0 }
}
