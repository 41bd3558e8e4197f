//! SVIR coefficients and the finite-dimensional vaccination control.
//!
//! Compartments are ordered `(S, V, I, R)`. The state equation reads
//! `δy + L y + Λ(I) y + K(u) y = σ Δy` with `δ = ∂t + ∂a`; all newborns
//! enter `S`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::Field;
use crate::grid::Grid;

/// Age-dependent diffusion `σ(a) = amplitude · exp(-decay · a)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Diffusion {
    pub amplitude: f64,
    pub decay: f64,
}

impl Diffusion {
    pub const fn new(amplitude: f64, decay: f64) -> Self {
        Diffusion { amplitude, decay }
    }

    #[inline]
    pub fn eval(&self, a: f64) -> f64 {
        self.amplitude * (-self.decay * a).exp()
    }
}

/// All model coefficients. Defaults reproduce the reference parameter set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelParams {
    /// Loss of vaccine immunity (1/yr).
    pub c: f64,
    /// Vaccine leakage: vaccinated are infected at `phi1 · Λ`.
    pub phi1: f64,
    /// Recovered leakage: recovered are infected at `phi2 · Λ`.
    pub phi2: f64,
    /// Infection-induced death rate (1/yr).
    pub d_i: f64,
    /// Recovery rate (1/yr).
    pub gamma: f64,
    /// Scale of the natural death rate `μ(a) = scale · exp(-a) · a^5`.
    pub mortality_scale: f64,
    /// Scale of the fertility profile
    /// `β̃(a) = (scale / a_max) · a² (a_max - a) (1 + sin(π a / a_max))`.
    pub fertility_scale: f64,
    /// Height multiplier of the infection kernel.
    pub kernel_scale: f64,
    /// Support half-width of the kernel `scale · max(width - |x - ξ|, 0)`.
    pub kernel_width: f64,
    pub sigma_s: Diffusion,
    pub sigma_v: Diffusion,
    pub sigma_i: Diffusion,
    pub sigma_r: Diffusion,
    /// Observation weights in the cost integrand `|g · y|²`.
    pub g: [f64; 4],
    /// Control cost weight.
    pub alpha: f64,
    /// Upper bound of the vaccination rate; `null` in JSON means unbounded.
    #[serde(with = "unbounded")]
    pub u_bar: f64,
    /// How `‖u(t)‖²` is measured in the control penalty.
    pub control_norm: ControlNorm,
}

/// Serde adapter mapping `f64::INFINITY` to `null` and back, since JSON has
/// no infinity.
pub mod unbounded {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if *v == f64::INFINITY {
            s.serialize_none()
        } else {
            s.serialize_some(v)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }

    /// The same mapping applied to every element of a list.
    pub mod list {
        use super::*;

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let mapped: Vec<Option<f64>> = v.iter().map(|&x| (x != f64::INFINITY).then_some(x)).collect();
            mapped.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            let raw = Vec::<Option<f64>>::deserialize(d)?;
            Ok(raw.into_iter().map(|x| x.unwrap_or(f64::INFINITY)).collect())
        }
    }
}

/// Measure of one control layer in the penalty `(α/2) ∫ ‖u(t)‖² dt`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlNorm {
    /// Plain sum of squares over the `M × N` entries.
    Frobenius,
    /// `∫∫ u(t, a, x)² da dx` for the expanded field: each entry weighted by
    /// the discrete measure of its region × age class.
    Integral,
}

impl Default for ModelParams {
    fn default() -> Self {
        ModelParams {
            c: 0.18564,
            phi1: 0.0052,
            phi2: 0.00062,
            d_i: 0.0018,
            gamma: 0.278574,
            mortality_scale: 1.0,
            fertility_scale: 6.78,
            kernel_scale: 1.0,
            kernel_width: 0.1,
            sigma_s: Diffusion::new(0.1, 0.1),
            sigma_v: Diffusion::new(0.1, 0.1),
            sigma_i: Diffusion::new(0.05, 0.1),
            sigma_r: Diffusion::new(0.1, 0.1),
            g: [0.0, 0.0, 1.0, 0.0],
            alpha: 500.0,
            u_bar: 10.0,
            control_norm: ControlNorm::Integral,
        }
    }
}

impl ModelParams {
    /// Every rate, kernel, diffusion and control weight set to zero, which
    /// leaves pure transport along characteristics.
    pub fn inert() -> Self {
        ModelParams {
            c: 0.0,
            phi1: 0.0,
            phi2: 0.0,
            d_i: 0.0,
            gamma: 0.0,
            mortality_scale: 0.0,
            fertility_scale: 0.0,
            kernel_scale: 0.0,
            kernel_width: 0.1,
            sigma_s: Diffusion::new(0.0, 0.0),
            sigma_v: Diffusion::new(0.0, 0.0),
            sigma_i: Diffusion::new(0.0, 0.0),
            sigma_r: Diffusion::new(0.0, 0.0),
            g: [0.0, 0.0, 1.0, 0.0],
            alpha: 0.0,
            u_bar: 0.0,
            control_norm: ControlNorm::Integral,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("c", self.c),
            ("d_i", self.d_i),
            ("gamma", self.gamma),
            ("mortality_scale", self.mortality_scale),
            ("fertility_scale", self.fertility_scale),
            ("kernel_scale", self.kernel_scale),
            ("kernel_width", self.kernel_width),
            ("alpha", self.alpha),
            ("u_bar", self.u_bar),
            ("sigma_s.amplitude", self.sigma_s.amplitude),
            ("sigma_v.amplitude", self.sigma_v.amplitude),
            ("sigma_i.amplitude", self.sigma_i.amplitude),
            ("sigma_r.amplitude", self.sigma_r.amplitude),
        ];
        for (name, v) in nonneg {
            let finite = v.is_finite() || (name == "u_bar" && v == f64::INFINITY);
            if !finite || v < 0.0 {
                return Err(Error::config(name, format!("must be finite and nonnegative, got {v}")));
            }
        }
        for (name, v) in [("phi1", self.phi1), ("phi2", self.phi2)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::config(name, format!("must lie in [0, 1], got {v}")));
            }
        }
        if self.g.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("g", "weights must be finite"));
        }
        Ok(())
    }

    #[inline]
    pub fn mu(&self, a: f64) -> f64 {
        self.mortality_scale * (-a).exp() * a.powi(5)
    }

    pub fn sigma(&self) -> [Diffusion; 4] {
        [self.sigma_s, self.sigma_v, self.sigma_i, self.sigma_r]
    }
}

fn check_age(a: f64, a_max: f64) -> Result<()> {
    let slack = 1e-12 * a_max.max(1.0);
    if !(a >= -slack && a <= a_max + slack) {
        return Err(Error::Domain { what: "age", value: a, lo: 0.0, hi: a_max });
    }
    Ok(())
}

/// Linear reaction matrix `L(a)` as it appears on the left-hand side.
///
/// Rows and columns follow `(S, V, I, R)`. The position argument is accepted
/// for interface completeness; the coefficients depend on age only.
pub fn reaction_matrix(a: f64, _x: f64, params: &ModelParams, a_max: f64) -> Result<[[f64; 4]; 4]> {
    check_age(a, a_max)?;
    let mu = params.mu(a);
    let c = params.c;
    let gamma = params.gamma;
    Ok([[mu, -c, 0.0, 0.0], [0.0, mu + c, 0.0, 0.0], [0.0, 0.0, mu + params.d_i + gamma, 0.0], [0.0, 0.0, -gamma, mu]])
}

/// Fertility `β̃(a)`. Only `S` receives the resulting births.
pub fn birth_weight(a: f64, params: &ModelParams, a_max: f64) -> Result<f64> {
    check_age(a, a_max)?;
    let a = a.clamp(0.0, a_max);
    Ok(params.fertility_scale / a_max * a * a * (a_max - a) * (1.0 + (PI * a / a_max).sin()))
}

/// Infection kernel `λ(x, ξ)`; symmetric in its arguments.
#[inline]
pub fn kernel_eval(x: f64, xi: f64, params: &ModelParams) -> f64 {
    params.kernel_scale * (params.kernel_width - (x - xi).abs()).max(0.0)
}

/// Vaccination centers and age classes of the control.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ControlLayout {
    /// Open intervals `(lo, hi)`, pairwise disjoint.
    pub regions: Vec<[f64; 2]>,
    /// Ascending ages `a_0 < a_1 < … < a_N`.
    pub age_breaks: Vec<f64>,
}

impl Default for ControlLayout {
    fn default() -> Self {
        ControlLayout { regions: vec![[0.45, 0.55]], age_breaks: vec![0.0, 0.18, 0.3, 0.5, 0.7, 1.0] }
    }
}

impl ControlLayout {
    /// Number of regions `M`.
    pub fn regions_len(&self) -> usize {
        self.regions.len()
    }

    /// Number of age classes `N`.
    pub fn classes_len(&self) -> usize {
        self.age_breaks.len().saturating_sub(1)
    }

    /// Entries of one `M × N` control layer.
    pub fn layer_len(&self) -> usize {
        self.regions_len() * self.classes_len()
    }

    pub fn validate(&self, grid: &Grid) -> Result<()> {
        let eps = 1e-12;
        if self.regions.is_empty() {
            return Err(Error::config("regions", "at least one region is required"));
        }
        let mut sorted = self.regions.clone();
        sorted.sort_by(|a, b| a[0].total_cmp(&b[0]));
        for r in &sorted {
            if !(r[0] < r[1]) {
                return Err(Error::config("regions", format!("interval ({}, {}) is empty", r[0], r[1])));
            }
            if r[0] < grid.spec.x_lo - eps || r[1] > grid.spec.x_hi + eps {
                return Err(Error::config("regions", format!("interval ({}, {}) leaves the domain", r[0], r[1])));
            }
        }
        for w in sorted.windows(2) {
            if w[0][1] > w[1][0] {
                return Err(Error::config("regions", "regions must be pairwise disjoint"));
            }
        }
        if self.age_breaks.len() < 2 {
            return Err(Error::config("age_breaks", "at least two breaks are required"));
        }
        if self.age_breaks.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::config("age_breaks", "breaks must be strictly increasing"));
        }
        let first = self.age_breaks[0];
        let last = *self.age_breaks.last().unwrap();
        if first < -eps || last > grid.a_max() + eps {
            return Err(Error::config("age_breaks", "breaks must lie in [0, a_max]"));
        }
        Ok(())
    }

    /// Assigns grid nodes to regions and age classes.
    pub fn membership(&self, grid: &Grid) -> Result<ControlMembership> {
        self.validate(grid)?;
        let tie = 1e-9 * grid.a_max().max(1.0);
        let class_of_age = grid
            .a_nodes
            .iter()
            .map(|&a| {
                // Closed intervals; a node on a shared break goes to the lower class.
                self.age_breaks.windows(2).position(|w| a >= w[0] - tie && a <= w[1] + tie)
            })
            .collect();
        let xt = 1e-9 * (grid.spec.x_hi - grid.spec.x_lo);
        let region_of_x =
            grid.x_nodes.iter().map(|&x| self.regions.iter().position(|r| x > r[0] + xt && x < r[1] - xt)).collect();
        Ok(ControlMembership { regions: self.regions_len(), classes: self.classes_len(), class_of_age, region_of_x })
    }
}

/// Node-level assignment derived from a [`ControlLayout`] on a grid.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ControlMembership {
    pub regions: usize,
    pub classes: usize,
    /// Age class (0-based `j - 1`) of each age node, if any.
    pub class_of_age: Vec<Option<usize>>,
    /// Region (0-based `i - 1`) of each space node, if any.
    pub region_of_x: Vec<Option<usize>>,
}

impl ControlMembership {
    /// Flat index of entry `(i, j)` in an `M × N` layer.
    #[inline]
    pub fn index(&self, region: usize, class: usize) -> usize {
        region * self.classes + class
    }

    /// Whether region `i` contains at least one grid node.
    pub fn region_has_nodes(&self, region: usize) -> bool {
        self.region_of_x.contains(&Some(region))
    }
}

/// Expands one `M × N` control layer (row-major by region) into a nodal field.
pub fn expand_control(u_layer: &[f64], membership: &ControlMembership, grid: &Grid) -> Result<Field> {
    let expected = membership.regions * membership.classes;
    if u_layer.len() != expected {
        return Err(Error::shape("expand_control", expected, u_layer.len()));
    }
    let mut out = Field::on_grid(grid);
    for (k, class) in membership.class_of_age.iter().enumerate() {
        let Some(j) = *class else { continue };
        for (m, region) in membership.region_of_x.iter().enumerate() {
            if let Some(i) = *region {
                out[(k, m)] = u_layer[membership.index(i, j)];
            }
        }
    }
    Ok(out)
}
