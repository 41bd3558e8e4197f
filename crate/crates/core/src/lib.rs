//! Age- and space-structured nonlocal SVIR epidemic model with optimal
//! vaccination.
//!
//! The forward model marches the four compartments along characteristics of
//! the aging operator; the adjoint runs the same machinery backwards and
//! delivers the reduced gradient of a tracking-type cost, which a projected
//! Barzilai–Borwein method minimizes over box-constrained schedules.

// Index loops mirror the stencil notation; `!(a < b)` deliberately rejects NaN.
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod adjoint;
pub mod control;
pub mod error;
pub mod field;
pub mod grid;
pub mod linalg;
pub mod model;
pub mod nonlocal;
pub mod objective;
pub mod optimizer;
pub mod problem;
pub mod state;
pub mod validation;

pub use adjoint::{adjoint_birth_source, solve_backward, BackwardSolver};
pub use control::ControlSchedule;
pub use error::{Error, Result};
pub use field::{AdjointField, Compartment, Field, Layer, StateField};
pub use grid::{build_grid, characteristic_shift, CharacteristicMap, Grid, GridSpec};
pub use model::{
    birth_weight, expand_control, kernel_eval, reaction_matrix, ControlLayout, ControlMembership, ControlNorm,
    Diffusion, ModelParams,
};
pub use nonlocal::{apply_lambda, apply_lambda_adjoint, ForceOfInfection, NonlocalOperator, SpaceProfile};
pub use objective::{control_cost, cost, cost_and_gradient, cost_streaming, reduced_gradient, CostReport};
pub use optimizer::{
    bb_step, nonmonotone_search, optimize, project, BbVariant, IterationRecord, LineSearchOutcome, OptimizeFailure,
    OptimizeLog, OptimizerConfig, Optimum, StopReason,
};
pub use problem::Problem;
pub use state::{
    compute_birth, solve_forward, solve_forward_forced, total_infectious, Forcing, ForwardSolver, Trajectory,
};
pub use validation::{
    brute_force_lambda, duality_check, fd_gradient, manufactured_forcing, mass_balance_residuals, observed_orders,
    DualityFields, DualityGap, ForcingMode, Manufactured, ManufacturedForcing, OracleReport,
};
