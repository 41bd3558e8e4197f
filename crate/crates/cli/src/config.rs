//! Experiment configuration: one JSON document, every field optional.

use std::path::{Path, PathBuf};

use epictrl_core::model::unbounded;
use epictrl_core::{ControlLayout, GridSpec, ModelParams, OptimizerConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Forward runs under the initial control and without control.
    Simulate,
    /// One optimal-control solve.
    Optimize,
    /// One optimal-control solve per upper bound in `sweep`.
    Sweep,
}

impl Scenario {
    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Simulate => "simulate",
            Scenario::Optimize => "optimize",
            Scenario::Sweep => "sweep",
        }
    }
}

/// Initial state at `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum InitialCondition {
    /// The same `(S, V, I, R)` densities at every node.
    Uniform([f64; 4]),
    /// A CSV file with header `a,x,S,V,I,R` and one row per grid node, age
    /// major. Relative paths resolve against the config file's directory.
    Table(PathBuf),
}

impl Default for InitialCondition {
    fn default() -> Self {
        InitialCondition::Uniform([1000.0, 0.0, 10.0, 0.0])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Must match the subcommand when given.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    pub grid: GridSpec,
    pub model: ModelParams,
    pub layout: ControlLayout,
    pub optimizer: OptimizerConfig,
    pub initial: InitialCondition,
    /// Constant control used by `simulate` and as the optimizer's first guess.
    pub initial_control: f64,
    /// Upper bounds visited by `sweep`; `null` means unbounded.
    #[serde(with = "unbounded::list")]
    pub sweep: Vec<f64>,
    /// Output directory, overridden by `--out`.
    pub output: PathBuf,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            scenario: None,
            grid: GridSpec::default(),
            model: ModelParams::default(),
            layout: ControlLayout::default(),
            optimizer: OptimizerConfig::default(),
            initial: InitialCondition::default(),
            initial_control: 0.0,
            sweep: Vec::new(),
            output: PathBuf::from("results"),
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::config("config", e.to_string()))
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    /// Reads a config file, resolving a relative table path against its directory.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config("--config", format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        if let InitialCondition::Table(table) = &mut cfg.initial {
            if table.is_relative() {
                if let Some(dir) = path.parent() {
                    *table = dir.join(&*table);
                }
            }
        }
        Ok(cfg)
    }

    /// Checks the fields the core crate does not own.
    pub fn validate(&self, scenario: Scenario) -> Result<(), CliError> {
        if let Some(declared) = self.scenario {
            if declared != scenario {
                return Err(CliError::config(
                    "scenario",
                    format!("config declares `{}` but `{}` was requested", declared.as_str(), scenario.as_str()),
                ));
            }
        }
        if !(self.initial_control.is_finite() && self.initial_control >= 0.0) {
            return Err(CliError::config(
                "initial_control",
                format!("must be finite and nonnegative, got {}", self.initial_control),
            ));
        }
        if scenario == Scenario::Simulate && self.initial_control > self.model.u_bar {
            return Err(CliError::config("initial_control", format!("exceeds u_bar = {}", self.model.u_bar)));
        }
        if scenario == Scenario::Sweep && self.sweep.is_empty() {
            return Err(CliError::config("sweep", "must list at least one upper bound"));
        }
        for (i, &b) in self.sweep.iter().enumerate() {
            if b.is_nan() || b < 0.0 {
                return Err(CliError::config(format!("sweep[{i}]"), format!("must be nonnegative, got {b}")));
            }
        }
        if let InitialCondition::Table(path) = &self.initial {
            if !path.is_file() {
                return Err(CliError::config("initial.table", format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }
}
