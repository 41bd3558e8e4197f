//! Result files and the checksum manifest.
//!
//! Floats are written as `{:.16e}` (17 significant digits), so identical
//! runs give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use epictrl_core::{Grid, IterationRecord, StateField};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

pub fn fmt_float(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else if v.is_nan() {
        "nan".to_string()
    } else if v > 0.0 {
        "inf".to_string()
    } else {
        "-inf".to_string()
    }
}

fn io_error(path: &Path, source: std::io::Error) -> CliError {
    CliError::Io { path: path.to_path_buf(), source }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ManifestEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

/// A directory being filled with result files. Every written file is
/// recorded for the manifest.
#[derive(Debug)]
pub struct OutputDir {
    root: PathBuf,
    /// Prefix of recorded paths, relative to the top-level directory.
    prefix: PathBuf,
    entries: Vec<ManifestEntry>,
}

impl OutputDir {
    pub fn create(root: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(root).map_err(|e| io_error(root, e))?;
        Ok(OutputDir { root: root.to_path_buf(), prefix: PathBuf::new(), entries: Vec::new() })
    }

    /// A subdirectory whose files are later merged with [`OutputDir::absorb`].
    pub fn subdir(&self, name: &str) -> Result<Self, CliError> {
        let mut sub = OutputDir::create(&self.root.join(name))?;
        sub.prefix = self.prefix.join(name);
        Ok(sub)
    }

    pub fn absorb(&mut self, sub: OutputDir) {
        self.entries.extend(sub.entries);
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<(), CliError> {
        let path = self.root.join(name);
        fs::write(&path, bytes).map_err(|e| io_error(&path, e))?;
        let rel = self.prefix.join(name);
        self.entries.push(ManifestEntry {
            path: rel.to_string_lossy().replace('\\', "/"),
            bytes: bytes.len() as u64,
            sha256: hex::encode(Sha256::digest(bytes)),
        });
        Ok(())
    }

    pub fn write_csv(
        &mut self,
        name: &str,
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let to_io = |e: csv::Error| io_error(&self.root.join(name), e.into());
        w.write_record(header).map_err(to_io)?;
        for row in rows {
            w.write_record(&row).map_err(to_io)?;
        }
        let bytes = w.into_inner().map_err(|e| io_error(&self.root.join(name), e.into_error()))?;
        self.write_bytes(name, &bytes)
    }

    pub fn write_json(&mut self, name: &str, value: &impl Serialize) -> Result<(), CliError> {
        let mut text = serde_json::to_string_pretty(value).expect("summaries serialize");
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    /// Writes `manifest.json` listing every recorded file, sorted by path.
    pub fn finish(mut self) -> Result<Vec<ManifestEntry>, CliError> {
        self.entries.sort_by(|a, b| a.path.cmp(&b.path));
        #[derive(Serialize)]
        struct Manifest<'a> {
            files: &'a [ManifestEntry],
        }
        let mut text = serde_json::to_string_pretty(&Manifest { files: &self.entries }).expect("manifest serializes");
        text.push('\n');
        let path = self.root.join("manifest.json");
        fs::write(&path, text).map_err(|e| io_error(&path, e))?;
        Ok(self.entries)
    }
}

pub fn infectious_rows(grid: &Grid, controlled: &[f64], uncontrolled: &[f64]) -> Vec<Vec<String>> {
    grid.t_nodes
        .iter()
        .zip(controlled.iter().zip(uncontrolled))
        .map(|(&t, (&c, &u))| vec![fmt_float(t), fmt_float(c), fmt_float(u)])
        .collect()
}

pub fn snapshot_rows(grid: &Grid, layer: &StateField) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(grid.layer_len());
    for (k, &a) in grid.a_nodes.iter().enumerate() {
        for (m, &x) in grid.x_nodes.iter().enumerate() {
            let mut row = vec![fmt_float(a), fmt_float(x)];
            row.extend(layer.node(k, m).iter().map(|&v| fmt_float(v)));
            rows.push(row);
        }
    }
    rows
}

/// One row per step, region and class; indices are 1-based.
pub fn schedule_rows(grid: &Grid, schedule: &epictrl_core::ControlSchedule) -> Vec<Vec<String>> {
    let mut rows = Vec::with_capacity(schedule.values().len());
    for n in 0..schedule.steps() {
        for i in 0..schedule.regions() {
            for j in 0..schedule.classes() {
                rows.push(vec![
                    fmt_float(grid.t_nodes[n]),
                    (i + 1).to_string(),
                    (j + 1).to_string(),
                    fmt_float(schedule.get(n, i, j)),
                ]);
            }
        }
    }
    rows
}

pub fn log_rows(records: &[IterationRecord]) -> Vec<Vec<String>> {
    records
        .iter()
        .map(|r| {
            vec![
                r.iter.to_string(),
                fmt_float(r.cost),
                fmt_float(r.grad_norm),
                fmt_float(r.step),
                r.backtracks.to_string(),
                fmt_float(r.change),
                fmt_float(r.stationarity),
            ]
        })
        .collect()
}

pub const INFECTIOUS_HEADER: [&str; 3] = ["t", "total_controlled", "total_uncontrolled"];
pub const SNAPSHOT_HEADER: [&str; 6] = ["a", "x", "S", "V", "I", "R"];
pub const SCHEDULE_HEADER: [&str; 4] = ["t", "i", "j", "u_ij"];
pub const LOG_HEADER: [&str; 7] = ["iter", "cost", "grad_norm", "step", "backtracks", "change", "stationarity"];
pub const SWEEP_HEADER: [&str; 6] = ["u_bar", "J_total", "J_state", "J_control", "max_u", "iters"];
