//! Report structs and their serialized forms.
//!
//! Every experiment writes CSV data files plus one JSON report echoing the
//! config it ran with.  Numbers go through Rust's shortest round-trip
//! formatting in both formats, so reruns of a deterministic experiment
//! produce byte-identical files.  JSON cannot carry infinities, so
//! condition numbers are reported as optional values and omitted when the
//! matrix was singular to machine precision.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiments::config::ExperimentConfig;

/// Replaces non-finite diagnostics with `None` so they survive JSON.
pub(crate) fn finite_or_none(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}

/// Single fit-and-evaluate run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RegressionReport {
    pub config: ExperimentConfig,
    pub train_rmse: f64,
    pub train_nrmse: f64,
    pub test_rmse: f64,
    pub test_nrmse: f64,
    /// Test error of the hardware (quantized) weights, when requested.
    pub quantized_test_nrmse: Option<f64>,
    /// Training samples encoded exactly by the population.
    pub capacity: usize,
    pub capacity_full: bool,
    /// Rank of the training activation matrix.
    pub rank: usize,
    /// `None` when the matrix is singular to machine precision.
    pub condition_number: Option<f64>,
    /// Largest ideal readout weight magnitude; sets the quantizer scale.
    pub max_abs_weight: f64,
    pub csv_files: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

/// One population variant inside the heterogeneity study.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeterogeneityArm {
    pub name: String,
    pub rank: usize,
    pub capacity: usize,
    pub condition_number: Option<f64>,
    pub train_nrmse: f64,
    pub test_nrmse: f64,
}

/// Comparison of homogeneous, mismatch-only and deliberately spread
/// populations on one task.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HeterogeneityReport {
    pub config: ExperimentConfig,
    pub arms: Vec<HeterogeneityArm>,
    /// Best affine readout of a single nominal sigmoid — the ceiling for
    /// any homogeneous population.
    pub baseline_test_nrmse: f64,
    pub csv_files: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

/// Test error of one splitter width in the sweep.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BitdepthPoint {
    pub bits: u8,
    pub test_nrmse: f64,
}

/// Weight-resolution sweep: one training run, many ladder widths.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BitdepthReport {
    pub config: ExperimentConfig,
    /// Error of the unquantized weights, the floor of the sweep.
    pub real_test_nrmse: f64,
    pub points: Vec<BitdepthPoint>,
    pub csv_files: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

/// Per-chip outcome inside the Monte Carlo run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ChipResult {
    pub chip: usize,
    pub seed: u64,
    pub train_nrmse: f64,
    pub test_nrmse: f64,
    pub quantized_test_nrmse: Option<f64>,
    pub rank: usize,
    pub capacity: usize,
}

/// Mismatch Monte Carlo over independently sampled chips.
///
/// Deliberately carries no timing field: rerunning the same config must
/// reproduce this file byte for byte.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloReport {
    pub config: ExperimentConfig,
    pub n_chips: usize,
    pub test_nrmse_mean: f64,
    pub test_nrmse_median: f64,
    pub test_nrmse_p95: f64,
    pub capacity_min: usize,
    pub capacity_max: usize,
    pub capacity_mean: f64,
    pub csv_files: Vec<PathBuf>,
}

/// Writes a text artifact, creating parent directories as needed.
pub(crate) fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Serializes a report as pretty JSON with a trailing newline.
pub(crate) fn write_json<T: Serialize>(path: &Path, report: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(report)?;
    text.push('\n');
    write_text(path, &text)
}
