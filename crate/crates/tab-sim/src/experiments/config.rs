//! Experiment configuration: tasks, population settings, and file-based
//! overrides.

use std::f64::consts::PI;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::device::{MismatchSpec, OffsetScheme};
use crate::error::{Error, Result};
use crate::splitter::MAX_WIDTH;

/// Angular rate of the fast-oscillation benchmark, `sin(8 pi x) / (8 pi x)`.
const SINC_RATE: f64 = 8.0 * PI;

/// A scalar target function usable as a custom task.
pub type TargetFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Built-in benchmark targets plus an escape hatch for custom closures.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskKind {
    /// `sin(pi x)` — one smooth arch over the domain.
    Sin,
    /// `x^3` — a monotone polynomial.
    Cube,
    /// `sin(8 pi x) / (8 pi x)` — eight oscillations, hard for a small
    /// population.
    Sinc,
    /// A user-supplied closure attached in code; not loadable from JSON.
    Custom,
}

/// What to fit and on which grids.
#[derive(Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    #[serde(default = "default_task_kind")]
    pub name: TaskKind,
    /// Input domain `[lo, hi]`.
    #[serde(default = "default_domain")]
    pub domain: [f64; 2],
    /// Training points, evenly spaced over the domain including endpoints.
    #[serde(default = "default_n_train")]
    pub n_train: usize,
    /// Test points; with the default `n_train - 1` they sit exactly between
    /// neighbouring training points, so the two grids never overlap.
    #[serde(default = "default_n_test")]
    pub n_test: usize,
    /// Target function for [`TaskKind::Custom`]; never serialized.
    #[serde(skip)]
    pub custom: Option<TargetFn>,
}

fn default_task_kind() -> TaskKind {
    TaskKind::Sin
}
fn default_domain() -> [f64; 2] {
    [-1.0, 1.0]
}
fn default_n_train() -> usize {
    256
}
fn default_n_test() -> usize {
    255
}

impl fmt::Debug for TaskSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TaskSpec")
            .field("name", &self.name)
            .field("domain", &self.domain)
            .field("n_train", &self.n_train)
            .field("n_test", &self.n_test)
            .field("custom", &self.custom.as_ref().map(|_| "<fn>"))
            .finish()
    }
}

impl Default for TaskSpec {
    fn default() -> Self {
        Self::named(TaskKind::Sin)
    }
}

impl TaskSpec {
    /// A built-in task on the default grids.
    pub fn named(kind: TaskKind) -> Self {
        Self {
            name: kind,
            domain: default_domain(),
            n_train: default_n_train(),
            n_test: default_n_test(),
            custom: None,
        }
    }

    /// A custom task from a closure, on the default grids.
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            name: TaskKind::Custom,
            custom: Some(Arc::new(f)),
            ..Self::named(TaskKind::Custom)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::InvalidConfig(format!(
                "task domain must be a finite interval with lo < hi, got [{lo}, {hi}]"
            )));
        }
        if self.n_train < 2 || self.n_test < 2 {
            return Err(Error::InvalidConfig(format!(
                "grids need at least two points, got n_train = {}, n_test = {}",
                self.n_train, self.n_test
            )));
        }
        if self.name == TaskKind::Custom && self.custom.is_none() {
            return Err(Error::MissingCustomTarget);
        }
        Ok(())
    }

    /// Target value at `x`.
    pub fn target(&self, x: f64) -> Result<f64> {
        match self.name {
            TaskKind::Sin => Ok((PI * x).sin()),
            TaskKind::Cube => Ok(x * x * x),
            TaskKind::Sinc => Ok(if x == 0.0 {
                1.0
            } else {
                (SINC_RATE * x).sin() / (SINC_RATE * x)
            }),
            TaskKind::Custom => match &self.custom {
                Some(f) => Ok(f(x)),
                None => Err(Error::MissingCustomTarget),
            },
        }
    }

    /// Target values over a grid.
    pub fn targets(&self, xs: &[f64]) -> Result<Vec<f64>> {
        xs.iter().map(|&x| self.target(x)).collect()
    }
}

/// Full description of one experiment run.
///
/// Every field has a default, so a JSON config only needs the fields it
/// changes.  Unknown fields are rejected rather than silently ignored.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub task: TaskSpec,
    /// Hidden-population size.
    #[serde(rename = "L", default = "default_neurons")]
    pub neurons: usize,
    /// How reference voltages are spread across the population.
    #[serde(default = "default_offsets")]
    pub offsets: OffsetScheme,
    /// Device-mismatch magnitudes used when sampling the population.
    #[serde(default)]
    pub mismatch: MismatchSpec,
    /// Splitter width for hardware weights; `None` trains ideal weights
    /// only.
    #[serde(default)]
    pub quant_bits: Option<u8>,
    /// Seed for population sampling; everything downstream is
    /// deterministic given this.
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Directory that receives CSV and JSON artifacts.
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Optional ridge strength for the readout solve.
    #[serde(default)]
    pub ridge: Option<f64>,
}

fn default_neurons() -> usize {
    34
}
fn default_offsets() -> OffsetScheme {
    OffsetScheme::UniformSpan {
        v_min: 0.3,
        v_max: 0.9,
    }
}
fn default_seed() -> u64 {
    42
}
fn default_output_dir() -> PathBuf {
    PathBuf::from("tab-sim-out")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            task: TaskSpec::default(),
            neurons: default_neurons(),
            offsets: default_offsets(),
            mismatch: MismatchSpec::default(),
            quant_bits: None,
            seed: default_seed(),
            output_dir: default_output_dir(),
            ridge: None,
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.task.validate()?;
        if self.neurons == 0 {
            return Err(Error::InvalidConfig(
                "population size L must be at least 1".into(),
            ));
        }
        self.offsets.validate()?;
        if let OffsetScheme::ExplicitList { values } = &self.offsets {
            if values.len() != self.neurons {
                return Err(Error::InvalidConfig(format!(
                    "explicit offset list has {} entries for L = {}",
                    values.len(),
                    self.neurons
                )));
            }
        }
        self.mismatch.validate()?;
        if let Some(bits) = self.quant_bits {
            if bits == 0 || bits > MAX_WIDTH {
                return Err(Error::InvalidConfig(format!(
                    "quant_bits must lie in 1..={MAX_WIDTH}, got {bits}"
                )));
            }
        }
        if let Some(lambda) = self.ridge {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "ridge must be non-negative and finite, got {lambda}"
                )));
            }
        }
        Ok(())
    }

    /// Applies command-line style overrides on top of this config.
    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(kind) = overrides.task {
            // Only the target changes; grids and domain stay as configured.
            self.task.name = kind;
            self.task.custom = None;
        }
        if let Some(neurons) = overrides.neurons {
            self.neurons = neurons;
        }
        if let Some(bits) = overrides.quant_bits {
            self.quant_bits = Some(bits);
        }
        if let Some(seed) = overrides.seed {
            self.seed = seed;
        }
        if let Some(dir) = &overrides.output_dir {
            self.output_dir = dir.clone();
        }
        if let Some(sigma) = overrides.sigma_vos {
            self.mismatch.sigma_vos = sigma;
        }
        if let Some((lo, hi)) = overrides.offset_span {
            self.offsets = OffsetScheme::UniformSpan {
                v_min: lo,
                v_max: hi,
            };
        }
    }
}

/// Optional field-level overrides, typically parsed from command-line flags.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Overrides {
    pub task: Option<TaskKind>,
    pub neurons: Option<usize>,
    pub quant_bits: Option<u8>,
    pub seed: Option<u64>,
    pub output_dir: Option<PathBuf>,
    pub sigma_vos: Option<f64>,
    pub offset_span: Option<(f64, f64)>,
}

/// Reads and validates a JSON config file.
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let cfg: ExperimentConfig =
        serde_json::from_str(&text).map_err(|source| Error::ConfigParse {
            path: path.to_path_buf(),
            source,
        })?;
    cfg.validate()?;
    Ok(cfg)
}
