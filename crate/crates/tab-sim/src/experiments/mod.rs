//! Reproducible experiment harness: configs in, CSV/JSON artifacts out.

pub mod config;
pub mod report;
pub mod runner;

pub use config::{load_config, ExperimentConfig, Overrides, TaskKind, TaskSpec};
pub use report::{
    BitdepthPoint, BitdepthReport, ChipResult, HeterogeneityArm, HeterogeneityReport,
    MonteCarloReport, RegressionReport,
};
pub use runner::{
    bitdepth_sweep, build_network, heterogeneity_study, mismatch_mc, run_regression,
    train_test_grids, NOMINAL_NEURON,
};
