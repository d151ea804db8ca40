//! Behavioral simulator and training library for a trainable analogue
//! block (TAB): a three-layer network whose hidden layer is a population of
//! subthreshold differential pairs and whose output weights are binary
//! current splitters.
//!
//! The crate models the block at equation level rather than SPICE level:
//!
//! * [`device`] — differential-pair neurons, deliberate reference-voltage
//!   spreads, and Monte Carlo device mismatch;
//! * [`splitter`] — N-bit current-splitter weights with exact dyadic
//!   fractions and sign handling;
//! * [`network`] — input mapping, hidden activation matrices, and the
//!   forward pass with real or quantized readouts;
//! * [`learning`] — pseudoinverse readout training, encoding capacity and
//!   conditioning diagnostics;
//! * [`experiments`] — deterministic regression, heterogeneity,
//!   bit-resolution and mismatch Monte Carlo studies with CSV/JSON output.
//!
//! Everything is deterministic given a seed: the same config produces the
//! same population, the same weights, and byte-identical artifacts.

pub mod device;
pub mod error;
pub mod experiments;
pub mod learning;
pub mod network;
pub mod splitter;

pub use error::{Error, Result};
