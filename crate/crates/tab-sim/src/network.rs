//! Network-level assembly: input mapping, hidden-layer activations and the
//! trained linear readout.
//!
//! The network has no trained input layer.  A scalar input is mapped
//! affinely onto the voltage window the differential pairs can resolve,
//! every neuron responds with its own sigmoid, and the only learned part is
//! the linear combination of those responses.  Hidden activations are
//! reported as currents normalized by the nominal bias so they live on an
//! O(1) scale regardless of how small the physical currents are.

use nalgebra::DMatrix;

use crate::device::{self, NeuronParams, PhysicalConstants};
use crate::error::{Error, Result};
use crate::splitter::QuantizedWeightVector;

/// Affine map from the task's input domain onto the front-end voltage window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InputMap {
    x_lo: f64,
    x_hi: f64,
    v_lo: f64,
    v_hi: f64,
}

impl InputMap {
    /// Maps `[x_lo, x_hi]` onto `[v_lo, v_hi]`; both intervals must be
    /// non-degenerate so the map stays invertible.
    pub fn new(x_lo: f64, x_hi: f64, v_lo: f64, v_hi: f64) -> Result<Self> {
        for (name, v) in [("x_lo", x_lo), ("x_hi", x_hi), ("v_lo", v_lo), ("v_hi", v_hi)] {
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be finite, got {v}"
                )));
            }
        }
        if x_lo >= x_hi {
            return Err(Error::InvalidParameter(format!(
                "input domain must satisfy x_lo < x_hi, got [{x_lo}, {x_hi}]"
            )));
        }
        if v_lo == v_hi {
            return Err(Error::InvalidParameter(format!(
                "voltage window must not be degenerate, got [{v_lo}, {v_hi}]"
            )));
        }
        Ok(Self {
            x_lo,
            x_hi,
            v_lo,
            v_hi,
        })
    }

    pub fn gain(&self) -> f64 {
        (self.v_hi - self.v_lo) / (self.x_hi - self.x_lo)
    }

    /// Voltage presented to the neurons for input `x`.  Inputs need not lie
    /// inside the nominal domain; sanity of the resulting voltage is checked
    /// where activations are built.
    pub fn voltage(&self, x: f64) -> f64 {
        self.v_lo + (x - self.x_lo) * self.gain()
    }

    /// Window the mapped voltage is expected to stay near, `(lo, hi)`.
    pub fn voltage_window(&self) -> (f64, f64) {
        (self.v_lo.min(self.v_hi), self.v_lo.max(self.v_hi))
    }
}

impl Default for InputMap {
    /// The experiment convention: `[-1, 1]` onto `[0.3 V, 0.9 V]`.
    fn default() -> Self {
        Self {
            x_lo: -1.0,
            x_hi: 1.0,
            v_lo: 0.3,
            v_hi: 0.9,
        }
    }
}

/// Scalar inputs paired with one or more target columns.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    inputs: Vec<f64>,
    targets: DMatrix<f64>,
}

impl Dataset {
    pub fn new(inputs: Vec<f64>, targets: DMatrix<f64>) -> Result<Self> {
        if inputs.is_empty() {
            return Err(Error::InvalidParameter("dataset must not be empty".into()));
        }
        if targets.nrows() != inputs.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs but {} target rows",
                inputs.len(),
                targets.nrows()
            )));
        }
        if targets.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "dataset needs at least one target column".into(),
            ));
        }
        if inputs.iter().any(|x| !x.is_finite())
            || targets.iter().any(|y| !y.is_finite())
        {
            return Err(Error::InvalidParameter(
                "dataset values must be finite".into(),
            ));
        }
        Ok(Self { inputs, targets })
    }

    /// Single-output convenience constructor.
    pub fn from_pairs(inputs: Vec<f64>, targets: Vec<f64>) -> Result<Self> {
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} inputs but {} targets",
                inputs.len(),
                targets.len()
            )));
        }
        let matrix = DMatrix::from_vec(targets.len(), 1, targets);
        Self::new(inputs, matrix)
    }

    pub fn len(&self) -> usize {
        self.inputs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.inputs.is_empty()
    }

    pub fn inputs(&self) -> &[f64] {
        &self.inputs
    }

    pub fn targets(&self) -> &DMatrix<f64> {
        &self.targets
    }
}

/// Hidden-layer activation matrix: one row per sample, one column per neuron.
///
/// Entries are normalized output currents, so on the build path they are
/// finite and non-negative by construction; matrices wrapped from raw data
/// are checked for finiteness only, which keeps the type usable for
/// synthetic linear-algebra inputs.
#[derive(Debug, Clone, PartialEq)]
pub struct HiddenMatrix {
    data: DMatrix<f64>,
}

impl HiddenMatrix {
    pub fn from_matrix(data: DMatrix<f64>) -> Result<Self> {
        if data.nrows() == 0 || data.ncols() == 0 {
            return Err(Error::InvalidParameter(
                "hidden matrix must have at least one row and one column".into(),
            ));
        }
        if data.iter().any(|h| !h.is_finite()) {
            return Err(Error::InvalidParameter(
                "hidden matrix contains non-finite entries".into(),
            ));
        }
        Ok(Self { data })
    }

    pub fn samples(&self) -> usize {
        self.data.nrows()
    }

    pub fn neurons(&self) -> usize {
        self.data.ncols()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.data
    }

    pub fn into_matrix(self) -> DMatrix<f64> {
        self.data
    }
}

/// Readout weights, either ideal real numbers or splitter codes.
#[derive(Debug, Clone, PartialEq)]
pub enum OutputWeights {
    /// Ideal weights: one column per output, one row per hidden neuron.
    Real(DMatrix<f64>),
    /// Hardware weights: one quantized column per output.
    Quantized(Vec<QuantizedWeightVector>),
}

impl OutputWeights {
    pub fn hidden_len(&self) -> Result<usize> {
        match self {
            OutputWeights::Real(w) => {
                if w.nrows() == 0 || w.ncols() == 0 {
                    return Err(Error::InvalidParameter(
                        "weight matrix must be non-empty".into(),
                    ));
                }
                if w.iter().any(|x| !x.is_finite()) {
                    return Err(Error::InvalidParameter(
                        "weight matrix contains non-finite entries".into(),
                    ));
                }
                Ok(w.nrows())
            }
            OutputWeights::Quantized(cols) => {
                let first = cols
                    .first()
                    .ok_or_else(|| {
                        Error::InvalidParameter("weight set must be non-empty".into())
                    })?
                    .len();
                if cols.iter().any(|c| c.len() != first) {
                    return Err(Error::DimensionMismatch(
                        "quantized weight columns differ in length".into(),
                    ));
                }
                Ok(first)
            }
        }
    }

    pub fn output_count(&self) -> usize {
        match self {
            OutputWeights::Real(w) => w.ncols(),
            OutputWeights::Quantized(cols) => cols.len(),
        }
    }

    /// Realizes the weights as a dense hidden-by-output matrix.
    pub fn to_matrix(&self) -> Result<DMatrix<f64>> {
        let rows = self.hidden_len()?;
        match self {
            OutputWeights::Real(w) => Ok(w.clone()),
            OutputWeights::Quantized(cols) => {
                let mut m = DMatrix::zeros(rows, cols.len());
                for (j, col) in cols.iter().enumerate() {
                    for i in 0..rows {
                        m[(i, j)] = col.value(i);
                    }
                }
                Ok(m)
            }
        }
    }
}

/// A full block: neuron population, input map and (once trained) readout.
#[derive(Debug, Clone)]
pub struct TabNetwork {
    population: Vec<NeuronParams>,
    constants: PhysicalConstants,
    input_map: InputMap,
    /// Bias current used to normalize activations, shared across the block.
    nominal_bias: f64,
    weights: Option<OutputWeights>,
    /// Dense realization of `weights`, kept in sync by `set_weights`.
    effective_weights: Option<DMatrix<f64>>,
}

impl TabNetwork {
    pub fn new(
        population: Vec<NeuronParams>,
        constants: PhysicalConstants,
        input_map: InputMap,
        nominal_bias: f64,
    ) -> Result<Self> {
        if population.is_empty() {
            return Err(Error::InvalidParameter(
                "network needs at least one hidden neuron".into(),
            ));
        }
        for p in &population {
            p.validate()?;
        }
        constants.validate()?;
        if !(nominal_bias.is_finite() && nominal_bias > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "nominal bias current must be positive and finite, got {nominal_bias}"
            )));
        }
        Ok(Self {
            population,
            constants,
            input_map,
            nominal_bias,
            weights: None,
            effective_weights: None,
        })
    }

    pub fn hidden_len(&self) -> usize {
        self.population.len()
    }

    pub fn population(&self) -> &[NeuronParams] {
        &self.population
    }

    pub fn input_map(&self) -> &InputMap {
        &self.input_map
    }

    pub fn nominal_bias(&self) -> f64 {
        self.nominal_bias
    }

    pub fn weights(&self) -> Option<&OutputWeights> {
        self.weights.as_ref()
    }

    pub fn output_count(&self) -> Option<usize> {
        self.weights.as_ref().map(OutputWeights::output_count)
    }

    /// Installs a trained readout; its hidden dimension must match the
    /// population.
    pub fn set_weights(&mut self, weights: OutputWeights) -> Result<()> {
        let rows = weights.hidden_len()?;
        if rows != self.hidden_len() {
            return Err(Error::DimensionMismatch(format!(
                "weights address {rows} hidden neurons but the network has {}",
                self.hidden_len()
            )));
        }
        self.effective_weights = Some(weights.to_matrix()?);
        self.weights = Some(weights);
        Ok(())
    }

    /// Normalized hidden activations for one input: `g * I_1 / I_b_nominal`
    /// per neuron.
    ///
    /// The mapped voltage must stay within one volt of the front-end window;
    /// anything further means the input domain and the map disagree.
    pub fn activations(&self, x: f64) -> Result<Vec<f64>> {
        if !x.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "network input must be finite, got {x}"
            )));
        }
        let v = self.input_map.voltage(x);
        let (w_lo, w_hi) = self.input_map.voltage_window();
        let (lo, hi) = (w_lo - 1.0, w_hi + 1.0);
        if !(v >= lo && v <= hi) {
            return Err(Error::InputOutOfRange {
                input: x,
                voltage: v,
                lo,
                hi,
            });
        }
        let mut row = Vec::with_capacity(self.population.len());
        for p in &self.population {
            let i_out = device::neuron_response(v, p, &self.constants)?;
            row.push(i_out / self.nominal_bias);
        }
        Ok(row)
    }

    /// Stacks activation rows for a batch of inputs.
    pub fn hidden_matrix(&self, inputs: &[f64]) -> Result<HiddenMatrix> {
        if inputs.is_empty() {
            return Err(Error::InvalidParameter(
                "need at least one input to build a hidden matrix".into(),
            ));
        }
        let mut data = DMatrix::zeros(inputs.len(), self.hidden_len());
        for (r, &x) in inputs.iter().enumerate() {
            let row = self.activations(x)?;
            for (c, h) in row.into_iter().enumerate() {
                data[(r, c)] = h;
            }
        }
        HiddenMatrix::from_matrix(data)
    }

    /// One output sample per readout column for input `x`.
    pub fn forward(&self, x: f64) -> Result<Vec<f64>> {
        let w = self.effective_weights.as_ref().ok_or_else(|| {
            Error::InvalidParameter("network has no output weights installed".into())
        })?;
        let h = self.activations(x)?;
        let mut out = vec![0.0; w.ncols()];
        for (j, o) in out.iter_mut().enumerate() {
            *o = h.iter().zip(w.column(j).iter()).map(|(a, b)| a * b).sum();
        }
        Ok(out)
    }

    /// Forward pass over a batch, one row per input.
    pub fn forward_batch(&self, inputs: &[f64]) -> Result<DMatrix<f64>> {
        let w = self.effective_weights.as_ref().ok_or_else(|| {
            Error::InvalidParameter("network has no output weights installed".into())
        })?;
        let h = self.hidden_matrix(inputs)?;
        Ok(h.matrix() * w)
    }
}
