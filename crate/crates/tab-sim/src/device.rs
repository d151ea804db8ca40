//! Behavioral model of the analogue hidden neuron.
//!
//! A neuron is a differential pair biased in weak inversion, splitting a tail
//! current `I_b` between two branches according to the differential drive
//! `v_in + dV_os - V_ref`.  The branch ratio follows `exp(u / (n * U_T))`,
//! which we evaluate as a saturating logistic of the drive — algebraically
//! identical, but free of overflow for large excursions.  One branch is
//! mirrored out with gain `g` as the neuron output current, so the tuning
//! curve is a scaled sigmoid centred on `V_ref`.
//!
//! In random-projection terms the circuit realizes `g(a * x + b)` with input
//! gain `a = 1 / (n * U_T)` and bias `b = (dV_os - V_ref) / (n * U_T)`:
//! devices with distinct offsets, slope factors and bias currents form a
//! diverse nonlinear basis.  Diversity enters through two channels, the
//! deliberate spread of reference voltages across the population and the
//! sampled per-device mismatch on offset, bias, mirror gain and slope.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Thermal voltage kT/q at room temperature, in volts.
pub const THERMAL_VOLTAGE_300K: f64 = 0.02585;

/// Slope factors outside this window are rejected outright; sampled values
/// are clamped into it.
pub const SLOPE_FACTOR_RANGE: (f64, f64) = (1.0, 2.0);

/// Floor applied to sampled multiplicative factors (bias current, mirror
/// gain) so that pathological draws cannot flip a current's sign.
const MIN_REL_FACTOR: f64 = 0.01;

/// Operating-point constants shared by every device on a die.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhysicalConstants {
    /// Thermal voltage kT/q in volts.
    pub thermal_voltage: f64,
}

impl Default for PhysicalConstants {
    fn default() -> Self {
        Self {
            thermal_voltage: THERMAL_VOLTAGE_300K,
        }
    }
}

impl PhysicalConstants {
    pub fn validate(&self) -> Result<()> {
        if !(self.thermal_voltage.is_finite() && self.thermal_voltage > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "thermal_voltage must be positive and finite, got {}",
                self.thermal_voltage
            )));
        }
        Ok(())
    }
}

/// Complete parameter set of one hidden neuron.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NeuronParams {
    /// Tail bias current `I_b` in amperes; must be positive.
    pub bias_current: f64,
    /// Subthreshold slope factor `n`, dimensionless.
    pub slope_factor: f64,
    /// Reference voltage `V_ref` in volts: the centre of the tuning curve,
    /// set deliberately per neuron to spread the population.
    pub v_ref: f64,
    /// Input-referred offset voltage `dV_os` in volts, the random part of
    /// the curve position contributed by device mismatch.
    pub input_offset: f64,
    /// Current-mirror gain `g` applied to the selected branch.
    pub mirror_gain: f64,
}

impl NeuronParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.bias_current.is_finite() && self.bias_current > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "bias_current must be positive and finite, got {}",
                self.bias_current
            )));
        }
        let (n_lo, n_hi) = SLOPE_FACTOR_RANGE;
        if !(self.slope_factor.is_finite()
            && self.slope_factor >= n_lo
            && self.slope_factor <= n_hi)
        {
            return Err(Error::InvalidParameter(format!(
                "slope_factor must lie in [{n_lo}, {n_hi}], got {}",
                self.slope_factor
            )));
        }
        if !self.v_ref.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "v_ref must be finite, got {}",
                self.v_ref
            )));
        }
        if !self.input_offset.is_finite() {
            return Err(Error::InvalidParameter(format!(
                "input_offset must be finite, got {}",
                self.input_offset
            )));
        }
        if !(self.mirror_gain.is_finite() && self.mirror_gain > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "mirror_gain must be positive and finite, got {}",
                self.mirror_gain
            )));
        }
        Ok(())
    }
}

/// Standard deviations of per-device parameter mismatch.
///
/// Defaults model a plausible unmatched subthreshold process; use
/// [`MismatchSpec::zero`] for an ideal population.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MismatchSpec {
    /// Input-referred offset spread in volts.
    #[serde(default = "default_sigma_vos")]
    pub sigma_vos: f64,
    /// Relative bias-current spread.
    #[serde(default = "default_sigma_ib_rel")]
    pub sigma_ib_rel: f64,
    /// Relative mirror-gain spread.
    #[serde(default = "default_sigma_mirror_rel")]
    pub sigma_mirror_rel: f64,
    /// Absolute slope-factor spread.
    #[serde(default = "default_sigma_n")]
    pub sigma_n: f64,
}

fn default_sigma_vos() -> f64 {
    5e-3
}
fn default_sigma_ib_rel() -> f64 {
    0.05
}
fn default_sigma_mirror_rel() -> f64 {
    0.02
}
fn default_sigma_n() -> f64 {
    0.02
}

impl Default for MismatchSpec {
    fn default() -> Self {
        Self {
            sigma_vos: default_sigma_vos(),
            sigma_ib_rel: default_sigma_ib_rel(),
            sigma_mirror_rel: default_sigma_mirror_rel(),
            sigma_n: default_sigma_n(),
        }
    }
}

impl MismatchSpec {
    /// No mismatch at all: every device comes out exactly nominal.
    pub fn zero() -> Self {
        Self {
            sigma_vos: 0.0,
            sigma_ib_rel: 0.0,
            sigma_mirror_rel: 0.0,
            sigma_n: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, sigma) in [
            ("sigma_vos", self.sigma_vos),
            ("sigma_ib_rel", self.sigma_ib_rel),
            ("sigma_mirror_rel", self.sigma_mirror_rel),
            ("sigma_n", self.sigma_n),
        ] {
            if !(sigma.is_finite() && sigma >= 0.0) {
                return Err(Error::InvalidParameter(format!(
                    "{name} must be non-negative and finite, got {sigma}"
                )));
            }
        }
        Ok(())
    }
}

/// How the deliberate reference voltages are assigned across a population.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OffsetScheme {
    /// Evenly spaced references over `[v_min, v_max]` (endpoints included).
    UniformSpan { v_min: f64, v_max: f64 },
    /// One explicit reference per neuron, in order.
    ExplicitList { values: Vec<f64> },
    /// Every neuron shares the same reference — a homogeneous population.
    Constant { v: f64 },
}

impl OffsetScheme {
    pub fn validate(&self) -> Result<()> {
        match self {
            OffsetScheme::UniformSpan { v_min, v_max } => {
                if !(v_min.is_finite() && v_max.is_finite() && v_min < v_max) {
                    return Err(Error::InvalidParameter(format!(
                        "uniform span requires finite v_min < v_max, got [{v_min}, {v_max}]"
                    )));
                }
            }
            OffsetScheme::ExplicitList { values } => {
                if values.is_empty() {
                    return Err(Error::InvalidParameter(
                        "explicit offset list must not be empty".into(),
                    ));
                }
                if let Some(v) = values.iter().find(|v| !v.is_finite()) {
                    return Err(Error::InvalidParameter(format!(
                        "explicit offset list contains non-finite value {v}"
                    )));
                }
            }
            OffsetScheme::Constant { v } => {
                if !v.is_finite() {
                    return Err(Error::InvalidParameter(format!(
                        "constant offset must be finite, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Reference voltages for a population of `count` neurons.
    ///
    /// A uniform span of one neuron collapses to the span midpoint; an
    /// explicit list must match `count` exactly.
    pub fn values(&self, count: usize) -> Result<Vec<f64>> {
        self.validate()?;
        if count == 0 {
            return Err(Error::InvalidParameter(
                "population must contain at least one neuron".into(),
            ));
        }
        match self {
            OffsetScheme::UniformSpan { v_min, v_max } => {
                if count == 1 {
                    return Ok(vec![0.5 * (v_min + v_max)]);
                }
                let step = (v_max - v_min) / (count - 1) as f64;
                let mut out: Vec<f64> =
                    (0..count).map(|i| v_min + i as f64 * step).collect();
                // Pin the last point so rounding cannot push it past the span.
                out[count - 1] = *v_max;
                Ok(out)
            }
            OffsetScheme::ExplicitList { values } => {
                if values.len() != count {
                    return Err(Error::DimensionMismatch(format!(
                        "explicit offset list has {} entries for {} neurons",
                        values.len(),
                        count
                    )));
                }
                Ok(values.clone())
            }
            OffsetScheme::Constant { v } => Ok(vec![*v; count]),
        }
    }
}

/// Numerically safe logistic `1 / (1 + exp(-u))`.
///
/// Both branches share `t = exp(-|u|)` so the function saturates cleanly to
/// 0 or 1 instead of overflowing, and `logistic(u) + logistic(-u) == 1`
/// holds bitwise.
fn logistic(u: f64) -> f64 {
    if u >= 0.0 {
        let t = (-u).exp();
        1.0 / (1.0 + t)
    } else {
        let t = u.exp();
        t / (1.0 + t)
    }
}

/// Branch currents `(I_1, I_2)` of the differential pair for input `v_in`.
///
/// `I_1` is the branch that wins for large `v_in`; the pair always satisfies
/// `I_1 + I_2 == I_b` up to rounding because both are evaluated from one
/// shared exponential.
pub fn diff_pair_currents(
    v_in: f64,
    params: &NeuronParams,
    constants: &PhysicalConstants,
) -> Result<(f64, f64)> {
    params.validate()?;
    constants.validate()?;
    if !v_in.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "v_in must be finite, got {v_in}"
        )));
    }
    let drive = (v_in + params.input_offset - params.v_ref)
        / (params.slope_factor * constants.thermal_voltage);
    let i1 = params.bias_current * logistic(drive);
    let i2 = params.bias_current * logistic(-drive);
    Ok((i1, i2))
}

/// Mirrored output current of one neuron: `g * I_1(v_in)`.
pub fn neuron_response(
    v_in: f64,
    params: &NeuronParams,
    constants: &PhysicalConstants,
) -> Result<f64> {
    let (i1, _) = diff_pair_currents(v_in, params, constants)?;
    Ok(params.mirror_gain * i1)
}

/// Output current of one neuron over a voltage grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TuningCurve {
    v_grid: Vec<f64>,
    i_out: Vec<f64>,
}

impl TuningCurve {
    /// Wraps precomputed samples, checking the grid is strictly increasing
    /// and currents are finite and non-negative.
    pub fn new(v_grid: Vec<f64>, i_out: Vec<f64>) -> Result<Self> {
        if v_grid.is_empty() {
            return Err(Error::InvalidGrid("voltage grid is empty".into()));
        }
        if v_grid.len() != i_out.len() {
            return Err(Error::DimensionMismatch(format!(
                "grid has {} points but {} currents were supplied",
                v_grid.len(),
                i_out.len()
            )));
        }
        if v_grid.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidGrid("voltage grid contains non-finite values".into()));
        }
        if v_grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidGrid(
                "voltage grid must be strictly increasing".into(),
            ));
        }
        if i_out.iter().any(|i| !(i.is_finite() && *i >= 0.0)) {
            return Err(Error::InvalidParameter(
                "tuning-curve currents must be finite and non-negative".into(),
            ));
        }
        Ok(Self { v_grid, i_out })
    }

    pub fn v_grid(&self) -> &[f64] {
        &self.v_grid
    }

    pub fn i_out(&self) -> &[f64] {
        &self.i_out
    }

    pub fn len(&self) -> usize {
        self.v_grid.len()
    }

    pub fn is_empty(&self) -> bool {
        self.v_grid.is_empty()
    }
}

/// Sweeps one neuron over `v_grid` and returns its tuning curve.
pub fn tuning_curve(
    params: &NeuronParams,
    v_grid: &[f64],
    constants: &PhysicalConstants,
) -> Result<TuningCurve> {
    let mut i_out = Vec::with_capacity(v_grid.len());
    for &v in v_grid {
        i_out.push(neuron_response(v, params, constants)?);
    }
    let curve = TuningCurve::new(v_grid.to_vec(), i_out)?;
    // The mirror can only scale the winning branch, never exceed it.
    let ceiling = params.mirror_gain * params.bias_current * (1.0 + 1e-9);
    debug_assert!(curve.i_out.iter().all(|&i| i <= ceiling));
    Ok(curve)
}

/// Draws a population of `count` neurons.
///
/// Reference voltages come from `offsets`; everything else is the nominal
/// parameter perturbed by Gaussian mismatch.  The generator is seeded
/// ChaCha8, and each neuron consumes exactly four draws in a fixed order
/// (offset, bias, mirror, slope), so a given `(seed, count)` always yields
/// the same population and prefixes agree across population sizes.
pub fn sample_population(
    count: usize,
    mismatch: &MismatchSpec,
    offsets: &OffsetScheme,
    nominal: &NeuronParams,
    seed: u64,
) -> Result<Vec<NeuronParams>> {
    nominal.validate()?;
    mismatch.validate()?;
    let v_refs = offsets.values(count)?;

    let (n_lo, n_hi) = SLOPE_FACTOR_RANGE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut population = Vec::with_capacity(count);
    for v_ref in v_refs {
        // Always four draws per neuron, even at zero sigma, so stream
        // position is independent of the mismatch magnitudes.
        let z_vos: f64 = StandardNormal.sample(&mut rng);
        let z_ib: f64 = StandardNormal.sample(&mut rng);
        let z_mirror: f64 = StandardNormal.sample(&mut rng);
        let z_n: f64 = StandardNormal.sample(&mut rng);

        let params = NeuronParams {
            bias_current: nominal.bias_current
                * (1.0 + z_ib * mismatch.sigma_ib_rel).max(MIN_REL_FACTOR),
            slope_factor: (nominal.slope_factor + z_n * mismatch.sigma_n)
                .clamp(n_lo, n_hi),
            v_ref,
            input_offset: nominal.input_offset + z_vos * mismatch.sigma_vos,
            mirror_gain: nominal.mirror_gain
                * (1.0 + z_mirror * mismatch.sigma_mirror_rel).max(MIN_REL_FACTOR),
        };
        params.validate()?;
        population.push(params);
    }
    Ok(population)
}
