//! Behavioral model of the binary-weighted current splitter that stores an
//! output weight.
//!
//! An N-stage R-2R ladder steers a programmable fraction of its input
//! current to the output node and dumps the rest.  Stage k contributes
//! `2^-(k+1)` of the input when its bit is set (the MSB passes half), so a
//! code `b` on an N-bit splitter passes exactly `b / 2^N` — every
//! representable fraction is dyadic and exact in an f64 up to width 24.
//! Negative weights flip the output into the subtracting side of the
//! summing node; that sign costs one steering bit, not a ladder stage.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Widest supported ladder.
pub const MAX_WIDTH: u8 = 24;

/// Ladder width used by the experiments unless asked otherwise.
pub const DEFAULT_WIDTH: u8 = 13;

/// Digital code loaded into one splitter: `bits` on an N-stage ladder.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitterCode {
    bits: u32,
    width: u8,
}

impl SplitterCode {
    /// Largest code an N-bit ladder can hold, `2^N - 1`.
    pub fn full_scale(width: u8) -> Result<u32> {
        check_width(width)?;
        Ok((1u32 << width) - 1)
    }

    pub fn new(bits: u32, width: u8) -> Result<Self> {
        let max = Self::full_scale(width)?;
        if bits > max {
            return Err(Error::InvalidParameter(format!(
                "code {bits} does not fit in {width} bits (max {max})"
            )));
        }
        Ok(Self { bits, width })
    }

    pub fn bits(&self) -> u32 {
        self.bits
    }

    pub fn width(&self) -> u8 {
        self.width
    }

    /// Fraction of the input current steered to the output: `bits / 2^N`.
    ///
    /// Dyadic with at most 24 fractional bits, so the division is exact.
    pub fn fraction(&self) -> f64 {
        self.bits as f64 / (1u64 << self.width) as f64
    }
}

fn check_width(width: u8) -> Result<()> {
    if width == 0 || width > MAX_WIDTH {
        return Err(Error::InvalidParameter(format!(
            "splitter width must lie in 1..={MAX_WIDTH}, got {width}"
        )));
    }
    Ok(())
}

/// Splits `i_in` through the ladder: `(i_out, i_dump)`.
///
/// The dump branch is computed as the remainder, so the two outputs sum to
/// `i_in` exactly, matching the current conservation of the physical ladder.
pub fn route_current(i_in: f64, code: SplitterCode) -> Result<(f64, f64)> {
    if !(i_in.is_finite() && i_in >= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "splitter input current must be finite and non-negative, got {i_in}"
        )));
    }
    let i_out = i_in * code.fraction();
    let i_dump = i_in - i_out;
    Ok((i_out, i_dump))
}

/// One signed weight: a sign bit plus a splitter code for the magnitude.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QuantizedWeight {
    sign: i8,
    code: SplitterCode,
}

impl QuantizedWeight {
    pub fn new(sign: i8, code: SplitterCode) -> Result<Self> {
        if sign != 1 && sign != -1 {
            return Err(Error::InvalidParameter(format!(
                "weight sign must be +1 or -1, got {sign}"
            )));
        }
        Ok(Self { sign, code })
    }

    pub fn sign(&self) -> i8 {
        self.sign
    }

    pub fn code(&self) -> SplitterCode {
        self.code
    }

    /// Realized weight value `sign * bits / 2^N`.
    pub fn value(&self) -> f64 {
        self.sign as f64 * self.code.fraction()
    }
}

/// Quantizes a normalized weight `|w| <= 1` onto an N-bit ladder.
///
/// The magnitude is rounded to the nearest code (ties away from zero) and
/// saturates at full scale, so `w = 1` maps to `2^N - 1` rather than an
/// impossible `2^N`.  Zero carries a positive sign.
pub fn quantize(w: f64, width: u8) -> Result<QuantizedWeight> {
    check_width(width)?;
    if !w.is_finite() || w.abs() > 1.0 {
        return Err(Error::InvalidParameter(format!(
            "weight must be finite with |w| <= 1, got {w}"
        )));
    }
    let sign: i8 = if w < 0.0 { -1 } else { 1 };
    let max = SplitterCode::full_scale(width)?;
    let scaled = (w.abs() * (1u64 << width) as f64).round();
    let bits = if scaled > max as f64 { max } else { scaled as u32 };
    Ok(QuantizedWeight {
        sign,
        code: SplitterCode { bits, width },
    })
}

/// A whole output column of quantized weights sharing one analogue scale.
///
/// The splitters only realize magnitudes up to 1, so a real-valued column is
/// stored as `scale * q_i` with `scale = max |w_i|` factored out; the scale
/// lives in the output transimpedance, not in the ladders.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuantizedWeightVector {
    weights: Vec<QuantizedWeight>,
    scale: f64,
}

impl QuantizedWeightVector {
    pub fn new(weights: Vec<QuantizedWeight>, scale: f64) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::InvalidParameter(
                "quantized weight vector must not be empty".into(),
            ));
        }
        if !(scale.is_finite() && scale > 0.0) {
            return Err(Error::InvalidParameter(format!(
                "weight scale must be positive and finite, got {scale}"
            )));
        }
        let width = weights[0].code.width;
        if weights.iter().any(|w| w.code.width != width) {
            return Err(Error::DimensionMismatch(
                "all weights in a vector must share one splitter width".into(),
            ));
        }
        Ok(Self { weights, scale })
    }

    /// Quantizes a real column: factors out `scale = max |w_i|`, then maps
    /// each normalized weight onto the ladder.  An all-zero column uses a
    /// unit scale so the representation stays valid.
    pub fn from_real(weights: &[f64], width: u8) -> Result<Self> {
        check_width(width)?;
        if weights.is_empty() {
            return Err(Error::InvalidParameter(
                "cannot quantize an empty weight column".into(),
            ));
        }
        if let Some(w) = weights.iter().find(|w| !w.is_finite()) {
            return Err(Error::InvalidParameter(format!(
                "cannot quantize non-finite weight {w}"
            )));
        }
        let max_abs = weights.iter().fold(0.0_f64, |m, w| m.max(w.abs()));
        let scale = if max_abs > 0.0 { max_abs } else { 1.0 };
        let quantized = weights
            .iter()
            .map(|&w| quantize(w / scale, width))
            .collect::<Result<Vec<_>>>()?;
        Self::new(quantized, scale)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn scale(&self) -> f64 {
        self.scale
    }

    pub fn weights(&self) -> &[QuantizedWeight] {
        &self.weights
    }

    pub fn width(&self) -> u8 {
        self.weights[0].code.width
    }

    /// Realized weight `scale * sign * fraction` at position `i`.
    pub fn value(&self, i: usize) -> f64 {
        self.scale * self.weights[i].value()
    }

    /// All realized weights as plain numbers.
    pub fn to_vec(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.value(i)).collect()
    }
}
