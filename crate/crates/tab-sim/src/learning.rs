//! Offline readout training and linear-algebra diagnostics.
//!
//! Training never touches the hidden layer: it solves the linear
//! least-squares problem `H * W = Y` for the readout weights with a
//! truncated-SVD pseudoinverse, `W = pinv(H) * Y`.  Small singular values —
//! directions the population barely excites — are cut rather than inverted,
//! which is what keeps training stable on nearly collinear populations.
//! The same decomposition powers the diagnostics: effective rank, condition
//! number, and how many samples the population can encode exactly.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::network::HiddenMatrix;
use crate::splitter::QuantizedWeightVector;

/// Pseudoinverse of a matrix together with how it was computed.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoinverseResult {
    /// The pseudoinverse itself (cols-by-rows of the input).
    pub matrix: DMatrix<f64>,
    /// Number of singular values kept.
    pub effective_rank: usize,
    /// Absolute singular-value cutoff that was applied.
    pub tolerance_used: f64,
}

fn validate_matrix(m: &DMatrix<f64>, what: &str) -> Result<()> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Err(Error::InvalidParameter(format!("{what} must be non-empty")));
    }
    if m.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "{what} contains non-finite entries"
        )));
    }
    Ok(())
}

/// Thin SVD `A = U * diag(s) * V^T` with `s` sorted descending.
///
/// `u` is rows-by-k and `v` is cols-by-k for `k = min(rows, cols)`.  Columns
/// of `u` whose singular value is zero are zero vectors; every caller here
/// truncates those directions anyway.
struct ThinSvd {
    u: DMatrix<f64>,
    s: Vec<f64>,
    v: DMatrix<f64>,
}

/// One-sided Jacobi SVD.
///
/// Rotates column pairs of a working copy until all columns are mutually
/// orthogonal; their norms are the singular values and the accumulated
/// rotations form `V`.  A few times slower than bidiagonalize-then-iterate,
/// but — unlike the QR-iteration codes — it stays exact on matrices with
/// repeated or zero singular values, which this crate meets routinely
/// (cloned neurons, deliberately collinear populations).
fn jacobi_svd(a: &DMatrix<f64>) -> Result<ThinSvd> {
    // Work on the tall orientation; for a wide input the factors swap back
    // at the end since A^T = V * diag(s) * U^T.
    let wide = a.nrows() < a.ncols();
    let mut b = if wide { a.transpose() } else { a.clone() };
    let (rows, cols) = b.shape();
    let mut v = DMatrix::<f64>::identity(cols, cols);
    // Squared column norms, updated per rotation and refreshed each sweep.
    let mut norms: Vec<f64> = (0..cols).map(|j| b.column(j).norm_squared()).collect();

    const TOL: f64 = 1e-14;
    const MAX_SWEEPS: usize = 128;
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in (p + 1)..cols {
                let (np, nq) = (norms[p], norms[q]);
                if np == 0.0 || nq == 0.0 {
                    continue;
                }
                let c: f64 = b.column(p).dot(&b.column(q));
                if c.abs() <= TOL * (np * nq).sqrt() {
                    continue;
                }
                rotated = true;
                // Jacobi rotation diagonalizing the 2x2 Gram block
                // [[np, c], [c, nq]].
                let zeta = (nq - np) / (2.0 * c);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let cs = 1.0 / (1.0 + t * t).sqrt();
                let sn = cs * t;
                for i in 0..rows {
                    let (x, y) = (b[(i, p)], b[(i, q)]);
                    b[(i, p)] = cs * x - sn * y;
                    b[(i, q)] = sn * x + cs * y;
                }
                for i in 0..cols {
                    let (x, y) = (v[(i, p)], v[(i, q)]);
                    v[(i, p)] = cs * x - sn * y;
                    v[(i, q)] = sn * x + cs * y;
                }
                norms[p] = np - t * c;
                norms[q] = nq + t * c;
            }
        }
        if !rotated {
            converged = true;
            break;
        }
        for (j, n) in norms.iter_mut().enumerate() {
            *n = b.column(j).norm_squared();
        }
    }
    if !converged {
        return Err(Error::SvdFailed);
    }

    let mut order: Vec<usize> = (0..cols).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = DMatrix::<f64>::zeros(rows, cols);
    let mut s = Vec::with_capacity(cols);
    let mut v_sorted = DMatrix::<f64>::zeros(cols, cols);
    for (k, &j) in order.iter().enumerate() {
        let sigma = norms[j].max(0.0).sqrt();
        s.push(sigma);
        if sigma > 0.0 {
            let scaled = b.column(j) / sigma;
            u.set_column(k, &scaled);
        }
        v_sorted.set_column(k, &v.column(j));
    }
    if wide {
        Ok(ThinSvd { u: v_sorted, s, v: u })
    } else {
        Ok(ThinSvd {
            u,
            s,
            v: v_sorted,
        })
    }
}

/// Moore-Penrose pseudoinverse via truncated SVD.
///
/// `tol` is a relative cutoff: singular values at or below
/// `tol * sigma_max` are treated as zero.  When `None`, the cutoff defaults
/// to `max(rows, cols) * machine_epsilon`, which discards only
/// rounding-level directions.
pub fn pseudoinverse(m: &DMatrix<f64>, tol: Option<f64>) -> Result<PseudoinverseResult> {
    validate_matrix(m, "matrix")?;
    if let Some(t) = tol {
        if !(t.is_finite() && t >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "svd tolerance must be non-negative and finite, got {t}"
            )));
        }
    }
    let (rows, cols) = m.shape();
    let svd = jacobi_svd(m)?;
    let sigma_max = svd.s.first().copied().unwrap_or(0.0);
    let rel = tol.unwrap_or(rows.max(cols) as f64 * f64::EPSILON);
    let cutoff = rel * sigma_max;

    // pinv = V * diag(1/s, kept only) * U^T, assembled as V times a
    // row-scaled U^T.
    let mut scaled_ut = svd.u.transpose();
    let mut rank = 0;
    for k in 0..svd.s.len() {
        let keep = svd.s[k] > cutoff;
        let f = if keep { 1.0 / svd.s[k] } else { 0.0 };
        if keep {
            rank += 1;
        }
        for x in scaled_ut.row_mut(k).iter_mut() {
            *x *= f;
        }
    }
    Ok(PseudoinverseResult {
        matrix: &svd.v * scaled_ut,
        effective_rank: rank,
        tolerance_used: cutoff,
    })
}

/// Ridge solution `W = V diag(s / (s^2 + lambda)) U^T Y`.
///
/// Spectral filtering instead of truncation: every direction is kept but
/// shrunk, so no rank decision is needed.
fn ridge_solve(h: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    let svd = jacobi_svd(h)?;
    let mut scaled_ut_y = svd.u.transpose() * y;
    for k in 0..svd.s.len() {
        let f = svd.s[k] / (svd.s[k] * svd.s[k] + lambda);
        for x in scaled_ut_y.row_mut(k).iter_mut() {
            *x *= f;
        }
    }
    Ok(&svd.v * scaled_ut_y)
}

/// Knobs for [`train_with_options`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainOptions {
    /// Also quantize the trained weights onto ladders of this width.
    pub quant_bits: Option<u8>,
    /// Relative SVD cutoff override; `None` uses the default.
    pub svd_tol: Option<f64>,
    /// Ridge strength; `None` or zero trains by plain pseudoinverse.
    pub ridge: Option<f64>,
    /// Identity tolerance used for the encoding-capacity count.
    pub capacity_tol: f64,
}

impl Default for TrainOptions {
    fn default() -> Self {
        Self {
            quant_bits: None,
            svd_tol: None,
            ridge: None,
            capacity_tol: 1e-6,
        }
    }
}

/// Outcome of one readout training run.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Ideal readout weights, hidden-by-output.
    pub weights: DMatrix<f64>,
    /// Hardware realization of `weights`, one column per output, when
    /// quantization was requested.
    pub quantized: Option<Vec<QuantizedWeightVector>>,
    /// Fit error of the ideal weights on the training set.
    pub train_rmse: f64,
    pub train_nrmse: f64,
    /// Fit error of the quantized weights, when present.
    pub quantized_train_rmse: Option<f64>,
    pub quantized_train_nrmse: Option<f64>,
    /// How many training samples the population encodes exactly.
    pub capacity: usize,
    /// Whether every training sample is encoded.
    pub capacity_full: bool,
}

/// Trains the readout by pseudoinverse, optionally quantizing the result.
pub fn train(
    h: &HiddenMatrix,
    targets: &DMatrix<f64>,
    quant_bits: Option<u8>,
) -> Result<TrainReport> {
    train_with_options(
        h,
        targets,
        &TrainOptions {
            quant_bits,
            ..TrainOptions::default()
        },
    )
}

/// Trains the readout with explicit solver options.
pub fn train_with_options(
    h: &HiddenMatrix,
    targets: &DMatrix<f64>,
    opts: &TrainOptions,
) -> Result<TrainReport> {
    validate_matrix(targets, "target matrix")?;
    if targets.nrows() != h.samples() {
        return Err(Error::DimensionMismatch(format!(
            "hidden matrix has {} samples but targets have {} rows",
            h.samples(),
            targets.nrows()
        )));
    }
    if let Some(lambda) = opts.ridge {
        if !(lambda.is_finite() && lambda >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "ridge strength must be non-negative and finite, got {lambda}"
            )));
        }
    }
    if !(opts.capacity_tol.is_finite() && opts.capacity_tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "capacity tolerance must be positive and finite, got {}",
            opts.capacity_tol
        )));
    }

    let weights = match opts.ridge {
        Some(lambda) if lambda > 0.0 => ridge_solve(h.matrix(), targets, lambda)?,
        _ => pseudoinverse(h.matrix(), opts.svd_tol)?.matrix * targets,
    };

    let fitted = h.matrix() * &weights;
    let train_rmse = rmse(&fitted, targets)?;
    let train_nrmse = nrmse(&fitted, targets)?;

    let (quantized, quantized_train_rmse, quantized_train_nrmse) =
        if let Some(bits) = opts.quant_bits {
            let cols = (0..weights.ncols())
                .map(|j| {
                    let col: Vec<f64> = weights.column(j).iter().copied().collect();
                    QuantizedWeightVector::from_real(&col, bits)
                })
                .collect::<Result<Vec<_>>>()?;
            let mut wq = DMatrix::zeros(weights.nrows(), weights.ncols());
            for (j, qv) in cols.iter().enumerate() {
                for i in 0..weights.nrows() {
                    wq[(i, j)] = qv.value(i);
                }
            }
            let fitted_q = h.matrix() * wq;
            (
                Some(cols),
                Some(rmse(&fitted_q, targets)?),
                Some(nrmse(&fitted_q, targets)?),
            )
        } else {
            (None, None, None)
        };

    let cap = encoding_capacity(h, opts.capacity_tol)?;
    Ok(TrainReport {
        weights,
        quantized,
        train_rmse,
        train_nrmse,
        quantized_train_rmse,
        quantized_train_nrmse,
        capacity: cap.capacity,
        capacity_full: cap.full,
    })
}

/// How many sample points a population can reproduce exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct EncodingCapacity {
    /// Rows of `H * pinv(H)` that match the identity within tolerance.
    pub capacity: usize,
    /// True when every sample row is matched.
    pub full: bool,
}

/// Counts the training points the hidden layer encodes exactly: rows of the
/// projector `H * pinv(H)` that equal the corresponding identity row within
/// `tol` (max-abs).  A full-row-rank `H` encodes every sample; collapsing
/// the population's diversity collapses this count.
pub fn encoding_capacity(h: &HiddenMatrix, tol: f64) -> Result<EncodingCapacity> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::InvalidParameter(format!(
            "capacity tolerance must be positive and finite, got {tol}"
        )));
    }
    let pinv = pseudoinverse(h.matrix(), None)?;
    let projector = h.matrix() * pinv.matrix;
    let c = h.samples();
    let mut capacity = 0;
    for r in 0..c {
        let mut worst = 0.0_f64;
        for j in 0..c {
            let target = if r == j { 1.0 } else { 0.0 };
            worst = worst.max((projector[(r, j)] - target).abs());
        }
        if worst <= tol {
            capacity += 1;
        }
    }
    Ok(EncodingCapacity {
        capacity,
        full: capacity == c,
    })
}

/// Spectral health of a hidden matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConditionDiagnostics {
    /// Singular values above the default cutoff.
    pub rank: usize,
    /// `sigma_max / sigma_min`; infinite when the smallest singular value
    /// is exactly zero.
    pub condition_number: f64,
    /// Smallest of the `min(rows, cols)` singular values.
    pub min_singular_value: f64,
}

pub fn condition_diagnostics(h: &HiddenMatrix) -> Result<ConditionDiagnostics> {
    let m = h.matrix();
    validate_matrix(m, "hidden matrix")?;
    let sv = jacobi_svd(m)?.s;
    let sigma_max = sv.first().copied().unwrap_or(0.0);
    let sigma_min = sv.last().copied().unwrap_or(0.0);
    let cutoff = m.nrows().max(m.ncols()) as f64 * f64::EPSILON * sigma_max;
    let rank = sv.iter().filter(|&&s| s > cutoff).count();
    let condition_number = if sigma_min > 0.0 {
        sigma_max / sigma_min
    } else {
        f64::INFINITY
    };
    Ok(ConditionDiagnostics {
        rank,
        condition_number,
        min_singular_value: sigma_min,
    })
}

/// Root-mean-square error between a prediction and a target of equal shape.
pub fn rmse(pred: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<f64> {
    if pred.shape() != target.shape() {
        return Err(Error::DimensionMismatch(format!(
            "prediction is {:?} but target is {:?}",
            pred.shape(),
            target.shape()
        )));
    }
    if pred.is_empty() {
        return Err(Error::InvalidParameter(
            "cannot compute rmse of empty matrices".into(),
        ));
    }
    let n = (pred.nrows() * pred.ncols()) as f64;
    let ss: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok((ss / n).sqrt())
}

/// RMSE normalized by the population standard deviation of the target.
///
/// A constant target has no scale: the error is reported as 0 for an exact
/// fit and infinity otherwise.
pub fn nrmse(pred: &DMatrix<f64>, target: &DMatrix<f64>) -> Result<f64> {
    let r = rmse(pred, target)?;
    let n = (target.nrows() * target.ncols()) as f64;
    let mean: f64 = target.iter().sum::<f64>() / n;
    let var: f64 = target.iter().map(|y| (y - mean) * (y - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if std == 0.0 {
        return Ok(if r == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(r / std)
}
