//! Experiment drivers: regression, heterogeneity study, resolution sweep
//! and mismatch Monte Carlo.
//!
//! Every driver is deterministic in its config: populations are sampled
//! from the config seed, Monte Carlo chips use `seed + chip_index`, and
//! parallel results are collected in chip order.  Compute happens first and
//! files are written at the end, so a failed run leaves no partial
//! artifacts beyond what was already on disk.

use std::fmt::Write as _;
use std::time::Instant;

use nalgebra::DMatrix;
use rayon::prelude::*;

use crate::device::{self, NeuronParams, OffsetScheme, PhysicalConstants};
use crate::error::{Error, Result};
use crate::experiments::config::{ExperimentConfig, TaskSpec};
use crate::experiments::report::{
    finite_or_none, write_json, write_text, BitdepthPoint, BitdepthReport, ChipResult,
    HeterogeneityArm, HeterogeneityReport, MonteCarloReport, RegressionReport,
};
use crate::learning::{self, TrainOptions};
use crate::network::{HiddenMatrix, InputMap, TabNetwork};
use crate::splitter::QuantizedWeightVector;

/// Device every experiment population is sampled around.
pub const NOMINAL_NEURON: NeuronParams = NeuronParams {
    bias_current: 1e-9,
    slope_factor: 1.3,
    v_ref: 0.6,
    input_offset: 0.0,
    mirror_gain: 1.0,
};

fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    debug_assert!(n >= 2);
    let step = (hi - lo) / (n - 1) as f64;
    let mut out: Vec<f64> = (0..n).map(|i| lo + i as f64 * step).collect();
    out[n - 1] = hi;
    out
}

/// Training and test grids for a task.
///
/// The training grid spans the domain inclusively.  When `n_test` is one
/// less than `n_train` the test points are the midpoints between
/// neighbouring training points — maximally far from anything seen in
/// training; otherwise the test grid is shrunk half a training step inward
/// so the two grids still never share a point.
pub fn train_test_grids(task: &TaskSpec) -> Result<(Vec<f64>, Vec<f64>)> {
    task.validate()?;
    let [lo, hi] = task.domain;
    let train = linspace(lo, hi, task.n_train);
    let test = if task.n_test + 1 == task.n_train {
        train.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    } else {
        let half = 0.5 * (hi - lo) / (task.n_train - 1) as f64;
        linspace(lo + half, hi - half, task.n_test)
    };
    Ok((train, test))
}

/// Samples the configured population and assembles the network around it.
pub fn build_network(cfg: &ExperimentConfig) -> Result<TabNetwork> {
    cfg.validate()?;
    let population = device::sample_population(
        cfg.neurons,
        &cfg.mismatch,
        &cfg.offsets,
        &NOMINAL_NEURON,
        cfg.seed,
    )?;
    TabNetwork::new(
        population,
        PhysicalConstants::default(),
        InputMap::default(),
        NOMINAL_NEURON.bias_current,
    )
}

/// Everything a single train-and-test run produces, before any file I/O.
struct Evaluation {
    train_rmse: f64,
    train_nrmse: f64,
    test_rmse: f64,
    test_nrmse: f64,
    quantized_test_nrmse: Option<f64>,
    capacity: usize,
    capacity_full: bool,
    rank: usize,
    condition_number: f64,
    max_abs_weight: f64,
    /// `(x, target, prediction)` on the test grid, ideal weights.
    test_points: Vec<(f64, f64, f64)>,
}

fn realize_columns(cols: &[QuantizedWeightVector]) -> DMatrix<f64> {
    let rows = cols.first().map_or(0, QuantizedWeightVector::len);
    let mut m = DMatrix::zeros(rows, cols.len());
    for (j, col) in cols.iter().enumerate() {
        for i in 0..rows {
            m[(i, j)] = col.value(i);
        }
    }
    m
}

fn column_matrix(values: Vec<f64>) -> DMatrix<f64> {
    let n = values.len();
    DMatrix::from_vec(n, 1, values)
}

fn evaluate(cfg: &ExperimentConfig) -> Result<Evaluation> {
    let (train_x, test_x) = train_test_grids(&cfg.task)?;
    let y_train = column_matrix(cfg.task.targets(&train_x)?);
    let y_test = column_matrix(cfg.task.targets(&test_x)?);

    let net = build_network(cfg)?;
    let h_train = net.hidden_matrix(&train_x)?;
    let h_test = net.hidden_matrix(&test_x)?;

    let report = learning::train_with_options(
        &h_train,
        &y_train,
        &TrainOptions {
            quant_bits: cfg.quant_bits,
            ridge: cfg.ridge,
            ..TrainOptions::default()
        },
    )?;
    let diag = learning::condition_diagnostics(&h_train)?;

    let pred_test = h_test.matrix() * &report.weights;
    let quantized_test_nrmse = match &report.quantized {
        Some(cols) => {
            let pred_q = h_test.matrix() * realize_columns(cols);
            Some(learning::nrmse(&pred_q, &y_test)?)
        }
        None => None,
    };

    let test_points = test_x
        .iter()
        .enumerate()
        .map(|(i, &x)| (x, y_test[(i, 0)], pred_test[(i, 0)]))
        .collect();

    Ok(Evaluation {
        train_rmse: report.train_rmse,
        train_nrmse: report.train_nrmse,
        test_rmse: learning::rmse(&pred_test, &y_test)?,
        test_nrmse: learning::nrmse(&pred_test, &y_test)?,
        quantized_test_nrmse,
        capacity: report.capacity,
        capacity_full: report.capacity_full,
        rank: diag.rank,
        condition_number: diag.condition_number,
        max_abs_weight: report.weights.abs().max(),
        test_points,
    })
}

/// Trains on the configured task and writes `curve.csv` plus `report.json`
/// under `config.output_dir`.
pub fn run_regression(cfg: &ExperimentConfig) -> Result<RegressionReport> {
    let started = Instant::now();
    let eval = evaluate(cfg)?;

    let mut csv = String::from("x,y_target,y_hat\n");
    for (x, y, p) in &eval.test_points {
        writeln!(csv, "{x},{y},{p}").expect("writing to a String cannot fail");
    }
    let curve_path = cfg.output_dir.join("curve.csv");
    write_text(&curve_path, &csv)?;

    let report = RegressionReport {
        config: cfg.clone(),
        train_rmse: eval.train_rmse,
        train_nrmse: eval.train_nrmse,
        test_rmse: eval.test_rmse,
        test_nrmse: eval.test_nrmse,
        quantized_test_nrmse: eval.quantized_test_nrmse,
        capacity: eval.capacity,
        capacity_full: eval.capacity_full,
        rank: eval.rank,
        condition_number: finite_or_none(eval.condition_number),
        max_abs_weight: eval.max_abs_weight,
        csv_files: vec![curve_path],
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&cfg.output_dir.join("report.json"), &report)?;
    Ok(report)
}

/// Centre of the configured reference-voltage spread.
fn offset_midpoint(offsets: &OffsetScheme) -> f64 {
    match offsets {
        OffsetScheme::UniformSpan { v_min, v_max } => 0.5 * (v_min + v_max),
        OffsetScheme::ExplicitList { values } => {
            values.iter().sum::<f64>() / values.len() as f64
        }
        OffsetScheme::Constant { v } => *v,
    }
}

/// Ceiling for any homogeneous population: the best affine readout
/// `a + b * sigma(x)` of one nominal sigmoid centred at `v_mid`.
fn homogeneous_baseline(cfg: &ExperimentConfig, v_mid: f64) -> Result<f64> {
    let (train_x, test_x) = train_test_grids(&cfg.task)?;
    let y_train = column_matrix(cfg.task.targets(&train_x)?);
    let y_test = column_matrix(cfg.task.targets(&test_x)?);

    let neuron = NeuronParams {
        v_ref: v_mid,
        ..NOMINAL_NEURON
    };
    let net = TabNetwork::new(
        vec![neuron],
        PhysicalConstants::default(),
        InputMap::default(),
        NOMINAL_NEURON.bias_current,
    )?;
    let with_ones = |xs: &[f64]| -> Result<HiddenMatrix> {
        let sig = net.hidden_matrix(xs)?;
        let mut m = DMatrix::from_element(xs.len(), 2, 1.0);
        m.set_column(1, &sig.matrix().column(0));
        HiddenMatrix::from_matrix(m)
    };
    let h_train = with_ones(&train_x)?;
    let h_test = with_ones(&test_x)?;
    let fit = learning::train(&h_train, &y_train, None)?;
    let pred = h_test.matrix() * &fit.weights;
    learning::nrmse(&pred, &y_test)
}

/// Compares three population variants on the configured task:
/// all-identical devices, identical references with device mismatch only,
/// and the configured reference spread with mismatch.  Writes `arms.csv`
/// and `hetero_report.json`.
pub fn heterogeneity_study(cfg: &ExperimentConfig) -> Result<HeterogeneityReport> {
    let started = Instant::now();
    cfg.validate()?;
    let v_mid = offset_midpoint(&cfg.offsets);

    let variants: [(&str, OffsetScheme, crate::device::MismatchSpec); 3] = [
        (
            "homogeneous",
            OffsetScheme::Constant { v: v_mid },
            crate::device::MismatchSpec::zero(),
        ),
        (
            "mismatch_only",
            OffsetScheme::Constant { v: v_mid },
            cfg.mismatch,
        ),
        ("offset_span", cfg.offsets.clone(), cfg.mismatch),
    ];

    let mut arms = Vec::with_capacity(variants.len());
    for (name, offsets, mismatch) in variants {
        let mut arm_cfg = cfg.clone();
        arm_cfg.offsets = offsets;
        arm_cfg.mismatch = mismatch;
        let eval = evaluate(&arm_cfg)?;
        arms.push(HeterogeneityArm {
            name: name.to_string(),
            rank: eval.rank,
            capacity: eval.capacity,
            condition_number: finite_or_none(eval.condition_number),
            train_nrmse: eval.train_nrmse,
            test_nrmse: eval.test_nrmse,
        });
    }
    let baseline_test_nrmse = homogeneous_baseline(cfg, v_mid)?;

    let mut csv = String::from("arm,rank,capacity,train_nrmse,test_nrmse\n");
    for arm in &arms {
        writeln!(
            csv,
            "{},{},{},{},{}",
            arm.name, arm.rank, arm.capacity, arm.train_nrmse, arm.test_nrmse
        )
        .expect("writing to a String cannot fail");
    }
    let csv_path = cfg.output_dir.join("arms.csv");
    write_text(&csv_path, &csv)?;

    let report = HeterogeneityReport {
        config: cfg.clone(),
        arms,
        baseline_test_nrmse,
        csv_files: vec![csv_path],
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&cfg.output_dir.join("hetero_report.json"), &report)?;
    Ok(report)
}

/// Trains once with ideal weights, then replays the readout through
/// splitters of each requested width.  Writes `bits.csv` and
/// `bits_report.json`.
pub fn bitdepth_sweep(cfg: &ExperimentConfig, bits_list: &[u8]) -> Result<BitdepthReport> {
    let started = Instant::now();
    cfg.validate()?;
    if bits_list.is_empty() {
        return Err(Error::InvalidConfig(
            "bit-depth sweep needs at least one width".into(),
        ));
    }

    let (train_x, test_x) = train_test_grids(&cfg.task)?;
    let y_train = column_matrix(cfg.task.targets(&train_x)?);
    let y_test = column_matrix(cfg.task.targets(&test_x)?);
    let net = build_network(cfg)?;
    let h_train = net.hidden_matrix(&train_x)?;
    let h_test = net.hidden_matrix(&test_x)?;
    let fit = learning::train_with_options(
        &h_train,
        &y_train,
        &TrainOptions {
            ridge: cfg.ridge,
            ..TrainOptions::default()
        },
    )?;
    let pred_real = h_test.matrix() * &fit.weights;
    let real_test_nrmse = learning::nrmse(&pred_real, &y_test)?;

    let ideal_column: Vec<f64> = fit.weights.column(0).iter().copied().collect();
    let mut points = Vec::with_capacity(bits_list.len());
    for &bits in bits_list {
        let qv = QuantizedWeightVector::from_real(&ideal_column, bits)?;
        let pred = h_test.matrix() * column_matrix(qv.to_vec());
        points.push(BitdepthPoint {
            bits,
            test_nrmse: learning::nrmse(&pred, &y_test)?,
        });
    }

    let mut csv = String::from("bits,test_nrmse\n");
    for p in &points {
        writeln!(csv, "{},{}", p.bits, p.test_nrmse)
            .expect("writing to a String cannot fail");
    }
    let csv_path = cfg.output_dir.join("bits.csv");
    write_text(&csv_path, &csv)?;

    let report = BitdepthReport {
        config: cfg.clone(),
        real_test_nrmse,
        points,
        csv_files: vec![csv_path],
        wall_clock_seconds: started.elapsed().as_secs_f64(),
    };
    write_json(&cfg.output_dir.join("bits_report.json"), &report)?;
    Ok(report)
}

/// Linear-interpolation percentile of an ascending-sorted slice.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    debug_assert!(!sorted.is_empty() && (0.0..=1.0).contains(&q));
    if sorted.len() == 1 {
        return sorted[0];
    }
    let r = q * (sorted.len() - 1) as f64;
    let lo = r.floor() as usize;
    let hi = r.ceil() as usize;
    if lo == hi {
        sorted[lo]
    } else {
        sorted[lo] + (r - lo as f64) * (sorted[hi] - sorted[lo])
    }
}

/// Simulates `n_chips` independently mismatched chips (chip `i` uses seed
/// `config.seed + i`), each trained and tested on the configured task.
/// Writes `chips.csv` and `mc_report.json`; both are byte-stable across
/// reruns and thread counts.
pub fn mismatch_mc(cfg: &ExperimentConfig, n_chips: usize) -> Result<MonteCarloReport> {
    cfg.validate()?;
    if n_chips == 0 {
        return Err(Error::InvalidConfig(
            "monte carlo needs at least one chip".into(),
        ));
    }

    let chips: Vec<ChipResult> = (0..n_chips)
        .into_par_iter()
        .map(|i| {
            let mut chip_cfg = cfg.clone();
            chip_cfg.seed = cfg.seed.wrapping_add(i as u64);
            let eval = evaluate(&chip_cfg)?;
            Ok(ChipResult {
                chip: i,
                seed: chip_cfg.seed,
                train_nrmse: eval.train_nrmse,
                test_nrmse: eval.test_nrmse,
                quantized_test_nrmse: eval.quantized_test_nrmse,
                rank: eval.rank,
                capacity: eval.capacity,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut errors: Vec<f64> = chips.iter().map(|c| c.test_nrmse).collect();
    errors.sort_by(f64::total_cmp);
    let mean = errors.iter().sum::<f64>() / errors.len() as f64;
    let capacity_min = chips.iter().map(|c| c.capacity).min().unwrap_or(0);
    let capacity_max = chips.iter().map(|c| c.capacity).max().unwrap_or(0);
    let capacity_mean =
        chips.iter().map(|c| c.capacity as f64).sum::<f64>() / chips.len() as f64;

    let with_quant = cfg.quant_bits.is_some();
    let mut csv = String::from(if with_quant {
        "chip,seed,train_nrmse,test_nrmse,quantized_test_nrmse,rank,capacity\n"
    } else {
        "chip,seed,train_nrmse,test_nrmse,rank,capacity\n"
    });
    for c in &chips {
        if with_quant {
            writeln!(
                csv,
                "{},{},{},{},{},{},{}",
                c.chip,
                c.seed,
                c.train_nrmse,
                c.test_nrmse,
                c.quantized_test_nrmse.unwrap_or(f64::NAN),
                c.rank,
                c.capacity
            )
        } else {
            writeln!(
                csv,
                "{},{},{},{},{},{}",
                c.chip, c.seed, c.train_nrmse, c.test_nrmse, c.rank, c.capacity
            )
        }
        .expect("writing to a String cannot fail");
    }
    let csv_path = cfg.output_dir.join("chips.csv");
    write_text(&csv_path, &csv)?;

    let report = MonteCarloReport {
        config: cfg.clone(),
        n_chips,
        test_nrmse_mean: mean,
        test_nrmse_median: percentile(&errors, 0.5),
        test_nrmse_p95: percentile(&errors, 0.95),
        capacity_min,
        capacity_max,
        capacity_mean,
        csv_files: vec![csv_path],
    };
    write_json(&cfg.output_dir.join("mc_report.json"), &report)?;
    Ok(report)
}
