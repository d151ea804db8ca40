//! Command-line experiment harness.
//!
//! Four subcommands map onto the experiment drivers: `regress`, `hetero`,
//! `bits` and `mc`.  Settings resolve in three layers: built-in defaults,
//! then an optional `--config` JSON file, then individual flags.
//! `TAB_SIM_THREADS` caps the worker pool; results do not depend on it.

use std::env;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};

use tab_sim::experiments::{
    bitdepth_sweep, heterogeneity_study, load_config, mismatch_mc, run_regression,
    ExperimentConfig, Overrides, TaskKind,
};
use tab_sim::Result;

#[derive(Parser)]
#[command(
    name = "tab-sim",
    version,
    about = "Behavioral simulator for a trainable analogue block",
    propagate_version = true
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train the readout on one task and write the fitted curve
    Regress(CommonArgs),
    /// Compare homogeneous, mismatch-only and spread populations
    Hetero(CommonArgs),
    /// Sweep the output-weight resolution on one trained readout
    Bits(BitsArgs),
    /// Monte Carlo over independently mismatched chips
    Mc(McArgs),
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum TaskArg {
    Sin,
    Cube,
    Sinc,
}

impl From<TaskArg> for TaskKind {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Sin => TaskKind::Sin,
            TaskArg::Cube => TaskKind::Cube,
            TaskArg::Sinc => TaskKind::Sinc,
        }
    }
}

#[derive(Args)]
struct CommonArgs {
    /// Benchmark target to fit
    #[arg(long, value_enum)]
    task: Option<TaskArg>,

    /// Hidden population size L
    #[arg(long)]
    neurons: Option<usize>,

    /// Splitter width for hardware weights, in bits
    #[arg(long)]
    bits: Option<u8>,

    /// Population seed
    #[arg(long)]
    seed: Option<u64>,

    /// JSON config file; explicit flags override its fields
    #[arg(long)]
    config: Option<PathBuf>,

    /// Output directory for CSV and JSON artifacts
    #[arg(long)]
    out: Option<PathBuf>,

    /// Input-referred offset mismatch sigma, in volts
    #[arg(long)]
    sigma_vos: Option<f64>,

    /// Reference-voltage span as `lo,hi` in volts
    #[arg(long, value_parser = parse_span, value_name = "LO,HI")]
    offset_span: Option<(f64, f64)>,
}

#[derive(Args)]
struct BitsArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Comma-separated splitter widths to sweep
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "1,2,4,6,8,11,13,16,20,24"
    )]
    bits_list: Vec<u8>,
}

#[derive(Args)]
struct McArgs {
    #[command(flatten)]
    common: CommonArgs,

    /// Number of independently mismatched chips to simulate
    #[arg(long, default_value_t = 50)]
    chips: usize,
}

fn parse_span(s: &str) -> std::result::Result<(f64, f64), String> {
    let (lo, hi) = s
        .split_once(',')
        .ok_or_else(|| format!("expected `lo,hi`, got {s:?}"))?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("invalid span endpoint {lo:?}"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("invalid span endpoint {hi:?}"))?;
    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
        return Err(format!("span must satisfy lo < hi, got {lo},{hi}"));
    }
    Ok((lo, hi))
}

/// Defaults, then config file, then flags.
fn resolve(common: &CommonArgs) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => load_config(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.apply(&Overrides {
        task: common.task.map(Into::into),
        neurons: common.neurons,
        quant_bits: common.bits,
        seed: common.seed,
        output_dir: common.out.clone(),
        sigma_vos: common.sigma_vos,
        offset_span: common.offset_span,
    });
    cfg.validate()?;
    Ok(cfg)
}

fn init_threads() {
    let Ok(value) = env::var("TAB_SIM_THREADS") else {
        return;
    };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            // Ignore "already initialized": tests may race to set this up.
            let _ = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build_global();
        }
        _ => eprintln!("warning: ignoring invalid TAB_SIM_THREADS value {value:?}"),
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Regress(args) => {
            let cfg = resolve(&args)?;
            let report = run_regression(&cfg)?;
            println!(
                "regress: task={:?} L={} seed={}",
                cfg.task.name, cfg.neurons, cfg.seed
            );
            println!("  train_nrmse = {}", report.train_nrmse);
            println!("  test_nrmse  = {}", report.test_nrmse);
            if let Some(q) = report.quantized_test_nrmse {
                println!("  quantized_test_nrmse = {q}");
            }
            println!(
                "  rank = {}, capacity = {}/{}",
                report.rank, report.capacity, cfg.task.n_train
            );
            println!("  report: {}", cfg.output_dir.join("report.json").display());
        }
        Command::Hetero(args) => {
            let cfg = resolve(&args)?;
            let report = heterogeneity_study(&cfg)?;
            println!(
                "hetero: task={:?} L={} seed={}",
                cfg.task.name, cfg.neurons, cfg.seed
            );
            for arm in &report.arms {
                println!(
                    "  {:<14} rank = {:>3}, capacity = {:>3}, test_nrmse = {}",
                    arm.name, arm.rank, arm.capacity, arm.test_nrmse
                );
            }
            println!("  affine baseline test_nrmse = {}", report.baseline_test_nrmse);
            println!(
                "  report: {}",
                cfg.output_dir.join("hetero_report.json").display()
            );
        }
        Command::Bits(args) => {
            let cfg = resolve(&args.common)?;
            let report = bitdepth_sweep(&cfg, &args.bits_list)?;
            println!(
                "bits: task={:?} L={} seed={}",
                cfg.task.name, cfg.neurons, cfg.seed
            );
            for p in &report.points {
                println!("  N = {:>2}: test_nrmse = {}", p.bits, p.test_nrmse);
            }
            println!("  ideal weights: test_nrmse = {}", report.real_test_nrmse);
            println!(
                "  report: {}",
                cfg.output_dir.join("bits_report.json").display()
            );
        }
        Command::Mc(args) => {
            let cfg = resolve(&args.common)?;
            let started = Instant::now();
            let report = mismatch_mc(&cfg, args.chips)?;
            // Timing stays on stdout; the files must be byte-stable.
            println!(
                "mc: task={:?} L={} chips={} in {:.2} s",
                cfg.task.name,
                cfg.neurons,
                args.chips,
                started.elapsed().as_secs_f64()
            );
            println!("  test_nrmse mean   = {}", report.test_nrmse_mean);
            println!("  test_nrmse median = {}", report.test_nrmse_median);
            println!("  test_nrmse p95    = {}", report.test_nrmse_p95);
            println!(
                "  capacity min/mean/max = {}/{}/{}",
                report.capacity_min, report.capacity_mean, report.capacity_max
            );
            println!(
                "  report: {}",
                cfg.output_dir.join("mc_report.json").display()
            );
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_threads();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}
