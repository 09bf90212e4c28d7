//! Subcommands of the `bfly` binary and the checks behind them.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{generate_toy_dataset, load_dataset, read_manifest, read_wav, toy_dataset, write_wav, AudioClip};
use crate::butterfly::{
    build_butterfly_stack, dense_parameter_count, naive_dft, ButterflyStack, DenseMatrix, SplitComplex,
};
use crate::config::{load_config, RunConfig};
use crate::error::{Error, Result};
use crate::metrics::write_metrics_csv;
use crate::pipeline::{EnhancementModel, MaskMode};
use crate::training::{evaluate_dataset, load_checkpoint, save_checkpoint, train_model, write_loss_curve, ClipEval};

/// Tolerance for the oracle and roundtrip checks.
pub const ORACLE_TOLERANCE: f64 = 1e-10;
/// Relative tolerance for Parseval's identity.
pub const PARSEVAL_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Parser)]
#[command(name = "bfly", version, about = "Trainable butterfly-FFT STFT toolkit")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Check the butterfly factorization against a direct DFT.
    Verify {
        /// Transform size (power of two).
        #[arg(long, default_value_t = 256)]
        n: usize,
        /// Check every power of two from 2 to 1024.
        #[arg(long)]
        all: bool,
        /// Random inputs per size.
        #[arg(long, default_value_t = 100)]
        trials: usize,
        /// Add this offset to one twiddle before checking.
        #[arg(long)]
        perturb: Option<f64>,
    },
    /// Time butterfly apply against a dense matrix-vector product.
    Bench {
        #[arg(long, default_value_t = 512)]
        n: usize,
        #[arg(long, default_value_t = 100)]
        iters: usize,
    },
    /// Write the synthetic toy corpus and its manifest.
    GenData {
        #[arg(long)]
        dir: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 20)]
        count: usize,
    },
    /// Train a model from a config file.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's checkpoint path.
        #[arg(long)]
        checkpoint: Option<PathBuf>,
        /// Overrides the config's loss curve path.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
        /// Overrides the config's step count.
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Enhance one WAV file.
    Enhance {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Hop size; defaults to half the transform size.
        #[arg(long)]
        hop: Option<usize>,
        /// Replace the network's masks with this constant.
        #[arg(long)]
        mask: Option<f64>,
    },
    /// Per-clip SSNR and loss for one or more checkpoints.
    Evaluate {
        #[arg(long, required = true)]
        checkpoint: Vec<PathBuf>,
        #[arg(long)]
        manifest: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        hop: Option<usize>,
    },
}

/// Result of checking one transform size.
#[derive(Debug, Clone, PartialEq)]
pub struct VerifyReport {
    pub n: usize,
    pub oracle_error: f64,
    pub roundtrip_error: f64,
    pub parseval_error: f64,
    pub sparsity_ok: bool,
}

impl VerifyReport {
    /// Names of the checks that failed.
    pub fn failures(&self) -> Vec<&'static str> {
        let mut out = Vec::new();
        if !(self.oracle_error <= ORACLE_TOLERANCE) {
            out.push("oracle");
        }
        if !(self.roundtrip_error <= ORACLE_TOLERANCE) {
            out.push("roundtrip");
        }
        if !(self.parseval_error <= PARSEVAL_TOLERANCE) {
            out.push("parseval");
        }
        if !self.sparsity_ok {
            out.push("sparsity");
        }
        out
    }
}

fn sparsity_holds(stack: &ButterflyStack) -> bool {
    let n = stack.n();
    stack.factors.iter().all(|f| {
        let mut rows = vec![0usize; n];
        let mut cols = vec![0usize; n];
        for (r, c, _) in f.entries() {
            rows[r] += 1;
            cols[c] += 1;
        }
        f.entry_count() == 2 * n && rows.iter().chain(&cols).all(|&k| k == 2)
    })
}

/// Oracle, inverse, Parseval and sparsity checks on `trials` seeded random
/// inputs. `perturb` shifts the real part of one twiddle of the last stage.
pub fn verify_size(n: usize, trials: usize, seed: u64, perturb: Option<f64>) -> Result<VerifyReport> {
    let mut stack = build_butterfly_stack(n)?;
    if let Some(eps) = perturb {
        let last = stack.factors.last_mut().expect("at least one stage");
        let slot = last.values.len() - 1;
        last.values.re[slot] += eps;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ n as u64);
    let mut report = VerifyReport {
        n,
        oracle_error: 0.0,
        roundtrip_error: 0.0,
        parseval_error: 0.0,
        sparsity_ok: sparsity_holds(&stack),
    };
    for _ in 0..trials {
        let x = SplitComplex::new(
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
            (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        )?;
        let y = stack.apply_forward(&x)?;
        report.oracle_error = report.oracle_error.max(y.max_abs_diff(&naive_dft(&x)));
        report.roundtrip_error = report.roundtrip_error.max(stack.apply_inverse(&y)?.max_abs_diff(&x));
        let expected = n as f64 * x.energy();
        report.parseval_error = report.parseval_error.max((y.energy() - expected).abs() / expected);
    }
    Ok(report)
}

/// Sizes and timings for one transform size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub n: usize,
    pub butterfly_params: usize,
    pub dense_params: usize,
    pub butterfly_macs: u64,
    pub dense_macs: u64,
    pub butterfly_secs: f64,
    pub dense_secs: f64,
}

impl BenchRow {
    pub const CSV_HEADER: &'static str =
        "n,butterfly_params,dense_params,butterfly_macs,dense_macs,butterfly_secs,dense_secs,speedup";

    pub fn csv(&self) -> String {
        format!(
            "{},{},{},{},{},{:.6e},{:.6e},{:.2}",
            self.n,
            self.butterfly_params,
            self.dense_params,
            self.butterfly_macs,
            self.dense_macs,
            self.butterfly_secs,
            self.dense_secs,
            self.dense_secs / self.butterfly_secs
        )
    }
}

pub fn bench_size(n: usize, iters: usize) -> Result<BenchRow> {
    let stack = build_butterfly_stack(n)?;
    let dense = DenseMatrix::dft(n);
    let mut rng = ChaCha8Rng::seed_from_u64(n as u64);
    let x = SplitComplex::new(
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect(),
    )?;
    let iters = iters.max(1);
    let mut butterfly_macs = 0;
    let t = Instant::now();
    for _ in 0..iters {
        let (y, macs) = stack.apply_forward_counted(std::hint::black_box(&x))?;
        std::hint::black_box(y);
        butterfly_macs = macs;
    }
    let butterfly_secs = t.elapsed().as_secs_f64() / iters as f64;
    let mut dense_macs = 0;
    let t = Instant::now();
    for _ in 0..iters {
        let (y, macs) = dense.matvec_counted(std::hint::black_box(&x));
        std::hint::black_box(y);
        dense_macs = macs;
    }
    let dense_secs = t.elapsed().as_secs_f64() / iters as f64;
    Ok(BenchRow {
        n,
        butterfly_params: stack.count_parameters(),
        dense_params: dense_parameter_count(n),
        butterfly_macs,
        dense_macs,
        butterfly_secs,
        dense_secs,
    })
}

/// Loads a checkpoint into a model; the hop defaults to half the frame.
pub fn load_model(path: &std::path::Path, hop: Option<usize>) -> Result<EnhancementModel> {
    EnhancementModel::from_tensors(&load_checkpoint(path)?, hop)
}

/// Trains per `cfg`, writing the checkpoint and loss curve it names.
pub fn run_training(cfg: &RunConfig, mut progress: impl FnMut(usize, f64)) -> Result<(EnhancementModel, Vec<f64>)> {
    let data = match &cfg.manifest {
        Some(path) => load_dataset(&read_manifest(path)?)?,
        None => toy_dataset(cfg.toy_seed, cfg.toy_clips, cfg.sample_rate, cfg.sample_rate as usize),
    };
    let mut model = EnhancementModel::new(cfg.train.model_config())?;
    let losses = train_model(&mut model, &cfg.train, &data, &mut progress)?;
    save_checkpoint(&cfg.checkpoint, &model.to_tensors())?;
    write_loss_curve(&cfg.loss_csv, &losses)?;
    Ok((model, losses))
}

/// Evaluates each checkpoint on the manifest. With more than one checkpoint
/// every clip id is prefixed by the checkpoint's file stem.
pub fn run_evaluation(checkpoints: &[PathBuf], manifest: &std::path::Path, hop: Option<usize>) -> Result<Vec<ClipEval>> {
    let manifest = read_manifest(manifest)?;
    let data = load_dataset(&manifest)?;
    let cfg = RunConfig::default();
    let mut rows = Vec::new();
    for path in checkpoints {
        let model = load_model(path, hop)?;
        let mut arm = evaluate_dataset(&model, &data, &manifest.snr_list, &cfg.train.loss, &cfg.ssnr)?;
        if checkpoints.len() > 1 {
            let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            for r in &mut arm {
                r.clip_id = format!("{stem}:{}", r.clip_id);
            }
        }
        rows.extend(arm);
    }
    Ok(rows)
}

/// Process exit status for an error: 1 for failed checks or metrics, 2 otherwise.
pub fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Diverged { .. } | Error::UndefinedMetric(_) => 1,
        _ => 2,
    }
}

fn verify(sizes: Vec<usize>, trials: usize, perturb: Option<f64>) -> Result<bool> {
    let mut ok = true;
    println!("n,oracle_max_err,roundtrip_max_err,parseval_rel_err,sparsity,status");
    for n in sizes {
        let report = verify_size(n, trials, 0, perturb)?;
        let failures = report.failures();
        println!(
            "{},{:.3e},{:.3e},{:.3e},{},{}",
            n,
            report.oracle_error,
            report.roundtrip_error,
            report.parseval_error,
            report.sparsity_ok,
            if failures.is_empty() { "ok".to_owned() } else { format!("FAIL({})", failures.join("+")) }
        );
        ok &= failures.is_empty();
    }
    Ok(ok)
}

fn execute(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Verify { n, all, trials, perturb } => {
            let sizes = if all { (1..=10).map(|k| 1usize << k).collect() } else { vec![n] };
            verify(sizes, trials, perturb)
        }
        Command::Bench { n, iters } => {
            let row = bench_size(n, iters)?;
            println!("{}\n{}", BenchRow::CSV_HEADER, row.csv());
            Ok(true)
        }
        Command::GenData { dir, seed, count } => {
            let m = generate_toy_dataset(&dir, seed, count)?;
            eprintln!("wrote {} pairs to {}", m.pairs.len(), dir.join("manifest.tsv").display());
            Ok(true)
        }
        Command::Train { config, checkpoint, loss_csv, max_steps } => {
            let mut cfg = load_config(&config)?;
            if let Some(p) = checkpoint {
                cfg.checkpoint = p;
            }
            if let Some(p) = loss_csv {
                cfg.loss_csv = p;
            }
            if let Some(s) = max_steps {
                cfg.train.max_steps = s;
            }
            let (_, losses) = run_training(&cfg, |step, loss| {
                if step % 100 == 0 {
                    eprintln!("step {step} loss {loss:.6}");
                }
            })?;
            eprintln!(
                "{} steps, final loss {:.6}; wrote {} and {}",
                losses.len(),
                losses.last().copied().unwrap_or(f64::NAN),
                cfg.checkpoint.display(),
                cfg.loss_csv.display()
            );
            Ok(true)
        }
        Command::Enhance { checkpoint, input, out, hop, mask } => {
            let model = load_model(&checkpoint, hop)?;
            let clip = read_wav(&input)?;
            let mode = mask.map_or(MaskMode::Network, MaskMode::Constant);
            let samples = model.enhance(&clip.samples, mode)?;
            write_wav(&out, &AudioClip { samples, sample_rate: clip.sample_rate })?;
            Ok(true)
        }
        Command::Evaluate { checkpoint, manifest, out, hop } => {
            let rows = run_evaluation(&checkpoint, &manifest, hop)?;
            write_metrics_csv(&out, &rows)?;
            let gain = rows.iter().map(|r| r.ssnr_out - r.ssnr_in).sum::<f64>() / rows.len().max(1) as f64;
            eprintln!("{} rows, mean SSNR gain {gain:.3} dB; wrote {}", rows.len(), out.display());
            Ok(true)
        }
    }
}

/// Parses arguments, runs the subcommand and maps the outcome to an exit code.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 2 } else { 0 });
        }
    };
    match execute(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
