//! Loss, optimizer, mixing and the training loop.

pub mod adam;
pub mod checkpoint;
pub mod loss;

use std::fmt::Write as _;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audio::{Dataset, MixMode};
use crate::autodiff::Tape;
use crate::butterfly::SplitComplex;
use crate::error::{Error, Result};
use crate::metrics::{ssnr, SsnrConfig};
use crate::pipeline::{EnhancementModel, MaskMode, ModelConfig, ReferenceStft, WindowInit};

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{load_checkpoint, save_checkpoint, DType, NamedTensor};
pub use loss::{complex_compress, loss, LossConfig};

/// Which front/back-end groups receive updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TrainableFlags {
    pub window_analysis: bool,
    pub window_synthesis: bool,
    pub fft_forward: bool,
    pub fft_inverse: bool,
}

impl TrainableFlags {
    pub const FIXED_WINDOW_FIXED_FFT: Self = Self::arm(false, false);
    pub const TRAINABLE_WINDOW_FIXED_FFT: Self = Self::arm(true, false);
    pub const FIXED_WINDOW_TRAINABLE_FFT: Self = Self::arm(false, true);
    pub const TRAINABLE_WINDOW_TRAINABLE_FFT: Self = Self::arm(true, true);

    /// The four ablation arms in table order.
    pub const ARMS: [Self; 4] = [
        Self::FIXED_WINDOW_FIXED_FFT,
        Self::TRAINABLE_WINDOW_FIXED_FFT,
        Self::FIXED_WINDOW_TRAINABLE_FFT,
        Self::TRAINABLE_WINDOW_TRAINABLE_FFT,
    ];

    pub const fn arm(window: bool, fft: bool) -> Self {
        TrainableFlags {
            window_analysis: window,
            window_synthesis: window,
            fft_forward: fft,
            fft_inverse: fft,
        }
    }

    pub fn arm_name(&self) -> String {
        let w = |a: bool, b: bool| match (a, b) {
            (true, true) => "Trainable",
            (false, false) => "Fixed",
            _ => "Mixed",
        };
        format!(
            "{} Window {} FFT",
            w(self.window_analysis, self.window_synthesis),
            w(self.fft_forward, self.fft_inverse)
        )
    }
}

impl Default for TrainableFlags {
    fn default() -> Self {
        Self::TRAINABLE_WINDOW_TRAINABLE_FFT
    }
}

fn mean_square(x: &[f64]) -> f64 {
    if x.is_empty() {
        return 0.0;
    }
    x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64
}

/// Noise gain that puts `noise` at `snr_db` below `speech`.
pub fn snr_gain(speech: &[f64], noise: &[f64], snr_db: f64) -> Result<f64> {
    if speech.len() != noise.len() {
        return Err(Error::shape(format!(
            "speech has {} samples, noise has {}",
            speech.len(),
            noise.len()
        )));
    }
    let ps = mean_square(speech);
    let pn = mean_square(noise);
    if ps == 0.0 {
        return Err(Error::Degenerate("speech has zero power".into()));
    }
    if pn == 0.0 {
        return Err(Error::Degenerate("noise has zero power".into()));
    }
    if !snr_db.is_finite() {
        return Err(Error::Numeric(format!("snr {snr_db} dB is not finite")));
    }
    Ok((ps / (pn * 10f64.powf(snr_db / 10.0))).sqrt())
}

/// `speech + g·noise` with `g` chosen so the power ratio is exactly `snr_db`.
pub fn mix_at_snr(speech: &[f64], noise: &[f64], snr_db: f64) -> Result<Vec<f64>> {
    let g = snr_gain(speech, noise, snr_db)?;
    Ok(speech.iter().zip(noise).map(|(s, n)| s + g * n).collect())
}

/// `10·log10(P_speech / P_noise)`.
pub fn measured_snr_db(speech: &[f64], noise: &[f64]) -> f64 {
    10.0 * (mean_square(speech) / mean_square(noise)).log10()
}

/// Reference analysis of the clean signal: the loss target.
pub fn compute_targets(clean: &[f64], reference: &ReferenceStft) -> Result<Vec<SplitComplex>> {
    reference.analyze(clean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub n: usize,
    pub hop: usize,
    pub hidden: usize,
    pub analysis_window: WindowInit,
    pub synthesis_window: WindowInit,
    pub adam: AdamConfig,
    pub loss: LossConfig,
    pub batch_size: usize,
    pub max_steps: usize,
    pub seed: u64,
    pub flags: TrainableFlags,
    pub snr_list: Vec<f64>,
    /// Samples per training crop.
    pub crop_length: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            n: 256,
            hop: 128,
            hidden: 60,
            analysis_window: WindowInit::Hann,
            synthesis_window: WindowInit::Ones,
            adam: AdamConfig::default(),
            loss: LossConfig::default(),
            batch_size: 4,
            max_steps: 2000,
            seed: 0,
            flags: TrainableFlags::default(),
            snr_list: vec![0.0, 5.0, 10.0, 15.0],
            crop_length: 16_000,
        }
    }
}

impl TrainConfig {
    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            n: self.n,
            hop: self.hop,
            hidden: self.hidden,
            seed: self.seed,
            analysis_window: self.analysis_window,
            synthesis_window: self.synthesis_window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.loss.validate()?;
        if self.batch_size == 0 {
            return Err(Error::Numeric("batch_size must be at least 1".into()));
        }
        if self.snr_list.is_empty() {
            return Err(Error::Numeric("snr_list is empty".into()));
        }
        if self.crop_length < self.n {
            return Err(Error::TooShort {
                len: self.crop_length,
                frame: self.n,
            });
        }
        Ok(())
    }
}

/// Loss of one (noisy, clean) pair through the model, with gradients
/// accumulated into the model's store scaled by `grad_scale`.
fn example_loss(
    model: &mut EnhancementModel,
    reference: &ReferenceStft,
    noisy: &[f64],
    clean: &[f64],
    cfg: &LossConfig,
    grad_scale: Option<f64>,
) -> Result<f64> {
    let targets = compute_targets(clean, reference)?;
    let mut tape = Tape::new();
    let nodes = model.forward_on_tape(&mut tape, noisy, MaskMode::Network)?;
    let preds = reference.analyze_on_tape(&model.params, &mut tape, nodes.signal)?;
    let out = tape.compressed_loss(preds, targets, *cfg)?;
    let value = tape.value(out)[0];
    if let Some(scale) = grad_scale {
        tape.backward_with(&mut model.params, out, &[scale])?;
    }
    Ok(value)
}

/// Loss of the model on one pair, no gradients.
pub fn pair_loss(
    model: &EnhancementModel,
    reference: &ReferenceStft,
    noisy: &[f64],
    clean: &[f64],
    cfg: &LossConfig,
) -> Result<f64> {
    let mut tape = Tape::new();
    let nodes = model.forward_on_tape(&mut tape, noisy, MaskMode::Network)?;
    let preds = reference.analyze_on_tape(&model.params, &mut tape, nodes.signal)?;
    let out = tape.compressed_loss(preds, compute_targets(clean, reference)?, *cfg)?;
    Ok(tape.value(out)[0])
}

/// Noisy version of pair `index`: the stored mixture in premixed mode,
/// otherwise the clean clip mixed with its noise at `snr_db`.
pub fn noisy_input(data: &Dataset, index: usize, snr_db: f64) -> Result<Vec<f64>> {
    let pair = &data.pairs[index];
    match data.mode {
        MixMode::Premixed => Ok(pair.second.clone()),
        MixMode::Mix => mix_at_snr(&pair.clean, &pair.second, snr_db),
    }
}

/// One batch element: a seeded crop of a seeded clip at a seeded SNR.
const CROP_ATTEMPTS: usize = 16;

fn draw_example(rng: &mut ChaCha8Rng, data: &Dataset, cfg: &TrainConfig) -> Result<(Vec<f64>, Vec<f64>)> {
    let index = rng.random_range(0..data.pairs.len());
    let snr = cfg.snr_list[rng.random_range(0..cfg.snr_list.len())];
    let pair = &data.pairs[index];
    let len = pair.clean.len().min(pair.second.len());
    let crop = cfg.crop_length.min(len);
    if crop < cfg.n {
        return Err(Error::TooShort { len, frame: cfg.n });
    }
    // a crop of silent speech cannot be mixed at a target SNR; redraw it
    let mut start = rng.random_range(0..=len - crop);
    for _ in 0..CROP_ATTEMPTS {
        if data.mode == MixMode::Premixed || pair.clean[start..start + crop].iter().any(|v| *v != 0.0) {
            break;
        }
        start = rng.random_range(0..=len - crop);
    }
    let clean = &pair.clean[start..start + crop];
    let second = &pair.second[start..start + crop];
    let noisy = match data.mode {
        MixMode::Premixed => second.to_vec(),
        MixMode::Mix => mix_at_snr(clean, second, snr)?,
    };
    Ok((noisy, clean.to_vec()))
}

/// Runs `cfg.max_steps` Adam steps on `model`. Returns the batch loss at
/// every step, measured before that step's update. `on_step` sees each
/// `(step, loss)` as it is produced.
pub fn train_model(
    model: &mut EnhancementModel,
    cfg: &TrainConfig,
    data: &Dataset,
    mut on_step: impl FnMut(usize, f64),
) -> Result<Vec<f64>> {
    cfg.validate()?;
    if data.pairs.is_empty() {
        return Err(Error::Dataset("no training clips".into()));
    }
    model.apply_trainable_flags(&cfg.flags);
    let reference = ReferenceStft::hann(model.n(), model.hop())?;
    let mut state = AdamState::new(&model.params);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed_da7a);
    let scale = 1.0 / cfg.batch_size as f64;
    let mut curve = Vec::with_capacity(cfg.max_steps);
    for step in 0..cfg.max_steps {
        model.params.zero_grad();
        let mut total = 0.0;
        for _ in 0..cfg.batch_size {
            let (noisy, clean) = draw_example(&mut rng, data, cfg)?;
            let value = match example_loss(model, &reference, &noisy, &clean, &cfg.loss, Some(scale)) {
                Err(Error::Numeric(_)) => return Err(Error::Diverged { step }),
                other => other?,
            };
            total += value;
        }
        let batch_loss = total * scale;
        let grads_finite = model.params.iter().all(|(_, t)| t.grad.iter().all(|g| g.is_finite()));
        if !batch_loss.is_finite() || !grads_finite {
            return Err(Error::Diverged { step });
        }
        adam_step(&mut model.params, &mut state, &cfg.adam);
        curve.push(batch_loss);
        on_step(step, batch_loss);
    }
    Ok(curve)
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: EnhancementModel,
    pub losses: Vec<f64>,
}

/// Builds a fresh model from `cfg` and trains it.
pub fn train(cfg: &TrainConfig, data: &Dataset) -> Result<TrainOutcome> {
    let mut model = EnhancementModel::new(cfg.model_config())?;
    let losses = train_model(&mut model, cfg, data, |_, _| {})?;
    Ok(TrainOutcome { model, losses })
}

pub fn loss_curve_csv(losses: &[f64]) -> String {
    let mut out = String::from("step,loss\n");
    for (step, l) in losses.iter().enumerate() {
        let _ = writeln!(out, "{step},{l:e}");
    }
    out
}

pub fn write_loss_curve(path: impl AsRef<Path>, losses: &[f64]) -> Result<()> {
    std::fs::write(path.as_ref(), loss_curve_csv(losses)).map_err(|e| Error::io(path, e))
}

/// Per-clip evaluation row.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipEval {
    pub clip_id: String,
    pub ssnr_in: f64,
    pub ssnr_out: f64,
    pub loss: f64,
}

/// SSNR before and after enhancement plus the loss on one pair.
pub fn evaluate_pair(
    model: &EnhancementModel,
    clip_id: &str,
    noisy: &[f64],
    clean: &[f64],
    loss_cfg: &LossConfig,
    ssnr_cfg: &SsnrConfig,
) -> Result<ClipEval> {
    let reference = ReferenceStft::hann(model.n(), model.hop())?;
    let enhanced = model.enhance(noisy, MaskMode::Network)?;
    Ok(ClipEval {
        clip_id: clip_id.to_owned(),
        ssnr_in: ssnr(clean, noisy, ssnr_cfg)?,
        ssnr_out: ssnr(clean, &enhanced, ssnr_cfg)?,
        loss: pair_loss(model, &reference, noisy, clean, loss_cfg)?,
    })
}

/// Evaluates every pair. In mix mode pair `i` uses `snr_list[i % len]`.
pub fn evaluate_dataset(
    model: &EnhancementModel,
    data: &Dataset,
    snr_list: &[f64],
    loss_cfg: &LossConfig,
    ssnr_cfg: &SsnrConfig,
) -> Result<Vec<ClipEval>> {
    if data.mode == MixMode::Mix && snr_list.is_empty() {
        return Err(Error::Dataset("mix mode needs at least one SNR".into()));
    }
    (0..data.pairs.len())
        .map(|i| {
            let snr = snr_list.get(i % snr_list.len().max(1)).copied().unwrap_or(0.0);
            let noisy = noisy_input(data, i, snr)?;
            evaluate_pair(model, &data.pairs[i].id, &noisy, &data.pairs[i].clean, loss_cfg, ssnr_cfg)
        })
        .collect()
}

/// Mean loss over whole clips, one fixed SNR per pair as in [`evaluate_dataset`].
pub fn dataset_loss(model: &EnhancementModel, data: &Dataset, snr_list: &[f64], cfg: &LossConfig) -> Result<f64> {
    let reference = ReferenceStft::hann(model.n(), model.hop())?;
    let mut total = 0.0;
    for i in 0..data.pairs.len() {
        let snr = snr_list.get(i % snr_list.len().max(1)).copied().unwrap_or(0.0);
        let noisy = noisy_input(data, i, snr)?;
        total += pair_loss(model, &reference, &noisy, &data.pairs[i].clean, cfg)?;
    }
    Ok(total / data.pairs.len().max(1) as f64)
}
