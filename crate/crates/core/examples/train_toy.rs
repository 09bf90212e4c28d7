//! Trains the enhancement model on the toy corpus and reports the held-out
//! SSNR gain.
//!
//! ```text
//! cargo run --release --example train_toy -- [steps] [fixed]
//! ```

use std::time::Instant;

use butterfly_stft::audio::toy_dataset;
use butterfly_stft::metrics::SsnrConfig;
use butterfly_stft::pipeline::EnhancementModel;
use butterfly_stft::training::{dataset_loss, evaluate_dataset, train_model, TrainConfig, TrainableFlags};

pub fn main() -> butterfly_stft::Result<()> {
    let args: Vec<String> = std::env::args().collect();
    let steps: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(200);
    let flags = if args.get(2).is_some_and(|s| s == "fixed") {
        TrainableFlags::FIXED_WINDOW_FIXED_FFT
    } else {
        TrainableFlags::TRAINABLE_WINDOW_TRAINABLE_FFT
    };

    let train_set = toy_dataset(1, 20, 16_000, 16_000);
    let held_out = toy_dataset(2, 10, 16_000, 16_000);
    let cfg = TrainConfig {
        max_steps: steps,
        snr_list: vec![0.0],
        flags,
        ..TrainConfig::default()
    };
    let mut model = EnhancementModel::new(cfg.model_config())?;
    println!("arm: {}, {} parameters", flags.arm_name(), model.parameter_count());

    let before = dataset_loss(&model, &train_set, &[0.0], &cfg.loss)?;
    let t = Instant::now();
    train_model(&mut model, &cfg, &train_set, |s, l| {
        if s % 50 == 0 {
            println!("step {s:5}  loss {l:.5}  {:.1}s", t.elapsed().as_secs_f64());
        }
    })?;
    let after = dataset_loss(&model, &train_set, &[0.0], &cfg.loss)?;
    println!("training-set loss {before:.5} -> {after:.5} (ratio {:.3})", after / before);

    let rows = evaluate_dataset(&model, &held_out, &[0.0], &cfg.loss, &SsnrConfig::default())?;
    for r in &rows {
        println!("  {}  {:6.2} dB -> {:6.2} dB", r.clip_id, r.ssnr_in, r.ssnr_out);
    }
    let gain = rows.iter().map(|r| r.ssnr_out - r.ssnr_in).sum::<f64>() / rows.len() as f64;
    println!("mean held-out SSNR gain {gain:+.2} dB");
    Ok(())
}
