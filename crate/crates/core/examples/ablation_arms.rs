//! Runs the four committed arm configs for a few steps and reports which
//! parameter groups moved.
//!
//! ```text
//! cargo run --release --example ablation_arms -- [steps]
//! ```

use std::path::Path;

use butterfly_stft::cli::run_training;
use butterfly_stft::config::load_config;
use butterfly_stft::pipeline::EnhancementModel;

const ARMS: [&str; 4] = [
    "arm1_fixed_window_fixed_fft",
    "arm2_trainable_window_fixed_fft",
    "arm3_fixed_window_trainable_fft",
    "arm4_trainable_window_trainable_fft",
];

pub fn main() -> Result<(), Box<dyn std::error::Error>> {
    let steps: usize = std::env::args().nth(1).and_then(|s| s.parse().ok()).unwrap_or(3);
    let configs = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let out = std::env::temp_dir().join("bfly_ablation_arms");
    std::fs::create_dir_all(&out)?;

    for arm in ARMS {
        let mut cfg = load_config(configs.join(format!("{arm}.conf")))?;
        cfg.train.max_steps = steps;
        cfg.checkpoint = out.join(format!("{arm}.bfly"));
        cfg.loss_csv = out.join(format!("{arm}.csv"));
        let init = EnhancementModel::new(cfg.train.model_config())?;
        let (trained, losses) = run_training(&cfg, |_, _| {})?;

        let moved = |ids: Vec<_>| {
            ids.into_iter()
                .any(|id| init.params.get(id).values != trained.params.get(id).values)
        };
        println!(
            "{arm}: loss {:.4} -> {:.4}; analysis window {}, synthesis window {}, forward fft {}, inverse fft {}",
            losses.first().copied().unwrap_or(f64::NAN),
            losses.last().copied().unwrap_or(f64::NAN),
            label(moved(init.analysis_window_ids())),
            label(moved(init.synthesis_window_ids())),
            label(moved(init.forward_fft_ids())),
            label(moved(init.inverse_fft_ids())),
        );
    }
    Ok(())
}

fn label(moved: bool) -> &'static str {
    if moved {
        "moved"
    } else {
        "frozen"
    }
}
