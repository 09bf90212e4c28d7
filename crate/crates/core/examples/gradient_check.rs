//! Finite-difference check of the full pipeline and loss on a tiny instance.

use butterfly_stft::autodiff::{finite_diff_check, Tape};
use butterfly_stft::pipeline::{EnhancementModel, MaskMode, ModelConfig, ReferenceStft};
use butterfly_stft::training::{compute_targets, LossConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn loss_of(model: &EnhancementModel, noisy: &[f64], clean: &[f64]) -> butterfly_stft::Result<(Tape, butterfly_stft::autodiff::NodeId)> {
    let reference = ReferenceStft::hann(model.n(), model.hop())?;
    let mut tape = Tape::new();
    let nodes = model.forward_on_tape(&mut tape, noisy, MaskMode::Network)?;
    let preds = reference.analyze_on_tape(&model.params, &mut tape, nodes.signal)?;
    let out = tape.compressed_loss(preds, compute_targets(clean, &reference)?, LossConfig::default())?;
    Ok((tape, out))
}

pub fn main() -> butterfly_stft::Result<()> {
    let cfg = ModelConfig { n: 8, hop: 4, hidden: 4, seed: 3, ..ModelConfig::default() };
    let mut model = EnhancementModel::new(cfg)?;
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let clean: Vec<f64> = (0..16).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noisy: Vec<f64> = clean.iter().map(|c| c + rng.random_range(-0.3..0.3)).collect();

    let (mut tape, out) = loss_of(&model, &noisy, &clean)?;
    println!("loss = {:.6}, {} tape entries", tape.value(out)[0], tape.len());
    tape.backward(&mut model.params, out)?;

    let snapshot = model.clone();
    let report = finite_diff_check(&mut model.params, None, 1e-6, |store| {
        let mut m = snapshot.clone();
        m.params = store.clone();
        let (tape, out) = loss_of(&m, &noisy, &clean)?;
        Ok(tape.value(out)[0])
    })?;
    println!("checked {} parameters, max relative error {:.2e}", report.checked, report.max_rel_error);
    if let Some((name, i, a, n)) = &report.worst {
        println!("worst: {name}[{i}] analytic {a:.6e} numeric {n:.6e}");
    }
    assert!(report.max_rel_error <= 1e-5);
    Ok(())
}
