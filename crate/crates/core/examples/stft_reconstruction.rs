//! Hann analysis, unit synthesis, hop n/2, masks of one: the interior of the
//! output reproduces the input.

use butterfly_stft::pipeline::{EnhancementModel, MaskMode, ModelConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn main() -> butterfly_stft::Result<()> {
    let model = EnhancementModel::new(ModelConfig::default())?;
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let x: Vec<f64> = (0..16_000).map(|_| rng.random_range(-0.5..0.5)).collect();
    let n = model.n();
    for mask in [1.0, 0.5, 0.0] {
        let y = model.enhance(&x, MaskMode::Constant(mask))?;
        let interior = n..x.len() - n;
        let err = interior.clone().map(|i| (y[i] - mask * x[i]).abs()).fold(0.0, f64::max);
        let power = |s: &[f64]| s[interior.clone()].iter().map(|v| v * v).sum::<f64>();
        println!(
            "mask {mask:.1}: max |y − {mask}·x| = {err:.2e}, power ratio {:.4}",
            power(&y) / power(&x)
        );
    }
    Ok(())
}
