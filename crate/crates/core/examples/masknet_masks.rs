//! Runs the mask network over a few random spectra and shows mask statistics.

use butterfly_stft::autodiff::ParamStore;
use butterfly_stft::butterfly::SplitComplex;
use butterfly_stft::masknet::{apply_masks, init_masknet, masknet_forward, MaskNet};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn main() -> butterfly_stft::Result<()> {
    let (n, d) = (256, 60);
    let mut store = ParamStore::new();
    let net = init_masknet(&mut store, n, d, 1)?;
    println!(
        "mask network n={n} d={d}: {} parameters (formula {})",
        net.parameter_count(&store),
        MaskNet::expected_parameter_count(n, d)
    );
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let frames: Vec<SplitComplex> = (0..5)
        .map(|_| {
            SplitComplex::new(
                (0..n).map(|_| rng.random_range(-4.0..4.0)).collect(),
                (0..n).map(|_| rng.random_range(-4.0..4.0)).collect(),
            )
        })
        .collect::<Result<_, _>>()?;
    for (t, (m, c)) in masknet_forward(&net, &store, &frames)?.iter().zip(&frames).enumerate() {
        let all = m.real.iter().chain(&m.imag);
        let (lo, hi) = all.fold((1.0f64, 0.0f64), |(lo, hi), &v| (lo.min(v), hi.max(v)));
        let masked = apply_masks(c, &m.real, &m.imag)?;
        println!(
            "frame {t}: masks in [{lo:.3}, {hi:.3}], energy kept {:.3}",
            masked.energy() / c.energy()
        );
    }
    Ok(())
}
