//! Segmental SNR of a toy clip at several mixing SNRs.

use butterfly_stft::audio::toy_dataset;
use butterfly_stft::metrics::{ssnr, SsnrConfig};
use butterfly_stft::training::mix_at_snr;

pub fn main() -> butterfly_stft::Result<()> {
    let data = toy_dataset(1, 1, 16_000, 16_000);
    let pair = &data.pairs[0];
    let cfg = SsnrConfig::default();
    println!("clean vs itself: {:.1} dB", ssnr(&pair.clean, &pair.clean, &cfg)?);
    println!("clean vs silence: {:.1} dB", ssnr(&pair.clean, &vec![0.0; pair.clean.len()], &cfg)?);
    for snr in [-5.0, 0.0, 5.0, 10.0, 15.0] {
        let noisy = mix_at_snr(&pair.clean, &pair.second, snr)?;
        println!("mixed at {snr:>5.1} dB -> SSNR {:.2} dB", ssnr(&pair.clean, &noisy, &cfg)?);
    }
    Ok(())
}
