//! Writes the toy corpus to a temporary directory and reads it back.

use butterfly_stft::audio::{generate_toy_dataset, load_dataset, read_manifest, read_wav, write_wav, AudioClip};

pub fn main() -> butterfly_stft::Result<()> {
    let dir = std::env::temp_dir().join(format!("bfly-wav-{}", std::process::id()));
    let manifest = generate_toy_dataset(&dir, 1, 3)?;
    println!("manifest.tsv:\n{}", std::fs::read_to_string(dir.join("manifest.tsv")).unwrap_or_default());
    let data = load_dataset(&read_manifest(dir.join("manifest.tsv"))?)?;
    for p in &data.pairs {
        let rms = |x: &[f64]| (x.iter().map(|v| v * v).sum::<f64>() / x.len() as f64).sqrt();
        println!("{}: {} samples, clean rms {:.4}, noise rms {:.4}", p.id, p.clean.len(), rms(&p.clean), rms(&p.second));
    }
    let first = read_wav(&manifest.pairs[0].0)?;
    let copy = dir.join("copy.wav");
    write_wav(&copy, &AudioClip { samples: first.samples.clone(), sample_rate: first.sample_rate })?;
    println!("second roundtrip bit-exact: {}", read_wav(&copy)? == first);
    let _ = std::fs::remove_dir_all(&dir);
    Ok(())
}
