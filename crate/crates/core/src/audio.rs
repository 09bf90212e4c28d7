//! PCM16 mono WAV files, paired-clip manifests and the synthetic toy corpus.

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

fn unsupported(chunk: &str, reason: impl Into<String>) -> Error {
    Error::UnsupportedFormat {
        chunk: chunk.to_owned(),
        reason: reason.into(),
    }
}

fn le_u16(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn le_u32(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

/// Parses a RIFF/WAVE byte buffer holding 16-bit mono PCM.
pub fn decode_wav(bytes: &[u8]) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" {
        return Err(unsupported("RIFF", "missing RIFF header"));
    }
    if &bytes[8..12] != b"WAVE" {
        return Err(unsupported("RIFF", "form type is not WAVE"));
    }
    let mut pos = 12;
    let mut format: Option<u32> = None;
    while pos + 8 <= bytes.len() {
        let id = String::from_utf8_lossy(&bytes[pos..pos + 4]).into_owned();
        let size = le_u32(bytes, pos + 4) as usize;
        let body = pos + 8;
        let Some(end) = body.checked_add(size).filter(|&e| e <= bytes.len()) else {
            return Err(unsupported(&id, format!("chunk size {size} runs past end of file")));
        };
        match id.as_str() {
            "fmt " => {
                if size < 16 {
                    return Err(unsupported("fmt ", format!("chunk of {size} bytes is too small")));
                }
                let audio_format = le_u16(bytes, body);
                let channels = le_u16(bytes, body + 2);
                let rate = le_u32(bytes, body + 4);
                let block_align = le_u16(bytes, body + 12);
                let bits = le_u16(bytes, body + 14);
                if audio_format != 1 {
                    return Err(unsupported("fmt ", format!("format code {audio_format} is not PCM")));
                }
                if channels != 1 {
                    return Err(unsupported("fmt ", format!("{channels} channels, only mono is supported")));
                }
                if bits != 16 || block_align != 2 {
                    return Err(unsupported("fmt ", format!("{bits}-bit samples, only 16-bit is supported")));
                }
                if rate == 0 {
                    return Err(unsupported("fmt ", "sample rate is zero"));
                }
                format = Some(rate);
            }
            "data" => {
                let Some(sample_rate) = format else {
                    return Err(unsupported("data", "data chunk before fmt chunk"));
                };
                if size % 2 != 0 {
                    return Err(unsupported("data", format!("odd byte count {size}")));
                }
                let samples = bytes[body..end]
                    .chunks_exact(2)
                    .map(|c| i16::from_le_bytes([c[0], c[1]]) as f64 / 32768.0)
                    .collect();
                return Ok(AudioClip { samples, sample_rate });
            }
            _ => {}
        }
        // chunks are padded to even length
        pos = end + (size & 1);
    }
    Err(unsupported(if format.is_some() { "data" } else { "fmt " }, "chunk not found"))
}

/// Quantizes one sample to PCM16 with saturation.
pub fn to_pcm16(x: f64) -> i16 {
    (x * 32768.0).round().clamp(-32768.0, 32767.0) as i16
}

pub fn encode_wav(clip: &AudioClip) -> Result<Vec<u8>> {
    if let Some(i) = clip.samples.iter().position(|v| !v.is_finite()) {
        return Err(Error::Numeric(format!("sample {i} is not finite")));
    }
    let data_len = u32::try_from(clip.samples.len() * 2)
        .map_err(|_| Error::shape("clip too long for a WAV file"))?;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &clip.samples {
        out.extend_from_slice(&to_pcm16(s).to_le_bytes());
    }
    Ok(out)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let bytes = std::fs::read(path.as_ref()).map_err(|e| Error::io(&path, e))?;
    decode_wav(&bytes)
}

pub fn write_wav(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let bytes = encode_wav(clip)?;
    std::fs::write(path.as_ref(), bytes).map_err(|e| Error::io(path, e))
}

/// How the second file of each manifest pair is used.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MixMode {
    /// The second file is already the noisy mixture.
    Premixed,
    /// The second file is noise, mixed with the clean clip at a chosen SNR.
    Mix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetManifest {
    pub pairs: Vec<(PathBuf, PathBuf)>,
    pub mode: MixMode,
    pub snr_list: Vec<f64>,
}

impl DatasetManifest {
    pub fn to_text(&self) -> String {
        let mode = match self.mode {
            MixMode::Premixed => "premixed",
            MixMode::Mix => "mix",
        };
        let snrs: Vec<String> = self.snr_list.iter().map(|s| s.to_string()).collect();
        let mut out = format!("#! mode {mode}\n#! snr {}\n", snrs.join(" "));
        for (a, b) in &self.pairs {
            out.push_str(&format!("{}\t{}\n", a.display(), b.display()));
        }
        out
    }
}

fn manifest_error(line: usize, reason: impl Into<String>) -> Error {
    Error::Config {
        line,
        reason: reason.into(),
    }
}

/// Parses manifest text. Lines are `clean<TAB>noise`; `#! mode premixed|mix`
/// and `#! snr <dB>...` set options; other `#` lines are comments. Relative
/// paths are joined onto `base`.
pub fn parse_manifest(text: &str, base: &Path) -> Result<DatasetManifest> {
    let mut manifest = DatasetManifest {
        pairs: Vec::new(),
        mode: MixMode::Mix,
        snr_list: vec![0.0, 5.0, 10.0, 15.0],
    };
    for (k, raw) in text.lines().enumerate() {
        let line_no = k + 1;
        let line = raw.trim_end_matches('\r');
        if let Some(directive) = line.strip_prefix("#!") {
            let mut words = directive.split_whitespace();
            match words.next() {
                Some("mode") => {
                    manifest.mode = match words.next() {
                        Some("premixed") => MixMode::Premixed,
                        Some("mix") => MixMode::Mix,
                        other => return Err(manifest_error(line_no, format!("unknown mode {other:?}"))),
                    }
                }
                Some("snr") => {
                    manifest.snr_list = words
                        .map(|w| w.parse::<f64>().map_err(|_| manifest_error(line_no, format!("bad SNR '{w}'"))))
                        .collect::<Result<_>>()?;
                }
                other => return Err(manifest_error(line_no, format!("unknown directive {other:?}"))),
            }
            continue;
        }
        if line.trim().is_empty() || line.trim_start().starts_with('#') {
            continue;
        }
        let mut cols = line.split('\t');
        let (Some(a), Some(b), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(manifest_error(line_no, "expected two tab-separated paths"));
        };
        manifest.pairs.push((base.join(a.trim()), base.join(b.trim())));
    }
    Ok(manifest)
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<DatasetManifest> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&text, path.parent().unwrap_or(Path::new("")))
}

/// One clean clip and its partner: noise in mix mode, mixture otherwise.
#[derive(Debug, Clone, PartialEq)]
pub struct ClipPair {
    pub id: String,
    pub clean: Vec<f64>,
    pub second: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub mode: MixMode,
    pub sample_rate: u32,
    pub pairs: Vec<ClipPair>,
}

/// Reads every file of a manifest, rejecting mixed sample rates and pairs of
/// unequal length.
pub fn load_dataset(manifest: &DatasetManifest) -> Result<Dataset> {
    let mut pairs = Vec::with_capacity(manifest.pairs.len());
    let mut rate: Option<(u32, &Path)> = None;
    for (clean_path, second_path) in &manifest.pairs {
        let clean = read_wav(clean_path)?;
        let second = read_wav(second_path)?;
        for (clip, path) in [(&clean, clean_path), (&second, second_path)] {
            match rate {
                None => rate = Some((clip.sample_rate, path)),
                Some((r, first)) if r != clip.sample_rate => {
                    return Err(Error::Dataset(format!(
                        "{} is {} Hz but {} is {} Hz",
                        path.display(),
                        clip.sample_rate,
                        first.display(),
                        r
                    )))
                }
                _ => {}
            }
        }
        if clean.samples.len() != second.samples.len() {
            return Err(Error::Dataset(format!(
                "{} has {} samples but {} has {}",
                clean_path.display(),
                clean.samples.len(),
                second_path.display(),
                second.samples.len()
            )));
        }
        let id = clean_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        pairs.push(ClipPair {
            id,
            clean: clean.samples,
            second: second.samples,
        });
    }
    Ok(Dataset {
        mode: manifest.mode,
        sample_rate: rate.map_or(16_000, |(r, _)| r),
        pairs,
    })
}

fn quantize(x: f64) -> f64 {
    to_pcm16(x) as f64 / 32768.0
}

/// Attack/decay/sustain/release gain at sample `i` of a note spanning
/// `[start, start + len)`.
fn adsr(i: usize, start: usize, len: usize, attack: usize, decay: usize, sustain: f64, release: usize) -> f64 {
    if i < start || i >= start + len {
        return 0.0;
    }
    let t = i - start;
    if t < attack {
        t as f64 / attack as f64
    } else if t < attack + decay {
        1.0 - (1.0 - sustain) * (t - attack) as f64 / decay as f64
    } else if t + release < len {
        sustain
    } else {
        sustain * (len - t) as f64 / release as f64
    }
}

fn toy_clean(rng: &mut ChaCha8Rng, len: usize, rate: f64) -> Vec<f64> {
    let mut x = vec![0.0; len];
    let tones = rng.random_range(2..=4);
    for _ in 0..tones {
        let f0: f64 = rng.random_range(150.0..500.0);
        let harmonics = rng.random_range(2..=4);
        let note_len = rng.random_range(len * 2 / 5..=len * 4 / 5);
        let start = rng.random_range(0..=len - note_len);
        let attack = rng.random_range(len / 100..=len / 20);
        let decay = rng.random_range(len / 100..=len / 20);
        let release = rng.random_range(len / 50..=len / 10);
        let sustain = rng.random_range(0.4..0.9);
        let gain = rng.random_range(0.5..1.0);
        for h in 1..=harmonics {
            let f = f0 * h as f64;
            if f >= rate / 2.0 {
                break;
            }
            let phase: f64 = rng.random_range(0.0..std::f64::consts::TAU);
            let amp = gain / h as f64;
            for (i, v) in x.iter_mut().enumerate().skip(start).take(note_len) {
                let env = adsr(i, start, note_len, attack, decay, sustain, release);
                *v += amp * env * (std::f64::consts::TAU * f * i as f64 / rate + phase).sin();
            }
        }
    }
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if peak > 0.0 {
        x.iter_mut().for_each(|v| *v *= 0.5 / peak);
    }
    x
}

fn toy_noise(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let white: Vec<f64> = (0..len).map(|_| rng.random_range(-1.0..1.0)).collect();
    let mut x = if rng.random_bool(0.5) {
        white
    } else {
        // Paul Kellet's pink filter
        let mut b = [0.0f64; 7];
        white
            .iter()
            .map(|&w| {
                b[0] = 0.99886 * b[0] + w * 0.0555179;
                b[1] = 0.99332 * b[1] + w * 0.0750759;
                b[2] = 0.96900 * b[2] + w * 0.1538520;
                b[3] = 0.86650 * b[3] + w * 0.3104856;
                b[4] = 0.55000 * b[4] + w * 0.5329522;
                b[5] = -0.7616 * b[5] - w * 0.0168980;
                let out = b.iter().sum::<f64>() + w * 0.5362;
                b[6] = w * 0.115926;
                out
            })
            .collect()
    };
    let mean = x.iter().sum::<f64>() / len as f64;
    x.iter_mut().for_each(|v| *v -= mean);
    let peak = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    x.iter_mut().for_each(|v| *v *= 0.5 / peak);
    x
}

/// Synthetic clean/noise pairs, already quantized to the PCM16 grid so they
/// survive a WAV roundtrip unchanged.
pub fn toy_dataset(seed: u64, count: usize, sample_rate: u32, length: usize) -> Dataset {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pairs = (0..count)
        .map(|i| {
            let clean = toy_clean(&mut rng, length, sample_rate as f64);
            let noise = toy_noise(&mut rng, length);
            ClipPair {
                id: format!("clip_{i:03}"),
                clean: clean.into_iter().map(quantize).collect(),
                second: noise.into_iter().map(quantize).collect(),
            }
        })
        .collect();
    Dataset {
        mode: MixMode::Mix,
        sample_rate,
        pairs,
    }
}

/// Writes `count` one-second 16 kHz pairs under `dir` as `clean/clip_NNN.wav`,
/// `noise/clip_NNN.wav` and `manifest.tsv`.
pub fn generate_toy_dataset(dir: impl AsRef<Path>, seed: u64, count: usize) -> Result<DatasetManifest> {
    let dir = dir.as_ref();
    let data = toy_dataset(seed, count, 16_000, 16_000);
    for sub in ["clean", "noise"] {
        let p = dir.join(sub);
        std::fs::create_dir_all(&p).map_err(|e| Error::io(&p, e))?;
    }
    let mut relative = Vec::with_capacity(count);
    for pair in &data.pairs {
        let clean = PathBuf::from("clean").join(format!("{}.wav", pair.id));
        let noise = PathBuf::from("noise").join(format!("{}.wav", pair.id));
        for (rel, samples) in [(&clean, &pair.clean), (&noise, &pair.second)] {
            write_wav(
                dir.join(rel),
                &AudioClip {
                    samples: samples.clone(),
                    sample_rate: data.sample_rate,
                },
            )?;
        }
        relative.push((clean, noise));
    }
    let manifest = DatasetManifest {
        pairs: relative,
        mode: MixMode::Mix,
        snr_list: vec![0.0, 5.0, 10.0, 15.0],
    };
    let path = dir.join("manifest.tsv");
    std::fs::write(&path, manifest.to_text()).map_err(|e| Error::io(&path, e))?;
    Ok(DatasetManifest {
        pairs: manifest
            .pairs
            .into_iter()
            .map(|(a, b)| (dir.join(a), dir.join(b)))
            .collect(),
        ..manifest
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn wav_of(samples: &[i16]) -> Vec<u8> {
        let clip = AudioClip {
            samples: samples.iter().map(|&s| s as f64 / 32768.0).collect(),
            sample_rate: 16_000,
        };
        encode_wav(&clip).unwrap()
    }

    #[test]
    fn pcm_scaling() {
        let clip = decode_wav(&wav_of(&[0, 16384, -32768])).unwrap();
        assert_eq!(clip.samples, vec![0.0, 0.5, -1.0]);
        assert_eq!(clip.sample_rate, 16_000);
    }

    #[test]
    fn header_fields() {
        let bytes = wav_of(&[1, 2, 3]);
        assert_eq!(bytes.len(), 44 + 6);
        assert_eq!(&bytes[0..4], b"RIFF");
        assert_eq!(le_u32(&bytes, 4), 42);
        assert_eq!(&bytes[8..16], b"WAVEfmt ");
        assert_eq!(le_u32(&bytes, 16), 16);
        assert_eq!(le_u16(&bytes, 20), 1);
        assert_eq!(le_u16(&bytes, 22), 1);
        assert_eq!(le_u32(&bytes, 24), 16_000);
        assert_eq!(le_u32(&bytes, 28), 32_000);
        assert_eq!(le_u16(&bytes, 32), 2);
        assert_eq!(le_u16(&bytes, 34), 16);
        assert_eq!(&bytes[36..40], b"data");
        assert_eq!(le_u32(&bytes, 40), 6);
    }

    #[test]
    fn saturation_and_silence() {
        let clip = AudioClip {
            samples: vec![2.0, -3.0, 0.0],
            sample_rate: 8000,
        };
        let bytes = encode_wav(&clip).unwrap();
        assert_eq!(i16::from_le_bytes([bytes[44], bytes[45]]), 32767);
        assert_eq!(i16::from_le_bytes([bytes[46], bytes[47]]), -32768);
        let silent = encode_wav(&AudioClip { samples: vec![0.0; 10], sample_rate: 8000 }).unwrap();
        assert_eq!(le_u32(&silent, 40), 20);
        assert!(silent[44..].iter().all(|&b| b == 0));
    }

    #[test]
    fn roundtrip_within_one_step_and_idempotent() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let samples: Vec<f64> = (0..300).map(|_| rng.random_range(-1.0..1.0)).collect();
        let clip = AudioClip { samples: samples.clone(), sample_rate: 22_050 };
        let once = decode_wav(&encode_wav(&clip).unwrap()).unwrap();
        assert!(once.samples.iter().zip(&samples).all(|(a, b)| (a - b).abs() <= 1.0 / 32768.0));
        let twice = decode_wav(&encode_wav(&once).unwrap()).unwrap();
        assert_eq!(once, twice);
    }

    #[test]
    fn rejects_unsupported_layouts() {
        let mut stereo = wav_of(&[0, 0]);
        stereo[22] = 2;
        match decode_wav(&stereo) {
            Err(Error::UnsupportedFormat { chunk, .. }) => assert_eq!(chunk, "fmt "),
            other => panic!("{other:?}"),
        }
        let mut float = wav_of(&[0, 0]);
        float[20] = 3;
        assert!(matches!(decode_wav(&float), Err(Error::UnsupportedFormat { .. })));
        let mut eight_bit = wav_of(&[0, 0]);
        eight_bit[34] = 8;
        assert!(decode_wav(&eight_bit).is_err());
        assert!(matches!(decode_wav(b"RIFX"), Err(Error::UnsupportedFormat { .. })));
        let truncated = wav_of(&[1, 2, 3]);
        match decode_wav(&truncated[..truncated.len() - 1]) {
            Err(Error::UnsupportedFormat { chunk, .. }) => assert_eq!(chunk, "data"),
            other => panic!("{other:?}"),
        }
        assert!(encode_wav(&AudioClip { samples: vec![f64::NAN], sample_rate: 1 }).is_err());
    }

    #[test]
    fn skips_unknown_chunks() {
        let plain = wav_of(&[5, -5]);
        let mut with_list = plain[..36].to_vec();
        with_list.extend_from_slice(b"LIST");
        with_list.extend_from_slice(&3u32.to_le_bytes());
        with_list.extend_from_slice(&[1, 2, 3, 0]);
        with_list.extend_from_slice(&plain[36..]);
        assert_eq!(decode_wav(&with_list).unwrap(), decode_wav(&plain).unwrap());
    }

    #[test]
    fn manifest_parsing() {
        let text = "#! mode premixed\n#! snr 2.5 7.5\n# comment\n\na.wav\tb.wav\n/abs/c.wav\td.wav\n";
        let m = parse_manifest(text, Path::new("/data")).unwrap();
        assert_eq!(m.mode, MixMode::Premixed);
        assert_eq!(m.snr_list, vec![2.5, 7.5]);
        assert_eq!(
            m.pairs,
            vec![
                (PathBuf::from("/data/a.wav"), PathBuf::from("/data/b.wav")),
                (PathBuf::from("/abs/c.wav"), PathBuf::from("/data/d.wav")),
            ]
        );
        assert!(matches!(parse_manifest("a.wav b.wav\n", Path::new("")), Err(Error::Config { line: 1, .. })));
        assert!(matches!(parse_manifest("\n#! mode loud\n", Path::new("")), Err(Error::Config { line: 2, .. })));
        let again = parse_manifest(&m.to_text(), Path::new("/elsewhere")).unwrap();
        assert_eq!(again.pairs, m.pairs);
    }

    #[test]
    fn toy_dataset_properties() {
        let a = toy_dataset(7, 5, 16_000, 16_000);
        let b = toy_dataset(7, 5, 16_000, 16_000);
        assert_eq!(a, b);
        assert_eq!(a.pairs.len(), 5);
        for p in &a.pairs {
            let mean = p.clean.iter().sum::<f64>() / p.clean.len() as f64;
            assert!(mean.abs() < 1e-3, "{mean}");
            assert!(p.clean.iter().chain(&p.second).all(|v| v.abs() <= 1.0));
            assert!(p.clean.iter().any(|&v| v != 0.0));
        }
        assert_ne!(a, toy_dataset(8, 5, 16_000, 16_000));
    }

    #[test]
    fn generated_files_are_byte_identical_per_seed() {
        let d1 = tempfile::tempdir().unwrap();
        let d2 = tempfile::tempdir().unwrap();
        let m = generate_toy_dataset(d1.path(), 3, 2).unwrap();
        generate_toy_dataset(d2.path(), 3, 2).unwrap();
        assert_eq!(m.pairs.len(), 2);
        for rel in ["manifest.tsv", "clean/clip_000.wav", "noise/clip_001.wav"] {
            assert_eq!(std::fs::read(d1.path().join(rel)).unwrap(), std::fs::read(d2.path().join(rel)).unwrap());
        }
        let loaded = load_dataset(&read_manifest(d1.path().join("manifest.tsv")).unwrap()).unwrap();
        assert_eq!(loaded, toy_dataset(3, 2, 16_000, 16_000));
    }

    #[test]
    fn mixed_sample_rates_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let a = AudioClip { samples: vec![0.1; 10], sample_rate: 16_000 };
        let b = AudioClip { samples: vec![0.1; 10], sample_rate: 8_000 };
        write_wav(dir.path().join("a.wav"), &a).unwrap();
        write_wav(dir.path().join("b.wav"), &b).unwrap();
        std::fs::write(dir.path().join("m.tsv"), "a.wav\ta.wav\na.wav\tb.wav\n").unwrap();
        let m = read_manifest(dir.path().join("m.tsv")).unwrap();
        assert!(matches!(load_dataset(&m), Err(Error::Dataset(_))));
    }
}
