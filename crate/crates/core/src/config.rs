//! `key = value` run configuration with `#` comments.

use std::path::{Path, PathBuf};

use crate::error::{Error, Result};
use crate::metrics::SsnrConfig;
use crate::pipeline::WindowInit;
use crate::training::TrainConfig;

/// Everything a `train` run needs. Every field has a default.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub train: TrainConfig,
    pub ssnr: SsnrConfig,
    /// Manifest of real data; when absent a toy corpus is generated in memory.
    pub manifest: Option<PathBuf>,
    pub toy_clips: usize,
    pub toy_seed: u64,
    pub sample_rate: u32,
    pub checkpoint: PathBuf,
    pub loss_csv: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            train: TrainConfig::default(),
            ssnr: SsnrConfig::default(),
            manifest: None,
            toy_clips: 20,
            toy_seed: 1,
            sample_rate: 16_000,
            checkpoint: PathBuf::from("model.bfly"),
            loss_csv: PathBuf::from("loss.csv"),
        }
    }
}

/// Every recognised key, in documentation order.
pub const KEYS: &[&str] = &[
    "n",
    "hop",
    "hidden",
    "analysis_window",
    "synthesis_window",
    "learning_rate",
    "beta1",
    "beta2",
    "adam_epsilon",
    "batch_size",
    "max_steps",
    "seed",
    "train_window_analysis",
    "train_window_synthesis",
    "train_fft_forward",
    "train_fft_inverse",
    "alpha",
    "lambda",
    "loss_epsilon",
    "snr_list",
    "crop_length",
    "manifest",
    "toy_clips",
    "toy_seed",
    "sample_rate",
    "checkpoint",
    "loss_csv",
    "ssnr_frame_len",
    "ssnr_hop",
    "ssnr_floor_db",
    "ssnr_ceil_db",
];

fn parse_num<T: std::str::FromStr>(value: &str, line: usize, key: &str) -> Result<T> {
    value.parse().map_err(|_| Error::Config {
        line,
        reason: format!("'{value}' is not a valid value for {key}"),
    })
}

fn parse_bool(value: &str, line: usize, key: &str) -> Result<bool> {
    match value {
        "true" | "yes" | "1" => Ok(true),
        "false" | "no" | "0" => Ok(false),
        _ => Err(Error::Config {
            line,
            reason: format!("'{value}' is not a boolean for {key}"),
        }),
    }
}

fn parse_window(value: &str, line: usize, key: &str) -> Result<WindowInit> {
    match value {
        "hann" => Ok(WindowInit::Hann),
        "ones" => Ok(WindowInit::Ones),
        _ => Err(Error::Config {
            line,
            reason: format!("{key} must be 'hann' or 'ones', got '{value}'"),
        }),
    }
}

/// Parses config text over the defaults. Relative paths are joined onto `base`.
pub fn parse_config(text: &str, base: &Path) -> Result<RunConfig> {
    let mut cfg = RunConfig::default();
    for (k, raw) in text.lines().enumerate() {
        let line = k + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Config {
                line,
                reason: format!("expected 'key = value', got '{content}'"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        let t = &mut cfg.train;
        match key {
            "n" => t.n = parse_num(value, line, key)?,
            "hop" => t.hop = parse_num(value, line, key)?,
            "hidden" => t.hidden = parse_num(value, line, key)?,
            "analysis_window" => t.analysis_window = parse_window(value, line, key)?,
            "synthesis_window" => t.synthesis_window = parse_window(value, line, key)?,
            "learning_rate" => t.adam.learning_rate = parse_num(value, line, key)?,
            "beta1" => t.adam.beta1 = parse_num(value, line, key)?,
            "beta2" => t.adam.beta2 = parse_num(value, line, key)?,
            "adam_epsilon" => t.adam.epsilon = parse_num(value, line, key)?,
            "batch_size" => t.batch_size = parse_num(value, line, key)?,
            "max_steps" => t.max_steps = parse_num(value, line, key)?,
            "seed" => t.seed = parse_num(value, line, key)?,
            "train_window_analysis" => t.flags.window_analysis = parse_bool(value, line, key)?,
            "train_window_synthesis" => t.flags.window_synthesis = parse_bool(value, line, key)?,
            "train_fft_forward" => t.flags.fft_forward = parse_bool(value, line, key)?,
            "train_fft_inverse" => t.flags.fft_inverse = parse_bool(value, line, key)?,
            "alpha" => t.loss.alpha = parse_num(value, line, key)?,
            "lambda" => t.loss.lambda = parse_num(value, line, key)?,
            "loss_epsilon" => t.loss.epsilon = parse_num(value, line, key)?,
            "snr_list" => {
                t.snr_list = value
                    .split([',', ' '])
                    .filter(|s| !s.is_empty())
                    .map(|s| parse_num(s, line, key))
                    .collect::<Result<_>>()?
            }
            "crop_length" => t.crop_length = parse_num(value, line, key)?,
            "manifest" => cfg.manifest = Some(base.join(value)),
            "toy_clips" => cfg.toy_clips = parse_num(value, line, key)?,
            "toy_seed" => cfg.toy_seed = parse_num(value, line, key)?,
            "sample_rate" => cfg.sample_rate = parse_num(value, line, key)?,
            "checkpoint" => cfg.checkpoint = base.join(value),
            "loss_csv" => cfg.loss_csv = base.join(value),
            "ssnr_frame_len" => cfg.ssnr.frame_len = parse_num(value, line, key)?,
            "ssnr_hop" => cfg.ssnr.hop = parse_num(value, line, key)?,
            "ssnr_floor_db" => cfg.ssnr.floor_db = parse_num(value, line, key)?,
            "ssnr_ceil_db" => cfg.ssnr.ceil_db = parse_num(value, line, key)?,
            _ => {
                return Err(Error::Config {
                    line,
                    reason: format!("unknown key '{key}'"),
                })
            }
        }
    }
    Ok(cfg)
}

/// Reads a config file; relative paths inside it resolve against the
/// current directory.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_config(&text, Path::new(""))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::training::TrainableFlags;

    #[test]
    fn empty_text_gives_defaults() {
        assert_eq!(parse_config("# nothing\n\n", Path::new("")).unwrap(), RunConfig::default());
    }

    #[test]
    fn parses_every_key() {
        let text = "
            n = 64
            hop = 16  # quarter hop
            hidden = 8
            analysis_window = ones
            synthesis_window = hann
            learning_rate = 0.01
            beta1 = 0.8
            beta2 = 0.99
            adam_epsilon = 1e-6
            batch_size = 3
            max_steps = 7
            seed = 42
            train_window_analysis = false
            train_window_synthesis = false
            train_fft_forward = true
            train_fft_inverse = true
            alpha = 0.5
            lambda = 0.2
            loss_epsilon = 1e-9
            snr_list = 2.5, 7.5 12.5
            crop_length = 4000
            manifest = data/m.tsv
            toy_clips = 3
            toy_seed = 9
            sample_rate = 8000
            checkpoint = out.bfly
            loss_csv = curve.csv
            ssnr_frame_len = 128
            ssnr_hop = 64
            ssnr_floor_db = -20
            ssnr_ceil_db = 30
        ";
        let cfg = parse_config(text, Path::new("/base")).unwrap();
        let t = &cfg.train;
        assert_eq!((t.n, t.hop, t.hidden), (64, 16, 8));
        assert_eq!((t.analysis_window, t.synthesis_window), (WindowInit::Ones, WindowInit::Hann));
        assert_eq!(t.adam.learning_rate, 0.01);
        assert_eq!((t.adam.beta1, t.adam.beta2, t.adam.epsilon), (0.8, 0.99, 1e-6));
        assert_eq!((t.batch_size, t.max_steps, t.seed), (3, 7, 42));
        assert_eq!(t.flags, TrainableFlags::FIXED_WINDOW_TRAINABLE_FFT);
        assert_eq!((t.loss.alpha, t.loss.lambda, t.loss.epsilon), (0.5, 0.2, 1e-9));
        assert_eq!(t.snr_list, vec![2.5, 7.5, 12.5]);
        assert_eq!(t.crop_length, 4000);
        assert_eq!(cfg.manifest, Some(PathBuf::from("/base/data/m.tsv")));
        assert_eq!((cfg.toy_clips, cfg.toy_seed, cfg.sample_rate), (3, 9, 8000));
        assert_eq!(cfg.checkpoint, PathBuf::from("/base/out.bfly"));
        assert_eq!(cfg.loss_csv, PathBuf::from("/base/curve.csv"));
        assert_eq!(
            cfg.ssnr,
            SsnrConfig { frame_len: 128, hop: 64, floor_db: -20.0, ceil_db: 30.0 }
        );
        assert_eq!(text.lines().filter(|l| l.contains('=')).count(), KEYS.len());
    }

    #[test]
    fn errors_carry_line_numbers() {
        let cases = [
            ("n = 8\nbogus = 1\n", 2),
            ("\n\nn = eight\n", 3),
            ("train_fft_forward = maybe\n", 1),
            ("just words\n", 1),
            ("analysis_window = kaiser\n", 1),
        ];
        for (text, line) in cases {
            match parse_config(text, Path::new("")) {
                Err(Error::Config { line: l, .. }) => assert_eq!(l, line, "{text:?}"),
                other => panic!("{text:?}: {other:?}"),
            }
        }
    }
}
