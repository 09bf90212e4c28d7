//! Segmental SNR and a log-spectrum diagnostic.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::pipeline::{frame_count, ReferenceStft};
use crate::training::ClipEval;

/// Frames below this clean energy are treated as silent and skipped.
pub const SILENCE_ENERGY: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SsnrConfig {
    pub frame_len: usize,
    pub hop: usize,
    pub floor_db: f64,
    pub ceil_db: f64,
}

impl Default for SsnrConfig {
    fn default() -> Self {
        SsnrConfig {
            frame_len: 256,
            hop: 128,
            floor_db: -10.0,
            ceil_db: 35.0,
        }
    }
}

impl SsnrConfig {
    pub fn validate(&self) -> Result<()> {
        if self.frame_len == 0 || self.hop == 0 {
            return Err(Error::shape("SSNR frame length and hop must be positive"));
        }
        if !(self.floor_db < self.ceil_db) {
            return Err(Error::shape(format!(
                "SSNR floor {} dB is not below ceiling {} dB",
                self.floor_db, self.ceil_db
            )));
        }
        Ok(())
    }
}

/// Mean of clipped per-frame SNRs over non-silent frames.
pub fn ssnr(clean: &[f64], estimate: &[f64], cfg: &SsnrConfig) -> Result<f64> {
    cfg.validate()?;
    if clean.len() != estimate.len() {
        return Err(Error::shape(format!(
            "clean has {} samples, estimate has {}",
            clean.len(),
            estimate.len()
        )));
    }
    if clean.len() < cfg.frame_len {
        return Err(Error::TooShort {
            len: clean.len(),
            frame: cfg.frame_len,
        });
    }
    let mut total = 0.0;
    let mut voiced = 0usize;
    for f in 0..frame_count(clean.len(), cfg.frame_len, cfg.hop) {
        let range = f * cfg.hop..f * cfg.hop + cfg.frame_len;
        let signal: f64 = clean[range.clone()].iter().map(|v| v * v).sum();
        if signal < SILENCE_ENERGY {
            continue;
        }
        let error: f64 = clean[range.clone()]
            .iter()
            .zip(&estimate[range])
            .map(|(c, e)| (c - e) * (c - e))
            .sum();
        let db = 10.0 * (signal / (error + 1e-20)).log10();
        total += db.clamp(cfg.floor_db, cfg.ceil_db);
        voiced += 1;
    }
    if voiced == 0 {
        return Err(Error::UndefinedMetric("no frame of the clean signal carries energy".into()));
    }
    Ok(total / voiced as f64)
}

/// Floor applied to magnitudes before the logarithm.
pub const LOG_FLOOR: f64 = 1e-8;

/// Per-bin mean natural-log magnitude over all frames.
pub fn spectral_diag(signal: &[f64], reference: &ReferenceStft) -> Result<Vec<f64>> {
    let spectra = reference.analyze(signal)?;
    let mut mean = vec![0.0; reference.n];
    for frame in &spectra {
        for (k, m) in mean.iter_mut().enumerate() {
            let (re, im) = frame.get(k);
            *m += (re * re + im * im).sqrt().max(LOG_FLOOR).ln();
        }
    }
    let frames = spectra.len() as f64;
    mean.iter_mut().for_each(|m| *m /= frames);
    Ok(mean)
}

pub fn metrics_csv(rows: &[ClipEval]) -> String {
    let mut out = String::from("clip_id,ssnr_in,ssnr_out,loss\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{}", r.clip_id, r.ssnr_in, r.ssnr_out, r.loss);
    }
    out
}

pub fn write_metrics_csv(path: impl AsRef<Path>, rows: &[ClipEval]) -> Result<()> {
    std::fs::write(path.as_ref(), metrics_csv(rows)).map_err(|e| Error::io(path, e))
}
