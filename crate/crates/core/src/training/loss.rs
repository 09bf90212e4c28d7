//! Power-law compressed spectral loss.
//!
//! `L = mean(|Ŷ|^α − |Y|^α)² + λ·mean|Ŷ^α − Y^α|²` where `Y^α` keeps the phase
//! of `Y` and raises its magnitude to `α`. Magnitudes are smoothed as
//! `sqrt(re² + im² + ε²)` so the power stays differentiable at the origin.

use crate::butterfly::SplitComplex;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LossConfig {
    pub alpha: f64,
    pub lambda: f64,
    pub epsilon: f64,
}

impl Default for LossConfig {
    fn default() -> Self {
        LossConfig {
            alpha: 0.3,
            lambda: 0.1,
            epsilon: 1e-8,
        }
    }
}

impl LossConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::Numeric(format!("alpha {} outside (0, 1]", self.alpha)));
        }
        if !(self.lambda >= 0.0) {
            return Err(Error::Numeric(format!("lambda {} is negative", self.lambda)));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::Numeric(format!("epsilon {} must be positive", self.epsilon)));
        }
        Ok(())
    }
}

/// Smoothed magnitude and the compression gain `m^{α−1}`.
#[inline]
fn magnitude_and_gain(re: f64, im: f64, alpha: f64, eps: f64) -> (f64, f64) {
    let m = (re * re + im * im + eps * eps).sqrt();
    (m, m.powf(alpha - 1.0))
}

/// `|Y|^α · e^{j∠Y}` with an ε-smoothed magnitude.
pub fn complex_compress(y: &SplitComplex, alpha: f64, epsilon: f64) -> SplitComplex {
    let mut out = SplitComplex::zeros(y.len());
    for i in 0..y.len() {
        let (_, gain) = magnitude_and_gain(y.re[i], y.im[i], alpha, epsilon);
        out.re[i] = gain * y.re[i];
        out.im[i] = gain * y.im[i];
    }
    out
}

/// Per-bin contribution before the mean.
#[inline]
fn bin_loss(pr: f64, pi: f64, tr: f64, ti: f64, cfg: &LossConfig) -> f64 {
    let (pm, pg) = magnitude_and_gain(pr, pi, cfg.alpha, cfg.epsilon);
    let (tm, tg) = magnitude_and_gain(tr, ti, cfg.alpha, cfg.epsilon);
    let mag = pm * pg - tm * tg;
    let dr = pg * pr - tg * tr;
    let di = pg * pi - tg * ti;
    mag * mag + cfg.lambda * (dr * dr + di * di)
}

/// Gradient of [`bin_loss`] with respect to `(pr, pi)`.
#[inline]
fn bin_loss_grad(pr: f64, pi: f64, tr: f64, ti: f64, cfg: &LossConfig) -> (f64, f64) {
    let a = cfg.alpha;
    let (pm, pg) = magnitude_and_gain(pr, pi, a, cfg.epsilon);
    let (tm, tg) = magnitude_and_gain(tr, ti, a, cfg.epsilon);
    // m^α = m · m^{α-1}
    let mag = pm * pg - tm * tg;
    // ∂(m^α)/∂pr = α m^{α-2} pr
    let dpow = a * pg / pm;
    let mut gr = 2.0 * mag * dpow * pr;
    let mut gi = 2.0 * mag * dpow * pi;

    let dr = pg * pr - tg * tr;
    let di = pg * pi - tg * ti;
    // c = m^{α-1}·p, ∂c_r/∂pr = m^{α-1} + (α-1) m^{α-3} pr², cross term (α-1) m^{α-3} pr pi
    let k = (a - 1.0) * pg / (pm * pm);
    let crr = pg + k * pr * pr;
    let cii = pg + k * pi * pi;
    let cri = k * pr * pi;
    gr += 2.0 * cfg.lambda * (dr * crr + di * cri);
    gi += 2.0 * cfg.lambda * (dr * cri + di * cii);
    (gr, gi)
}

fn check_pair(pred_len: usize, target_len: usize, frame: usize) -> Result<()> {
    if pred_len != target_len {
        return Err(Error::shape(format!(
            "frame {frame}: prediction has {pred_len} bins, target has {target_len}"
        )));
    }
    Ok(())
}

/// Mean loss over every bin of every frame.
pub fn loss(pred: &[SplitComplex], target: &[SplitComplex], cfg: &LossConfig) -> Result<f64> {
    let stacked: Vec<Vec<f64>> = pred.iter().map(|p| p.to_stacked()).collect();
    let views: Vec<&[f64]> = stacked.iter().map(|v| v.as_slice()).collect();
    stacked_loss(&views, target, cfg)
}

pub(crate) fn stacked_loss(pred: &[&[f64]], target: &[SplitComplex], cfg: &LossConfig) -> Result<f64> {
    if pred.len() != target.len() {
        return Err(Error::shape(format!(
            "{} predicted frames but {} target frames",
            pred.len(),
            target.len()
        )));
    }
    let mut total = 0.0;
    let mut count = 0usize;
    for (f, (p, t)) in pred.iter().zip(target).enumerate() {
        check_pair(p.len() / 2, t.len(), f)?;
        let n = t.len();
        for i in 0..n {
            let (pr, pi) = (p[i], p[n + i]);
            if !(pr.is_finite() && pi.is_finite() && t.re[i].is_finite() && t.im[i].is_finite()) {
                return Err(Error::Numeric(format!("NaN or infinity in frame {f}, bin {i}")));
            }
            total += bin_loss(pr, pi, t.re[i], t.im[i], cfg);
        }
        count += n;
    }
    if count == 0 {
        return Ok(0.0);
    }
    Ok(total / count as f64)
}

/// Gradient of [`stacked_loss`] per prediction frame, stacked layout.
pub(crate) fn stacked_loss_grad(pred: &[&[f64]], target: &[SplitComplex], cfg: &LossConfig) -> Vec<Vec<f64>> {
    let count: usize = target.iter().map(|t| t.len()).sum();
    let scale = if count == 0 { 0.0 } else { 1.0 / count as f64 };
    pred.iter()
        .zip(target)
        .map(|(p, t)| {
            let n = t.len();
            let mut g = vec![0.0; 2 * n];
            for i in 0..n {
                let (gr, gi) = bin_loss_grad(p[i], p[n + i], t.re[i], t.im[i], cfg);
                g[i] = gr * scale;
                g[n + i] = gi * scale;
            }
            g
        })
        .collect()
}
