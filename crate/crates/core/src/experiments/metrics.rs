use crate::error::{check_len, Error, Result};

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 300.0;
pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MetricsRecord {
    pub mae: f64,
    pub psnr: f64,
    pub ssim: f64,
}

pub fn mae(x: &[f64], reference: &[f64]) -> Result<f64> {
    check_len(reference.len(), x.len())?;
    if x.is_empty() {
        return Err(Error::Empty);
    }
    Ok(x.iter().zip(reference).map(|(a, b)| (a - b).abs()).sum::<f64>() / x.len() as f64)
}

/// `20·log₁₀(peak) − 10·log₁₀(mse)` with `peak = max(ref)`, capped at 300 dB.
///
/// A non-positive reference maximum falls back to `max|ref|`, then to 1.
pub fn psnr(x: &[f64], reference: &[f64]) -> Result<f64> {
    check_len(reference.len(), x.len())?;
    if x.is_empty() {
        return Err(Error::Empty);
    }
    let mse = x.iter().zip(reference).map(|(a, b)| (a - b) * (a - b)).sum::<f64>() / x.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP);
    }
    let mut peak = reference.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if peak <= 0.0 {
        peak = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    }
    if peak == 0.0 {
        peak = 1.0;
    }
    Ok((20.0 * peak.log10() - 10.0 * mse.log10()).min(PSNR_CAP))
}

fn square_side(n: usize) -> Result<usize> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n {
        return Err(Error::ConfigInvalid(format!("SSIM needs a square image, got {n} pixels")));
    }
    if side < SSIM_WINDOW {
        return Err(Error::SideTooSmall(side));
    }
    Ok(side)
}

/// SSIM with dynamic range `L = max(ref) − min(ref)` (1 for a flat reference).
pub fn ssim(x: &[f64], reference: &[f64]) -> Result<f64> {
    let (lo, hi) = reference.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
    let range = if hi > lo { hi - lo } else { 1.0 };
    ssim_with_range(x, reference, range)
}

/// Mean local SSIM over all fully contained 11×11 Gaussian windows (σ = 1.5).
pub fn ssim_with_range(x: &[f64], reference: &[f64], range: f64) -> Result<f64> {
    check_len(reference.len(), x.len())?;
    let side = square_side(x.len())?;
    let c1 = (K1 * range).powi(2);
    let c2 = (K2 * range).powi(2);

    let w = gaussian_window();
    let blur = |img: &[f64]| filter_valid(img, side, &w);
    let xy: Vec<f64> = x.iter().zip(reference).map(|(a, b)| a * b).collect();
    let xx: Vec<f64> = x.iter().map(|a| a * a).collect();
    let yy: Vec<f64> = reference.iter().map(|b| b * b).collect();
    let (mx, my) = (blur(x), blur(reference));
    let (sxx, syy, sxy) = (blur(&xx), blur(&yy), blur(&xy));

    let total: f64 = (0..mx.len())
        .map(|i| {
            let (ux, uy) = (mx[i], my[i]);
            let vx = sxx[i] - ux * ux;
            let vy = syy[i] - uy * uy;
            let cov = sxy[i] - ux * uy;
            ((2.0 * ux * uy + c1) * (2.0 * cov + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2))
        })
        .sum();
    Ok(total / mx.len() as f64)
}

pub fn metrics(x: &[f64], reference: &[f64]) -> Result<MetricsRecord> {
    Ok(MetricsRecord { mae: mae(x, reference)?, psnr: psnr(x, reference)?, ssim: ssim(x, reference)? })
}

fn gaussian_window() -> Vec<f64> {
    let r = (SSIM_WINDOW / 2) as f64;
    let w: Vec<f64> =
        (0..SSIM_WINDOW).map(|i| (-(i as f64 - r).powi(2) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()).collect();
    let s: f64 = w.iter().sum();
    w.into_iter().map(|v| v / s).collect()
}

/// Separable correlation keeping only fully contained windows.
fn filter_valid(img: &[f64], side: usize, w: &[f64]) -> Vec<f64> {
    let out = side + 1 - w.len();
    let mut rows = vec![0.0; side * out];
    for i in 0..side {
        for j in 0..out {
            rows[i * out + j] = w.iter().enumerate().map(|(k, wk)| wk * img[i * side + j + k]).sum();
        }
    }
    let mut res = vec![0.0; out * out];
    for i in 0..out {
        for j in 0..out {
            res[i * out + j] = w.iter().enumerate().map(|(k, wk)| wk * rows[(i + k) * out + j]).sum();
        }
    }
    res
}
