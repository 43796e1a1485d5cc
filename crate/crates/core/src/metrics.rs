//! Image-quality metrics for unit-range images: MSE, PSNR and SSIM.

use serde::{Deserialize, Serialize};

use crate::image::RgbImage;
use crate::{Error, Result};

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QualityReport {
    pub mse: f64,
    /// `+∞` when `mse` is zero.
    pub psnr_db: f64,
    pub ssim: f64,
}

/// Which signal SSIM compares.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SsimMode {
    /// Rec. 601 luma.
    #[default]
    Luma,
    /// Mean of the per-channel SSIM values.
    ChannelMean,
}

fn check_shapes(a: &RgbImage, b: &RgbImage) -> Result<()> {
    if !a.same_shape(b) || a.data.len() != b.data.len() {
        return Err(Error::Shape(format!(
            "images differ in size: {}×{} vs {}×{}",
            a.width, a.height, b.width, b.height
        )));
    }
    Ok(())
}

/// Mean over all pixels and channels of the squared difference.
pub fn mse(pred: &RgbImage, target: &RgbImage) -> Result<f64> {
    check_shapes(pred, target)?;
    if pred.data.is_empty() {
        return Err(Error::Shape("empty images".into()));
    }
    let sum: f64 = pred
        .data
        .iter()
        .zip(&target.data)
        .map(|(&p, &t)| {
            let d = p as f64 - t as f64;
            d * d
        })
        .sum();
    Ok(sum / pred.data.len() as f64)
}

/// Peak signal-to-noise ratio for peak value 1.0.
pub fn psnr(mse: f64) -> Result<f64> {
    if !(mse >= 0.0) {
        return Err(Error::Validation(format!("MSE must be non-negative, got {mse}")));
    }
    if mse == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(-10.0 * mse.log10())
}

fn gaussian_window() -> Vec<f64> {
    let half = (SSIM_WINDOW / 2) as f64;
    let g: Vec<f64> = (0..SSIM_WINDOW)
        .map(|i| {
            let x = i as f64 - half;
            (-(x * x) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp()
        })
        .collect();
    let total: f64 = g.iter().sum();
    let mut w = Vec::with_capacity(SSIM_WINDOW * SSIM_WINDOW);
    for gy in &g {
        for gx in &g {
            w.push(gy * gx / (total * total));
        }
    }
    w
}

/// Mean local SSIM of two single-channel images over all window positions
/// that fit entirely inside the image.
pub fn ssim_plane(a: &[f64], b: &[f64], width: usize, height: usize) -> Result<f64> {
    if a.len() != width * height || b.len() != width * height {
        return Err(Error::Shape("plane length does not match its dimensions".into()));
    }
    if width < SSIM_WINDOW || height < SSIM_WINDOW {
        return Err(Error::Shape(format!(
            "SSIM needs at least {SSIM_WINDOW}×{SSIM_WINDOW} pixels, got {width}×{height}"
        )));
    }
    let w = gaussian_window();
    let mut total = 0.0;
    let mut count = 0usize;
    for y0 in 0..=height - SSIM_WINDOW {
        for x0 in 0..=width - SSIM_WINDOW {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in 0..SSIM_WINDOW {
                let row = (y0 + dy) * width + x0;
                for dx in 0..SSIM_WINDOW {
                    let k = w[dy * SSIM_WINDOW + dx];
                    let va = a[row + dx];
                    let vb = b[row + dx];
                    ma += k * va;
                    mb += k * vb;
                    saa += k * va * va;
                    sbb += k * vb * vb;
                    sab += k * va * vb;
                }
            }
            let var_a = saa - ma * ma;
            let var_b = sbb - mb * mb;
            let cov = sab - ma * mb;
            let num = (2.0 * ma * mb + SSIM_C1) * (2.0 * cov + SSIM_C2);
            let den = (ma * ma + mb * mb + SSIM_C1) * (var_a + var_b + SSIM_C2);
            total += num / den;
            count += 1;
        }
    }
    Ok(total / count as f64)
}

pub fn ssim_with(a: &RgbImage, b: &RgbImage, mode: SsimMode) -> Result<f64> {
    check_shapes(a, b)?;
    let (w, h) = (a.width as usize, a.height as usize);
    match mode {
        SsimMode::Luma => ssim_plane(&a.luma(), &b.luma(), w, h),
        SsimMode::ChannelMean => {
            let mut sum = 0.0;
            for c in 0..3 {
                sum += ssim_plane(&a.channel(c), &b.channel(c), w, h)?;
            }
            Ok(sum / 3.0)
        }
    }
}

/// SSIM on luma with an 11×11 Gaussian window (σ = 1.5).
pub fn ssim(a: &RgbImage, b: &RgbImage) -> Result<f64> {
    ssim_with(a, b, SsimMode::Luma)
}

pub fn evaluate(pred: &RgbImage, target: &RgbImage) -> Result<QualityReport> {
    let mse = mse(pred, target)?;
    Ok(QualityReport {
        mse,
        psnr_db: psnr(mse)?,
        ssim: ssim(pred, target)?,
    })
}
