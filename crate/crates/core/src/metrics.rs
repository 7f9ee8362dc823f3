//! Full-reference quality metrics on unit-range images.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::filter::{gaussian_taps, separable};
use crate::image::Image;

/// PSNR reported for identical images.
pub const PSNR_CAP: f64 = 99.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
pub const SSIM_C1: f64 = 0.01 * 0.01;
pub const SSIM_C2: f64 = 0.03 * 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
    pub rmse: f64,
    pub mae: f64,
}

impl MetricReport {
    pub fn compute(a: &Image, b: &Image) -> Result<Self> {
        Ok(MetricReport {
            psnr: psnr(a, b)?,
            ssim: ssim(a, b)?,
            rmse: rmse(a, b)?,
            mae: mae(a, b)?,
        })
    }
}

pub fn mse(a: &Image, b: &Image) -> Result<f64> {
    a.same_dims(b)?;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64)
}

pub fn rmse(a: &Image, b: &Image) -> Result<f64> {
    mse(a, b).map(f64::sqrt)
}

/// Mean absolute error, the per-pixel ℓ1 distance.
pub fn mae(a: &Image, b: &Image) -> Result<f64> {
    a.same_dims(b)?;
    Ok(a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / a.len() as f64)
}

/// PSNR in dB with unit peak, capped at [`PSNR_CAP`].
pub fn psnr(a: &Image, b: &Image) -> Result<f64> {
    Ok(psnr_from_mse(mse(a, b)?))
}

pub fn psnr_from_mse(mse: f64) -> f64 {
    if mse <= 0.0 {
        PSNR_CAP
    } else {
        (10.0 * (1.0 / mse).log10()).min(PSNR_CAP)
    }
}

/// Mean structural similarity with an 11×11 Gaussian window (σ = 1.5),
/// evaluated at every pixel with symmetric border reflection.
pub fn ssim(a: &Image, b: &Image) -> Result<f64> {
    a.same_dims(b)?;
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidImage(format!(
            "ssim needs both sides >= {SSIM_WINDOW}, got {w}x{h}"
        )));
    }
    let taps = gaussian_taps(SSIM_SIGMA)?;
    debug_assert_eq!(taps.len(), SSIM_WINDOW);
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mu_x = separable(x, w, h, &taps);
    let mu_y = separable(y, w, h, &taps);
    let e_xx = separable(&xx, w, h, &taps);
    let e_yy = separable(&yy, w, h, &taps);
    let e_xy = separable(&xy, w, h, &taps);
    let mut total = 0.0;
    for i in 0..w * h {
        total += ssim_local(mu_x[i], mu_y[i], e_xx[i], e_yy[i], e_xy[i]);
    }
    Ok(total / (w * h) as f64)
}

#[inline]
fn ssim_local(mx: f64, my: f64, exx: f64, eyy: f64, exy: f64) -> f64 {
    let vx = exx - mx * mx;
    let vy = eyy - my * my;
    let cov = exy - mx * my;
    ((2.0 * mx * my + SSIM_C1) * (2.0 * cov + SSIM_C2)) / ((mx * mx + my * my + SSIM_C1) * (vx + vy + SSIM_C2))
}
