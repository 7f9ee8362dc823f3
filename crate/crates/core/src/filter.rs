//! Spatial filtering primitives shared by synthesis, statistics and restoration.
//!
//! All neighbourhood operations use half-sample symmetric reflection at the
//! borders.

use crate::error::{Error, Result};
use crate::image::Image;

/// Normalised 2D convolution kernel with odd side lengths.
#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    width: usize,
    height: usize,
    weights: Vec<f64>,
}

impl Kernel {
    /// Builds a kernel and rescales it to unit sum.
    pub fn new(width: usize, height: usize, weights: Vec<f64>) -> Result<Self> {
        if width.is_multiple_of(2) || height.is_multiple_of(2) || weights.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "kernel must have odd sides and {width}x{height} weights"
            )));
        }
        let sum: f64 = weights.iter().sum();
        if !(sum.is_finite() && sum > 0.0) || weights.iter().any(|w| *w < 0.0) {
            return Err(Error::InvalidArgument("kernel weights must be non-negative with positive sum".into()));
        }
        Ok(Kernel {
            width,
            height,
            weights: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    /// Isotropic Gaussian truncated at radius `ceil(3σ)`.
    pub fn gaussian(sigma: f64) -> Result<Self> {
        let taps = gaussian_taps(sigma)?;
        let n = taps.len();
        let mut weights = Vec::with_capacity(n * n);
        for wy in &taps {
            for wx in &taps {
                weights.push(wy * wx);
            }
        }
        Kernel::new(n, n, weights)
    }

    /// Linear motion blur of `length` pixels at `angle` radians, rasterised by
    /// bilinear splatting of points spaced 0.1 px along the segment.
    pub fn motion(length: usize, angle: f64) -> Result<Self> {
        if length == 0 || !angle.is_finite() {
            return Err(Error::InvalidArgument("motion kernel needs a positive length".into()));
        }
        let half = (length as f64 - 1.0) / 2.0;
        let radius = half.ceil() as usize + 1;
        let side = 2 * radius + 1;
        let mut weights = vec![0.0; side * side];
        let (dx, dy) = (angle.cos(), angle.sin());
        let samples = ((length as f64 - 1.0) * 10.0).round() as usize + 1;
        for i in 0..samples {
            let t = if samples == 1 { 0.0 } else { -half + 2.0 * half * i as f64 / (samples - 1) as f64 };
            let px = radius as f64 + t * dx;
            let py = radius as f64 + t * dy;
            let (x0, y0) = (px.floor(), py.floor());
            let (fx, fy) = (px - x0, py - y0);
            for (ox, wx) in [(0usize, 1.0 - fx), (1, fx)] {
                for (oy, wy) in [(0usize, 1.0 - fy), (1, fy)] {
                    let (xi, yi) = (x0 as usize + ox, y0 as usize + oy);
                    if xi < side && yi < side {
                        weights[yi * side + xi] += wx * wy;
                    }
                }
            }
        }
        Kernel::new(side, side, weights)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }
}

/// Normalised 1D Gaussian taps of radius `ceil(3σ)`.
pub fn gaussian_taps(sigma: f64) -> Result<Vec<f64>> {
    if !(sigma.is_finite() && sigma > 0.0) {
        return Err(Error::InvalidArgument(format!("gaussian sigma must be positive, got {sigma}")));
    }
    let radius = (3.0 * sigma).ceil() as isize;
    let taps: Vec<f64> = (-radius..=radius)
        .map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f64 = taps.iter().sum();
    Ok(taps.into_iter().map(|t| t / sum).collect())
}

/// Direct 2D convolution (correlation with the flipped kernel).
pub fn convolve(img: &Image, kernel: &Kernel) -> Image {
    let (w, h) = (img.width(), img.height());
    let (rx, ry) = ((kernel.width / 2) as isize, (kernel.height / 2) as isize);
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h as isize {
        for x in 0..w as isize {
            let mut acc = 0.0;
            for ky in 0..kernel.height as isize {
                for kx in 0..kernel.width as isize {
                    let k = kernel.weights[(ky * kernel.width as isize + kx) as usize];
                    if k != 0.0 {
                        acc += k * img.get_reflect(x + rx - kx, y + ry - ky);
                    }
                }
            }
            out.push(acc);
        }
    }
    img.with_data(out)
}

/// Separable symmetric filter over an unclamped buffer.
pub(crate) fn separable(data: &[f64], w: usize, h: usize, taps: &[f64]) -> Vec<f64> {
    let r = (taps.len() / 2) as isize;
    let mut tmp = vec![0.0; w * h];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let xi = crate::image::reflect_index(x as isize + k as isize - r, w);
                acc += t * row[xi];
            }
            tmp[y * w + x] = acc;
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let mut acc = 0.0;
            for (k, t) in taps.iter().enumerate() {
                let yi = crate::image::reflect_index(y as isize + k as isize - r, h);
                acc += t * tmp[yi * w + x];
            }
            out[y * w + x] = acc;
        }
    }
    out
}

/// Gaussian blur via separable taps; equivalent to `convolve` with
/// [`Kernel::gaussian`] up to rounding.
pub fn gaussian_blur(img: &Image, sigma: f64) -> Result<Image> {
    let taps = gaussian_taps(sigma)?;
    Ok(img.with_data(separable(img.data(), img.width(), img.height(), &taps)))
}

/// `img − mean3x3(img)`, unclamped.
pub fn highpass_residual(img: &Image) -> Vec<f64> {
    let taps = [1.0 / 3.0; 3];
    let smooth = separable(img.data(), img.width(), img.height(), &taps);
    img.data().iter().zip(smooth).map(|(v, s)| v - s).collect()
}

/// 4-neighbour 3×3 Laplacian, unclamped.
pub fn laplacian(img: &Image) -> Vec<f64> {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let c = img.get_reflect(x, y);
            out.push(
                img.get_reflect(x - 1, y) + img.get_reflect(x + 1, y) + img.get_reflect(x, y - 1)
                    + img.get_reflect(x, y + 1)
                    - 4.0 * c,
            );
        }
    }
    out
}

/// 3×3 median filter.
pub fn median3(img: &Image) -> Image {
    let (w, h) = (img.width() as isize, img.height() as isize);
    let mut out = Vec::with_capacity((w * h) as usize);
    let mut win = [0.0f64; 9];
    for y in 0..h {
        for x in 0..w {
            let mut k = 0;
            for dy in -1..=1 {
                for dx in -1..=1 {
                    win[k] = img.get_reflect(x + dx, y + dy);
                    k += 1;
                }
            }
            win.sort_unstable_by(f64::total_cmp);
            out.push(win[4]);
        }
    }
    img.with_data(out)
}

/// Linear-interpolated percentile (`q` in `[0, 100]`) of a sample set.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    percentile_sorted(&sorted, q)
}

pub(crate) fn percentile_sorted(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let pos = (q / 100.0).clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + (sorted[hi] - sorted[lo]) * frac
}

pub fn median(values: &[f64]) -> f64 {
    percentile(values, 50.0)
}
