//! Degradation-specific residual operators.
//!
//! Each operator pairs a fixed classical filter `base` with the residual
//! update `out = img − d·s·(img − base(img))`, so a disabled gate (`d = 0`) or
//! zero strength returns the input unchanged.

use serde::Serialize;

use crate::degrade::DegradationKind;
use crate::error::{Error, Result};
use crate::evidential::GateDecision;
use crate::filter::{gaussian_blur, highpass_residual, median, median3, percentile_sorted};
use crate::image::Image;

pub const STRETCH_LOW_PERCENTILE: f64 = 1.0;
pub const STRETCH_HIGH_PERCENTILE: f64 = 99.0;
pub const UNSHARP_SIGMA: f64 = 1.5;
pub const UNSHARP_AMOUNT: f64 = 1.0;
/// Radius of the range-weighted smoothing window (5×5).
pub const SMOOTH_RADIUS: isize = 2;
pub const SMOOTH_SPATIAL_SIGMA: f64 = 1.5;
/// The range σ is this multiple of the estimated noise σ...
pub const SMOOTH_RANGE_FACTOR: f64 = 2.0;
/// ...but never below this.
pub const SMOOTH_RANGE_FLOOR: f64 = 0.02;

/// Percentile stretch mapping (p1, p99) onto [0, 1]; flat images pass through.
pub fn contrast_stretch(img: &Image) -> Image {
    let mut sorted = img.data().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, STRETCH_LOW_PERCENTILE);
    let hi = percentile_sorted(&sorted, STRETCH_HIGH_PERCENTILE);
    if hi - lo < 1e-6 {
        return img.clone();
    }
    img.with_data(img.data().iter().map(|v| (v - lo) / (hi - lo)).collect())
}

/// `img + amount·(img − G_σ ∗ img)`.
pub fn unsharp_mask(img: &Image) -> Image {
    let smooth = gaussian_blur(img, UNSHARP_SIGMA).expect("positive sigma");
    img.with_data(
        img.data()
            .iter()
            .zip(smooth.data())
            .map(|(v, s)| v + UNSHARP_AMOUNT * (v - s))
            .collect(),
    )
}

/// Noise σ estimated from the MAD of the 3×3 high-pass residual.
pub fn estimate_noise_sigma(img: &Image) -> f64 {
    let resid = highpass_residual(img);
    let med = median(&resid);
    let dev: Vec<f64> = resid.iter().map(|r| (r - med).abs()).collect();
    // A 3×3 box residual keeps √(8/9) of white-noise σ.
    median(&dev) * 1.4826 / (8.0f64 / 9.0).sqrt()
}

/// 3×3 median, then 5×5 smoothing weighted by spatial and intensity distance.
pub fn denoise(img: &Image) -> Image {
    let sigma_r = (SMOOTH_RANGE_FACTOR * estimate_noise_sigma(img)).max(SMOOTH_RANGE_FLOOR);
    let med = median3(img);
    let (w, h) = (med.width() as isize, med.height() as isize);
    let inv_s = 1.0 / (2.0 * SMOOTH_SPATIAL_SIGMA * SMOOTH_SPATIAL_SIGMA);
    let inv_r = 1.0 / (2.0 * sigma_r * sigma_r);
    let mut out = Vec::with_capacity((w * h) as usize);
    for y in 0..h {
        for x in 0..w {
            let c = med.get_reflect(x, y);
            let (mut num, mut den) = (0.0, 0.0);
            for dy in -SMOOTH_RADIUS..=SMOOTH_RADIUS {
                for dx in -SMOOTH_RADIUS..=SMOOTH_RADIUS {
                    let v = med.get_reflect(x + dx, y + dy);
                    let wt = (-((dx * dx + dy * dy) as f64) * inv_s - (v - c) * (v - c) * inv_r).exp();
                    num += wt * v;
                    den += wt;
                }
            }
            out.push(num / den);
        }
    }
    med.with_data(out)
}

/// The unscaled restoration filter for one kind.
pub fn base_op(img: &Image, kind: DegradationKind) -> Image {
    match kind {
        DegradationKind::Contrast => contrast_stretch(img),
        DegradationKind::Blur => unsharp_mask(img),
        DegradationKind::Noise => denoise(img),
    }
}

pub fn check_strength(strength: f64) -> Result<()> {
    if (0.0..=1.0).contains(&strength) {
        Ok(())
    } else {
        Err(Error::Domain(format!("strength must lie in [0, 1], got {strength}")))
    }
}

/// Gated residual update `img − d·s·(img − base(img))`, clamped to [0, 1].
pub fn apply_drm(img: &Image, kind: DegradationKind, enabled: bool, strength: f64) -> Result<Image> {
    check_strength(strength)?;
    if !enabled || strength == 0.0 {
        return Ok(img.clone());
    }
    let base = base_op(img, kind);
    Ok(img.with_data(
        img.data()
            .iter()
            .zip(base.data())
            .map(|(v, b)| v - strength * (v - b))
            .collect(),
    ))
}

/// One configured operator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Operator {
    pub kind: DegradationKind,
    pub strength: f64,
}

/// The three operators with their strengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OperatorBank {
    pub contrast: Operator,
    pub deblur: Operator,
    pub denoise: Operator,
}

impl Default for OperatorBank {
    fn default() -> Self {
        OperatorBank::from_strengths([1.0; 3]).expect("unit strengths")
    }
}

impl OperatorBank {
    /// Strengths indexed by [`DegradationKind::index`].
    pub fn from_strengths(strengths: [f64; 3]) -> Result<Self> {
        for s in strengths {
            check_strength(s)?;
        }
        let op = |kind: DegradationKind| Operator { kind, strength: strengths[kind.index()] };
        Ok(OperatorBank {
            contrast: op(DegradationKind::Contrast),
            deblur: op(DegradationKind::Blur),
            denoise: op(DegradationKind::Noise),
        })
    }

    pub fn get(&self, kind: DegradationKind) -> Operator {
        match kind {
            DegradationKind::Contrast => self.contrast,
            DegradationKind::Blur => self.deblur,
            DegradationKind::Noise => self.denoise,
        }
    }

    pub fn strengths(&self) -> [f64; 3] {
        [self.contrast.strength, self.deblur.strength, self.denoise.strength]
    }
}

/// Output of a restoration path and every intermediate along it.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutput {
    pub order: Vec<DegradationKind>,
    /// `intermediates[i]` is the image after the `i`-th operator.
    pub intermediates: Vec<Image>,
    pub output: Image,
}

/// Applies the gated operators sequentially in `order`.
pub fn apply_path(img: &Image, order: &[DegradationKind], gates: &GateDecision, bank: &OperatorBank) -> Result<PathOutput> {
    for (i, k) in order.iter().enumerate() {
        if order[..i].contains(k) {
            return Err(Error::InvalidArgument(format!("kind {k} repeated in restoration order")));
        }
    }
    let mut current = img.clone();
    let mut intermediates = Vec::with_capacity(order.len());
    for &kind in order {
        current = apply_drm(&current, kind, gates.get(kind), bank.get(kind).strength)?;
        intermediates.push(current.clone());
    }
    Ok(PathOutput {
        order: order.to_vec(),
        intermediates,
        output: current,
    })
}

/// All orderings of `kinds`, in lexicographic order of their positions.
pub fn permutations(kinds: &[DegradationKind]) -> Vec<Vec<DegradationKind>> {
    fn rec(rest: &mut Vec<DegradationKind>, prefix: &mut Vec<DegradationKind>, out: &mut Vec<Vec<DegradationKind>>) {
        if rest.is_empty() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..rest.len() {
            let k = rest.remove(i);
            prefix.push(k);
            rec(rest, prefix, out);
            prefix.pop();
            rest.insert(i, k);
        }
    }
    let mut out = Vec::new();
    rec(&mut kinds.to_vec(), &mut Vec::new(), &mut out);
    out
}
