//! Seeded compound degradation synthesis.
//!
//! Three degradation kinds are modelled, each driven by one severity scalar
//! in `(0, 1]`:
//!
//! | kind     | model                                                                 |
//! |----------|-----------------------------------------------------------------------|
//! | contrast | `0.5 + (1 − 0.8 s)·(g(x) − 0.5)`, `g` a mid-anchored power of `1 + s` |
//! | blur     | Gaussian `σ = 0.5 + 2.5 s` or motion of length `3 + round(8 s)`       |
//! | noise    | column stripes `0.05 s`, readout `0.1 s`, smooth optics bias `0.03 s` |
//!
//! The blur family, motion angle and every noise draw come from ChaCha8
//! streams derived from the step seed, so outputs are bit-stable.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::Rng as _;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::filter::{self, Kernel};
use crate::image::Image;
use crate::rng::{derive_seed, rng_from_seed};

const MID_GRAY: f64 = 0.5;
const STRIPE_STD: f64 = 0.05;
const READOUT_STD: f64 = 0.1;
const OPTICS_STD: f64 = 0.03;

const ORDER_TAG: u64 = 0x006f_7264_6572;
const BLUR_FAMILY_TAG: u64 = 0x626c_7572;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DegradationKind {
    Contrast,
    Blur,
    Noise,
}

impl DegradationKind {
    pub const ALL: [DegradationKind; 3] = [DegradationKind::Contrast, DegradationKind::Blur, DegradationKind::Noise];

    /// Single-letter code used in path labels (`c`, `b`, `n`).
    pub fn letter(self) -> char {
        match self {
            DegradationKind::Contrast => 'c',
            DegradationKind::Blur => 'b',
            DegradationKind::Noise => 'n',
        }
    }

    pub fn from_letter(c: char) -> Option<Self> {
        match c.to_ascii_lowercase() {
            'c' => Some(DegradationKind::Contrast),
            'b' => Some(DegradationKind::Blur),
            'n' => Some(DegradationKind::Noise),
            _ => None,
        }
    }

    pub fn index(self) -> usize {
        match self {
            DegradationKind::Contrast => 0,
            DegradationKind::Blur => 1,
            DegradationKind::Noise => 2,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            DegradationKind::Contrast => "contrast",
            DegradationKind::Blur => "blur",
            DegradationKind::Noise => "noise",
        }
    }
}

impl fmt::Display for DegradationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for DegradationKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "contrast" | "c" => Ok(DegradationKind::Contrast),
            "blur" | "b" => Ok(DegradationKind::Blur),
            "noise" | "n" => Ok(DegradationKind::Noise),
            _ => Err(Error::Parse(format!("unknown degradation kind {s:?}"))),
        }
    }
}

/// Path label such as `"cbn"` for an ordered list of kinds.
pub fn order_label(order: &[DegradationKind]) -> String {
    order.iter().map(|k| k.letter()).collect()
}

/// Parses a label such as `"nbc"` into kinds, rejecting repeats.
pub fn parse_order(label: &str) -> Result<Vec<DegradationKind>> {
    let mut out = Vec::with_capacity(3);
    for c in label.chars() {
        let k = DegradationKind::from_letter(c).ok_or_else(|| Error::Parse(format!("bad order letter {c:?} in {label:?}")))?;
        if out.contains(&k) {
            return Err(Error::Parse(format!("order {label:?} repeats {k}")));
        }
        out.push(k);
    }
    Ok(out)
}

fn check_severity(severity: f64) -> Result<()> {
    if severity.is_finite() && severity > 0.0 && severity <= 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("severity must lie in (0, 1], got {severity}")))
    }
}

/// Power curve anchored at 0, 0.5 and 1; exponents above one flatten the
/// extremes symmetrically around mid-gray.
pub fn gamma_adjust(v: f64, gamma: f64) -> f64 {
    if v <= MID_GRAY {
        MID_GRAY * (2.0 * v).powf(gamma)
    } else {
        1.0 - MID_GRAY * (2.0 * (1.0 - v)).powf(gamma)
    }
}

/// Contrast compression toward mid-gray.
pub fn apply_contrast(img: &Image, severity: f64) -> Result<Image> {
    check_severity(severity)?;
    let gamma = 1.0 + severity;
    let gain = 1.0 - 0.8 * severity;
    Ok(img.with_data(
        img.data()
            .iter()
            .map(|&v| MID_GRAY + gain * (gamma_adjust(v, gamma) - MID_GRAY))
            .collect(),
    ))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BlurFamily {
    Gaussian { sigma: f64 },
    Motion { length: usize, angle: f64 },
}

/// Chooses the PSF family and parameters for a blur step.
pub fn blur_family(severity: f64, seed: u64) -> Result<BlurFamily> {
    check_severity(severity)?;
    let mut rng = rng_from_seed(derive_seed(seed, BLUR_FAMILY_TAG));
    Ok(if rng.random_bool(0.5) {
        BlurFamily::Gaussian {
            sigma: 0.5 + 2.5 * severity,
        }
    } else {
        BlurFamily::Motion {
            length: 3 + (8.0 * severity).round() as usize,
            angle: rng.random_range(0.0..std::f64::consts::PI),
        }
    })
}

pub fn blur_kernel(family: BlurFamily) -> Result<Kernel> {
    match family {
        BlurFamily::Gaussian { sigma } => Kernel::gaussian(sigma),
        BlurFamily::Motion { length, angle } => Kernel::motion(length, angle),
    }
}

/// Convolution with a seeded, normalised PSF.
pub fn apply_blur(img: &Image, severity: f64, seed: u64) -> Result<Image> {
    match blur_family(severity, seed)? {
        BlurFamily::Gaussian { sigma } => filter::gaussian_blur(img, sigma),
        family @ BlurFamily::Motion { .. } => Ok(filter::convolve(img, &blur_kernel(family)?)),
    }
}

/// Additive sensor noise: per-column stripe offsets, a smooth optics bias
/// field and white readout noise, clamped to `[0, 1]`.
pub fn apply_noise(img: &Image, severity: f64, seed: u64) -> Result<Image> {
    check_severity(severity)?;
    let (w, h) = (img.width(), img.height());
    let mut rng = rng_from_seed(seed);

    let stripe = Normal::new(0.0, STRIPE_STD * severity).map_err(|e| Error::Domain(e.to_string()))?;
    let stripes: Vec<f64> = (0..w).map(|_| stripe.sample(&mut rng)).collect();

    let white: Vec<f64> = (0..w * h).map(|_| StandardNormal.sample(&mut rng)).collect();
    let bias_sigma = w.max(h) as f64 / 8.0;
    let mut bias = filter::separable(&white, w, h, &filter::gaussian_taps(bias_sigma)?);
    let mean = bias.iter().sum::<f64>() / bias.len() as f64;
    let std = (bias.iter().map(|b| (b - mean).powi(2)).sum::<f64>() / bias.len() as f64).sqrt();
    let bias_scale = if std > 0.0 { OPTICS_STD * severity / std } else { 0.0 };
    for b in &mut bias {
        *b = (*b - mean) * bias_scale;
    }

    let readout = Normal::new(0.0, READOUT_STD * severity).map_err(|e| Error::Domain(e.to_string()))?;
    let data = img
        .data()
        .iter()
        .enumerate()
        .map(|(i, &v)| v + stripes[i % w] + bias[i] + readout.sample(&mut rng))
        .collect();
    Ok(img.with_data(data))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationStep {
    pub kind: DegradationKind,
    pub severity: f64,
}

/// Ordered degradation steps with the seed that drives them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DegradationRecipe {
    pub seed: u64,
    #[serde(default)]
    pub order_randomized: bool,
    #[serde(rename = "step")]
    pub steps: Vec<DegradationStep>,
}

/// Output of [`synthesize`].
#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub image: Image,
    pub applied: Vec<DegradationKind>,
}

impl DegradationRecipe {
    pub fn validate(&self) -> Result<()> {
        if self.steps.is_empty() || self.steps.len() > 3 {
            return Err(Error::InvalidRecipe(format!("expected 1-3 steps, got {}", self.steps.len())));
        }
        for (i, step) in self.steps.iter().enumerate() {
            check_severity(step.severity).map_err(|e| Error::InvalidRecipe(format!("step {i}: {e}")))?;
            if self.steps[..i].iter().any(|s| s.kind == step.kind) {
                return Err(Error::InvalidRecipe(format!("kind {} appears twice", step.kind)));
            }
        }
        Ok(())
    }

    /// Seed handed to the step of the given kind.
    pub fn step_seed(&self, kind: DegradationKind) -> u64 {
        derive_seed(self.seed, kind.index() as u64 + 1)
    }

    /// Steps in the order they will be applied.
    pub fn effective_steps(&self) -> Vec<DegradationStep> {
        let mut steps = self.steps.clone();
        if self.order_randomized {
            steps.shuffle(&mut rng_from_seed(derive_seed(self.seed, ORDER_TAG)));
        }
        steps
    }

    pub fn kinds(&self) -> Vec<DegradationKind> {
        self.steps.iter().map(|s| s.kind).collect()
    }

    pub fn has(&self, kind: DegradationKind) -> bool {
        self.steps.iter().any(|s| s.kind == kind)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("recipe always serialises")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let recipe: DegradationRecipe = toml::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
        recipe.validate()?;
        Ok(recipe)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }
}

pub fn apply_step(img: &Image, step: DegradationStep, seed: u64) -> Result<Image> {
    match step.kind {
        DegradationKind::Contrast => apply_contrast(img, step.severity),
        DegradationKind::Blur => apply_blur(img, step.severity, seed),
        DegradationKind::Noise => apply_noise(img, step.severity, seed),
    }
}

/// Applies every recipe step in effective order.
pub fn synthesize(img: &Image, recipe: &DegradationRecipe) -> Result<Synthesis> {
    recipe.validate()?;
    let mut out = img.clone();
    let mut applied = Vec::with_capacity(recipe.steps.len());
    for step in recipe.effective_steps() {
        out = apply_step(&out, step, recipe.step_seed(step.kind))?;
        applied.push(step.kind);
    }
    Ok(Synthesis { image: out, applied })
}
