//! Degradation type and intensity estimation.
//!
//! Three handcrafted statistics summarise an image. A linear type head maps
//! them to one logit per degradation kind; a kind is declared present when
//! its sigmoid reaches the threshold ζ. Three evidence heads map the same
//! statistics to Beta parameters `(α, β)` whose mean `p` is the estimated
//! intensity and whose total `S = α + β` is the confidence.
//!
//! Heads are fitted by full-batch gradient descent on the BCE-with-logits loss
//! plus the Beta evidential loss
//!
//! ```text
//! L = −[(α−1) ln y + (β−1) ln(1−y) − ln B(α,β)] + τ · KL(Beta(α,β) ‖ Beta(1,1))
//! ```
//!
//! with τ annealed linearly from 0 to 1 across epochs.

use std::fmt::Write as _;
use std::path::Path;

use rand_distr::{Distribution, Normal};
use serde::Serialize;

use crate::degrade::DegradationKind;
use crate::error::{Error, Result};
use crate::filter::{highpass_residual, laplacian, median, percentile_sorted};
use crate::image::Image;
use crate::metrics::ssim;
use crate::rng::rng_from_seed;
use crate::specialfn::{digamma_unchecked, log_beta_unchecked, trigamma_unchecked};

/// Default gating threshold ζ.
pub const DEFAULT_ZETA: f64 = 0.45;

/// Lower bound applied to α and β after the softplus link.
pub const EVIDENCE_FLOOR: f64 = 1e-6;

/// Intensity targets are kept this far away from 0 and 1.
pub const LABEL_EPS: f64 = 1e-4;

const MAD_TO_SIGMA: f64 = 1.4826;

#[inline]
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + eˣ)` evaluated as `max(x, 0) + ln1p(e^{−|x|})`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

#[inline]
fn logit(p: f64) -> f64 {
    (p / (1.0 - p)).ln()
}

/// Per-image degradation statistics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DegradationStats {
    /// Robust σ of the 3×3 high-pass residual (MAD × 1.4826).
    pub noise_score: f64,
    /// Minus the 3×3 Laplacian variance divided by the mean intensity.
    pub blur_score: f64,
    /// One minus the 1st–99th percentile range.
    pub contrast_score: f64,
}

pub fn compute_stats(img: &Image) -> DegradationStats {
    let resid = highpass_residual(img);
    let med = median(&resid);
    let abs_dev: Vec<f64> = resid.iter().map(|r| (r - med).abs()).collect();
    let noise_score = median(&abs_dev) * MAD_TO_SIGMA;

    let lap = laplacian(img);
    let lap_mean = lap.iter().sum::<f64>() / lap.len() as f64;
    let lap_var = lap.iter().map(|l| (l - lap_mean).powi(2)).sum::<f64>() / lap.len() as f64;
    let blur_score = -lap_var / img.mean().max(1e-3);

    let mut sorted = img.data().to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let range = percentile_sorted(&sorted, 99.0) - percentile_sorted(&sorted, 1.0);

    DegradationStats {
        noise_score,
        blur_score,
        contrast_score: 1.0 - range,
    }
}

/// Number of head inputs derived from [`DegradationStats`].
pub const FEATURE_COUNT: usize = 9;

/// Head inputs: log-compressed scores and their pairwise products.
pub fn feature_vector(s: &DegradationStats) -> [f64; FEATURE_COUNT] {
    let n = (s.noise_score + 1e-4).ln();
    let b = (1e-6 - s.blur_score).ln();
    let c = s.contrast_score;
    [n, b, c, n * n, b * b, c * c, n * b, n * c, b * c]
}

/// Raw logits in kind order (contrast, blur, noise).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TypeLogits {
    pub contrast: f64,
    pub blur: f64,
    pub noise: f64,
}

impl TypeLogits {
    pub fn new(noise: f64, blur: f64, contrast: f64) -> Self {
        TypeLogits { contrast, blur, noise }
    }

    pub fn get(&self, kind: DegradationKind) -> f64 {
        match kind {
            DegradationKind::Contrast => self.contrast,
            DegradationKind::Blur => self.blur,
            DegradationKind::Noise => self.noise,
        }
    }

    fn as_array(&self) -> [f64; 3] {
        [self.contrast, self.blur, self.noise]
    }
}

/// Per-kind presence flags.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GateDecision {
    pub contrast: bool,
    pub blur: bool,
    pub noise: bool,
    pub zeta: f64,
}

impl GateDecision {
    pub fn all(on: bool) -> Self {
        GateDecision {
            contrast: on,
            blur: on,
            noise: on,
            zeta: DEFAULT_ZETA,
        }
    }

    pub fn from_kinds(kinds: &[DegradationKind]) -> Self {
        let mut g = GateDecision::all(false);
        for &k in kinds {
            g.set(k, true);
        }
        g
    }

    pub fn get(&self, kind: DegradationKind) -> bool {
        match kind {
            DegradationKind::Contrast => self.contrast,
            DegradationKind::Blur => self.blur,
            DegradationKind::Noise => self.noise,
        }
    }

    pub fn set(&mut self, kind: DegradationKind, on: bool) {
        match kind {
            DegradationKind::Contrast => self.contrast = on,
            DegradationKind::Blur => self.blur = on,
            DegradationKind::Noise => self.noise = on,
        }
    }

    pub fn active(&self) -> Vec<DegradationKind> {
        DegradationKind::ALL.into_iter().filter(|&k| self.get(k)).collect()
    }
}

pub fn check_zeta(zeta: f64) -> Result<()> {
    if zeta > 0.0 && zeta < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain(format!("zeta must lie in (0, 1), got {zeta}")))
    }
}

/// `d = 1[σ(π) ≥ ζ]` for each kind.
pub fn gate(logits: &TypeLogits, zeta: f64) -> Result<GateDecision> {
    check_zeta(zeta)?;
    Ok(GateDecision {
        contrast: sigmoid(logits.contrast) >= zeta,
        blur: sigmoid(logits.blur) >= zeta,
        noise: sigmoid(logits.noise) >= zeta,
        zeta,
    })
}

/// Mean over the three kinds of `softplus(π) − y·π`.
pub fn bce_with_logits(logits: &TypeLogits, labels: [bool; 3]) -> f64 {
    logits
        .as_array()
        .iter()
        .zip(labels)
        .map(|(&z, y)| softplus(z) - if y { z } else { 0.0 })
        .sum::<f64>()
        / 3.0
}

/// `1 − SSIM(degraded, clean)` clamped to `[0, 1]`.
pub fn intensity_label(degraded: &Image, clean: &Image) -> Result<f64> {
    Ok((1.0 - ssim(degraded, clean)?).clamp(0.0, 1.0))
}

/// Beta evidence pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BetaEvidence {
    pub alpha: f64,
    pub beta: f64,
}

impl BetaEvidence {
    pub fn new(alpha: f64, beta: f64) -> Result<Self> {
        if !(alpha.is_finite() && beta.is_finite() && alpha >= EVIDENCE_FLOOR && beta >= EVIDENCE_FLOOR) {
            return Err(Error::Domain(format!(
                "evidence must be finite and at least {EVIDENCE_FLOOR}, got ({alpha}, {beta})"
            )));
        }
        Ok(BetaEvidence { alpha, beta })
    }

    /// Applies the softplus link with floor to raw head outputs.
    pub fn from_raw(raw_alpha: f64, raw_beta: f64) -> Self {
        BetaEvidence {
            alpha: softplus(raw_alpha) + EVIDENCE_FLOOR,
            beta: softplus(raw_beta) + EVIDENCE_FLOOR,
        }
    }

    /// Intensity `α / (α + β)`.
    pub fn p(&self) -> f64 {
        self.alpha / (self.alpha + self.beta)
    }

    /// Confidence `α + β`.
    pub fn s(&self) -> f64 {
        self.alpha + self.beta
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdlLoss {
    pub loss: f64,
    pub nll: f64,
    pub kl: f64,
    pub grad_alpha: f64,
    pub grad_beta: f64,
}

/// Beta evidential loss and its gradient with respect to `(α, β)`.
///
/// `y` is clamped to `[1e-4, 1 − 1e-4]`; `tau` must lie in `[0, 1]`.
pub fn edl_loss(ev: &BetaEvidence, y: f64, tau: f64) -> Result<EdlLoss> {
    let (a, b) = (ev.alpha, ev.beta);
    if !(a.is_finite() && b.is_finite() && a > 0.0 && b > 0.0) {
        return Err(Error::Domain(format!("alpha and beta must be positive, got ({a}, {b})")));
    }
    if !(0.0..=1.0).contains(&tau) {
        return Err(Error::Domain(format!("tau must lie in [0, 1], got {tau}")));
    }
    if !y.is_finite() {
        return Err(Error::Domain("intensity target is not finite".into()));
    }
    let y = y.clamp(LABEL_EPS, 1.0 - LABEL_EPS);
    let (ln_y, ln_1y) = (y.ln(), (1.0 - y).ln());
    let ln_b = log_beta_unchecked(a, b);
    let (psi_a, psi_b, psi_ab) = (digamma_unchecked(a), digamma_unchecked(b), digamma_unchecked(a + b));

    let nll = -((a - 1.0) * ln_y + (b - 1.0) * ln_1y - ln_b);
    let kl = -ln_b + (a - 1.0) * psi_a + (b - 1.0) * psi_b + (2.0 - a - b) * psi_ab;

    // ∂ ln B / ∂α = ψ(α) − ψ(α+β)
    let d_nll_a = -ln_y + psi_a - psi_ab;
    let d_nll_b = -ln_1y + psi_b - psi_ab;
    let tri_ab = trigamma_unchecked(a + b);
    let d_kl_a = (a - 1.0) * trigamma_unchecked(a) + (2.0 - a - b) * tri_ab;
    let d_kl_b = (b - 1.0) * trigamma_unchecked(b) + (2.0 - a - b) * tri_ab;

    Ok(EdlLoss {
        loss: nll + tau * kl,
        nll,
        kl,
        grad_alpha: d_nll_a + tau * d_kl_a,
        grad_beta: d_nll_b + tau * d_kl_b,
    })
}

/// Operator-strength multiplier `clamp(σ(logit p + 0.1 ln S), 0.1, 1)`.
pub fn modulation(ev: &BetaEvidence) -> f64 {
    let p = ev.p().clamp(1e-12, 1.0 - 1e-12);
    sigmoid(logit(p) + 0.1 * ev.s().ln()).clamp(0.1, 1.0)
}

/// Affine map `outputs × (inputs + 1)`, bias stored last in each row.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LinearHead {
    inputs: usize,
    outputs: usize,
    weights: Vec<f64>,
}

impl LinearHead {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        LinearHead {
            inputs,
            outputs,
            weights: vec![0.0; outputs * (inputs + 1)],
        }
    }

    pub fn from_weights(inputs: usize, outputs: usize, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != outputs * (inputs + 1) || weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "head {outputs}x{inputs} needs {} finite weights",
                outputs * (inputs + 1)
            )));
        }
        Ok(LinearHead { inputs, outputs, weights })
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        debug_assert_eq!(x.len(), self.inputs);
        let stride = self.inputs + 1;
        (0..self.outputs)
            .map(|o| {
                let row = &self.weights[o * stride..(o + 1) * stride];
                row[..self.inputs].iter().zip(x).map(|(w, v)| w * v).sum::<f64>() + row[self.inputs]
            })
            .collect()
    }

    /// Accumulates `∂L/∂W` given `∂L/∂output` for one input.
    fn accumulate_grad(&self, grad: &mut [f64], x: &[f64], d_out: &[f64]) {
        let stride = self.inputs + 1;
        for (o, &d) in d_out.iter().enumerate() {
            let row = &mut grad[o * stride..(o + 1) * stride];
            for (g, v) in row[..self.inputs].iter_mut().zip(x) {
                *g += d * v;
            }
            row[self.inputs] += d;
        }
    }
}

/// Standardisation applied to [`feature_vector`] before the heads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FeatureScaler {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureScaler {
    pub fn fit(rows: &[[f64; FEATURE_COUNT]]) -> Self {
        let n = rows.len().max(1) as f64;
        let mean: Vec<f64> = (0..FEATURE_COUNT).map(|k| rows.iter().map(|r| r[k]).sum::<f64>() / n).collect();
        let std = (0..FEATURE_COUNT)
            .map(|k| {
                let v = rows.iter().map(|r| (r[k] - mean[k]).powi(2)).sum::<f64>() / n;
                if v > 1e-24 { v.sqrt() } else { 1.0 }
            })
            .collect();
        FeatureScaler { mean, std }
    }

    pub fn apply(&self, raw: &[f64; FEATURE_COUNT]) -> Vec<f64> {
        raw.iter().zip(&self.mean).zip(&self.std).map(|((v, m), s)| (v - m) / s).collect()
    }
}

/// Fitted type head and the three per-kind evidence heads.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Heads {
    pub scaler: FeatureScaler,
    pub type_head: LinearHead,
    /// Indexed by [`DegradationKind::index`].
    pub evidence_heads: [LinearHead; 3],
}

/// Everything the heads say about one image.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Estimate {
    pub stats: DegradationStats,
    pub logits: TypeLogits,
    pub gates: GateDecision,
    /// Indexed by [`DegradationKind::index`].
    pub evidence: [BetaEvidence; 3],
}

impl Heads {
    fn inputs(&self, stats: &DegradationStats) -> Vec<f64> {
        self.scaler.apply(&feature_vector(stats))
    }

    pub fn logits(&self, stats: &DegradationStats) -> TypeLogits {
        let out = self.type_head.forward(&self.inputs(stats));
        TypeLogits {
            contrast: out[0],
            blur: out[1],
            noise: out[2],
        }
    }

    pub fn evidence(&self, stats: &DegradationStats) -> [BetaEvidence; 3] {
        let x = self.inputs(stats);
        std::array::from_fn(|k| {
            let raw = self.evidence_heads[k].forward(&x);
            BetaEvidence::from_raw(raw[0], raw[1])
        })
    }

    pub fn estimate(&self, img: &Image, zeta: f64) -> Result<Estimate> {
        let stats = compute_stats(img);
        let logits = self.logits(&stats);
        Ok(Estimate {
            stats,
            gates: gate(&logits, zeta)?,
            logits,
            evidence: self.evidence(&stats),
        })
    }

    /// `key=value` text, one entry per line, weights with 17 significant digits.
    pub fn to_text(&self) -> String {
        let join = |v: &[f64]| v.iter().map(|w| format!("{w:.16e}")).collect::<Vec<_>>().join(",");
        let mut s = String::from("format=heads-v1\n");
        let _ = writeln!(s, "features={FEATURE_COUNT}");
        let _ = writeln!(s, "scaler.mean={}", join(&self.scaler.mean));
        let _ = writeln!(s, "scaler.std={}", join(&self.scaler.std));
        let _ = writeln!(s, "type.weights={}", join(self.type_head.weights()));
        for kind in DegradationKind::ALL {
            let _ = writeln!(s, "evidence.{}.weights={}", kind.name(), join(self.evidence_heads[kind.index()].weights()));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut map = std::collections::BTreeMap::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty() && !l.starts_with('#')) {
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Parse(format!("expected key=value, got {line:?}")))?;
            map.insert(k.trim().to_string(), v.trim().to_string());
        }
        let get = |k: &str| map.get(k).ok_or_else(|| Error::Parse(format!("missing key {k}")));
        if get("format")? != "heads-v1" {
            return Err(Error::Parse("unsupported heads format".into()));
        }
        if get("features")?.parse::<usize>().ok() != Some(FEATURE_COUNT) {
            return Err(Error::Parse(format!("heads file must declare features={FEATURE_COUNT}")));
        }
        let floats = |k: &str| -> Result<Vec<f64>> {
            get(k)?
                .split(',')
                .map(|t| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("bad number {t:?} in {k}"))))
                .collect()
        };
        let scaler = FeatureScaler {
            mean: floats("scaler.mean")?,
            std: floats("scaler.std")?,
        };
        if scaler.mean.len() != FEATURE_COUNT || scaler.std.len() != FEATURE_COUNT {
            return Err(Error::Parse("scaler length mismatch".into()));
        }
        let type_head = LinearHead::from_weights(FEATURE_COUNT, 3, floats("type.weights")?)?;
        let mut ev = Vec::with_capacity(3);
        for kind in DegradationKind::ALL {
            ev.push(LinearHead::from_weights(
                FEATURE_COUNT,
                2,
                floats(&format!("evidence.{}.weights", kind.name()))?,
            )?);
        }
        let evidence_heads: [LinearHead; 3] = ev.try_into().expect("three heads");
        Ok(Heads { scaler, type_head, evidence_heads })
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }
}

/// One supervised example.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrainingSample {
    pub stats: DegradationStats,
    /// Presence per kind, indexed by [`DegradationKind::index`].
    pub labels: [bool; 3],
    /// Intensity target per kind; absent kinds carry 0.
    pub intensity: [f64; 3],
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum TauSchedule {
    /// τ = t / (epochs − 1) at epoch t.
    Linear,
    Constant(f64),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrainConfig {
    pub epochs: usize,
    pub step: f64,
    pub seed: u64,
    pub tau: TauSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 1500,
            step: 0.5,
            seed: 0,
            tau: TauSchedule::Linear,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EpochLoss {
    pub tau: f64,
    /// Objective at the start of the epoch.
    pub before: f64,
    /// Objective after the accepted step, at the same τ.
    pub after: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainOutcome {
    pub heads: Heads,
    pub history: Vec<EpochLoss>,
    pub final_loss: f64,
}

/// Minimum corpus size accepted by [`train_heads`].
pub const MIN_CORPUS: usize = 50;

const MAX_HALVINGS: usize = 40;

struct Params {
    type_head: LinearHead,
    evidence: [LinearHead; 3],
}

impl Params {
    fn flat_len(&self) -> usize {
        self.type_head.weights.len() + self.evidence.iter().map(|h| h.weights.len()).sum::<usize>()
    }

    fn axpy(&self, step: f64, grad: &[f64]) -> Params {
        let mut out = Params {
            type_head: self.type_head.clone(),
            evidence: self.evidence.clone(),
        };
        let mut off = 0;
        for head in std::iter::once(&mut out.type_head).chain(out.evidence.iter_mut()) {
            for w in head.weights.iter_mut() {
                *w -= step * grad[off];
                off += 1;
            }
        }
        out
    }
}

/// Mean BCE over samples plus mean summed EDL over samples; optionally the gradient.
fn objective(params: &Params, xs: &[Vec<f64>], corpus: &[TrainingSample], tau: f64, grad: Option<&mut Vec<f64>>) -> f64 {
    let m = xs.len() as f64;
    let type_len = params.type_head.weights.len();
    let ev_len = params.evidence[0].weights.len();
    let mut total = 0.0;
    let mut g = grad;
    if let Some(g) = g.as_deref_mut() {
        g.iter_mut().for_each(|v| *v = 0.0);
    }
    for (x, sample) in xs.iter().zip(corpus) {
        let z = params.type_head.forward(x);
        let logits = TypeLogits { contrast: z[0], blur: z[1], noise: z[2] };
        total += bce_with_logits(&logits, sample.labels) / m;
        if let Some(g) = g.as_deref_mut() {
            let d: Vec<f64> = z
                .iter()
                .zip(sample.labels)
                .map(|(&zi, y)| (sigmoid(zi) - if y { 1.0 } else { 0.0 }) / (3.0 * m))
                .collect();
            params.type_head.accumulate_grad(&mut g[..type_len], x, &d);
        }
        for k in 0..3 {
            let raw = params.evidence[k].forward(x);
            let ev = BetaEvidence::from_raw(raw[0], raw[1]);
            let l = edl_loss(&ev, sample.intensity[k], tau).expect("link keeps evidence positive");
            total += l.loss / m;
            if let Some(g) = g.as_deref_mut() {
                let d = [l.grad_alpha * sigmoid(raw[0]) / m, l.grad_beta * sigmoid(raw[1]) / m];
                let off = type_len + k * ev_len;
                params.evidence[k].accumulate_grad(&mut g[off..off + ev_len], x, &d);
            }
        }
    }
    total
}

/// Fits the type and evidence heads by full-batch gradient descent.
///
/// Each epoch starts from `cfg.step`; a step that raises the epoch's
/// objective is halved until it does not (up to 40 times, after which the
/// parameters are left unchanged for that epoch).
pub fn train_heads(corpus: &[TrainingSample], cfg: &TrainConfig) -> Result<TrainOutcome> {
    if corpus.len() < MIN_CORPUS {
        return Err(Error::InvalidArgument(format!(
            "training needs at least {MIN_CORPUS} samples, got {}",
            corpus.len()
        )));
    }
    if cfg.epochs == 0 || !(cfg.step.is_finite() && cfg.step > 0.0) {
        return Err(Error::InvalidArgument("epochs and step must be positive".into()));
    }
    let raw: Vec<[f64; FEATURE_COUNT]> = corpus.iter().map(|s| feature_vector(&s.stats)).collect();
    if raw.iter().flatten().any(|v| !v.is_finite()) || corpus.iter().any(|s| s.intensity.iter().any(|y| !y.is_finite())) {
        return Err(Error::InvalidArgument("corpus contains non-finite statistics or targets".into()));
    }
    if let TauSchedule::Constant(t) = cfg.tau {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("tau must lie in [0, 1], got {t}")));
        }
    }
    let scaler = FeatureScaler::fit(&raw);
    let xs: Vec<Vec<f64>> = raw.iter().map(|r| scaler.apply(r)).collect();

    let mut rng = rng_from_seed(cfg.seed);
    let init = Normal::new(0.0, 0.01).expect("valid normal");
    let mut draw = |inputs, outputs| {
        let w = (0..outputs * (inputs + 1)).map(|_| init.sample(&mut rng)).collect();
        LinearHead::from_weights(inputs, outputs, w).expect("sized")
    };
    let type_head = draw(FEATURE_COUNT, 3);
    let evidence = [draw(FEATURE_COUNT, 2), draw(FEATURE_COUNT, 2), draw(FEATURE_COUNT, 2)];
    let mut params = Params { type_head, evidence };

    let mut grad = vec![0.0; params.flat_len()];
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let tau = match cfg.tau {
            TauSchedule::Linear if cfg.epochs > 1 => epoch as f64 / (cfg.epochs - 1) as f64,
            TauSchedule::Linear => 1.0,
            TauSchedule::Constant(t) => t,
        };
        let before = objective(&params, &xs, corpus, tau, Some(&mut grad));
        let mut step = cfg.step;
        let mut after = before;
        for _ in 0..MAX_HALVINGS {
            let trial = params.axpy(step, &grad);
            let l = objective(&trial, &xs, corpus, tau, None);
            if l.is_finite() && l <= before {
                params = trial;
                after = l;
                break;
            }
            step *= 0.5;
        }
        history.push(EpochLoss { tau, before, after });
    }
    let final_loss = history.last().map_or(f64::NAN, |h| h.after);
    Ok(TrainOutcome {
        heads: Heads {
            scaler,
            type_head: params.type_head,
            evidence_heads: params.evidence,
        },
        history,
        final_loss,
    })
}

/// F1 score of binary predictions; 1.0 when there are no positives at all.
pub fn f1_score(predicted: &[bool], truth: &[bool]) -> f64 {
    let (mut tp, mut fp, mut fnn) = (0usize, 0usize, 0usize);
    for (&p, &t) in predicted.iter().zip(truth) {
        match (p, t) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fnn += 1,
            _ => {}
        }
    }
    if tp + fp + fnn == 0 {
        1.0
    } else {
        2.0 * tp as f64 / (2 * tp + fp + fnn) as f64
    }
}
