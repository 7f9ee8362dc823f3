//! Head training from a corpus.

use super::config::RunConfig;
use super::corpus::CorpusItem;
use crate::degrade::DegradationKind;
use crate::error::Result;
use crate::evidential::{compute_stats, f1_score, intensity_label, train_heads, Heads, TauSchedule, TrainConfig, TrainOutcome, TrainingSample};

/// Statistics of the degraded image, presence labels from the recipe, and
/// per-kind intensity targets.
///
/// Every present kind's target is `1 − SSIM(degraded, clean)` for the whole
/// compound degradation; absent kinds get 0.
pub fn training_sample(item: &CorpusItem) -> Result<TrainingSample> {
    let y = intensity_label(&item.degraded, &item.clean)?;
    let mut labels = [false; 3];
    let mut intensity = [0.0; 3];
    for kind in item.recipe.kinds() {
        labels[kind.index()] = true;
        intensity[kind.index()] = y;
    }
    Ok(TrainingSample {
        stats: compute_stats(&item.degraded),
        labels,
        intensity,
    })
}

pub fn training_samples(items: &[CorpusItem]) -> Result<Vec<TrainingSample>> {
    items.iter().map(training_sample).collect()
}

pub fn train_config(cfg: &RunConfig) -> TrainConfig {
    TrainConfig {
        epochs: cfg.epochs,
        step: cfg.step,
        seed: cfg.seed,
        tau: TauSchedule::Linear,
    }
}

pub fn train_from_corpus(items: &[CorpusItem], cfg: &RunConfig) -> Result<TrainOutcome> {
    train_heads(&training_samples(items)?, &train_config(cfg))
}

/// Type-head F1 per kind, indexed by [`DegradationKind::index`].
pub fn type_f1(heads: &Heads, samples: &[TrainingSample], zeta: f64) -> Result<[f64; 3]> {
    let mut predicted = [Vec::new(), Vec::new(), Vec::new()];
    for s in samples {
        let g = crate::evidential::gate(&heads.logits(&s.stats), zeta)?;
        for kind in DegradationKind::ALL {
            predicted[kind.index()].push(g.get(kind));
        }
    }
    Ok(std::array::from_fn(|k| {
        let truth: Vec<bool> = samples.iter().map(|s| s.labels[k]).collect();
        f1_score(&predicted[k], &truth)
    }))
}
