//! End-to-end restoration of one image.

use rand::Rng as _;
use serde::Serialize;

use super::config::Strategy;
use crate::degrade::{order_label, DegradationKind};
use crate::error::{Error, Result};
use crate::evidential::{modulation, BetaEvidence, DegradationStats, Estimate, GateDecision, Heads, TypeLogits};
use crate::image::Image;
use crate::metrics::{psnr, ssim};
use crate::restore_ops::{apply_path, permutations, OperatorBank, PathOutput};
use crate::rng::rng_from_seed;
use crate::seros::{blend, seros_pipeline, CandidateSet};

/// What the heads concluded about an image.
#[derive(Debug, Clone, Serialize)]
pub struct Perception {
    pub stats: Option<DegradationStats>,
    pub logits: Option<TypeLogits>,
    pub gates: GateDecision,
    /// `(p, S)` per kind, indexed by [`DegradationKind::index`].
    pub evidence: Option<[BetaEvidence; 3]>,
    pub strengths: [f64; 3],
}

impl Perception {
    /// Gates and strengths from a head estimate; strengths of inactive kinds are 0.
    pub fn from_estimate(est: &Estimate) -> Self {
        let strengths = std::array::from_fn(|k| {
            if est.gates.get(DegradationKind::ALL[k]) {
                modulation(&est.evidence[k])
            } else {
                0.0
            }
        });
        Perception {
            stats: Some(est.stats),
            logits: Some(est.logits),
            gates: est.gates,
            evidence: Some(est.evidence),
            strengths,
        }
    }

    /// Fixed gates with full strength on every active kind.
    pub fn from_gates(gates: GateDecision) -> Self {
        let strengths = std::array::from_fn(|k| if gates.get(DegradationKind::ALL[k]) { 1.0 } else { 0.0 });
        Perception {
            stats: None,
            logits: None,
            gates,
            evidence: None,
            strengths,
        }
    }
}

/// Candidate restorations of one image, one per order of the active kinds.
#[derive(Debug, Clone)]
pub struct Candidates {
    pub input: Image,
    pub perception: Perception,
    pub paths: Vec<PathOutput>,
}

pub fn perceive(img: &Image, heads: &Heads, zeta: f64) -> Result<Perception> {
    Ok(Perception::from_estimate(&heads.estimate(img, zeta)?))
}

/// Runs every permutation of the active kinds through the operator bank.
pub fn candidates(img: &Image, perception: Perception) -> Result<Candidates> {
    let active = perception.gates.active();
    let bank = OperatorBank::from_strengths(perception.strengths)?;
    let paths = if active.is_empty() {
        Vec::new()
    } else {
        permutations(&active)
            .iter()
            .map(|order| apply_path(img, order, &perception.gates, &bank))
            .collect::<Result<_>>()?
    };
    Ok(Candidates {
        input: img.clone(),
        perception,
        paths,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct PathDiagnostics {
    pub label: String,
    /// Share of the output credited to this path.
    pub weight: f64,
    pub psnr: Option<f64>,
    pub ssim: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SelectionDiagnostics {
    /// Row-major similarity matrix over the distinct candidates.
    pub graph: Vec<f64>,
    /// Groups of byte-identical candidates (indices into `paths`).
    pub groups: Vec<Vec<usize>>,
    /// Part label per distinct candidate.
    pub partition: Vec<usize>,
    pub delta_h: Vec<f64>,
    /// Selected distinct-candidate indices and their weights.
    pub selected: Vec<usize>,
    pub selected_weights: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    pub strategy: String,
    pub perception: Perception,
    pub paths: Vec<PathDiagnostics>,
    pub selection: Option<SelectionDiagnostics>,
}

impl Candidates {
    /// Combines the candidates with `strategy`. `rps_seed` drives the random
    /// order pick; `reference` adds per-path metrics to the diagnostics.
    pub fn finish(&self, strategy: &Strategy, rps_seed: u64, reference: Option<&Image>) -> Result<(Image, Diagnostics)> {
        let m = self.paths.len();
        let mut weights = vec![0.0; m];
        let mut selection = None;
        let output = if m == 0 {
            self.input.clone()
        } else {
            match strategy {
                Strategy::Seros => {
                    let set = CandidateSet::new(
                        self.paths.iter().map(|p| (order_label(&p.order), p.output.clone())).collect(),
                    )?;
                    let (out, report) = seros_pipeline(&set)?;
                    weights.clone_from(&report.candidate_weights);
                    if let (Some(g), Some(p), Some(s)) = (&report.graph, &report.partition, &report.selection) {
                        selection = Some(SelectionDiagnostics {
                            graph: g.weights().to_vec(),
                            groups: report.groups.clone(),
                            partition: p.assignment().to_vec(),
                            delta_h: s.delta_h.clone(),
                            selected: s.selected.clone(),
                            selected_weights: s.weights.clone(),
                        });
                    }
                    out
                }
                Strategy::Fixed(order) => {
                    let active: Vec<DegradationKind> = order.iter().copied().filter(|&k| self.perception.gates.get(k)).collect();
                    let i = self
                        .paths
                        .iter()
                        .position(|p| p.order == active)
                        .ok_or_else(|| Error::InvalidArgument(format!("no candidate for order {}", order_label(&active))))?;
                    weights[i] = 1.0;
                    self.paths[i].output.clone()
                }
                Strategy::Rps => {
                    let i = rng_from_seed(rps_seed).random_range(0..m);
                    weights[i] = 1.0;
                    self.paths[i].output.clone()
                }
                Strategy::Pea => {
                    weights = vec![1.0 / m as f64; m];
                    let images: Vec<&Image> = self.paths.iter().map(|p| &p.output).collect();
                    blend(&images, &weights)?
                }
            }
        };
        let paths = self
            .paths
            .iter()
            .zip(&weights)
            .map(|(p, &weight)| {
                Ok(PathDiagnostics {
                    label: order_label(&p.order),
                    weight,
                    psnr: reference.map(|r| psnr(&p.output, r)).transpose()?,
                    ssim: reference.map(|r| ssim(&p.output, r)).transpose()?,
                })
            })
            .collect::<Result<_>>()?;
        Ok((
            output,
            Diagnostics {
                strategy: strategy.to_string(),
                perception: self.perception.clone(),
                paths,
                selection,
            },
        ))
    }
}

/// Perceive, enumerate candidate paths and combine them with `strategy`.
pub fn restore_one(
    img: &Image,
    heads: &Heads,
    zeta: f64,
    strategy: &Strategy,
    rps_seed: u64,
    reference: Option<&Image>,
) -> Result<(Image, Diagnostics)> {
    candidates(img, perceive(img, heads, zeta)?)?.finish(strategy, rps_seed, reference)
}
