//! Restoration-order selection for compound-degraded thermal images.
//!
//! The crate is organised bottom-up:
//!
//! - [`specialfn`]: log-gamma, digamma, trigamma and log-Beta.
//! - [`image`]: the unit-interval grayscale [`Image`] plus PGM/PNG codecs.
//! - [`filter`]: convolution kernels, median and percentile helpers.
//! - [`degrade`]: seeded contrast/blur/noise synthesis and [`DegradationRecipe`].
//! - [`metrics`]: PSNR, SSIM, RMSE and MAE.
//! - [`evidential`]: image statistics, type gating, Beta evidence and the
//!   BCE / Beta-EDL losses used to fit the estimation heads.
//! - [`restore_ops`]: gated residual restoration operators and path application.
//! - [`seros`]: similarity graphs, two-level structural entropy, greedy
//!   partition minimisation, per-vertex contributions and aggregation.
//! - [`pipeline`]: corpus generation, end-to-end restoration, order strategies
//!   and the benchmark harness.

pub mod degrade;
pub mod error;
pub mod evidential;
pub mod filter;
pub mod image;
pub mod metrics;
pub mod pipeline;
pub mod restore_ops;
pub mod rng;
pub mod seros;
pub mod specialfn;

pub use degrade::{DegradationKind, DegradationRecipe, DegradationStep};
pub use error::{Error, Result};
pub use evidential::{BetaEvidence, DegradationStats, Estimate, GateDecision, Heads, LinearHead, TypeLogits};
pub use image::Image;
pub use metrics::MetricReport;
pub use seros::{CandidateSet, Partition, SimilarityGraph};
