//! Fixtures shared by the criterion benches.

use entropath::degrade::{synthesize, DegradationKind, DegradationRecipe, DegradationStep};
use entropath::pipeline::scenes::{generate, SceneKind};
use entropath::rng::derive_seed;
use entropath::seros::SimilarityGraph;
use entropath::Image;

/// Complete graph with weights in `[0, 1)` drawn from `seed`.
pub fn random_graph(n: usize, seed: u64) -> SimilarityGraph {
    let mut k = 0;
    SimilarityGraph::from_fn(n, |_, _| {
        k += 1;
        (derive_seed(seed, k) >> 11) as f64 / (1u64 << 53) as f64
    })
    .expect("valid weights")
}

/// A thermal-like scene with all three degradations at moderate severity.
pub fn triple_degraded(size: usize, seed: u64) -> Image {
    let clean = generate(SceneKind::Thermal, size, seed);
    let recipe = DegradationRecipe {
        seed,
        order_randomized: false,
        steps: DegradationKind::ALL
            .into_iter()
            .map(|kind| DegradationStep { kind, severity: 0.6 })
            .collect(),
    };
    synthesize(&clean, &recipe).expect("valid recipe").image
}
