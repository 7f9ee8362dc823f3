mod common;

use common::{exhaustive_min, naive_h2, random_graph, random_partition, set_partitions};
use entropath::image::Image;
use entropath::rng::rng_from_seed;
use entropath::seros::{
    greedy_merge, minimize_partition, node_contribution, refine_partition, seros_pipeline, two_d_se, CandidateSet, Partition,
    SimilarityGraph,
};
use proptest::prelude::*;

#[test]
fn set_partition_counts_are_bell_numbers() {
    let bell = [1, 1, 2, 5, 15, 52, 203, 877, 4140];
    for (n, &b) in bell.iter().enumerate() {
        assert_eq!(set_partitions(n).len(), b);
    }
}

#[test]
fn library_entropy_matches_naive_formula() {
    let mut rng = rng_from_seed(31);
    for _ in 0..300 {
        let n = rng.random_range(2..=8);
        let g = random_graph(&mut rng, n);
        let p = random_partition(&mut rng, n);
        let lib = two_d_se(&g, &p).unwrap().bits;
        assert!((lib - naive_h2(&g, p.assignment())).abs() < 1e-12);
    }
}

#[test]
fn contribution_is_entropy_difference() {
    let mut rng = rng_from_seed(32);
    for _ in 0..500 {
        let n = rng.random_range(2..=9);
        let g = random_graph(&mut rng, n);
        let p = random_partition(&mut rng, n);
        let x = rng.random_range(0..n);
        let moved = p.with_isolated(x);
        let expected = naive_h2(&g, moved.assignment()) - naive_h2(&g, p.assignment());
        assert!((node_contribution(&g, &p, x).unwrap() - expected).abs() < 1e-9);
    }
}

#[test]
fn minimiser_tracks_exhaustive_optimum() {
    let mut rng = rng_from_seed(33);
    let (mut hits, total) = (0, 150);
    for _ in 0..total {
        let n = rng.random_range(3..=8);
        let g = random_graph(&mut rng, n);
        let best = exhaustive_min(&g);
        let got = two_d_se(&g, &minimize_partition(&g)).unwrap().bits;
        assert!(got >= best - 1e-9);
        assert!(got <= best * 1.05 + 1e-12, "{got} vs {best}");
        if got - best < 1e-9 {
            hits += 1;
        }
    }
    assert!(hits as f64 / total as f64 >= 0.95, "{hits}/{total}");
}

#[test]
fn refinement_never_raises_entropy() {
    let mut rng = rng_from_seed(34);
    for _ in 0..200 {
        let n = rng.random_range(2..=10);
        let g = random_graph(&mut rng, n);
        let start = random_partition(&mut rng, n);
        let before = two_d_se(&g, &start).unwrap().bits;
        let after = two_d_se(&g, &refine_partition(&g, &start)).unwrap().bits;
        assert!(after <= before + 1e-12);
        let greedy = two_d_se(&g, &greedy_merge(&g)).unwrap().bits;
        let min = two_d_se(&g, &minimize_partition(&g)).unwrap().bits;
        assert!(min <= greedy + 1e-12);
    }
}

#[test]
fn hand_computed_anchors() {
    let k3 = SimilarityGraph::from_fn(3, |_, _| 1.0).unwrap();
    let h = two_d_se(&k3, &Partition::whole(3)).unwrap().bits;
    assert!((h - 3f64.log2()).abs() < 1e-12);

    let pairs = SimilarityGraph::from_fn(4, |i, j| if i / 2 == j / 2 { 1.0 } else { 0.0 }).unwrap();
    let p = Partition::from_assignment(&[0, 0, 1, 1]);
    assert!((two_d_se(&pairs, &p).unwrap().bits - 1.0).abs() < 1e-12);
    assert_eq!(minimize_partition(&pairs), p);
}

#[test]
fn outlier_candidate_is_kept_apart() {
    let base = |shift: f64, seed: u64| {
        let mut rng = rng_from_seed(seed);
        Image::from_fn(24, 24, |x, y| {
            (0.5 + 0.3 * ((x as f64 + shift) * 0.4).sin() * (y as f64 * 0.3).cos() + 0.02 * rng.random::<f64>()).clamp(0.0, 1.0)
        })
        .unwrap()
    };
    let mut items: Vec<(String, Image)> = (0..5).map(|k| (format!("c{k}"), base(0.0, 100 + k))).collect();
    let outlier = Image::from_fn(24, 24, |x, _| if x < 12 { 0.1 } else { 0.9 }).unwrap();
    items.push(("odd".into(), outlier));
    let cands = CandidateSet::new(items).unwrap();
    let (_, report) = seros_pipeline(&cands).unwrap();
    let g = report.graph.unwrap();
    let p = report.partition.unwrap();
    assert!((two_d_se(&g, &p).unwrap().bits - exhaustive_min(&g)).abs() < 1e-9);
    let odd = p.part_of(5).unwrap();
    assert!((0..5).all(|v| p.part_of(v) != Some(odd)));
    assert!((report.candidate_weights.iter().sum::<f64>() - 1.0).abs() < 1e-12);
}

#[test]
fn edge_list_round_trip() {
    let mut rng = rng_from_seed(35);
    let g = random_graph(&mut rng, 6);
    let back = SimilarityGraph::from_edge_list(&g.to_edge_list()).unwrap();
    for i in 0..6 {
        for j in 0..6 {
            assert_eq!(back.weight(i, j), g.weight(i, j));
        }
    }
}

proptest! {
    #[test]
    fn minimum_is_no_worse_than_trivial_partitions(seed in any::<u64>(), n in 2usize..9) {
        let g = random_graph(&mut rng_from_seed(seed), n);
        let min = two_d_se(&g, &minimize_partition(&g)).unwrap().bits;
        let whole = two_d_se(&g, &Partition::whole(n)).unwrap().bits;
        let single = two_d_se(&g, &Partition::singletons(n)).unwrap().bits;
        prop_assert!(min <= whole + 1e-12 && min <= single + 1e-12);
    }

    #[test]
    fn entropy_is_scale_invariant(seed in any::<u64>(), n in 2usize..8, factor in 0.01f64..100.0) {
        let mut rng = rng_from_seed(seed);
        let g = random_graph(&mut rng, n);
        let p = random_partition(&mut rng, n);
        let a = two_d_se(&g, &p).unwrap().bits;
        let b = two_d_se(&g.scaled(factor).unwrap(), &p).unwrap().bits;
        prop_assert!((a - b).abs() < 1e-9);
    }
}
