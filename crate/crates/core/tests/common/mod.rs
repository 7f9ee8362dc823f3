//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use entropath::image::Image;
use entropath::rng::Rng;
use entropath::seros::{Partition, SimilarityGraph};
use rand::Rng as _;

pub fn random_graph(rng: &mut Rng, n: usize) -> SimilarityGraph {
    let mut w = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            let v: f64 = rng.random();
            w[i * n + j] = v;
            w[j * n + i] = v;
        }
    }
    SimilarityGraph::new(n, w).unwrap()
}

pub fn random_partition(rng: &mut Rng, n: usize) -> Partition {
    let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..n)).collect();
    Partition::from_assignment(&labels)
}

/// Two-level structural entropy straight from the adjacency matrix and a
/// label vector, without any of the library's graph helpers.
pub fn naive_h2(g: &SimilarityGraph, labels: &[usize]) -> f64 {
    let n = g.n();
    let deg: Vec<f64> = (0..n).map(|i| (0..n).map(|j| g.weight(i, j)).sum()).collect();
    let vol: f64 = deg.iter().sum();
    let mut ids: Vec<usize> = labels.to_vec();
    ids.sort_unstable();
    ids.dedup();
    let mut h = 0.0;
    for c in ids {
        let vc: f64 = (0..n).filter(|&i| labels[i] == c).map(|i| deg[i]).sum();
        let mut gc = 0.0;
        for i in 0..n {
            for j in 0..n {
                if labels[i] == c && labels[j] != c {
                    gc += g.weight(i, j);
                }
            }
        }
        if gc > 0.0 {
            h -= gc / vol * (vc / vol).log2();
        }
        for i in (0..n).filter(|&i| labels[i] == c) {
            if deg[i] > 0.0 {
                h -= deg[i] / vol * (deg[i] / vc).log2();
            }
        }
    }
    h
}

/// Every set partition of `0..n` as restricted growth strings.
pub fn set_partitions(n: usize) -> Vec<Vec<usize>> {
    fn grow(prefix: &mut Vec<usize>, max: usize, n: usize, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == n {
            out.push(prefix.clone());
            return;
        }
        for l in 0..=max + 1 {
            prefix.push(l);
            grow(prefix, max.max(l), n, out);
            prefix.pop();
        }
    }
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    grow(&mut vec![0], 0, n, &mut out);
    out
}

/// Smallest entropy over every partition.
pub fn exhaustive_min(g: &SimilarityGraph) -> f64 {
    set_partitions(g.n())
        .iter()
        .map(|labels| naive_h2(g, labels))
        .fold(f64::INFINITY, f64::min)
}

pub fn random_image(rng: &mut Rng, w: usize, h: usize) -> Image {
    Image::from_fn(w, h, |_, _| rng.random::<f64>()).unwrap()
}

/// Smooth pattern plus noise, so windows see structure as well as texture.
pub fn textured_image(rng: &mut Rng, w: usize, h: usize) -> Image {
    let fx: f64 = rng.random_range(0.1..0.6);
    let fy: f64 = rng.random_range(0.1..0.6);
    let amp: f64 = rng.random_range(0.0..0.3);
    Image::from_fn(w, h, |x, y| {
        let base = 0.5 + 0.3 * (fx * x as f64).sin() * (fy * y as f64).cos();
        (base + amp * (rng.random::<f64>() - 0.5)).clamp(0.0, 1.0)
    })
    .unwrap()
}

fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let mut i = i;
    loop {
        if i < 0 {
            i = -i - 1;
        } else if i >= n {
            i = 2 * n - i - 1;
        } else {
            return i as usize;
        }
    }
}

/// Mean SSIM with an explicit 11×11 window sum at every pixel.
pub fn naive_ssim(a: &Image, b: &Image) -> f64 {
    let (w, h) = (a.width(), a.height());
    let sigma = 1.5f64;
    let raw: Vec<f64> = (-5..=5).map(|i: i32| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let s: f64 = raw.iter().sum();
    let g: Vec<f64> = raw.iter().map(|v| v / s).collect();
    let (c1, c2) = (1e-4, 9e-4);
    let mut total = 0.0;
    for y in 0..h as isize {
        for x in 0..w as isize {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for dy in -5..=5isize {
                for dx in -5..=5isize {
                    let wt = g[(dx + 5) as usize] * g[(dy + 5) as usize];
                    let (px, py) = (reflect(x + dx, w), reflect(y + dy, h));
                    let (u, v) = (a.get(px, py), b.get(px, py));
                    mx += wt * u;
                    my += wt * v;
                    xx += wt * u * u;
                    yy += wt * v * v;
                    xy += wt * u * v;
                }
            }
            let (vx, vy, cov) = (xx - mx * mx, yy - my * my, xy - mx * my);
            total += ((2.0 * mx * my + c1) * (2.0 * cov + c2)) / ((mx * mx + my * my + c1) * (vx + vy + c2));
        }
    }
    total / (w * h) as f64
}
