//! Procedural clean images.

use std::f64::consts::PI;

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::filter::percentile_sorted;
use crate::image::Image;
use crate::rng::{rng_from_seed, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SceneKind {
    Ramp,
    Checkerboard,
    Thermal,
}

impl SceneKind {
    pub const ALL: [SceneKind; 3] = [SceneKind::Ramp, SceneKind::Checkerboard, SceneKind::Thermal];

    pub fn name(self) -> &'static str {
        match self {
            SceneKind::Ramp => "ramp",
            SceneKind::Checkerboard => "checkerboard",
            SceneKind::Thermal => "thermal",
        }
    }
}

/// Scene kind used for the `index`-th corpus image.
pub fn scene_kind_for(index: usize) -> SceneKind {
    SceneKind::ALL[index % SceneKind::ALL.len()]
}

pub fn generate(kind: SceneKind, size: usize, seed: u64) -> Image {
    let mut rng = rng_from_seed(seed);
    let raw = match kind {
        SceneKind::Ramp => ramp(size, &mut rng),
        SceneKind::Checkerboard => checkerboard(size, &mut rng),
        SceneKind::Thermal => thermal(size, &mut rng),
    };
    normalize(raw, size)
}

/// Oriented gradient with a few flat bars laid over it.
fn ramp(size: usize, rng: &mut Rng) -> Vec<f64> {
    let angle = rng.random_range(0.0..2.0 * PI);
    let (c, s) = (angle.cos(), angle.sin());
    let bars: Vec<(f64, f64, f64)> = (0..rng.random_range(2..5))
        .map(|_| (rng.random_range(0.0..1.0), rng.random_range(0.04..0.12), rng.random_range(-0.35..0.35)))
        .collect();
    field(size, |u, v| {
        let t = 0.5 + 0.5 * ((u - 0.5) * c + (v - 0.5) * s) * std::f64::consts::SQRT_2;
        let across = (u - 0.5) * -s + (v - 0.5) * c + 0.5;
        t + bars
            .iter()
            .filter(|(pos, width, _)| (across - pos).abs() < *width)
            .map(|b| b.2)
            .sum::<f64>()
    })
}

/// Two-level checkerboard with a slow illumination gradient.
fn checkerboard(size: usize, rng: &mut Rng) -> Vec<f64> {
    let cell = rng.random_range(5..13) as f64 / size as f64;
    let (lo, hi) = (rng.random_range(0.1..0.35), rng.random_range(0.65..0.9));
    let tilt = rng.random_range(-0.15..0.15);
    field(size, |u, v| {
        let on = ((u / cell).floor() as i64 + (v / cell).floor() as i64).rem_euclid(2) == 0;
        (if on { hi } else { lo }) + tilt * (u - 0.5)
    })
}

/// Smooth warm blobs on a cool gradient with a few hard-edged hot objects.
fn thermal(size: usize, rng: &mut Rng) -> Vec<f64> {
    let blobs: Vec<(f64, f64, f64, f64)> = (0..rng.random_range(3..7))
        .map(|_| {
            (
                rng.random_range(0.0..1.0),
                rng.random_range(0.0..1.0),
                rng.random_range(0.05..0.2),
                rng.random_range(0.2..0.6),
            )
        })
        .collect();
    let rects: Vec<(f64, f64, f64, f64, f64)> = (0..rng.random_range(1..4))
        .map(|_| {
            let (x0, y0) = (rng.random_range(0.05..0.8), rng.random_range(0.05..0.8));
            (x0, y0, x0 + rng.random_range(0.05..0.2), y0 + rng.random_range(0.08..0.3), rng.random_range(0.3..0.6))
        })
        .collect();
    let base = rng.random_range(0.1..0.3);
    field(size, |u, v| {
        let mut t = base + 0.15 * v;
        for &(bx, by, r, amp) in &blobs {
            t += amp * (-((u - bx).powi(2) + (v - by).powi(2)) / (2.0 * r * r)).exp();
        }
        for &(x0, y0, x1, y1, amp) in &rects {
            if (x0..x1).contains(&u) && (y0..y1).contains(&v) {
                t += amp;
            }
        }
        t
    })
}

fn field(size: usize, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(size * size);
    for y in 0..size {
        for x in 0..size {
            out.push(f((x as f64 + 0.5) / size as f64, (y as f64 + 0.5) / size as f64));
        }
    }
    out
}

/// Maps the 1st/99th percentiles onto 0 and 1.
fn normalize(raw: Vec<f64>, size: usize) -> Image {
    let mut sorted = raw.clone();
    sorted.sort_unstable_by(f64::total_cmp);
    let lo = percentile_sorted(&sorted, 1.0);
    let hi = percentile_sorted(&sorted, 99.0);
    let span = (hi - lo).max(1e-9);
    Image::new(size, size, raw.into_iter().map(|v| (v - lo) / span).collect()).expect("valid scene")
}
