#![allow(dead_code)]

use dcflow::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn meshes() -> Vec<(&'static str, TriangulatedSurface)> {
    [
        ("tetrahedron", SurfaceKind::Tetrahedron),
        ("octahedron", SurfaceKind::Octahedron),
        ("torus 3x3", SurfaceKind::TorusGrid { n: 3, m: 3 }),
        ("genus 2", SurfaceKind::Genus2),
    ]
    .into_iter()
    .map(|(name, kind)| (name, generate(kind).unwrap()))
    .collect()
}

/// Random ε and positive η; such weights always meet both structure
/// conditions.
pub fn random_weights(rng: &mut impl Rng, surface: &TriangulatedSurface) -> WeightConfig {
    let eps = (0..surface.vertex_count()).map(|_| rng.gen_range(0..=1)).collect();
    let eta = (0..surface.edge_count()).map(|_| rng.gen_range(0.5..1.5)).collect();
    let w = WeightConfig::new(surface, eps, eta).unwrap();
    assert!(validate_weights(surface, &w).passed());
    w
}

/// Random state with every face nondegenerate and relative triangle slack
/// at least `margin`.
pub fn random_state(
    rng: &mut impl Rng,
    surface: &TriangulatedSurface,
    weights: &WeightConfig,
    geometry: Geometry,
    spread: f64,
    margin: f64,
) -> ConformalState {
    loop {
        let u: Vec<f64> = weights
            .epsilon()
            .iter()
            .map(|&e| {
                if geometry == Geometry::Hyperbolic && e == 1 {
                    rng.gen_range(-2.0..-0.2)
                } else {
                    rng.gen_range(-spread..spread)
                }
            })
            .collect();
        let st = ConformalState::new(geometry, weights, u).unwrap();
        if let Ok(r) = curvature(surface, weights, &st, false) {
            if r.min_slack(surface) >= margin {
                return st;
            }
        }
    }
}

/// Uniform sample from the Euclidean ball of the given radius.
pub fn random_ball(rng: &mut impl Rng, n: usize, radius: f64) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm > 0.0 && norm <= 1.0 {
            let r = radius * rng.gen::<f64>().powf(1.0 / n as f64);
            return v.iter().map(|x| x / norm * r).collect();
        }
    }
}

pub fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).fold(0.0, |m, (x, y)| m.max((x - y).abs()))
}

/// Least-squares line through (x, y); returns (slope, R²).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let syy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
    let slope = sxy / sxx;
    (slope, sxy * sxy / (sxx * syy))
}
