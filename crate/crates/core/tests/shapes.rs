use std::collections::HashMap;

use num_bigint::BigUint;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use symforge::sampler::{count_shapes, sample_shape, Shape, ShapeCounts};

/// Every unary-binary shape with exactly `n` internal nodes, by direct
/// recursion on the root.
fn enumerate(n: usize) -> Vec<Shape> {
    if n == 0 {
        return vec![Shape::Leaf];
    }
    let mut out: Vec<Shape> = enumerate(n - 1)
        .into_iter()
        .map(|s| Shape::Unary(Box::new(s)))
        .collect();
    for k in 0..n {
        for l in enumerate(k) {
            for r in enumerate(n - 1 - k) {
                out.push(Shape::Binary(Box::new(l.clone()), Box::new(r)));
            }
        }
    }
    out
}

#[test]
fn counts_match_enumeration() {
    let expected = [1u32, 2, 6, 22, 90];
    for (n, want) in expected.iter().enumerate() {
        let shapes = enumerate(n);
        assert_eq!(shapes.len() as u32, *want);
        assert_eq!(count_shapes(n), BigUint::from(*want));
        assert!(shapes.iter().all(|s| s.internal_nodes() == n));
    }
    for n in 5..=7 {
        assert_eq!(count_shapes(n), BigUint::from(enumerate(n).len()));
    }
}

#[test]
fn large_counts_do_not_overflow() {
    let c = count_shapes(120);
    assert!(c.bits() > 128);
}

/// Chi-square goodness of fit against the uniform distribution over all
/// shapes of size `n`; returns the p-value.
fn uniformity_p(n: usize, draws: usize, seed: u64) -> f64 {
    let shapes = enumerate(n);
    let table = ShapeCounts::new(n);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut freq: HashMap<Shape, usize> = shapes.iter().map(|s| (s.clone(), 0)).collect();
    for _ in 0..draws {
        *freq
            .get_mut(&sample_shape(&table, n, &mut rng))
            .expect("sampled shape is enumerated") += 1;
    }
    let expected = draws as f64 / shapes.len() as f64;
    let stat: f64 = freq
        .values()
        .map(|o| (*o as f64 - expected).powi(2) / expected)
        .sum();
    let dist = ChiSquared::new((shapes.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

#[test]
fn sampled_shapes_are_uniform() {
    for n in [1, 2, 3, 4] {
        let p = uniformity_p(n, 100_000, 17 + n as u64);
        assert!(p > 0.001, "n = {n}: p = {p}");
    }
}

#[test]
fn chi_square_detects_a_biased_sampler() {
    // sanity check of the test itself: a sampler that never draws the
    // all-unary chain at n = 2 is rejected
    let shapes = enumerate(2);
    let draws = 60_000usize;
    let biased = draws / (shapes.len() - 1);
    let expected = draws as f64 / shapes.len() as f64;
    let stat: f64 = shapes
        .iter()
        .enumerate()
        .map(|(i, _)| {
            let o = if i == 0 { 0.0 } else { biased as f64 };
            (o - expected).powi(2) / expected
        })
        .sum();
    let p = 1.0 - ChiSquared::new((shapes.len() - 1) as f64).unwrap().cdf(stat);
    assert!(p < 1e-6);
}
