#![allow(dead_code)]

use symforge::expr::{evaluate, Expr, Point, Symbol};
use symforge::sampler::{GenProfile, Sampler};

pub const PRESETS: [&str; 4] = ["uniform", "poly", "trig", "log"];

/// `n` sampler expressions, cycling through the presets.
pub fn corpus(n: usize, seed: u64) -> Vec<Expr> {
    let mut samplers: Vec<Sampler> = PRESETS
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let profile = GenProfile::preset(p).unwrap().with_seed(seed + i as u64);
            Sampler::new(profile).unwrap()
        })
        .collect();
    (0..n)
        .map(|i| samplers[i % PRESETS.len()].sample().unwrap())
        .collect()
}

pub fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * 1f64.max(a.abs()).max(b.abs())
}

pub fn at(e: &Expr, x: f64) -> Option<f64> {
    evaluate(e, &Point::new().with(Symbol::X, x)).ok()
}

fn central(e: &Expr, x: f64, h: f64) -> Option<f64> {
    Some((at(e, x + h)? - at(e, x - h)?) / (2.0 * h))
}

/// Largest absolute value of any subexpression of `e` at `x`.
fn magnitude(e: &Expr, x: f64) -> f64 {
    e.children()
        .into_iter()
        .map(|c| magnitude(c, x))
        .fold(at(e, x).map_or(0.0, f64::abs), f64::max)
}

pub const FD_STEP: f64 = 1e-5;

/// Central difference of `e` at `x`, or `None` where it cannot be trusted:
/// near a domain boundary, where doubling the step changes the quotient
/// (a singularity), where rounding in the largest intermediate value
/// swamps the step (`exp(300) - exp(300) + x`, `tan(exp(x^3))`), or where
/// the quotient drifts over a decade of steps, the signature of rounding
/// bias that scales with `1/h` (`ln(cos(exp(x)))` for very negative `x`).
pub fn converged_difference(e: &Expr, x: f64) -> Option<f64> {
    for dx in [-1e-3, 1e-3] {
        at(e, x + dx)?;
    }
    let fine = central(e, x, FD_STEP)?;
    let coarse = central(e, x, 2.0 * FD_STEP)?;
    let decade = central(e, x, 10.0 * FD_STEP)?;
    let scale = 1.0 + fine.abs();
    let noise = f64::EPSILON * magnitude(e, x) / FD_STEP;
    let stable = (fine - coarse).abs() <= 1e-7 * scale && (fine - decade).abs() <= 1e-6 * scale;
    (stable && noise <= 1e-7 * scale).then_some(fine)
}
