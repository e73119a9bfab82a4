mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symforge::expr::{evaluate, simplify, Expr, Point, Symbol};

/// A relative nudge of 1e-12 to `x` moves `e` by more than 1e-8 relative:
/// the expression amplifies rounding error by over 1e4 at this point (for
/// example `tan` of a huge argument), so two algebraically equal forms
/// cannot be expected to agree to 1e-9.
fn ill_conditioned(e: &Expr, p: &Point, value: f64) -> bool {
    let x = p.get(Symbol::X).unwrap();
    let nudged = Point::new().with(Symbol::X, x * (1.0 + 1e-12) + 1e-12);
    match evaluate(e, &nudged) {
        Ok(v) => (v - value).abs() > 1e-8 * (1.0 + value.abs()),
        Err(_) => true,
    }
}

#[test]
fn value_preservation() {
    let mut rng = ChaCha8Rng::seed_from_u64(2024);
    let mut checked = 0;
    let mut worst = (0.0, String::new());
    for e in common::corpus(1_000, 11) {
        let s = simplify(&e);
        let mut valid = 0;
        for _ in 0..200 {
            if valid == 5 {
                break;
            }
            let r = if rng.gen_bool(0.5) { 10.0 } else { 1.0 };
            let p = Point::new().with(Symbol::X, rng.gen_range(-r..=r));
            let (Ok(a), Ok(b)) = (evaluate(&e, &p), evaluate(&s, &p)) else {
                continue;
            };
            if ill_conditioned(&e, &p, a) {
                continue;
            }
            valid += 1;
            let err = (a - b).abs() / (1.0 + a.abs());
            if err > worst.0 {
                worst = (err, format!("{e}  ->  {s}  at {p:?}: {a} vs {b}"));
            }
        }
        checked += valid;
    }
    assert!(checked > 3_000, "only {checked} valid points");
    assert!(worst.0 <= 1e-9, "worst relative error {}: {}", worst.0, worst.1);
}

#[test]
fn idempotence() {
    for e in common::corpus(5_000, 12) {
        let s = simplify(&e);
        assert_eq!(simplify(&s), s, "from {e}");
    }
}

#[test]
fn idempotence_on_derivatives() {
    for e in common::corpus(2_000, 13) {
        let d = symforge::calculus::differentiate(&e, Symbol::X);
        assert_eq!(simplify(&d), d, "d/dx {e}");
    }
}
