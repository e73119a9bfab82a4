mod common;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use symforge::calculus::{differentiate, integrate_rule_based, isolate_leaf};
use symforge::evalkit::{check_primitive, is_defined};
use symforge::expr::{evaluate, simplify, Expr, Point, Symbol};

/// Relative error of `d` against a central difference of `e` at `x`;
/// `None` when the point is unusable.
fn fd_error(e: &Expr, d: &Expr, x: f64) -> Option<f64> {
    let fd = common::converged_difference(e, x)?;
    let exact = common::at(d, x)?;
    Some((exact - fd).abs() / (1.0 + exact.abs()))
}

#[test]
fn derivatives_match_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut covered = 0;
    for e in common::corpus(1_000, 31) {
        let d = differentiate(&e, Symbol::X);
        let mut valid = 0;
        for _ in 0..400 {
            if valid == 5 {
                break;
            }
            let r = if rng.gen_bool(0.5) { 10.0 } else { 1.0 };
            let x = rng.gen_range(-r..=r);
            if let Some(err) = fd_error(&e, &d, x) {
                assert!(err < 1e-5, "d/dx {e} = {d} at x = {x}: relative error {err}");
                valid += 1;
            }
        }
        if valid == 5 {
            covered += 1;
        }
    }
    // expressions undefined almost everywhere cannot be checked
    assert!(covered >= 700, "only {covered} expressions had 5 usable points");
}

#[test]
fn integration_is_sound() {
    let mut integrated = 0;
    for e in common::corpus(3_000, 41) {
        let f = simplify(&e);
        let Ok(p) = integrate_rule_based(&f, Symbol::X) else {
            continue;
        };
        if !is_defined(&f) {
            continue;
        }
        integrated += 1;
        let v = check_primitive(&f, &p.antiderivative);
        assert!(v.outcome.is_correct(), "int {f} dx = {}: {v:?}", p.antiderivative);
    }
    assert!(integrated > 300, "only {integrated} integrable samples");
}

#[test]
fn isolation_substitutes_back() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let c = Expr::sym(Symbol::C);
    let mut checked = 0;
    for e in common::corpus(1_000, 51) {
        let leaves = e.metrics().leaves;
        let target = rng.gen_range(0..leaves);
        let mut i = 0;
        let f = e.map_leaves(&mut |_| {
            i += 1;
            (i - 1 == target).then(|| c.clone())
        });
        let Ok(g) = isolate_leaf(&f, &Expr::sym(Symbol::Y), Symbol::C) else {
            continue;
        };
        for _ in 0..50 {
            let (xv, cv) = (rng.gen_range(-3.0..3.0), rng.gen_range(-3.0..3.0));
            let p = Point::new().with(Symbol::X, xv).with(Symbol::C, cv);
            let Ok(y) = evaluate(&f, &p) else { continue };
            let q = Point::new().with(Symbol::X, xv).with(Symbol::Y, y);
            if !g.on_branch(&q) {
                continue;
            }
            let Ok(c_back) = evaluate(&g.isolated, &q) else {
                continue;
            };
            let Ok(y_back) = evaluate(&f, &p.with(Symbol::C, c_back)) else {
                continue;
            };
            assert!(
                common::close(y, y_back, 1e-6),
                "{f}: c = {} gives y {y_back}, expected {y}",
                g.isolated
            );
            checked += 1;
        }
    }
    assert!(checked > 1_000, "only {checked} points checked");
}
