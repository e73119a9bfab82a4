mod common;

use proptest::prelude::*;

use symforge::evalkit::{check_equiv, check_equiv_exprs, is_defined, Outcome};
use symforge::expr::{simplify, Expr};
use symforge::prefix::encode;

/// Rewrites that keep the value: reorder sums and products and wrap the
/// expression in identities the simplifier should see through.
fn mangle(e: &Expr, k: usize) -> Expr {
    match k % 4 {
        0 => simplify(e),
        1 => Expr::add(Expr::int(0), Expr::mul(Expr::int(1), e.clone())),
        2 => Expr::sub(Expr::add(e.clone(), Expr::x()), Expr::x()),
        _ => Expr::div(Expr::mul(Expr::int(2), e.clone()), Expr::int(2)),
    }
}

fn defined_corpus(n: usize, seed: u64) -> Vec<Expr> {
    common::corpus(3 * n, seed)
        .into_iter()
        .filter(is_defined)
        .take(n)
        .collect()
}

#[test]
fn mangled_pairs_are_equivalent() {
    let corpus = defined_corpus(1_000, 31);
    assert_eq!(corpus.len(), 1_000);
    let mut counts = std::collections::BTreeMap::new();
    for (i, e) in corpus.iter().enumerate() {
        let v = check_equiv_exprs(&mangle(e, i), e, false);
        assert_ne!(v.outcome, Outcome::NotEquivalent, "{e}: {}", v.detail);
        *counts.entry(v.outcome).or_insert(0) += 1;
    }
    let undecided = counts.get(&Outcome::Undecided).copied().unwrap_or(0);
    assert!(undecided <= 20, "{counts:?}");
}

#[test]
fn integer_offsets_are_not_equivalent() {
    let corpus = defined_corpus(1_000, 32);
    for (i, e) in corpus.iter().enumerate() {
        let k = (i % 9) as i64 + 1;
        let k = if i % 2 == 0 { k } else { -k };
        let shifted = Expr::add(e.clone(), Expr::int(k));
        let v = check_equiv_exprs(&shifted, e, false);
        assert_eq!(v.outcome, Outcome::NotEquivalent, "{e} + {k}: {}", v.detail);
        let v = check_equiv_exprs(&shifted, e, true);
        assert_eq!(
            v.outcome,
            Outcome::EquivalentModConstant,
            "{e} + {k}: {}",
            v.detail
        );
    }
}

#[test]
fn identities_beyond_the_simplifier_are_equivalent() {
    let x = Expr::x;
    let pyth = Expr::add(
        Expr::pow(Expr::sin(x()), Expr::int(2)),
        Expr::pow(Expr::cos(x()), Expr::int(2)),
    );
    let v = check_equiv_exprs(&pyth, &Expr::int(1), false);
    assert_eq!(v.outcome, Outcome::EquivalentNumeric);
    // sin(x)^2 and -cos(x)^2 differ by a constant
    let a = Expr::pow(Expr::sin(x()), Expr::int(2));
    let b = Expr::neg(Expr::pow(Expr::cos(x()), Expr::int(2)));
    assert_eq!(check_equiv_exprs(&a, &b, false).outcome, Outcome::NotEquivalent);
    assert_eq!(
        check_equiv_exprs(&a, &b, true).outcome,
        Outcome::EquivalentModConstant
    );
}

#[test]
fn nowhere_defined_is_undecided() {
    let e = Expr::asin(Expr::add(Expr::int(3), Expr::pow(Expr::x(), Expr::int(2))));
    assert_eq!(
        check_equiv_exprs(&e, &e.clone(), false).outcome,
        Outcome::EquivalentSymbolic
    );
    let other = Expr::asin(Expr::add(Expr::int(4), Expr::pow(Expr::x(), Expr::int(2))));
    assert_eq!(check_equiv_exprs(&e, &other, false).outcome, Outcome::Undecided);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn reflexive(seed in 0u64..1_000_000) {
        let e = common::corpus(1, seed).pop().unwrap();
        let t = encode(&e);
        prop_assert_eq!(check_equiv(&t, &t, false).outcome, Outcome::EquivalentSymbolic);
    }

    #[test]
    fn symmetric(seed in 0u64..1_000_000, mc in any::<bool>()) {
        let mut pair = common::corpus(2, seed);
        let (a, b) = (pair.pop().unwrap(), pair.pop().unwrap());
        let ab = check_equiv_exprs(&a, &b, mc).outcome;
        let ba = check_equiv_exprs(&b, &a, mc).outcome;
        prop_assert_eq!(ab, ba, "{} vs {}", a, b);
    }
}
