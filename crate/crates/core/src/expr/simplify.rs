use super::canon::{canon_limited, render};
use super::Expr;

/// Work ceiling for one [`simplify`] call, counted in node visits plus
/// terms and factors combined.
pub const DEFAULT_VISIT_LIMIT: usize = 10_000;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Simplified {
    pub expr: Expr,
    /// The rewrite ceiling was hit; `expr` is the input, unrewritten.
    pub truncated: bool,
}

/// Rewrites `e` into its normal form.
///
/// The normal form folds integer and rational constants, collects like
/// terms and like factors (`x*x^2 -> x^3`, `x - x -> 0`, `x/x -> 1`),
/// flattens nested sums and products, orders commutative operands
/// canonically and applies the inverse-pair rules `ln(exp u) -> u`,
/// `exp(ln u) -> u`, `sin(asin u) -> u` and friends. It is idempotent and
/// agrees numerically with `e` wherever both are defined.
pub fn simplify(e: &Expr) -> Expr {
    simplify_with_limit(e, DEFAULT_VISIT_LIMIT).expr
}

pub fn simplify_with_limit(e: &Expr, limit: usize) -> Simplified {
    match canon_limited(e, limit) {
        Ok(n) => Simplified {
            expr: render(&n),
            truncated: false,
        },
        Err(_) => Simplified {
            expr: e.clone(),
            truncated: true,
        },
    }
}
