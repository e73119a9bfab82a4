//! Rule-based antiderivatives.
//!
//! The engine works on the canonical form and tries, in order: constants,
//! linearity, a handful of closed forms (`1/(p+qx^2)`, `1/sqrt(p-qx^2)`,
//! squared trig functions, `a^(kx+m)`), integration by parts for
//! `x^n * {exp, sin, cos, ln}`, derivative-divides substitution and finally
//! expansion of products of sums. It never claims an antiderivative it did
//! not construct from one of these rules.

use num_traits::Signed;
use thiserror::Error;

use crate::expr::canon::{add_all, expand, func, mul_all, power, q, Q};
use crate::expr::{canon, render, Expr, Node, Symbol, UnaryOp};

use super::differentiate;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Primitive {
    pub integrand: Expr,
    pub antiderivative: Expr,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IntegrateError {
    #[error("no integration rule applies")]
    NoRule,
    #[error("integration is only supported with respect to x")]
    Variable(Symbol),
}

const MAX_DEPTH: usize = 6;
const MAX_EXPANDED_TERMS: usize = 48;
const MAX_PARTS_DEGREE: i64 = 4;

/// Antiderivative of `e` with respect to `v` (which must be `x`), or
/// [`IntegrateError::NoRule`] when none of the rules apply.
pub fn integrate_rule_based(e: &Expr, v: Symbol) -> Result<Primitive, IntegrateError> {
    if v != Symbol::X {
        return Err(IntegrateError::Variable(v));
    }
    let f = canon(e);
    let anti = integ(&f, 0).ok_or(IntegrateError::NoRule)?;
    Ok(Primitive {
        integrand: e.clone(),
        antiderivative: render(&anti),
    })
}

fn x() -> Node {
    Node::Sym(Symbol::X)
}

fn free(n: &Node) -> bool {
    !n.contains(Symbol::X)
}

fn neg(n: Node) -> Node {
    mul_all([Node::int(-1), n])
}

fn div(a: Node, b: Node) -> Node {
    mul_all([a, power(b, Node::int(-1))])
}

fn d_dx(n: &Node) -> Node {
    canon(&differentiate(&render(n), Symbol::X))
}

fn integ(f: &Node, depth: usize) -> Option<Node> {
    if depth > MAX_DEPTH {
        return None;
    }
    if free(f) {
        return Some(mul_all([f.clone(), x()]));
    }
    if let Node::Add(..) = f {
        let mut parts = Vec::new();
        for t in f.terms() {
            parts.push(integ(&t, depth + 1)?);
        }
        return Some(add_all(parts));
    }
    let mut konst = vec![Node::Num(f.coefficient())];
    let mut var = Vec::new();
    for (b, e) in f.factors() {
        if free(&b) && free(&e) {
            konst.push(power(b, e));
        } else {
            var.push((b, e));
        }
    }
    let g = mul_all(
        var.iter()
            .map(|(b, e)| power(b.clone(), e.clone()))
            .collect::<Vec<_>>(),
    );
    let r = integ_core(&g, &var, depth)?;
    konst.push(r);
    Some(mul_all(konst))
}

fn integ_core(g: &Node, fs: &[(Node, Node)], depth: usize) -> Option<Node> {
    if let [(b, e)] = fs {
        if let Some(r) = closed_form(b, e) {
            return Some(r);
        }
    }
    if let Some(r) = by_parts(fs, depth) {
        return Some(r);
    }
    if let Some(r) = substitution(g, fs) {
        return Some(r);
    }
    let expanded = expand(g, MAX_EXPANDED_TERMS)?;
    if matches!(expanded, Node::Add(..)) && expanded != *g {
        return integ(&expanded, depth + 1);
    }
    None
}

/// `u = a*x + b` with `a` free of x and nonzero.
fn linear(u: &Node) -> Option<(Node, Node)> {
    let mut slope = None;
    let mut rest = Vec::new();
    for t in u.terms() {
        if free(&t) {
            rest.push(t);
            continue;
        }
        let c = t.coefficient();
        let fs = t.factors();
        let mut k = vec![Node::Num(c)];
        let mut seen_x = false;
        for (b, e) in fs {
            if b == x() && e.is_one() && !seen_x {
                seen_x = true;
            } else if free(&b) && free(&e) {
                k.push(power(b, e));
            } else {
                return None;
            }
        }
        if !seen_x || slope.is_some() {
            return None;
        }
        slope = Some(mul_all(k));
    }
    let slope = slope?;
    (!slope.is_zero()).then(|| (slope, add_all(rest)))
}

/// `p + q*x^2` with rational `p`, `q`.
fn quadratic(u: &Node) -> Option<(Q, Q)> {
    match u {
        Node::Add(ts, p) if ts.len() == 1 => {
            let (t, k) = &ts[0];
            (*t == power(x(), Node::int(2))).then(|| (p.clone(), k.clone()))
        }
        _ => None,
    }
}

fn sqrt_q(v: &Q) -> Node {
    power(Node::Num(v.clone()), Node::Num(Q::new(1.into(), 2.into())))
}

/// Antiderivative of `op(u)` with respect to `u`.
fn table(op: UnaryOp, u: &Node) -> Option<Node> {
    let u = u.clone();
    let one_minus_sq = || add_all([Node::int(1), neg(power(u.clone(), Node::int(2)))]);
    Some(match op {
        UnaryOp::Exp => func(UnaryOp::Exp, u),
        UnaryOp::Sin => neg(func(UnaryOp::Cos, u)),
        UnaryOp::Cos => func(UnaryOp::Sin, u),
        UnaryOp::Tan => neg(func(UnaryOp::Ln, func(UnaryOp::Cos, u))),
        UnaryOp::Ln => add_all([mul_all([u.clone(), func(UnaryOp::Ln, u.clone())]), neg(u)]),
        UnaryOp::Atan => add_all([
            mul_all([u.clone(), func(UnaryOp::Atan, u.clone())]),
            mul_all([
                Node::Num(Q::new((-1).into(), 2.into())),
                func(
                    UnaryOp::Ln,
                    add_all([Node::int(1), power(u.clone(), Node::int(2))]),
                ),
            ]),
        ]),
        UnaryOp::Asin => add_all([
            mul_all([u.clone(), func(UnaryOp::Asin, u.clone())]),
            func(UnaryOp::Sqrt, one_minus_sq()),
        ]),
        UnaryOp::Acos => add_all([
            mul_all([u.clone(), func(UnaryOp::Acos, u.clone())]),
            neg(func(UnaryOp::Sqrt, one_minus_sq())),
        ]),
        UnaryOp::Neg | UnaryOp::Sqrt => return None,
    })
}

fn power_rule(u: Node, e: &Node) -> Node {
    if matches!(e, Node::Num(v) if *v == q(-1)) {
        return func(UnaryOp::Ln, u);
    }
    let e1 = add_all([e.clone(), Node::one()]);
    div(power(u, e1.clone()), e1)
}

fn closed_form(b: &Node, e: &Node) -> Option<Node> {
    // 1/(p + q x^2) and 1/sqrt(p - q x^2)
    if let Some((p, k)) = quadratic(b) {
        if p.is_positive() && k.is_positive() && *e == Node::int(-1) {
            let scale = sqrt_q(&(&k / &p));
            return Some(div(
                func(UnaryOp::Atan, mul_all([scale, x()])),
                sqrt_q(&(&p * &k)),
            ));
        }
        if p.is_positive() && k.is_negative() && *e == Node::Num(Q::new((-1).into(), 2.into())) {
            let k = -k;
            let scale = sqrt_q(&(&k / &p));
            return Some(div(func(UnaryOp::Asin, mul_all([scale, x()])), sqrt_q(&k)));
        }
    }
    // squared trig of a linear argument
    if let (Node::Func(op, u), true) = (b, *e == Node::int(2)) {
        let (a, _) = linear(u)?;
        let u = (**u).clone();
        let two_u = mul_all([Node::int(2), u.clone()]);
        let quarter = Node::Num(Q::new(1.into(), 4.into()));
        let half_u = mul_all([Node::Num(Q::new(1.into(), 2.into())), u.clone()]);
        let r = match op {
            UnaryOp::Sin => add_all([half_u, neg(mul_all([quarter, func(UnaryOp::Sin, two_u)]))]),
            UnaryOp::Cos => add_all([half_u, mul_all([quarter, func(UnaryOp::Sin, two_u)])]),
            UnaryOp::Tan => add_all([func(UnaryOp::Tan, u.clone()), neg(u)]),
            _ => return None,
        };
        return Some(div(r, a));
    }
    // a^(k x + m) for a constant base
    if free(b) && !free(e) {
        let (a, _) = linear(e)?;
        let ln_b = func(UnaryOp::Ln, b.clone());
        if ln_b.is_zero() {
            return None;
        }
        return Some(div(power(b.clone(), e.clone()), mul_all([a, ln_b])));
    }
    None
}

fn positive_int(n: &Node) -> Option<i64> {
    match n {
        Node::Num(v) if v.is_integer() && v.is_positive() => num_traits::ToPrimitive::to_i64(&v.to_integer()),
        _ => None,
    }
}

/// x^n * g(a x + b) for g in {exp, sin, cos}, and x^n * ln(x).
fn by_parts(fs: &[(Node, Node)], depth: usize) -> Option<Node> {
    if fs.len() != 2 {
        return None;
    }
    let (xp, other) = if fs[0].0 == x() {
        (&fs[0], &fs[1])
    } else {
        (&fs[1], &fs[0])
    };
    if xp.0 != x() || !other.1.is_one() {
        return None;
    }
    let Node::Func(op, u) = &other.0 else {
        return None;
    };
    if *op == UnaryOp::Ln && **u == x() {
        // x^n ln x = x^(n+1) ln x/(n+1) - x^(n+1)/(n+1)^2, n != -1
        let n = &xp.1;
        if !free(n) || matches!(n, Node::Num(v) if *v == q(-1)) {
            return None;
        }
        let n1 = add_all([n.clone(), Node::one()]);
        let xn1 = power(x(), n1.clone());
        return Some(add_all([
            div(mul_all([xn1.clone(), func(UnaryOp::Ln, x())]), n1.clone()),
            neg(div(xn1, power(n1, Node::int(2)))),
        ]));
    }
    let n = positive_int(&xp.1).filter(|n| *n <= MAX_PARTS_DEGREE)?;
    if !matches!(op, UnaryOp::Exp | UnaryOp::Sin | UnaryOp::Cos) {
        return None;
    }
    let (a, _) = linear(u)?;
    let big_g = div(table(*op, u)?, a);
    // x^n G - n * int x^(n-1) G
    let rest = mul_all([Node::int(n), power(x(), Node::int(n - 1)), big_g.clone()]);
    let inner = integ(&rest, depth + 1)?;
    Some(add_all([mul_all([power(x(), Node::int(n)), big_g]), neg(inner)]))
}

/// Derivative-divides: if the integrand is `k * h(u) * u'` for a factor
/// `h(u)` with a known antiderivative and a constant `k`, return `k H(u)`.
fn substitution(g: &Node, fs: &[(Node, Node)]) -> Option<Node> {
    for (b, e) in fs {
        let candidates: Vec<(Node, Node)> = match (b, e) {
            (Node::Func(op, u), e) if e.is_one() && !free(u) => {
                let Some(h) = table(*op, u) else { continue };
                vec![((**u).clone(), h)]
            }
            (b, e) if !free(b) && free(e) => vec![(b.clone(), power_rule(b.clone(), e))],
            (b, e) if free(b) && !free(e) => {
                let ln_b = func(UnaryOp::Ln, b.clone());
                if ln_b.is_zero() {
                    continue;
                }
                vec![(e.clone(), div(power(b.clone(), e.clone()), ln_b))]
            }
            _ => continue,
        };
        for (u, anti) in candidates {
            let du = d_dx(&u);
            if du.is_zero() {
                continue;
            }
            let factor = power(b.clone(), e.clone());
            let ratio = mul_all([g.clone(), power(factor, Node::int(-1)), power(du, Node::int(-1))]);
            if free(&ratio) && !ratio.is_zero() {
                return Some(mul_all([ratio, anti]));
            }
        }
    }
    None
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evalkit::{check_primitive, Outcome};

    fn x() -> Expr {
        Expr::x()
    }

    fn int(v: i64) -> Expr {
        Expr::int(v)
    }

    fn assert_integrates(f: Expr) -> Expr {
        let p = integrate_rule_based(&f, Symbol::X).unwrap_or_else(|_| panic!("no rule for {f}"));
        let v = check_primitive(&p.integrand, &p.antiderivative);
        assert!(
            matches!(
                v.outcome,
                Outcome::EquivalentSymbolic | Outcome::EquivalentNumeric
            ),
            "d/dx {} != {f}: {v:?}",
            p.antiderivative
        );
        p.antiderivative
    }

    #[test]
    fn table_rules() {
        assert_eq!(assert_integrates(Expr::cos(x())), Expr::sin(x()));
        let f = Expr::div(int(1), Expr::sqrt(Expr::sub(int(1), Expr::pow(x(), int(2)))));
        assert_eq!(assert_integrates(f), Expr::asin(x()));
        let f = Expr::div(int(1), Expr::add(int(1), Expr::pow(x(), int(2))));
        assert_eq!(assert_integrates(f), Expr::atan(x()));
        assert_eq!(assert_integrates(Expr::div(int(1), x())), Expr::ln(x()));
    }

    #[test]
    fn exp_of_square_has_no_rule() {
        let f = Expr::exp(Expr::pow(x(), int(2)));
        assert_eq!(integrate_rule_based(&f, Symbol::X), Err(IntegrateError::NoRule));
    }

    #[test]
    fn linear_substitution_and_powers() {
        let lin = Expr::add(Expr::mul(int(3), x()), int(2));
        assert_integrates(Expr::exp(lin.clone()));
        assert_integrates(Expr::sin(lin.clone()));
        assert_integrates(Expr::cos(lin.clone()));
        assert_integrates(Expr::div(int(1), lin.clone()));
        assert_integrates(Expr::pow(lin, int(3)));
        assert_integrates(Expr::pow(x(), int(4)));
        assert_integrates(Expr::sqrt(x()));
        assert_integrates(Expr::tan(x()));
        assert_integrates(Expr::ln(x()));
        assert_integrates(Expr::atan(x()));
        assert_integrates(Expr::pow(int(2), x()));
        assert_integrates(Expr::int(5));
    }

    #[test]
    fn parts_patterns() {
        assert_integrates(Expr::mul(x(), Expr::exp(x())));
        assert_integrates(Expr::mul(Expr::pow(x(), int(2)), Expr::sin(x())));
        assert_integrates(Expr::mul(
            Expr::pow(x(), int(2)),
            Expr::cos(Expr::mul(int(2), x())),
        ));
        assert_integrates(Expr::mul(x(), Expr::ln(x())));
        assert_integrates(Expr::mul(Expr::add(x(), int(1)), Expr::exp(x())));
    }

    #[test]
    fn derivative_divides() {
        // 2x cos(x^2)
        let f = Expr::mul(Expr::mul(int(2), x()), Expr::cos(Expr::pow(x(), int(2))));
        assert_integrates(f);
        // x exp(x^2)
        assert_integrates(Expr::mul(x(), Expr::exp(Expr::pow(x(), int(2)))));
        // sin(x)^2 cos(x)
        assert_integrates(Expr::mul(Expr::pow(Expr::sin(x()), int(2)), Expr::cos(x())));
        // 1/(x ln x)
        assert_integrates(Expr::div(int(1), Expr::mul(x(), Expr::ln(x()))));
        // cos(x)/sin(x)
        assert_integrates(Expr::div(Expr::cos(x()), Expr::sin(x())));
        assert_integrates(Expr::pow(Expr::sin(x()), int(2)));
    }

    #[test]
    fn polynomial_expansion() {
        let f = Expr::mul(Expr::add(x(), int(1)), Expr::sub(x(), int(2)));
        assert_integrates(f);
    }

    #[test]
    fn only_x() {
        assert_eq!(
            integrate_rule_based(&x(), Symbol::Y),
            Err(IntegrateError::Variable(Symbol::Y))
        );
    }
}
