//! Canonical form used by the simplifier.
//!
//! Sums are a sorted list of `(term, coefficient)` plus a rational constant;
//! products are a rational coefficient times a sorted list of
//! `(base, exponent)` factors. Negation, subtraction, division and square
//! roots have no node of their own: they are folded into coefficients and
//! exponents on the way in and re-introduced by [`render`] on the way out,
//! so that `canon(render(n)) == n` for every canonical `n`.

use std::cell::Cell;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};

use super::{Expr, Symbol, UnaryOp};

pub type Q = BigRational;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Node {
    Num(Q),
    Sym(Symbol),
    /// Never `Neg` or `Sqrt`.
    Func(UnaryOp, Box<Node>),
    Add(Vec<(Node, Q)>, Q),
    Mul(Q, Vec<(Node, Node)>),
}

thread_local! {
    static WORK: Cell<usize> = const { Cell::new(0) };
}

pub(super) fn reset_work() {
    WORK.with(|w| w.set(0));
}

pub(super) fn work_done() -> usize {
    WORK.with(|w| w.get())
}

fn tick(n: usize) {
    WORK.with(|w| w.set(w.get().saturating_add(n)));
}

pub fn q(v: i64) -> Q {
    Q::from_integer(BigInt::from(v))
}

fn half() -> Q {
    Q::new(BigInt::from(1), BigInt::from(2))
}

// Integer folding bounds for powers of rationals.
const MAX_FOLD_EXPONENT: u64 = 256;
const MAX_FOLD_BITS: u64 = 4096;

impl Node {
    pub fn int(v: i64) -> Node {
        Node::Num(q(v))
    }

    pub fn zero() -> Node {
        Node::Num(Q::zero())
    }

    pub fn one() -> Node {
        Node::Num(Q::one())
    }

    pub fn as_num(&self) -> Option<&Q> {
        match self {
            Node::Num(v) => Some(v),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Node::Num(v) if v.is_zero())
    }

    pub fn is_one(&self) -> bool {
        matches!(self, Node::Num(v) if v.is_one())
    }

    pub fn contains(&self, s: Symbol) -> bool {
        match self {
            Node::Num(_) => false,
            Node::Sym(t) => *t == s,
            Node::Func(_, a) => a.contains(s),
            Node::Add(ts, _) => ts.iter().any(|(n, _)| n.contains(s)),
            Node::Mul(_, fs) => fs.iter().any(|(b, e)| b.contains(s) || e.contains(s)),
        }
    }

    /// The `(base, exponent)` factors of a product, or the node itself as a
    /// single factor. The coefficient is dropped.
    pub fn factors(&self) -> Vec<(Node, Node)> {
        match self {
            Node::Mul(_, fs) => fs.clone(),
            Node::Num(_) => vec![],
            other => vec![(other.clone(), Node::one())],
        }
    }

    pub fn coefficient(&self) -> Q {
        match self {
            Node::Num(v) => v.clone(),
            Node::Mul(c, _) => c.clone(),
            _ => Q::one(),
        }
    }

    /// Terms of a sum as `(node, coefficient)` pairs, the constant included
    /// as a `Num(1)` term when nonzero.
    pub fn terms(&self) -> Vec<Node> {
        match self {
            Node::Add(ts, c) => {
                let mut out: Vec<Node> = ts.iter().map(|(n, k)| scale(n, k)).collect();
                if !c.is_zero() {
                    out.push(Node::Num(c.clone()));
                }
                out
            }
            other => vec![other.clone()],
        }
    }

    fn looks_negative(&self) -> bool {
        match self {
            Node::Num(v) => v.is_negative(),
            Node::Mul(c, _) => c.is_negative(),
            Node::Add(ts, c) => c.is_negative() || (c.is_zero() && ts[0].1.is_negative()),
            _ => false,
        }
    }
}

/// `k * n` for a non-sum node `n` and nonzero `k`.
pub fn scale(n: &Node, k: &Q) -> Node {
    if k.is_one() {
        return n.clone();
    }
    match n {
        Node::Num(v) => Node::Num(v * k),
        Node::Add(ts, c) => Node::Add(ts.iter().map(|(t, kt)| (t.clone(), kt * k)).collect(), c * k),
        Node::Mul(c, fs) => Node::Mul(c * k, fs.clone()),
        other => Node::Mul(k.clone(), vec![(other.clone(), Node::one())]),
    }
}

fn from_factors(mut fs: Vec<(Node, Node)>) -> Node {
    if fs.len() == 1 && fs[0].1.is_one() {
        fs.pop().unwrap().0
    } else {
        Node::Mul(Q::one(), fs)
    }
}

pub fn add_all(items: impl IntoIterator<Item = Node>) -> Node {
    let mut constant = Q::zero();
    let mut raw: Vec<(Node, Q)> = Vec::new();
    for item in items {
        match item {
            Node::Num(v) => constant += v,
            Node::Add(ts, c) => {
                constant += c;
                raw.extend(ts);
            }
            Node::Mul(c, fs) if !c.is_one() => raw.push((from_factors(fs), c)),
            other => raw.push((other, Q::one())),
        }
    }
    tick(raw.len() + 1);
    raw.sort_by(|a, b| a.0.cmp(&b.0));
    let mut terms: Vec<(Node, Q)> = Vec::with_capacity(raw.len());
    for (n, k) in raw {
        match terms.last_mut() {
            Some((last, acc)) if *last == n => *acc += k,
            _ => terms.push((n, k)),
        }
    }
    terms.retain(|(_, k)| !k.is_zero());
    match terms.len() {
        0 => Node::Num(constant),
        1 if constant.is_zero() => {
            let (n, k) = terms.pop().unwrap();
            scale(&n, &k)
        }
        _ => Node::Add(terms, constant),
    }
}

fn absorb(coef: &mut Q, factors: &mut Vec<(Node, Node)>, item: Node) {
    match item {
        Node::Num(v) => *coef *= v,
        Node::Mul(c, fs) => {
            *coef *= c;
            factors.extend(fs);
        }
        other => factors.push((other, Node::one())),
    }
}

/// A result of [`power`] that can sit in a factor list as-is.
fn as_factor(n: &Node) -> Option<(Node, Node)> {
    match n {
        Node::Num(_) | Node::Func(UnaryOp::Exp, _) => None,
        Node::Mul(c, fs) if c.is_one() && fs.len() == 1 => Some(fs[0].clone()),
        Node::Mul(..) => None,
        other => Some((other.clone(), Node::one())),
    }
}

pub fn mul_all(items: impl IntoIterator<Item = Node>) -> Node {
    let mut coef = Q::one();
    let mut factors: Vec<(Node, Node)> = Vec::new();
    let mut queue: Vec<Node> = items.into_iter().collect();
    for _ in 0..64 {
        for item in queue.drain(..) {
            absorb(&mut coef, &mut factors, item);
        }
        if coef.is_zero() {
            return Node::zero();
        }
        tick(factors.len() + 1);
        let mut exp_args = Vec::new();
        let mut rest = Vec::with_capacity(factors.len());
        for (b, e) in factors.drain(..) {
            match b {
                Node::Func(UnaryOp::Exp, a) => exp_args.push(mul_all([*a, e])),
                b => rest.push((b, e)),
            }
        }
        rest.sort_by(|a, b| a.0.cmp(&b.0));
        let mut groups: Vec<(Node, Vec<Node>)> = Vec::new();
        for (b, e) in rest {
            match groups.last_mut() {
                Some((last, es)) if *last == b => es.push(e),
                _ => groups.push((b, vec![e])),
            }
        }
        for (b, mut es) in groups {
            let e = if es.len() == 1 {
                es.pop().unwrap()
            } else {
                add_all(es)
            };
            let r = power(b, e);
            match as_factor(&r) {
                Some(f) => factors.push(f),
                None => queue.push(r),
            }
        }
        if !exp_args.is_empty() {
            let r = func(UnaryOp::Exp, add_all(exp_args));
            match r {
                Node::Func(UnaryOp::Exp, _) => factors.push((r, Node::one())),
                other => queue.push(other),
            }
        }
        if queue.is_empty() {
            break;
        }
    }
    // A pathological input that keeps re-absorbing is left as an opaque
    // product of whatever is still queued.
    for item in queue.drain(..) {
        absorb(&mut coef, &mut factors, item);
    }
    if coef.is_zero() {
        return Node::zero();
    }
    factors.sort();
    if factors.is_empty() {
        return Node::Num(coef);
    }
    if factors.len() == 1 && factors[0].1.is_one() {
        let b = factors.pop().unwrap().0;
        if coef.is_one() {
            return b;
        }
        return scale(&b, &coef);
    }
    Node::Mul(coef, factors)
}

fn exact_root(v: &BigInt, k: u32) -> Option<BigInt> {
    if v.is_negative() {
        return None;
    }
    let r = v.nth_root(k);
    (num_traits::pow(r.clone(), k as usize) == *v).then_some(r)
}

fn num_power(base: &Q, exp: &Q) -> Node {
    let keep = || Node::Mul(Q::one(), vec![(Node::Num(base.clone()), Node::Num(exp.clone()))]);
    if base.is_one() {
        return Node::one();
    }
    if exp.is_integer() {
        let n = exp.to_integer();
        if base.is_zero() {
            return if n.is_positive() { Node::zero() } else { keep() };
        }
        if *base == -Q::one() {
            return if (&n % 2u32).is_zero() {
                Node::one()
            } else {
                Node::Num(base.clone())
            };
        }
        let mag = n.abs().to_u64().unwrap_or(u64::MAX);
        let bits = base.numer().bits().max(base.denom().bits());
        if mag > MAX_FOLD_EXPONENT || bits.saturating_mul(mag) > MAX_FOLD_BITS {
            return keep();
        }
        return Node::Num(num_traits::pow::Pow::pow(base, n.to_i32().unwrap()));
    }
    if base.is_zero() {
        return if exp.is_positive() { Node::zero() } else { keep() };
    }
    if base.is_negative() {
        return keep();
    }
    let floor = exp.floor();
    let frac = exp - &floor;
    let int_part = match num_power(base, &floor) {
        Node::Num(v) => v,
        _ => return keep(),
    };
    let k = frac.denom().to_u32().filter(|k| *k <= 64);
    let root = k.and_then(|k| Some(Q::new(exact_root(base.numer(), k)?, exact_root(base.denom(), k)?)));
    match root {
        Some(r) => match num_power(&r, &Q::from_integer(frac.numer().clone())) {
            Node::Num(v) => Node::Num(v * int_part),
            _ => keep(),
        },
        None => Node::Mul(int_part, vec![(Node::Num(base.clone()), Node::Num(frac))]),
    }
}

fn is_integer_num(n: &Node) -> bool {
    matches!(n, Node::Num(v) if v.is_integer())
}

fn is_fractional_num(n: &Node) -> bool {
    matches!(n, Node::Num(v) if !v.is_integer())
}

pub fn power(base: Node, exp: Node) -> Node {
    tick(1);
    if exp.is_zero() {
        return Node::one();
    }
    if exp.is_one() {
        return base;
    }
    match (base, exp) {
        (Node::Num(b), Node::Num(e)) => num_power(&b, &e),
        (Node::Num(b), _) if b.is_one() => Node::one(),
        (Node::Func(UnaryOp::Exp, a), e) => func(UnaryOp::Exp, mul_all([*a, e])),
        (Node::Mul(c, fs), e) if is_integer_num(&e) => {
            let mut items = vec![power(Node::Num(c), e.clone())];
            for (fb, fe) in fs {
                items.push(power(fb, mul_all([fe, e.clone()])));
            }
            mul_all(items)
        }
        // (b^r)^e = b^(r e) once r is fractional: b >= 0 wherever b^r is real.
        (Node::Mul(c, mut fs), e) if c.is_one() && fs.len() == 1 && is_fractional_num(&fs[0].1) => {
            let (fb, fe) = fs.pop().unwrap();
            power(fb, mul_all([fe, e]))
        }
        (b, e) => Node::Mul(Q::one(), vec![(b, e)]),
    }
}

fn negate(n: Node) -> Node {
    mul_all([Node::int(-1), n])
}

pub fn func(op: UnaryOp, a: Node) -> Node {
    tick(1);
    match op {
        UnaryOp::Neg => negate(a),
        UnaryOp::Sqrt => power(a, Node::Num(half())),
        UnaryOp::Exp => match a {
            Node::Num(v) if v.is_zero() => Node::one(),
            Node::Func(UnaryOp::Ln, u) => *u,
            // exp(k ln u) = u^k
            Node::Mul(c, mut fs)
                if fs.len() == 1 && fs[0].1.is_one() && matches!(fs[0].0, Node::Func(UnaryOp::Ln, _)) =>
            {
                match fs.pop() {
                    Some((Node::Func(_, u), _)) => power(*u, Node::Num(c)),
                    _ => unreachable!(),
                }
            }
            a => Node::Func(op, Box::new(a)),
        },
        UnaryOp::Ln => match a {
            Node::Num(v) if v.is_one() => Node::zero(),
            Node::Sym(Symbol::E) => Node::one(),
            Node::Func(UnaryOp::Exp, u) => *u,
            a => Node::Func(op, Box::new(a)),
        },
        UnaryOp::Sin | UnaryOp::Tan | UnaryOp::Asin | UnaryOp::Atan => {
            let inverse = match op {
                UnaryOp::Sin => Some(UnaryOp::Asin),
                UnaryOp::Tan => Some(UnaryOp::Atan),
                _ => None,
            };
            match a {
                a if a.is_zero() => Node::zero(),
                Node::Func(inner, u) if Some(inner) == inverse => *u,
                a if a.looks_negative() => negate(func(op, negate(a))),
                a => Node::Func(op, Box::new(a)),
            }
        }
        UnaryOp::Cos => match a {
            a if a.is_zero() => Node::one(),
            Node::Func(UnaryOp::Acos, u) => *u,
            a if a.looks_negative() => func(op, negate(a)),
            a => Node::Func(op, Box::new(a)),
        },
        UnaryOp::Acos => match a {
            a if a.is_one() => Node::zero(),
            a => Node::Func(op, Box::new(a)),
        },
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OverBudget;

/// Converts a tree into canonical form. `limit` bounds the total work
/// (tree nodes visited plus terms and factors combined).
pub fn canon_limited(e: &Expr, limit: usize) -> Result<Node, OverBudget> {
    reset_work();
    canon_rec(e, limit)
}

pub fn canon(e: &Expr) -> Node {
    reset_work();
    canon_rec(e, usize::MAX).expect("unbounded canonicalisation")
}

fn canon_rec(e: &Expr, limit: usize) -> Result<Node, OverBudget> {
    tick(1);
    if work_done() > limit {
        return Err(OverBudget);
    }
    use super::BinaryOp as B;
    Ok(match e {
        Expr::Sym(s) => Node::Sym(*s),
        Expr::Int(v) => Node::Num(Q::from_integer(v.clone())),
        Expr::Unary(op, a) => func(*op, canon_rec(a, limit)?),
        Expr::Binary(op, a, b) => {
            let (a, b) = (canon_rec(a, limit)?, canon_rec(b, limit)?);
            match op {
                B::Add => add_all([a, b]),
                B::Sub => add_all([a, negate(b)]),
                B::Mul => mul_all([a, b]),
                B::Div => mul_all([a, power(b, Node::int(-1))]),
                B::Pow => power(a, b),
            }
        }
    })
}

fn render_num(v: &Q) -> Expr {
    if v.is_integer() {
        Expr::Int(v.numer().clone())
    } else {
        Expr::div(Expr::Int(v.numer().clone()), Expr::Int(v.denom().clone()))
    }
}

fn product(parts: Vec<Expr>) -> Option<Expr> {
    parts.into_iter().reduce(Expr::mul)
}

fn render_factor(b: &Node, e: &Node) -> Expr {
    if e.is_one() {
        render(b)
    } else if matches!(e, Node::Num(v) if *v == half()) {
        Expr::sqrt(render(b))
    } else {
        Expr::pow(render(b), render(e))
    }
}

// The coefficient is kept outside the factor products: re-reading `k * s`
// with `s` a lone sum would distribute `k` over it and change the form.
fn render_mul(c: &Q, fs: &[(Node, Node)]) -> Expr {
    let mag = c.abs();
    let mut num = Vec::new();
    let mut den = Vec::new();
    for (b, e) in fs {
        match e {
            // 0^-k stays explicit: in a denominator product it would
            // collapse the whole product to 0 when re-read.
            Node::Num(_) if b.is_zero() => num.push(Expr::pow(render(b), render(e))),
            Node::Num(v) if v.is_negative() => den.push(render_factor(b, &Node::Num(-v))),
            _ => num.push(render_factor(b, e)),
        }
    }
    let k = || Expr::Int(mag.numer().clone());
    let out = match (product(num), product(den)) {
        (Some(n), None) => {
            let n = if mag.numer().is_one() {
                n
            } else {
                Expr::mul(k(), n)
            };
            if mag.denom().is_one() {
                n
            } else {
                Expr::div(n, Expr::Int(mag.denom().clone()))
            }
        }
        (None, Some(d)) => Expr::div(render_num(&mag), d),
        (Some(n), Some(d)) if mag.is_one() => Expr::div(n, d),
        (Some(n), Some(d)) => Expr::mul(render_num(&mag), Expr::div(n, d)),
        (None, None) => render_num(&mag),
    };
    if c.is_negative() {
        Expr::neg(out)
    } else {
        out
    }
}

pub fn render(n: &Node) -> Expr {
    match n {
        Node::Num(v) => render_num(v),
        Node::Sym(s) => Expr::Sym(*s),
        Node::Func(op, a) => Expr::unary(*op, render(a)),
        Node::Mul(c, fs) => render_mul(c, fs),
        Node::Add(ts, c) => {
            let mut acc = (!c.is_zero()).then(|| render_num(c));
            for (t, k) in ts {
                acc = Some(match acc {
                    None => render(&scale(t, k)),
                    Some(a) if k.is_negative() => Expr::sub(a, render(&scale(t, &-k))),
                    Some(a) => Expr::add(a, render(&scale(t, k))),
                });
            }
            acc.expect("sum with at least one term")
        }
    }
}

/// Numerator of the expression brought over a common denominator. The
/// result vanishes exactly where `n` does, away from the poles of `n`.
pub fn numerator(n: &Node) -> Node {
    match n {
        Node::Add(ts, c) => {
            let mut lcm = c.denom().clone();
            let mut den: Vec<(Node, Q)> = Vec::new();
            for (t, k) in ts {
                lcm = num_integer::Integer::lcm(&lcm, k.denom());
                for (b, e) in t.factors() {
                    if let Node::Num(v) = &e {
                        if v.is_negative() {
                            let need = -v;
                            match den.iter_mut().find(|(db, _)| *db == b) {
                                Some((_, have)) if *have < need => *have = need,
                                Some(_) => {}
                                None => den.push((b, need)),
                            }
                        }
                    }
                }
            }
            let mut common = vec![Node::Num(Q::from_integer(lcm))];
            common.extend(den.into_iter().map(|(b, e)| power(b, Node::Num(e))));
            let terms = n.terms().into_iter().map(|t| {
                let mut items = vec![t];
                items.extend(common.iter().cloned());
                mul_all(items)
            });
            let sum = add_all(terms.collect::<Vec<_>>());
            match sum {
                Node::Add(..) => sum,
                other => numerator(&other),
            }
        }
        Node::Mul(c, fs) => {
            let keep: Vec<(Node, Node)> = fs
                .iter()
                .filter(|(_, e)| !matches!(e, Node::Num(v) if v.is_negative()))
                .cloned()
                .collect();
            let sign = if c.is_negative() { -1 } else { 1 };
            mul_all(
                std::iter::once(Node::int(sign))
                    .chain(keep.into_iter().map(|(b, e)| power(b, e)))
                    .collect::<Vec<_>>(),
            )
        }
        other => other.clone(),
    }
}

/// Distributes products over sums, including positive integer powers of
/// sums, up to `max_terms` terms. Returns `None` when the expansion would
/// exceed the bound.
pub fn expand(n: &Node, max_terms: usize) -> Option<Node> {
    match n {
        Node::Add(..) => {
            let mut out = Vec::new();
            for t in n.terms() {
                out.extend(expand(&t, max_terms)?.terms());
                if out.len() > max_terms {
                    return None;
                }
            }
            Some(add_all(out))
        }
        Node::Mul(c, fs) => {
            let mut acc: Vec<Node> = vec![Node::Num(c.clone())];
            for (b, e) in fs {
                let reps = match (b, e) {
                    (Node::Add(..), Node::Num(v)) if v.is_integer() && v.is_positive() => {
                        v.to_integer().to_usize().filter(|r| *r <= 8)?
                    }
                    _ => 0,
                };
                if reps == 0 {
                    let f = power(b.clone(), e.clone());
                    acc = acc.into_iter().map(|t| mul_all([t, f.clone()])).collect();
                    continue;
                }
                let inner = expand(b, max_terms)?.terms();
                for _ in 0..reps {
                    let mut next = Vec::with_capacity(acc.len() * inner.len());
                    for t in &acc {
                        for s in &inner {
                            next.push(mul_all([t.clone(), s.clone()]));
                        }
                    }
                    if next.len() > max_terms {
                        return None;
                    }
                    acc = add_all(next).terms();
                }
            }
            Some(add_all(acc))
        }
        other => Some(other.clone()),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn x() -> Node {
        Node::Sym(Symbol::X)
    }

    #[test]
    fn sums_collect_like_terms() {
        let n = add_all([x(), x(), Node::int(3), Node::int(-3)]);
        assert_eq!(n, Node::Mul(q(2), vec![(x(), Node::one())]));
        assert_eq!(add_all([x(), negate(x())]), Node::zero());
    }

    #[test]
    fn products_merge_exponents() {
        let n = mul_all([power(x(), Node::int(2)), power(x(), Node::int(3))]);
        assert_eq!(n, Node::Mul(Q::one(), vec![(x(), Node::int(5))]));
        assert_eq!(mul_all([x(), power(x(), Node::int(-1))]), Node::one());
    }

    #[test]
    fn numeric_roots() {
        assert_eq!(power(Node::int(4), Node::Num(half())), Node::int(2));
        assert_eq!(
            power(Node::int(8), Node::Num(Q::new(2.into(), 3.into()))),
            Node::int(4)
        );
        // 2^(3/2) = 2 * 2^(1/2)
        let n = power(Node::int(2), Node::Num(Q::new(3.into(), 2.into())));
        assert_eq!(n, Node::Mul(q(2), vec![(Node::int(2), Node::Num(half()))]));
    }

    #[test]
    fn exponentials_combine() {
        let e = mul_all([func(UnaryOp::Exp, x()), func(UnaryOp::Exp, negate(x()))]);
        assert_eq!(e, Node::one());
        assert_eq!(func(UnaryOp::Ln, func(UnaryOp::Exp, x())), x());
    }

    #[test]
    fn numerator_clears_denominators() {
        // y1/x - y/x^2  ->  x*y1 - y
        let y = Node::Sym(Symbol::Y);
        let y1 = Node::Sym(Symbol::Y1);
        let n = add_all([
            mul_all([y1.clone(), power(x(), Node::int(-1))]),
            negate(mul_all([y.clone(), power(x(), Node::int(-2))])),
        ]);
        let expected = add_all([mul_all([x(), y1]), negate(y)]);
        assert_eq!(numerator(&n), expected);
    }

    #[test]
    fn expansion_of_binomial_square() {
        let s = add_all([x(), Node::one()]);
        let sq = power(s, Node::int(2));
        let e = expand(&sq, 100).unwrap();
        let expected = add_all([
            power(x(), Node::int(2)),
            mul_all([Node::int(2), x()]),
            Node::one(),
        ]);
        assert_eq!(e, expected);
    }
}
