use thiserror::Error;

use std::f64::consts::{FRAC_PI_2, PI};

use crate::expr::{evaluate, simplify, BinaryOp, EvalError, Expr, Point, Symbol, UnaryOp};

#[derive(Debug, Clone, PartialEq)]
pub struct IsolationResult {
    /// Right-hand side `G` of `leaf = G`, simplified.
    pub isolated: Expr,
    /// Number of operator inversions applied.
    pub steps: usize,
    /// Where inverting `sqrt`, `asin`, `acos` or `atan` only covers part of
    /// the range: `G` solves the equation at points where every condition
    /// holds.
    pub conditions: Vec<BranchCondition>,
}

/// `lo <= expr <= hi` (strict at the ends when `open`).
#[derive(Debug, Clone, PartialEq)]
pub struct BranchCondition {
    pub expr: Expr,
    pub lo: f64,
    pub hi: f64,
    pub open: bool,
}

impl BranchCondition {
    fn new(expr: &Expr, lo: f64, hi: f64, open: bool) -> BranchCondition {
        BranchCondition {
            expr: expr.clone(),
            lo,
            hi,
            open,
        }
    }

    pub fn holds(&self, p: &Point) -> Result<bool, EvalError> {
        let v = evaluate(&self.expr, p)?;
        Ok(if self.open {
            self.lo < v && v < self.hi
        } else {
            self.lo <= v && v <= self.hi
        })
    }
}

impl IsolationResult {
    /// Whether `p` lies on the branch the inversion chose.
    pub fn on_branch(&self, p: &Point) -> bool {
        self.conditions.iter().all(|c| c.holds(p).unwrap_or(false))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum IsolateError {
    #[error("{0} does not occur in the equation")]
    NotFound(Symbol),
    #[error("{leaf} occurs {count} times; isolation needs exactly one occurrence")]
    Repeated { leaf: Symbol, count: usize },
    #[error("{0} occurs on the right-hand side")]
    InRhs(Symbol),
}

/// Solves `lhs = rhs` for `leaf`, which must occur exactly once in `lhs`
/// and not at all in `rhs`. Each operator on the path from the root of
/// `lhs` down to the leaf is inverted in turn; trigonometric and power
/// inversions take the principal branch.
pub fn isolate_leaf(lhs: &Expr, rhs: &Expr, leaf: Symbol) -> Result<IsolationResult, IsolateError> {
    if rhs.contains(leaf) {
        return Err(IsolateError::InRhs(leaf));
    }
    match lhs.count_symbol(leaf) {
        0 => return Err(IsolateError::NotFound(leaf)),
        1 => {}
        count => return Err(IsolateError::Repeated { leaf, count }),
    }
    let mut node = lhs;
    let mut acc = rhs.clone();
    let mut steps = 0;
    let mut conditions = Vec::new();
    loop {
        match node {
            Expr::Sym(s) if *s == leaf => break,
            Expr::Sym(_) | Expr::Int(_) => unreachable!("path ends at the leaf"),
            Expr::Unary(op, a) => {
                match op {
                    UnaryOp::Sqrt => conditions.push(BranchCondition::new(&acc, 0.0, f64::INFINITY, false)),
                    UnaryOp::Asin => {
                        conditions.push(BranchCondition::new(&acc, -FRAC_PI_2, FRAC_PI_2, false))
                    }
                    UnaryOp::Acos => conditions.push(BranchCondition::new(&acc, 0.0, PI, false)),
                    UnaryOp::Atan => conditions.push(BranchCondition::new(&acc, -FRAC_PI_2, FRAC_PI_2, true)),
                    _ => {}
                }
                acc = invert_unary(*op, acc);
                node = a;
            }
            Expr::Binary(op, a, b) => {
                let left = a.contains(leaf);
                let (next, other) = if left { (a, b) } else { (b, a) };
                acc = invert_binary(*op, left, acc, (**other).clone());
                node = next;
            }
        }
        steps += 1;
    }
    Ok(IsolationResult {
        isolated: simplify(&acc),
        steps,
        conditions,
    })
}

fn invert_unary(op: UnaryOp, r: Expr) -> Expr {
    match op {
        UnaryOp::Neg => Expr::neg(r),
        UnaryOp::Exp => Expr::ln(r),
        UnaryOp::Ln => Expr::exp(r),
        UnaryOp::Sqrt => Expr::pow(r, Expr::int(2)),
        UnaryOp::Sin => Expr::asin(r),
        UnaryOp::Cos => Expr::acos(r),
        UnaryOp::Tan => Expr::atan(r),
        UnaryOp::Asin => Expr::sin(r),
        UnaryOp::Acos => Expr::cos(r),
        UnaryOp::Atan => Expr::tan(r),
    }
}

/// Given `op(a, b) = r`, solves for `a` when `left`, otherwise for `b`;
/// `other` is the operand that does not contain the leaf.
fn invert_binary(op: BinaryOp, left: bool, r: Expr, other: Expr) -> Expr {
    match (op, left) {
        (BinaryOp::Add, _) => Expr::sub(r, other),
        (BinaryOp::Sub, true) => Expr::add(r, other),
        (BinaryOp::Sub, false) => Expr::sub(other, r),
        (BinaryOp::Mul, _) => Expr::div(r, other),
        (BinaryOp::Div, true) => Expr::mul(r, other),
        (BinaryOp::Div, false) => Expr::div(other, r),
        (BinaryOp::Pow, true) => Expr::pow(r, Expr::div(Expr::int(1), other)),
        (BinaryOp::Pow, false) => Expr::div(Expr::ln(r), Expr::ln(other)),
    }
}
