//! Expression trees over a fixed operator alphabet.
//!
//! An [`Expr`] is an immutable unary-binary tree: internal nodes carry an
//! operator from [`UnaryOp`] or [`BinaryOp`], leaves are either a named
//! [`Symbol`] or an arbitrary-precision integer. Arity is enforced by the
//! type, so every operator node always has the right number of children.

pub(crate) mod canon;
mod eval;
mod simplify;

use std::collections::BTreeSet;
use std::fmt;

use num_bigint::BigInt;
use serde::{Deserialize, Serialize};

pub use eval::{evaluate, DomainReason, EvalError, Point};
pub use simplify::{simplify, simplify_with_limit, Simplified, DEFAULT_VISIT_LIMIT};

pub(crate) use canon::{canon, numerator, render, Node};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub const ALL: [BinaryOp; 5] = [
        BinaryOp::Add,
        BinaryOp::Sub,
        BinaryOp::Mul,
        BinaryOp::Div,
        BinaryOp::Pow,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BinaryOp::Add => "add",
            BinaryOp::Sub => "sub",
            BinaryOp::Mul => "mul",
            BinaryOp::Div => "div",
            BinaryOp::Pow => "pow",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UnaryOp {
    Neg,
    Exp,
    Ln,
    Sqrt,
    Sin,
    Cos,
    Tan,
    Asin,
    Acos,
    Atan,
}

impl UnaryOp {
    pub const ALL: [UnaryOp; 10] = [
        UnaryOp::Neg,
        UnaryOp::Exp,
        UnaryOp::Ln,
        UnaryOp::Sqrt,
        UnaryOp::Sin,
        UnaryOp::Cos,
        UnaryOp::Tan,
        UnaryOp::Asin,
        UnaryOp::Acos,
        UnaryOp::Atan,
    ];

    pub fn name(self) -> &'static str {
        match self {
            UnaryOp::Neg => "neg",
            UnaryOp::Exp => "exp",
            UnaryOp::Ln => "ln",
            UnaryOp::Sqrt => "sqrt",
            UnaryOp::Sin => "sin",
            UnaryOp::Cos => "cos",
            UnaryOp::Tan => "tan",
            UnaryOp::Asin => "asin",
            UnaryOp::Acos => "acos",
            UnaryOp::Atan => "atan",
        }
    }

    pub fn is_trig(self) -> bool {
        matches!(
            self,
            UnaryOp::Sin | UnaryOp::Cos | UnaryOp::Tan | UnaryOp::Asin | UnaryOp::Acos | UnaryOp::Atan
        )
    }

    pub fn is_exp_log(self) -> bool {
        matches!(self, UnaryOp::Exp | UnaryOp::Ln)
    }
}

/// Any operator of the alphabet, in declared order: binary first, then unary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Binary(BinaryOp),
    Unary(UnaryOp),
}

impl Operator {
    pub fn all() -> impl Iterator<Item = Operator> {
        BinaryOp::ALL
            .into_iter()
            .map(Operator::Binary)
            .chain(UnaryOp::ALL.into_iter().map(Operator::Unary))
    }

    pub fn name(self) -> &'static str {
        match self {
            Operator::Binary(op) => op.name(),
            Operator::Unary(op) => op.name(),
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Operator::Binary(_) => 2,
            Operator::Unary(_) => 1,
        }
    }

    pub fn from_name(name: &str) -> Option<Operator> {
        Operator::all().find(|op| op.name() == name)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Named leaf symbols. `Pi` and `E` are numeric constants; the rest are
/// bound through a [`Point`] at evaluation time.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Symbol {
    X,
    Y,
    Y1,
    Y2,
    Pi,
    E,
    C,
    C1,
    C2,
}

impl Symbol {
    pub const ALL: [Symbol; 9] = [
        Symbol::X,
        Symbol::Y,
        Symbol::Y1,
        Symbol::Y2,
        Symbol::Pi,
        Symbol::E,
        Symbol::C,
        Symbol::C1,
        Symbol::C2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Symbol::X => "x",
            Symbol::Y => "y",
            Symbol::Y1 => "y1",
            Symbol::Y2 => "y2",
            Symbol::Pi => "pi",
            Symbol::E => "ee",
            Symbol::C => "c",
            Symbol::C1 => "c1",
            Symbol::C2 => "c2",
        }
    }

    pub fn from_name(name: &str) -> Option<Symbol> {
        Symbol::ALL.into_iter().find(|s| s.name() == name)
    }

    /// Fixed numeric constants that never need a binding.
    pub fn constant_value(self) -> Option<f64> {
        match self {
            Symbol::Pi => Some(std::f64::consts::PI),
            Symbol::E => Some(std::f64::consts::E),
            _ => None,
        }
    }

    pub fn is_free(self) -> bool {
        self.constant_value().is_none()
    }
}

impl fmt::Display for Symbol {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Expr {
    Sym(Symbol),
    Int(BigInt),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

/// Node-count summary of a tree. The depth of a lone leaf is 0.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Metrics {
    pub internal_nodes: usize,
    pub depth: usize,
    pub leaves: usize,
}

// Constructors named after the operators they build.
#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn sym(s: Symbol) -> Expr {
        Expr::Sym(s)
    }

    pub fn x() -> Expr {
        Expr::Sym(Symbol::X)
    }

    pub fn int(v: impl Into<BigInt>) -> Expr {
        Expr::Int(v.into())
    }

    pub fn unary(op: UnaryOp, a: Expr) -> Expr {
        Expr::Unary(op, Box::new(a))
    }

    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        Expr::Binary(op, Box::new(a), Box::new(b))
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, a, b)
    }

    pub fn neg(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Neg, a)
    }

    pub fn exp(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Exp, a)
    }

    pub fn ln(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Ln, a)
    }

    pub fn sqrt(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Sqrt, a)
    }

    pub fn sin(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Sin, a)
    }

    pub fn cos(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Cos, a)
    }

    pub fn tan(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Tan, a)
    }

    pub fn asin(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Asin, a)
    }

    pub fn acos(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Acos, a)
    }

    pub fn atan(a: Expr) -> Expr {
        Expr::unary(UnaryOp::Atan, a)
    }

    pub fn is_leaf(&self) -> bool {
        matches!(self, Expr::Sym(_) | Expr::Int(_))
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Int(v) if v.sign() == num_bigint::Sign::NoSign)
    }

    pub fn children(&self) -> Vec<&Expr> {
        match self {
            Expr::Sym(_) | Expr::Int(_) => vec![],
            Expr::Unary(_, a) => vec![a],
            Expr::Binary(_, a, b) => vec![a, b],
        }
    }

    pub fn metrics(&self) -> Metrics {
        match self {
            Expr::Sym(_) | Expr::Int(_) => Metrics {
                internal_nodes: 0,
                depth: 0,
                leaves: 1,
            },
            Expr::Unary(_, a) => {
                let m = a.metrics();
                Metrics {
                    internal_nodes: m.internal_nodes + 1,
                    depth: m.depth + 1,
                    leaves: m.leaves,
                }
            }
            Expr::Binary(_, a, b) => {
                let (ma, mb) = (a.metrics(), b.metrics());
                Metrics {
                    internal_nodes: ma.internal_nodes + mb.internal_nodes + 1,
                    depth: ma.depth.max(mb.depth) + 1,
                    leaves: ma.leaves + mb.leaves,
                }
            }
        }
    }

    /// Number of leaves equal to `s`.
    pub fn count_symbol(&self, s: Symbol) -> usize {
        match self {
            Expr::Sym(t) => usize::from(*t == s),
            Expr::Int(_) => 0,
            Expr::Unary(_, a) => a.count_symbol(s),
            Expr::Binary(_, a, b) => a.count_symbol(s) + b.count_symbol(s),
        }
    }

    pub fn contains(&self, s: Symbol) -> bool {
        match self {
            Expr::Sym(t) => *t == s,
            Expr::Int(_) => false,
            Expr::Unary(_, a) => a.contains(s),
            Expr::Binary(_, a, b) => a.contains(s) || b.contains(s),
        }
    }

    /// Symbols that need a binding to evaluate this expression.
    pub fn free_symbols(&self) -> BTreeSet<Symbol> {
        let mut out = BTreeSet::new();
        self.collect_symbols(&mut out);
        out
    }

    fn collect_symbols(&self, out: &mut BTreeSet<Symbol>) {
        match self {
            Expr::Sym(s) if s.is_free() => {
                out.insert(*s);
            }
            Expr::Sym(_) | Expr::Int(_) => {}
            Expr::Unary(_, a) => a.collect_symbols(out),
            Expr::Binary(_, a, b) => {
                a.collect_symbols(out);
                b.collect_symbols(out);
            }
        }
    }

    pub fn substitute(&self, s: Symbol, with: &Expr) -> Expr {
        self.map_leaves(&mut |leaf| match leaf {
            Expr::Sym(t) if *t == s => Some(with.clone()),
            _ => None,
        })
    }

    /// Rebuilds the tree, replacing each leaf for which `f` returns `Some`.
    pub fn map_leaves(&self, f: &mut impl FnMut(&Expr) -> Option<Expr>) -> Expr {
        match self {
            Expr::Sym(_) | Expr::Int(_) => f(self).unwrap_or_else(|| self.clone()),
            Expr::Unary(op, a) => Expr::unary(*op, a.map_leaves(f)),
            Expr::Binary(op, a, b) => Expr::binary(*op, a.map_leaves(f), b.map_leaves(f)),
        }
    }

    /// Operators in prefix order.
    pub fn operators(&self) -> Vec<Operator> {
        let mut out = Vec::new();
        self.collect_operators(&mut out);
        out
    }

    fn collect_operators(&self, out: &mut Vec<Operator>) {
        match self {
            Expr::Sym(_) | Expr::Int(_) => {}
            Expr::Unary(op, a) => {
                out.push(Operator::Unary(*op));
                a.collect_operators(out);
            }
            Expr::Binary(op, a, b) => {
                out.push(Operator::Binary(*op));
                a.collect_operators(out);
                b.collect_operators(out);
            }
        }
    }
}

/// Node-for-node identity. Two trees with the same value but different
/// shapes (say `7+3*(5+2)` and `3*(5+2)+7`) are not structurally equal.
pub fn structural_equal(a: &Expr, b: &Expr) -> bool {
    a == b
}

pub fn metrics(e: &Expr) -> Metrics {
    e.metrics()
}

impl From<Symbol> for Expr {
    fn from(s: Symbol) -> Self {
        Expr::Sym(s)
    }
}

impl From<i64> for Expr {
    fn from(v: i64) -> Self {
        Expr::Int(BigInt::from(v))
    }
}

// Debug infix rendering, fully parenthesised around binary nodes.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Sym(s) => write!(f, "{s}"),
            Expr::Int(v) => write!(f, "{v}"),
            Expr::Unary(UnaryOp::Neg, a) => write!(f, "-({a})"),
            Expr::Unary(op, a) => write!(f, "{}({a})", op.name()),
            Expr::Binary(op, a, b) => {
                let sym = match op {
                    BinaryOp::Add => "+",
                    BinaryOp::Sub => "-",
                    BinaryOp::Mul => "*",
                    BinaryOp::Div => "/",
                    BinaryOp::Pow => "^",
                };
                write!(f, "({a} {sym} {b})")
            }
        }
    }
}
