use std::fmt;

use num_traits::ToPrimitive;
use thiserror::Error;

use super::{BinaryOp, Expr, Symbol, UnaryOp};

/// Real-valued bindings for the free leaf symbols.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Point {
    values: [Option<f64>; 7],
}

fn slot(s: Symbol) -> Option<usize> {
    match s {
        Symbol::X => Some(0),
        Symbol::Y => Some(1),
        Symbol::Y1 => Some(2),
        Symbol::Y2 => Some(3),
        Symbol::C => Some(4),
        Symbol::C1 => Some(5),
        Symbol::C2 => Some(6),
        Symbol::Pi | Symbol::E => None,
    }
}

impl Point {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with(mut self, s: Symbol, v: f64) -> Self {
        self.set(s, v);
        self
    }

    /// Binding a constant symbol (`pi`, `ee`) is a no-op.
    pub fn set(&mut self, s: Symbol, v: f64) {
        if let Some(i) = slot(s) {
            self.values[i] = Some(v);
        }
    }

    pub fn get(&self, s: Symbol) -> Option<f64> {
        match slot(s) {
            Some(i) => self.values[i],
            None => s.constant_value(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainReason {
    LogNonPositive,
    SqrtNegative,
    DivisionByZero,
    ZeroToNegativePower,
    NegativeBaseFractionalPower,
    InverseTrigRange,
    Overflow,
}

impl fmt::Display for DomainReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            DomainReason::LogNonPositive => "log of a non-positive number",
            DomainReason::SqrtNegative => "square root of a negative number",
            DomainReason::DivisionByZero => "division by zero",
            DomainReason::ZeroToNegativePower => "zero raised to a negative power",
            DomainReason::NegativeBaseFractionalPower => "negative base with fractional exponent",
            DomainReason::InverseTrigRange => "inverse trig argument outside [-1, 1]",
            DomainReason::Overflow => "non-finite result",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, Error, PartialEq)]
pub enum EvalError {
    #[error("{reason} at {node}")]
    Domain { node: Box<Expr>, reason: DomainReason },
    #[error("unbound symbol {0}")]
    Unbound(Symbol),
}

fn domain(node: &Expr, reason: DomainReason) -> EvalError {
    EvalError::Domain {
        node: Box::new(node.clone()),
        reason,
    }
}

fn finite(node: &Expr, v: f64) -> Result<f64, EvalError> {
    if v.is_finite() {
        Ok(v)
    } else {
        Err(domain(node, DomainReason::Overflow))
    }
}

/// Evaluates `e` at `p` in double precision, failing with the offending
/// sub-node whenever a step leaves the reals.
pub fn evaluate(e: &Expr, p: &Point) -> Result<f64, EvalError> {
    match e {
        Expr::Sym(s) => p.get(*s).ok_or(EvalError::Unbound(*s)),
        Expr::Int(v) => finite(e, v.to_f64().unwrap_or(f64::INFINITY)),
        Expr::Unary(op, a) => {
            let a = evaluate(a, p)?;
            let v = match op {
                UnaryOp::Neg => -a,
                UnaryOp::Exp => a.exp(),
                UnaryOp::Ln => {
                    if a <= 0.0 {
                        return Err(domain(e, DomainReason::LogNonPositive));
                    }
                    a.ln()
                }
                UnaryOp::Sqrt => {
                    if a < 0.0 {
                        return Err(domain(e, DomainReason::SqrtNegative));
                    }
                    a.sqrt()
                }
                UnaryOp::Sin => a.sin(),
                UnaryOp::Cos => a.cos(),
                UnaryOp::Tan => a.tan(),
                UnaryOp::Asin | UnaryOp::Acos if !(-1.0..=1.0).contains(&a) => {
                    return Err(domain(e, DomainReason::InverseTrigRange));
                }
                UnaryOp::Asin => a.asin(),
                UnaryOp::Acos => a.acos(),
                UnaryOp::Atan => a.atan(),
            };
            finite(e, v)
        }
        Expr::Binary(op, a, b) => {
            let (a, b) = (evaluate(a, p)?, evaluate(b, p)?);
            let v = match op {
                BinaryOp::Add => a + b,
                BinaryOp::Sub => a - b,
                BinaryOp::Mul => a * b,
                BinaryOp::Div => {
                    if b == 0.0 {
                        return Err(domain(e, DomainReason::DivisionByZero));
                    }
                    a / b
                }
                BinaryOp::Pow => {
                    if a == 0.0 && b < 0.0 {
                        return Err(domain(e, DomainReason::ZeroToNegativePower));
                    }
                    if a < 0.0 && b.fract() != 0.0 {
                        return Err(domain(e, DomainReason::NegativeBaseFractionalPower));
                    }
                    a.powf(b)
                }
            };
            finite(e, v)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arithmetic_identities() {
        let p = Point::new().with(Symbol::X, 0.0);
        assert_eq!(evaluate(&Expr::add(Expr::x(), Expr::int(1)), &p), Ok(1.0));
        let inner = Expr::mul(Expr::int(3), Expr::add(Expr::int(5), Expr::int(2)));
        assert_eq!(evaluate(&inner, &Point::new()), Ok(21.0));
        let e = Expr::add(Expr::int(7), inner);
        assert_eq!(evaluate(&e, &Point::new()), Ok(28.0));
    }

    #[test]
    fn domain_errors_carry_the_node() {
        let e = Expr::ln(Expr::x());
        let p = Point::new().with(Symbol::X, -1.0);
        match evaluate(&e, &p) {
            Err(EvalError::Domain { node, reason }) => {
                assert_eq!(*node, e);
                assert_eq!(reason, DomainReason::LogNonPositive);
            }
            other => panic!("unexpected {other:?}"),
        }
        let d = Expr::div(Expr::int(1), Expr::sub(Expr::x(), Expr::x()));
        assert!(matches!(
            evaluate(&d, &p),
            Err(EvalError::Domain {
                reason: DomainReason::DivisionByZero,
                ..
            })
        ));
        let z = Expr::pow(Expr::int(0), Expr::int(-1));
        assert!(evaluate(&z, &p).is_err());
        let a = Expr::asin(Expr::int(2));
        assert!(evaluate(&a, &p).is_err());
        let big = Expr::exp(Expr::int(1000));
        assert!(matches!(
            evaluate(&big, &p),
            Err(EvalError::Domain {
                reason: DomainReason::Overflow,
                ..
            })
        ));
    }

    #[test]
    fn unbound_symbols_are_reported() {
        assert_eq!(
            evaluate(&Expr::sym(Symbol::Y), &Point::new()),
            Err(EvalError::Unbound(Symbol::Y))
        );
        let pi = evaluate(&Expr::sym(Symbol::Pi), &Point::new()).unwrap();
        assert!((pi - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn negative_base_integer_power() {
        let e = Expr::pow(Expr::x(), Expr::int(3));
        let p = Point::new().with(Symbol::X, -2.0);
        assert_eq!(evaluate(&e, &p), Ok(-8.0));
        let f = Expr::pow(Expr::x(), Expr::div(Expr::int(1), Expr::int(3)));
        assert!(evaluate(&f, &p).is_err());
    }
}
