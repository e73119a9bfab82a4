use crate::expr::{simplify, BinaryOp, Expr, Symbol, UnaryOp};

fn int(v: i64) -> Expr {
    Expr::int(v)
}

// Raw derivative with zero pruning; `leaf` gives the derivative of each
// symbol, `None` meaning it cannot be differentiated.
fn derive(e: &Expr, leaf: &impl Fn(Symbol) -> Option<Expr>) -> Option<Expr> {
    Some(match e {
        Expr::Int(_) => int(0),
        Expr::Sym(s) => leaf(*s)?,
        Expr::Unary(op, a) => {
            let da = derive(a, leaf)?;
            if da.is_zero() {
                return Some(int(0));
            }
            let u = (**a).clone();
            let outer = match op {
                UnaryOp::Neg => return Some(Expr::neg(da)),
                UnaryOp::Exp => Expr::exp(u),
                UnaryOp::Ln => Expr::div(int(1), u),
                UnaryOp::Sqrt => Expr::div(int(1), Expr::mul(int(2), Expr::sqrt(u))),
                UnaryOp::Sin => Expr::cos(u),
                UnaryOp::Cos => Expr::neg(Expr::sin(u)),
                UnaryOp::Tan => Expr::add(int(1), Expr::pow(Expr::tan(u), int(2))),
                UnaryOp::Asin => Expr::div(int(1), Expr::sqrt(Expr::sub(int(1), Expr::pow(u, int(2))))),
                UnaryOp::Acos => Expr::neg(Expr::div(
                    int(1),
                    Expr::sqrt(Expr::sub(int(1), Expr::pow(u, int(2)))),
                )),
                UnaryOp::Atan => Expr::div(int(1), Expr::add(int(1), Expr::pow(u, int(2)))),
            };
            Expr::mul(outer, da)
        }
        Expr::Binary(op, a, b) => {
            let da = derive(a, leaf)?;
            let db = derive(b, leaf)?;
            let (u, v) = ((**a).clone(), (**b).clone());
            match op {
                BinaryOp::Add => Expr::add(da, db),
                BinaryOp::Sub => Expr::sub(da, db),
                BinaryOp::Mul => Expr::add(Expr::mul(da, v), Expr::mul(u, db)),
                BinaryOp::Div => Expr::div(
                    Expr::sub(Expr::mul(da, v.clone()), Expr::mul(u, db)),
                    Expr::pow(v, int(2)),
                ),
                BinaryOp::Pow => {
                    if db.is_zero() {
                        // n u^(n-1) u'
                        Expr::mul(Expr::mul(v.clone(), Expr::pow(u, Expr::sub(v, int(1)))), da)
                    } else if da.is_zero() {
                        // a^w ln(a) w'
                        Expr::mul(Expr::mul(e.clone(), Expr::ln(u)), db)
                    } else {
                        // u^w (w' ln u + w u'/u)
                        Expr::mul(
                            e.clone(),
                            Expr::add(Expr::mul(db, Expr::ln(u.clone())), Expr::div(Expr::mul(v, da), u)),
                        )
                    }
                }
            }
        }
    })
}

/// Partial derivative of `e` with respect to `v`, simplified. Every other
/// symbol is held constant.
pub fn differentiate(e: &Expr, v: Symbol) -> Expr {
    let raw = derive(e, &|s| Some(int(i64::from(s == v)))).expect("partial derivative is total");
    simplify(&raw)
}

/// Derivative with respect to `x` where `y` is a function of `x`: `y`
/// becomes `y1` and `y1` becomes `y2`. Returns `None` when `y2` occurs,
/// since there is no third-derivative symbol.
pub fn total_derivative(e: &Expr) -> Option<Expr> {
    let raw = derive(e, &|s| match s {
        Symbol::X => Some(int(1)),
        Symbol::Y => Some(Expr::sym(Symbol::Y1)),
        Symbol::Y1 => Some(Expr::sym(Symbol::Y2)),
        Symbol::Y2 => None,
        _ => Some(int(0)),
    })?;
    Some(simplify(&raw))
}
