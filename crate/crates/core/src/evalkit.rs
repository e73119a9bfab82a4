//! Equivalence checking and accuracy scoring.
//!
//! A prediction is compared with a reference in tiers: the symbolic
//! difference first, then numeric agreement at random points. The numeric
//! tier is needed because the simplifier cannot decide every
//! zero-equivalence (`sin(x)^2 + cos(x)^2 - 1` stays as it is).

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::differentiate;
use crate::expr::{canon, evaluate, simplify_with_limit, Expr, Point, Symbol, DEFAULT_VISIT_LIMIT};
use crate::prefix::{decode, TokenSequence};
use crate::taskgen::Task;

/// Valid points needed before a numeric verdict is given.
pub const MIN_POINTS: usize = 5;
/// Point draws allowed per check, including those that hit a domain error.
pub const MAX_ATTEMPTS: usize = 100;
pub const REL_TOL: f64 = 1e-6;
pub const CONST_VARIANCE_TOL: f64 = 1e-9;
pub const SAMPLE_RADIUS: f64 = 10.0;
const POINT_SEED: u64 = 0x5f3759df;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Outcome {
    EquivalentSymbolic,
    EquivalentNumeric,
    EquivalentModConstant,
    NotEquivalent,
    Undecided,
}

impl Outcome {
    pub const ALL: [Outcome; 5] = [
        Outcome::EquivalentSymbolic,
        Outcome::EquivalentNumeric,
        Outcome::EquivalentModConstant,
        Outcome::NotEquivalent,
        Outcome::Undecided,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Outcome::EquivalentSymbolic => "equivalent_symbolic",
            Outcome::EquivalentNumeric => "equivalent_numeric",
            Outcome::EquivalentModConstant => "equivalent_mod_constant",
            Outcome::NotEquivalent => "not_equivalent",
            Outcome::Undecided => "undecided",
        }
    }

    /// Whether the outcome counts towards accuracy. Mod-constant verdicts
    /// are only produced when the flag is on, so they always count.
    pub fn is_correct(self) -> bool {
        matches!(
            self,
            Outcome::EquivalentSymbolic | Outcome::EquivalentNumeric | Outcome::EquivalentModConstant
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EquivVerdict {
    pub outcome: Outcome,
    pub detail: String,
}

impl EquivVerdict {
    fn new(outcome: Outcome, detail: impl Into<String>) -> EquivVerdict {
        EquivVerdict {
            outcome,
            detail: detail.into(),
        }
    }
}

/// Compares two token sequences. A prediction that does not decode is
/// `not_equivalent`; a reference that does not decode is `undecided`.
pub fn check_equiv(pred: &TokenSequence, reference: &TokenSequence, mod_constant: bool) -> EquivVerdict {
    let p = match decode(pred) {
        Ok(p) => p,
        Err(e) => return EquivVerdict::new(Outcome::NotEquivalent, format!("prediction: {e}")),
    };
    let r = match decode(reference) {
        Ok(r) => r,
        Err(e) => return EquivVerdict::new(Outcome::Undecided, format!("reference: {e}")),
    };
    check_equiv_exprs(&p, &r, mod_constant)
}

pub fn check_equiv_exprs(pred: &Expr, reference: &Expr, mod_constant: bool) -> EquivVerdict {
    let diff = Expr::sub(pred.clone(), reference.clone());
    let s = simplify_with_limit(&diff, DEFAULT_VISIT_LIMIT);
    if !s.truncated {
        if s.expr.is_zero() {
            return EquivVerdict::new(Outcome::EquivalentSymbolic, "difference simplifies to 0");
        }
        if let Some(v) = canon(&s.expr).as_num() {
            let outcome = if mod_constant {
                Outcome::EquivalentModConstant
            } else {
                Outcome::NotEquivalent
            };
            return EquivVerdict::new(outcome, format!("difference simplifies to the constant {v}"));
        }
    }
    let mut symbols = pred.free_symbols();
    symbols.extend(reference.free_symbols());
    let symbols: Vec<Symbol> = symbols.into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(POINT_SEED);
    let mut pairs = Vec::with_capacity(MIN_POINTS);
    for _ in 0..MAX_ATTEMPTS {
        if pairs.len() == MIN_POINTS {
            break;
        }
        let point = random_point(&symbols, &mut rng);
        if let (Ok(a), Ok(b)) = (evaluate(pred, &point), evaluate(reference, &point)) {
            pairs.push((a, b));
        }
    }
    numeric_verdict(&pairs, mod_constant)
}

fn numeric_verdict(pairs: &[(f64, f64)], mod_constant: bool) -> EquivVerdict {
    if pairs.len() < MIN_POINTS {
        return EquivVerdict::new(
            Outcome::Undecided,
            format!("only {} valid points in {MAX_ATTEMPTS} attempts", pairs.len()),
        );
    }
    let close = |a: f64, b: f64| (a - b).abs() <= REL_TOL * 1f64.max(a.abs()).max(b.abs());
    if let Some((a, b)) = pairs.iter().find(|(a, b)| !close(*a, *b)) {
        if mod_constant && constant_offset(pairs) {
            return EquivVerdict::new(
                Outcome::EquivalentModConstant,
                format!("differs by a constant at {} points", pairs.len()),
            );
        }
        return EquivVerdict::new(Outcome::NotEquivalent, format!("{a} != {b}"));
    }
    EquivVerdict::new(
        Outcome::EquivalentNumeric,
        format!("agrees at {} points", pairs.len()),
    )
}

/// The differences `a - b` are constant: their variance, relative to the
/// magnitude of the values, is below [`CONST_VARIANCE_TOL`].
fn constant_offset(pairs: &[(f64, f64)]) -> bool {
    let n = pairs.len() as f64;
    let diffs: Vec<f64> = pairs.iter().map(|(a, b)| a - b).collect();
    let mean = diffs.iter().sum::<f64>() / n;
    let var = diffs.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
    let scale = pairs.iter().fold(1f64, |m, (a, b)| m.max(a.abs()).max(b.abs()));
    var <= CONST_VARIANCE_TOL * scale * scale
}

/// Draws each free symbol from `[-10, 10]`. Every other draw is narrowed to
/// `[-1, 1]` so that functions with small domains (`asin`, `acos`) still
/// get enough valid points.
fn random_point(symbols: &[Symbol], rng: &mut ChaCha8Rng) -> Point {
    let mut p = Point::new();
    for &s in symbols {
        let r = if rng.gen_bool(0.5) { SAMPLE_RADIUS } else { 1.0 };
        p.set(s, rng.gen_range(-r..=r));
    }
    p
}

/// Whether `e` evaluates to a finite value at [`MIN_POINTS`] or more of the
/// random points the numeric tier would draw.
pub fn is_defined(e: &Expr) -> bool {
    let symbols: Vec<Symbol> = e.free_symbols().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(POINT_SEED);
    let mut valid = 0;
    for _ in 0..MAX_ATTEMPTS {
        if evaluate(e, &random_point(&symbols, &mut rng)).is_ok() {
            valid += 1;
            if valid == MIN_POINTS {
                return true;
            }
        }
    }
    false
}

/// Checks that `antiderivative` differentiates back to `integrand`.
pub fn check_primitive(integrand: &Expr, antiderivative: &Expr) -> EquivVerdict {
    let d = differentiate(antiderivative, Symbol::X);
    check_equiv_exprs(&d, integrand, false)
}

/// Substitutes `y = candidate` and its derivatives into `ode` and checks
/// that the residual vanishes. Integration constants in the candidate are
/// sampled like `x`.
pub fn check_ode_solution(ode: &Expr, candidate: &Expr) -> EquivVerdict {
    if [Symbol::Y, Symbol::Y1, Symbol::Y2]
        .iter()
        .any(|s| candidate.contains(*s))
    {
        return EquivVerdict::new(Outcome::NotEquivalent, "candidate mentions y");
    }
    let y1 = differentiate(candidate, Symbol::X);
    let y2 = differentiate(&y1, Symbol::X);
    let sub = |e: &Expr| {
        e.substitute(Symbol::Y, candidate)
            .substitute(Symbol::Y1, &y1)
            .substitute(Symbol::Y2, &y2)
    };
    let residual = sub(ode);
    let s = simplify_with_limit(&residual, DEFAULT_VISIT_LIMIT);
    if !s.truncated {
        if s.expr.is_zero() {
            return EquivVerdict::new(Outcome::EquivalentSymbolic, "residual simplifies to 0");
        }
        if let Some(v) = canon(&s.expr).as_num() {
            return EquivVerdict::new(Outcome::NotEquivalent, format!("residual is the constant {v}"));
        }
    }
    // The residual is compared with 0 relative to the size of the terms
    // that cancel in it.
    let terms: Vec<Expr> = top_level_terms(ode).iter().map(sub).collect();
    let symbols: Vec<Symbol> = residual.free_symbols().into_iter().collect();
    let mut rng = ChaCha8Rng::seed_from_u64(POINT_SEED);
    let mut valid = 0;
    for _ in 0..MAX_ATTEMPTS {
        if valid == MIN_POINTS {
            break;
        }
        let point = random_point(&symbols, &mut rng);
        let Ok(r) = evaluate(&residual, &point) else {
            continue;
        };
        let Ok(parts) = terms
            .iter()
            .map(|t| evaluate(t, &point))
            .collect::<Result<Vec<f64>, _>>()
        else {
            continue;
        };
        let scale = parts.iter().map(|v| v.abs()).sum::<f64>();
        if r.abs() > REL_TOL * scale.max(1.0) {
            return EquivVerdict::new(Outcome::NotEquivalent, format!("residual {r} at a sample point"));
        }
        valid += 1;
    }
    if valid < MIN_POINTS {
        return EquivVerdict::new(
            Outcome::Undecided,
            format!("only {valid} valid points in {MAX_ATTEMPTS} attempts"),
        );
    }
    EquivVerdict::new(
        Outcome::EquivalentNumeric,
        format!("residual vanishes at {valid} points"),
    )
}

fn top_level_terms(e: &Expr) -> Vec<Expr> {
    use crate::expr::BinaryOp;
    match e {
        Expr::Binary(BinaryOp::Add | BinaryOp::Sub, a, b) => {
            let mut out = top_level_terms(a);
            out.extend(top_level_terms(b));
            out
        }
        other => vec![other.clone()],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub total: usize,
    pub correct: usize,
    pub accuracy: f64,
    pub verdict_counts: BTreeMap<String, usize>,
}

impl EvalReport {
    pub fn from_outcomes(task: &str, outcomes: &[Outcome]) -> EvalReport {
        let mut verdict_counts: BTreeMap<String, usize> =
            Outcome::ALL.iter().map(|o| (o.name().to_string(), 0)).collect();
        for o in outcomes {
            *verdict_counts.get_mut(o.name()).expect("all outcomes listed") += 1;
        }
        let correct = outcomes.iter().filter(|o| o.is_correct()).count();
        let total = outcomes.len();
        let accuracy = if total == 0 {
            0.0
        } else {
            100.0 * correct as f64 / total as f64
        };
        EvalReport {
            task: task.to_string(),
            total,
            correct,
            accuracy,
            verdict_counts,
        }
    }
}

#[derive(Debug, Error)]
pub enum ScoreError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("length mismatch: {pred} prediction lines vs {reference} reference lines")]
    LengthMismatch { pred: usize, reference: usize },
}

fn read_lines(path: &Path) -> Result<Vec<String>, ScoreError> {
    let text = fs::read_to_string(path).map_err(|source| ScoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(text.lines().map(str::to_string).collect())
}

/// Scores one prediction line against one reference line.
///
/// A reference line is either a bare solution or a full dataset line
/// (`problem TAB solution`); predictions may likewise carry a problem
/// column, which is ignored. ODE predictions are checked against the
/// problem when it is available, since equally valid solutions may differ
/// in how their constants are parameterised.
pub fn score_line(pred: &str, reference: &str, task: Task, mod_constant: bool) -> EquivVerdict {
    let pred_solution = pred.split('\t').next_back().unwrap_or("");
    let (problem, solution) = match reference.split_once('\t') {
        Some((p, s)) => (Some(p), s),
        None => (None, reference),
    };
    let pred_seq: TokenSequence = pred_solution.parse().expect("infallible");
    let ref_seq: TokenSequence = solution.parse().expect("infallible");
    match (task.is_ode(), problem) {
        (true, Some(problem)) => {
            let pred = match decode(&pred_seq) {
                Ok(e) => e,
                Err(e) => return EquivVerdict::new(Outcome::NotEquivalent, format!("prediction: {e}")),
            };
            let problem: TokenSequence = problem.parse().expect("infallible");
            match decode(&problem) {
                Ok(ode) => check_ode_solution(&ode, &pred),
                Err(e) => EquivVerdict::new(Outcome::Undecided, format!("problem: {e}")),
            }
        }
        _ => check_equiv(&pred_seq, &ref_seq, mod_constant),
    }
}

pub fn score_files(
    pred_path: &Path,
    ref_path: &Path,
    task: Task,
    mod_constant: bool,
) -> Result<EvalReport, ScoreError> {
    let preds = read_lines(pred_path)?;
    let refs = read_lines(ref_path)?;
    if preds.len() != refs.len() {
        return Err(ScoreError::LengthMismatch {
            pred: preds.len(),
            reference: refs.len(),
        });
    }
    let outcomes: Vec<Outcome> = preds
        .par_iter()
        .zip(refs.par_iter())
        .map(|(p, r)| score_line(p, r, task, mod_constant).outcome)
        .collect();
    Ok(EvalReport::from_outcomes(task.name(), &outcomes))
}

/// One cell of a distribution-shift matrix: a model trained on `train`
/// evaluated on the test set `test`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShiftCell {
    pub train: String,
    pub test: String,
    pub task: Task,
    pub pred: PathBuf,
    #[serde(rename = "ref")]
    pub reference: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftMatrix {
    /// Training distributions, in first-appearance order.
    pub rows: Vec<String>,
    /// Test distributions, in first-appearance order.
    pub cols: Vec<String>,
    /// `accuracy[i][j]` for row `i` and column `j`; `None` where no cell
    /// was given.
    pub accuracy: Vec<Vec<Option<f64>>>,
    pub reports: BTreeMap<String, BTreeMap<String, EvalReport>>,
}

pub fn shift_matrix(cells: &[ShiftCell], mod_constant: bool) -> Result<ShiftMatrix, ScoreError> {
    let mut rows: Vec<String> = Vec::new();
    let mut cols: Vec<String> = Vec::new();
    let mut reports: BTreeMap<String, BTreeMap<String, EvalReport>> = BTreeMap::new();
    for cell in cells {
        if !rows.contains(&cell.train) {
            rows.push(cell.train.clone());
        }
        if !cols.contains(&cell.test) {
            cols.push(cell.test.clone());
        }
        let report = score_files(&cell.pred, &cell.reference, cell.task, mod_constant)?;
        reports
            .entry(cell.train.clone())
            .or_default()
            .insert(cell.test.clone(), report);
    }
    let accuracy = rows
        .iter()
        .map(|r| {
            cols.iter()
                .map(|c| reports.get(r).and_then(|m| m.get(c)).map(|rep| rep.accuracy))
                .collect()
        })
        .collect();
    Ok(ShiftMatrix {
        rows,
        cols,
        accuracy,
        reports,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::prefix::encode;

    fn x() -> Expr {
        Expr::x()
    }

    fn sym(s: Symbol) -> Expr {
        Expr::sym(s)
    }

    #[test]
    fn reflexive_is_symbolic() {
        let e = Expr::div(Expr::sin(x()), Expr::add(x(), Expr::int(3)));
        let v = check_equiv(&encode(&e), &encode(&e), false);
        assert_eq!(v.outcome, Outcome::EquivalentSymbolic);
    }

    #[test]
    fn pythagorean_identity_needs_numeric_tier() {
        let lhs = Expr::add(
            Expr::pow(Expr::sin(x()), Expr::int(2)),
            Expr::pow(Expr::cos(x()), Expr::int(2)),
        );
        let v = check_equiv_exprs(&lhs, &Expr::int(1), false);
        assert_eq!(v.outcome, Outcome::EquivalentNumeric);
    }

    #[test]
    fn constant_offset_respects_flag() {
        let a = Expr::add(x(), Expr::int(1));
        let b = Expr::add(x(), Expr::int(2));
        assert_eq!(check_equiv_exprs(&a, &b, false).outcome, Outcome::NotEquivalent);
        assert_eq!(
            check_equiv_exprs(&a, &b, true).outcome,
            Outcome::EquivalentModConstant
        );
        // an offset the simplifier cannot see: ln(2x) vs ln(x)
        let a = Expr::ln(Expr::mul(Expr::int(2), x()));
        let b = Expr::ln(x());
        assert_eq!(check_equiv_exprs(&a, &b, false).outcome, Outcome::NotEquivalent);
        assert_eq!(
            check_equiv_exprs(&a, &b, true).outcome,
            Outcome::EquivalentModConstant
        );
    }

    #[test]
    fn undecodable_prediction() {
        let bad: TokenSequence = "add x".parse().unwrap();
        let v = check_equiv(&bad, &encode(&x()), false);
        assert_eq!(v.outcome, Outcome::NotEquivalent);
    }

    #[test]
    fn empty_domain_is_undecided() {
        // ln(-x^2 - 1) is never defined over the reals
        let e = Expr::ln(Expr::sub(Expr::neg(Expr::pow(x(), Expr::int(2))), Expr::int(1)));
        let f = Expr::add(e.clone(), Expr::sin(x()));
        assert_eq!(check_equiv_exprs(&e, &f, false).outcome, Outcome::Undecided);
    }

    #[test]
    fn ode_examples() {
        let y = sym(Symbol::Y);
        let y1 = sym(Symbol::Y1);
        let ode = Expr::sub(Expr::mul(x(), y1.clone()), y.clone());
        let cand = Expr::mul(sym(Symbol::C), x());
        assert!(check_ode_solution(&ode, &cand).outcome.is_correct());

        let ode = sym(Symbol::Y2);
        let cand = Expr::add(Expr::mul(sym(Symbol::C1), x()), sym(Symbol::C2));
        assert!(check_ode_solution(&ode, &cand).outcome.is_correct());

        let ode = Expr::sub(y1, y);
        assert_eq!(check_ode_solution(&ode, &x()).outcome, Outcome::NotEquivalent);
    }

    #[test]
    fn ode_exponential_needs_numeric_tier() {
        // y1 - y = 0 solved by c*exp(x)
        let ode = Expr::sub(sym(Symbol::Y1), sym(Symbol::Y));
        let cand = Expr::mul(sym(Symbol::C), Expr::exp(x()));
        assert!(check_ode_solution(&ode, &cand).outcome.is_correct());
        let wrong = Expr::mul(sym(Symbol::C), Expr::exp(Expr::mul(Expr::int(2), x())));
        assert_eq!(check_ode_solution(&ode, &wrong).outcome, Outcome::NotEquivalent);
    }

    #[test]
    fn report_arithmetic() {
        let o = [
            Outcome::EquivalentSymbolic,
            Outcome::EquivalentNumeric,
            Outcome::EquivalentSymbolic,
            Outcome::NotEquivalent,
            Outcome::Undecided,
        ];
        let r = EvalReport::from_outcomes("bwd", &o);
        assert_eq!((r.total, r.correct), (5, 3));
        assert!((r.accuracy - 60.0).abs() < 1e-12);
        assert_eq!(r.verdict_counts.values().sum::<usize>(), 5);
        assert_eq!(r.verdict_counts["equivalent_mod_constant"], 0);
    }

    #[test]
    fn score_line_uses_solution_column() {
        let line = format!("{}\t{}", encode(&Expr::cos(x())), encode(&Expr::sin(x())));
        let v = score_line(&encode(&Expr::sin(x())).to_string(), &line, Task::Fwd, false);
        assert_eq!(v.outcome, Outcome::EquivalentSymbolic);
        let v = score_line(&line, &line, Task::Fwd, false);
        assert_eq!(v.outcome, Outcome::EquivalentSymbolic);
    }
}
