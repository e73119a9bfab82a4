//! Uniform random unary-binary trees and their decoration into expressions.
//!
//! Shapes are drawn uniformly among all unary-binary trees with a given
//! number of internal nodes using the count table
//! `D(e, n) = D(e-1, n) + D(e, n-1) + D(e+1, n-1)`, where `e` is the number
//! of empty slots still to fill and `n` the number of operators left to
//! place. Decoration then labels operators and leaves from the weights of a
//! [`GenProfile`].

use std::collections::BTreeMap;

use num_bigint::{BigUint, RandBigInt};
use num_traits::{One, Zero};
use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{BinaryOp, Expr, Symbol, UnaryOp};

/// Counts of unary-binary tree shapes, indexed by empty slots and
/// remaining internal nodes. Immutable once built.
#[derive(Debug, Clone)]
pub struct ShapeCounts {
    max_ops: usize,
    rows: Vec<Vec<BigUint>>,
}

impl ShapeCounts {
    pub fn new(max_ops: usize) -> ShapeCounts {
        let width = 2 * max_ops + 3;
        let mut rows: Vec<Vec<BigUint>> = Vec::with_capacity(max_ops + 1);
        rows.push(vec![BigUint::one(); width]);
        for n in 1..=max_ops {
            let prev = &rows[n - 1];
            let mut row = vec![BigUint::zero(); width];
            for e in 1..width - 1 {
                row[e] = &row[e - 1] + &prev[e] + &prev[e + 1];
            }
            rows.push(row);
        }
        ShapeCounts { max_ops, rows }
    }

    pub fn max_ops(&self) -> usize {
        self.max_ops
    }

    /// `D(e, n)`.
    pub fn get(&self, empty: usize, ops: usize) -> &BigUint {
        &self.rows[ops][empty]
    }
}

/// Number of distinct unary-binary shapes with `n` internal nodes.
pub fn count_shapes(n: usize) -> BigUint {
    ShapeCounts::new(n).get(1, n).clone()
}

/// An unlabelled tree.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Shape {
    Leaf,
    Unary(Box<Shape>),
    Binary(Box<Shape>, Box<Shape>),
}

impl Shape {
    pub fn internal_nodes(&self) -> usize {
        match self {
            Shape::Leaf => 0,
            Shape::Unary(a) => 1 + a.internal_nodes(),
            Shape::Binary(a, b) => 1 + a.internal_nodes() + b.internal_nodes(),
        }
    }

    fn from_arities(it: &mut impl Iterator<Item = u8>) -> Shape {
        match it.next().expect("complete prefix arity list") {
            0 => Shape::Leaf,
            1 => Shape::Unary(Box::new(Shape::from_arities(it))),
            _ => {
                let a = Shape::from_arities(it);
                let b = Shape::from_arities(it);
                Shape::Binary(Box::new(a), Box::new(b))
            }
        }
    }
}

/// Draws a shape with exactly `n` internal nodes, uniformly among all
/// `count_shapes(n)` of them.
///
/// # Panics
///
/// If `n` exceeds the table's `max_ops`.
pub fn sample_shape<R: Rng + ?Sized>(table: &ShapeCounts, n: usize, rng: &mut R) -> Shape {
    assert!(n <= table.max_ops(), "shape table too small for {n} operators");
    let mut arities: Vec<u8> = Vec::with_capacity(2 * n + 1);
    let mut empty = 1usize;
    let mut left = n;
    while left > 0 {
        let r = rng.gen_biguint_below(table.get(empty, left));
        let mut acc = BigUint::zero();
        let mut pick = None;
        'scan: for k in 0..empty {
            for arity in [1usize, 2] {
                acc += table.get(empty - k + arity - 1, left - 1);
                if r < acc {
                    pick = Some((k, arity));
                    break 'scan;
                }
            }
        }
        let (k, arity) = pick.expect("weights sum to D(e, n)");
        arities.extend(std::iter::repeat_n(0, k));
        arities.push(arity as u8);
        empty = empty - k - 1 + arity;
        left -= 1;
    }
    arities.extend(std::iter::repeat_n(0, empty));
    Shape::from_arities(&mut arities.into_iter())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeafWeights {
    pub variable: f64,
    pub integer: f64,
    pub constant: f64,
}

/// Operator and leaf weights, size limits and seed for the sampler.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenProfile {
    pub name: String,
    /// Inclusive range of internal-node counts.
    pub n_ops: (usize, usize),
    pub binary_weights: BTreeMap<BinaryOp, f64>,
    pub unary_weights: BTreeMap<UnaryOp, f64>,
    pub leaf_weights: LeafWeights,
    /// Inclusive range for integer leaves.
    pub integer_range: (i64, i64),
    pub exclude_zero: bool,
    /// When set, `pow` is only placed over a leaf right child, and that
    /// leaf becomes an integer exponent drawn from this range.
    pub pow_exponents: Option<(i64, i64)>,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("no operator of arity {0} has positive weight")]
    NoOperator(usize),
    #[error("no leaf kind has positive weight")]
    NoLeaf,
    #[error("weight for {0} is negative or not finite")]
    BadWeight(String),
    #[error("integer range is empty")]
    EmptyIntegerRange,
    #[error("n_ops range {0}..={1} is empty")]
    EmptyOpsRange(usize, usize),
    #[error("unknown preset {0:?}")]
    UnknownPreset(String),
}

/// Residual share of the non-dominant operators in dominant presets.
pub const DOMINANT_EPSILON: f64 = 0.05;

impl GenProfile {
    fn base(name: &str) -> GenProfile {
        GenProfile {
            name: name.to_string(),
            n_ops: (3, 15),
            binary_weights: BinaryOp::ALL.into_iter().map(|op| (op, 1.0)).collect(),
            unary_weights: UnaryOp::ALL.into_iter().map(|op| (op, 1.0)).collect(),
            leaf_weights: LeafWeights {
                variable: 0.6,
                integer: 0.3,
                constant: 0.1,
            },
            integer_range: (-5, 5),
            exclude_zero: true,
            pow_exponents: Some((2, 4)),
            seed: 0,
        }
    }

    pub fn uniform() -> GenProfile {
        GenProfile::base("uniform")
    }

    /// Mostly arithmetic: every unary function other than `neg` shares a
    /// residual [`DOMINANT_EPSILON`] of the unary weight.
    pub fn poly_dominant() -> GenProfile {
        let mut p = GenProfile::base("poly_dominant");
        p.binary_weights.insert(BinaryOp::Div, 0.25);
        let others = UnaryOp::ALL.len() - 1;
        for op in UnaryOp::ALL {
            let w = if op == UnaryOp::Neg {
                1.0 - DOMINANT_EPSILON
            } else {
                DOMINANT_EPSILON / others as f64
            };
            p.unary_weights.insert(op, w);
        }
        p
    }

    pub fn trig_dominant() -> GenProfile {
        GenProfile::dominant("trig_dominant", UnaryOp::is_trig)
    }

    pub fn log_dominant() -> GenProfile {
        GenProfile::dominant("log_dominant", UnaryOp::is_exp_log)
    }

    // 0.85 of the unary weight on the family, the rest spread evenly.
    fn dominant(name: &str, family: fn(UnaryOp) -> bool) -> GenProfile {
        let mut p = GenProfile::base(name);
        let inside = UnaryOp::ALL.iter().filter(|op| family(**op)).count() as f64;
        let outside = UnaryOp::ALL.len() as f64 - inside;
        for op in UnaryOp::ALL {
            let w = if family(op) { 0.85 / inside } else { 0.15 / outside };
            p.unary_weights.insert(op, w);
        }
        p
    }

    /// Looks up a preset by its CLI name (`uniform`, `poly`, `trig`, `log`)
    /// or its full name.
    pub fn preset(name: &str) -> Result<GenProfile, ProfileError> {
        match name {
            "uniform" => Ok(GenProfile::uniform()),
            "poly" | "poly_dominant" => Ok(GenProfile::poly_dominant()),
            "trig" | "trig_dominant" => Ok(GenProfile::trig_dominant()),
            "log" | "log_dominant" => Ok(GenProfile::log_dominant()),
            other => Err(ProfileError::UnknownPreset(other.to_string())),
        }
    }

    pub fn with_seed(mut self, seed: u64) -> GenProfile {
        self.seed = seed;
        self
    }

    pub fn with_ops(mut self, min: usize, max: usize) -> GenProfile {
        self.n_ops = (min, max);
        self
    }

    pub fn unary_weight(&self, op: UnaryOp) -> f64 {
        self.unary_weights.get(&op).copied().unwrap_or(0.0)
    }

    pub fn binary_weight(&self, op: BinaryOp) -> f64 {
        self.binary_weights.get(&op).copied().unwrap_or(0.0)
    }

    /// Fraction of the total unary weight carried by `family`.
    pub fn unary_share(&self, family: impl Fn(UnaryOp) -> bool) -> f64 {
        let total: f64 = UnaryOp::ALL.iter().map(|op| self.unary_weight(*op)).sum();
        let part: f64 = UnaryOp::ALL
            .iter()
            .filter(|op| family(**op))
            .map(|op| self.unary_weight(*op))
            .sum();
        if total > 0.0 {
            part / total
        } else {
            0.0
        }
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        let weights = self
            .binary_weights
            .iter()
            .map(|(k, v)| (k.name(), *v))
            .chain(self.unary_weights.iter().map(|(k, v)| (k.name(), *v)))
            .chain([
                ("variable", self.leaf_weights.variable),
                ("integer", self.leaf_weights.integer),
                ("constant", self.leaf_weights.constant),
            ]);
        for (name, w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(ProfileError::BadWeight(name.to_string()));
            }
        }
        if self.n_ops.0 > self.n_ops.1 {
            return Err(ProfileError::EmptyOpsRange(self.n_ops.0, self.n_ops.1));
        }
        let (lo, hi) = self.integer_range;
        if lo > hi || (self.exclude_zero && lo == 0 && hi == 0) {
            return Err(ProfileError::EmptyIntegerRange);
        }
        if let Some((lo, hi)) = self.pow_exponents {
            if lo > hi {
                return Err(ProfileError::EmptyIntegerRange);
            }
        }
        Ok(())
    }
}

fn pick<R: Rng + ?Sized, T: Copy>(items: &[(T, f64)], rng: &mut R) -> Option<T> {
    let dist = WeightedIndex::new(items.iter().map(|(_, w)| *w)).ok()?;
    Some(items[dist.sample(rng)].0)
}

fn draw_integer<R: Rng + ?Sized>(lo: i64, hi: i64, exclude_zero: bool, rng: &mut R) -> i64 {
    loop {
        let v = rng.gen_range(lo..=hi);
        if !(exclude_zero && v == 0) {
            return v;
        }
    }
}

fn decorate_leaf<R: Rng + ?Sized>(profile: &GenProfile, rng: &mut R) -> Result<Expr, ProfileError> {
    #[derive(Clone, Copy)]
    enum Kind {
        Var,
        Int,
        Const,
    }
    let lw = &profile.leaf_weights;
    let kind = pick(
        &[
            (Kind::Var, lw.variable),
            (Kind::Int, lw.integer),
            (Kind::Const, lw.constant),
        ],
        rng,
    )
    .ok_or(ProfileError::NoLeaf)?;
    Ok(match kind {
        Kind::Var => Expr::x(),
        Kind::Int => {
            let (lo, hi) = profile.integer_range;
            Expr::int(draw_integer(lo, hi, profile.exclude_zero, rng))
        }
        Kind::Const => Expr::sym(if rng.gen_bool(0.5) { Symbol::Pi } else { Symbol::E }),
    })
}

/// Labels every node of `shape`: operators by the profile's weights for
/// their arity, leaves by the leaf weights.
pub fn decorate<R: Rng + ?Sized>(
    shape: &Shape,
    profile: &GenProfile,
    rng: &mut R,
) -> Result<Expr, ProfileError> {
    match shape {
        Shape::Leaf => decorate_leaf(profile, rng),
        Shape::Unary(a) => {
            let items: Vec<(UnaryOp, f64)> = UnaryOp::ALL
                .iter()
                .map(|op| (*op, profile.unary_weight(*op)))
                .collect();
            let op = pick(&items, rng).ok_or(ProfileError::NoOperator(1))?;
            Ok(Expr::unary(op, decorate(a, profile, rng)?))
        }
        Shape::Binary(a, b) => {
            let pow_allowed = profile.pow_exponents.is_none() || **b == Shape::Leaf;
            let items: Vec<(BinaryOp, f64)> = BinaryOp::ALL
                .iter()
                .filter(|op| **op != BinaryOp::Pow || pow_allowed)
                .map(|op| (*op, profile.binary_weight(*op)))
                .collect();
            let op = pick(&items, rng).ok_or(ProfileError::NoOperator(2))?;
            let left = decorate(a, profile, rng)?;
            let right = match (op, profile.pow_exponents) {
                (BinaryOp::Pow, Some((lo, hi))) => Expr::int(draw_integer(lo, hi, true, rng)),
                _ => decorate(b, profile, rng)?,
            };
            Ok(Expr::binary(op, left, right))
        }
    }
}

/// A profile bound to its own RNG stream. One instance per worker.
#[derive(Debug, Clone)]
pub struct Sampler {
    profile: GenProfile,
    table: std::sync::Arc<ShapeCounts>,
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(profile: GenProfile) -> Result<Sampler, ProfileError> {
        profile.validate()?;
        let table = std::sync::Arc::new(ShapeCounts::new(profile.n_ops.1));
        let rng = ChaCha8Rng::seed_from_u64(profile.seed);
        Ok(Sampler { profile, table, rng })
    }

    pub fn profile(&self) -> &GenProfile {
        &self.profile
    }

    pub fn rng(&mut self) -> &mut ChaCha8Rng {
        &mut self.rng
    }

    /// A random expression with an operator count drawn uniformly from the
    /// profile's range.
    pub fn sample(&mut self) -> Result<Expr, ProfileError> {
        let (lo, hi) = self.profile.n_ops;
        let n = self.rng.gen_range(lo..=hi);
        self.sample_with_ops(n)
    }

    pub fn sample_with_ops(&mut self, n: usize) -> Result<Expr, ProfileError> {
        if n > self.table.max_ops() {
            self.table = std::sync::Arc::new(ShapeCounts::new(n));
        }
        let shape = sample_shape(&self.table, n, &mut self.rng);
        decorate(&shape, &self.profile, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn small_counts() {
        assert_eq!(count_shapes(0), BigUint::from(1u32));
        assert_eq!(count_shapes(1), BigUint::from(2u32));
        assert_eq!(count_shapes(2), BigUint::from(6u32));
        let t = ShapeCounts::new(3);
        assert_eq!(*t.get(0, 2), BigUint::zero());
        // D(1,2) = D(0,2) + D(1,1) + D(2,1) = 0 + 2 + 4
        assert_eq!(*t.get(1, 1), BigUint::from(2u32));
        assert_eq!(*t.get(2, 1), BigUint::from(4u32));
        assert_eq!(*t.get(1, 2), BigUint::from(6u32));
    }

    #[test]
    fn shapes_have_requested_size() {
        let t = ShapeCounts::new(20);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for n in 0..=20 {
            for _ in 0..20 {
                assert_eq!(sample_shape(&t, n, &mut rng).internal_nodes(), n);
            }
        }
        assert_eq!(sample_shape(&t, 0, &mut rng), Shape::Leaf);
    }

    #[test]
    fn forced_operator() {
        let mut p = GenProfile::uniform();
        p.binary_weights = [(BinaryOp::Add, 1.0)].into_iter().collect();
        let shape = Shape::Binary(Box::new(Shape::Leaf), Box::new(Shape::Leaf));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let e = decorate(&shape, &p, &mut rng).unwrap();
        assert!(matches!(e, Expr::Binary(BinaryOp::Add, _, _)));
    }

    #[test]
    fn zero_weight_arity_is_an_error() {
        let mut p = GenProfile::uniform();
        p.unary_weights.clear();
        let shape = Shape::Unary(Box::new(Shape::Leaf));
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        assert_eq!(decorate(&shape, &p, &mut rng), Err(ProfileError::NoOperator(1)));
    }

    #[test]
    fn preset_invariants() {
        let u = GenProfile::uniform();
        assert!(UnaryOp::ALL.iter().any(|op| u.unary_weight(*op) > 0.0));
        assert!(BinaryOp::ALL.iter().any(|op| u.binary_weight(*op) > 0.0));
        let poly = GenProfile::poly_dominant();
        let residual = poly.unary_share(|op| op != UnaryOp::Neg);
        assert!((residual - DOMINANT_EPSILON).abs() < 1e-12);
        assert!(GenProfile::trig_dominant().unary_share(UnaryOp::is_trig) >= 0.8);
        assert!(GenProfile::log_dominant().unary_share(UnaryOp::is_exp_log) >= 0.8);
        for name in ["uniform", "poly", "trig", "log"] {
            GenProfile::preset(name).unwrap().validate().unwrap();
        }
        assert!(GenProfile::preset("nope").is_err());
    }

    #[test]
    fn profile_json_round_trip() {
        let p = GenProfile::trig_dominant().with_seed(9);
        let text = serde_json::to_string(&p).unwrap();
        let back: GenProfile = serde_json::from_str(&text).unwrap();
        assert_eq!(back, p);
    }

    #[test]
    fn seeded_sampler_is_deterministic() {
        let mk = || Sampler::new(GenProfile::uniform().with_seed(42)).unwrap();
        let (mut a, mut b) = (mk(), mk());
        for _ in 0..50 {
            assert_eq!(a.sample().unwrap(), b.sample().unwrap());
        }
    }
}
