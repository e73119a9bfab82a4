//! Dataset generators for the five tasks.
//!
//! Every candidate pair goes through the same gate before it is emitted:
//! both sides must fit the token caps, the problem must mention `x`, the
//! pair must pass [`verify_sample`] and its problem must not repeat an
//! earlier one up to normal form.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::calculus::{differentiate, integrate_rule_based, isolate_leaf, total_derivative};
use crate::evalkit::{check_ode_solution, check_primitive, is_defined, EquivVerdict};
use crate::expr::{canon, numerator, render, simplify, Expr, Symbol};
use crate::prefix::{encode, TokenSequence};
use crate::sampler::{GenProfile, ProfileError, Sampler};

pub const MAX_PROBLEM_TOKENS: usize = 256;
pub const MAX_SOLUTION_TOKENS: usize = 256;
/// Attempts per acceptance window; a window with fewer than
/// `MIN_ACCEPTANCE` of its attempts accepted aborts the run.
pub const EXHAUSTION_WINDOW: u64 = 10_000;
pub const MIN_ACCEPTANCE: f64 = 0.01;
/// Worker shards per round. Fixed so that output does not depend on the
/// number of threads.
pub const SHARDS: u64 = 8;
/// Bumped whenever a change alters the samples produced for a given seed.
pub const GENERATOR_VERSION: &str = "symforge-gen/1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Fwd,
    Bwd,
    Ibp,
    Ode1,
    Ode2,
}

impl Task {
    pub const ALL: [Task; 5] = [Task::Fwd, Task::Bwd, Task::Ibp, Task::Ode1, Task::Ode2];

    pub fn name(self) -> &'static str {
        match self {
            Task::Fwd => "fwd",
            Task::Bwd => "bwd",
            Task::Ibp => "ibp",
            Task::Ode1 => "ode1",
            Task::Ode2 => "ode2",
        }
    }

    pub fn is_ode(self) -> bool {
        matches!(self, Task::Ode1 | Task::Ode2)
    }
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown task {0:?} (expected fwd, bwd, ibp, ode1 or ode2)")]
pub struct UnknownTask(pub String);

impl FromStr for Task {
    type Err = UnknownTask;

    fn from_str(s: &str) -> Result<Task, UnknownTask> {
        Task::ALL
            .into_iter()
            .find(|t| t.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| UnknownTask(s.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SamplePair {
    pub task: Task,
    pub problem: TokenSequence,
    pub solution: TokenSequence,
}

/// Checks a decoded sample against its task's defining property:
/// integration tasks need `d/dx solution == problem`, ODE tasks need the
/// solution to make the problem's residual vanish.
pub fn verify_sample(task: Task, problem: &Expr, solution: &Expr) -> EquivVerdict {
    if task.is_ode() {
        check_ode_solution(problem, solution)
    } else {
        check_primitive(problem, solution)
    }
}

/// Key used for deduplication and splitting: the prefix encoding of the
/// simplified expression.
pub fn normal_key(e: &Expr) -> String {
    encode(&simplify(e)).to_string()
}

/// Known integrals, keyed by the normal form of the integrand.
#[derive(Debug, Clone, Default)]
pub struct PrimitiveTable {
    index: HashMap<String, usize>,
    entries: Vec<(Expr, Expr)>,
}

impl PrimitiveTable {
    pub fn new() -> PrimitiveTable {
        PrimitiveTable::default()
    }

    /// Adds `integrand -> antiderivative` unless the integrand is already
    /// known or the pair fails the primitive check. Returns whether the
    /// entry was added.
    pub fn insert(&mut self, integrand: Expr, antiderivative: Expr) -> bool {
        let key = normal_key(&integrand);
        if self.index.contains_key(&key) {
            return false;
        }
        if !check_primitive(&integrand, &antiderivative).outcome.is_correct() {
            return false;
        }
        self.insert_checked(key, integrand, antiderivative);
        true
    }

    fn insert_checked(&mut self, key: String, integrand: Expr, antiderivative: Expr) {
        self.index.insert(key, self.entries.len());
        self.entries.push((integrand, antiderivative));
    }

    pub fn get(&self, integrand: &Expr) -> Option<&Expr> {
        self.index
            .get(&normal_key(integrand))
            .map(|i| &self.entries[*i].1)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[(Expr, Expr)] {
        &self.entries
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenStats {
    pub attempts: u64,
    pub accepted: u64,
    /// Rejected attempts by reason.
    pub rejected: BTreeMap<String, u64>,
}

impl GenStats {
    fn reject(&mut self, r: Reject) {
        *self.rejected.entry(r.name().to_string()).or_default() += 1;
    }

    fn merge(&mut self, other: &GenStats) {
        self.attempts += other.attempts;
        self.accepted += other.accepted;
        for (k, v) in &other.rejected {
            *self.rejected.entry(k.clone()).or_default() += v;
        }
    }

    /// Accepted fraction of all attempts; for FWD this is the share of
    /// sampled integrands the rule engine could integrate.
    pub fn yield_rate(&self) -> f64 {
        if self.attempts == 0 {
            0.0
        } else {
            self.accepted as f64 / self.attempts as f64
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GenError {
    #[error("{task} generation exhausted: {} of {} attempts accepted in the last window", stats.accepted, stats.attempts)]
    Exhausted { task: Task, stats: GenStats },
    #[error("zero yield: the primitive table is empty; seed it with a BWD dataset")]
    EmptyTable,
    #[error(transparent)]
    Profile(#[from] ProfileError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Reject {
    NoVariable,
    ConstantProblem,
    TooLong,
    NotIntegrable,
    NotInvertible,
    NoTableMatch,
    Undefined,
    FailedCheck,
    Duplicate,
    /// Accepted by a shard after the target count was already reached.
    Surplus,
}

impl Reject {
    fn name(self) -> &'static str {
        match self {
            Reject::NoVariable => "no_variable",
            Reject::ConstantProblem => "constant_problem",
            Reject::TooLong => "too_long",
            Reject::NotIntegrable => "not_integrable",
            Reject::NotInvertible => "not_invertible",
            Reject::NoTableMatch => "no_table_match",
            Reject::Undefined => "undefined",
            Reject::FailedCheck => "failed_check",
            Reject::Duplicate => "duplicate",
            Reject::Surplus => "surplus",
        }
    }
}

#[derive(Debug, Clone)]
pub struct Generated {
    pub samples: Vec<SamplePair>,
    pub stats: GenStats,
}

fn sample_with_x(sampler: &mut Sampler) -> Result<Option<Expr>, ProfileError> {
    let e = sampler.sample()?;
    Ok(e.contains(Symbol::X).then_some(e))
}

/// Replaces the `index`-th leaf (in prefix order) of `e` with `with`.
fn replace_leaf(e: &Expr, index: usize, with: &Expr) -> Expr {
    let mut seen = 0;
    e.map_leaves(&mut |_| {
        let hit = seen == index;
        seen += 1;
        hit.then(|| with.clone())
    })
}

fn distinct_leaves<R: Rng + ?Sized>(e: &Expr, k: usize, rng: &mut R) -> Option<Vec<usize>> {
    let n = e.metrics().leaves;
    (n >= k).then(|| rand::seq::index::sample(rng, n, k).into_vec())
}

/// Simplified numerator of `e`, i.e. `e` over a common denominator with the
/// denominator dropped.
fn cleared(e: &Expr) -> Expr {
    render(&numerator(&canon(&simplify(e))))
}

type Candidate = Result<(Expr, Expr), Reject>;

fn candidate(task: Task, sampler: &mut Sampler) -> Result<Candidate, ProfileError> {
    Ok(match task {
        Task::Bwd => bwd(sampler)?,
        Task::Fwd => fwd(sampler)?,
        Task::Ode1 => ode1(sampler)?,
        Task::Ode2 => ode2(sampler)?,
        Task::Ibp => unreachable!("IBP draws from a primitive table"),
    })
}

fn bwd(sampler: &mut Sampler) -> Result<Candidate, ProfileError> {
    let Some(big_f) = sample_with_x(sampler)? else {
        return Ok(Err(Reject::NoVariable));
    };
    let big_f = simplify(&big_f);
    let f = differentiate(&big_f, Symbol::X);
    Ok(Ok((f, big_f)))
}

fn fwd(sampler: &mut Sampler) -> Result<Candidate, ProfileError> {
    let Some(f) = sample_with_x(sampler)? else {
        return Ok(Err(Reject::NoVariable));
    };
    let f = simplify(&f);
    if !f.contains(Symbol::X) {
        return Ok(Err(Reject::ConstantProblem));
    }
    Ok(match integrate_rule_based(&f, Symbol::X) {
        Ok(p) => Ok((f, simplify(&p.antiderivative))),
        Err(_) => Err(Reject::NotIntegrable),
    })
}

fn y() -> Expr {
    Expr::sym(Symbol::Y)
}

fn ode1(sampler: &mut Sampler) -> Result<Candidate, ProfileError> {
    let Some(f) = sample_with_x(sampler)? else {
        return Ok(Err(Reject::NoVariable));
    };
    let Some(at) = distinct_leaves(&f, 1, sampler.rng()) else {
        return Ok(Err(Reject::NotInvertible));
    };
    let f = simplify(&replace_leaf(&f, at[0], &Expr::sym(Symbol::C)));
    if !f.contains(Symbol::X) {
        return Ok(Err(Reject::NoVariable));
    }
    let Ok(g) = isolate_leaf(&f, &y(), Symbol::C) else {
        return Ok(Err(Reject::NotInvertible));
    };
    let ode = cleared(&total_derivative(&g.isolated).expect("no y2 before differentiating"));
    if !ode.contains(Symbol::Y1) || ode.contains(Symbol::C) {
        return Ok(Err(Reject::NotInvertible));
    }
    Ok(Ok((ode, f)))
}

fn ode2(sampler: &mut Sampler) -> Result<Candidate, ProfileError> {
    let Some(f) = sample_with_x(sampler)? else {
        return Ok(Err(Reject::NoVariable));
    };
    let Some(at) = distinct_leaves(&f, 2, sampler.rng()) else {
        return Ok(Err(Reject::NotInvertible));
    };
    let f = replace_leaf(&f, at[0], &Expr::sym(Symbol::C1));
    let f = simplify(&replace_leaf(&f, at[1], &Expr::sym(Symbol::C2)));
    if !f.contains(Symbol::X) {
        return Ok(Err(Reject::NoVariable));
    }
    let Ok(g) = isolate_leaf(&f, &y(), Symbol::C2) else {
        return Ok(Err(Reject::NotInvertible));
    };
    let h = cleared(&total_derivative(&g.isolated).expect("no y2 yet"));
    if h.contains(Symbol::C2) {
        return Ok(Err(Reject::NotInvertible));
    }
    let Ok(k) = isolate_leaf(&h, &Expr::int(0), Symbol::C1) else {
        return Ok(Err(Reject::NotInvertible));
    };
    let Some(d) = total_derivative(&k.isolated) else {
        return Ok(Err(Reject::NotInvertible));
    };
    let ode = cleared(&d);
    if !ode.contains(Symbol::Y2) || ode.contains(Symbol::C1) || ode.contains(Symbol::C2) {
        return Ok(Err(Reject::NotInvertible));
    }
    Ok(Ok((ode, f)))
}

/// Applies the shared emission gate. Returns the pair and its dedup key.
fn gate(task: Task, problem: Expr, solution: Expr) -> Result<(String, SamplePair), Reject> {
    if !problem.contains(Symbol::X) && !task.is_ode() {
        return Err(Reject::ConstantProblem);
    }
    let p = encode(&problem);
    let s = encode(&solution);
    if p.len() > MAX_PROBLEM_TOKENS || s.len() > MAX_SOLUTION_TOKENS {
        return Err(Reject::TooLong);
    }
    if !is_defined(&solution) || (!task.is_ode() && !is_defined(&problem)) {
        return Err(Reject::Undefined);
    }
    if !verify_sample(task, &problem, &solution).outcome.is_correct() {
        return Err(Reject::FailedCheck);
    }
    Ok((
        p.to_string(),
        SamplePair {
            task,
            problem: p,
            solution: s,
        },
    ))
}

/// Tracks acceptance over consecutive windows of attempts.
struct Window {
    attempts: u64,
    accepted: u64,
}

impl Window {
    fn new() -> Window {
        Window {
            attempts: 0,
            accepted: 0,
        }
    }

    /// Records one attempt; returns `false` when a full window closed
    /// below the minimum acceptance rate.
    fn record(&mut self, accepted: bool) -> bool {
        self.attempts += 1;
        self.accepted += u64::from(accepted);
        if self.attempts < EXHAUSTION_WINDOW {
            return true;
        }
        let ok = self.accepted as f64 >= MIN_ACCEPTANCE * self.attempts as f64;
        *self = Window::new();
        ok
    }
}

struct Shard {
    samples: Vec<(String, SamplePair)>,
    stats: GenStats,
}

fn run_shard(
    task: Task,
    profile: &GenProfile,
    seed: u64,
    quota: usize,
    seen: &HashSet<String>,
) -> Result<Shard, GenError> {
    let mut sampler = Sampler::new(profile.clone().with_seed(seed))?;
    let mut local = HashSet::new();
    let mut samples = Vec::with_capacity(quota);
    let mut stats = GenStats::default();
    let mut window = Window::new();
    while samples.len() < quota {
        stats.attempts += 1;
        let outcome = candidate(task, &mut sampler)?
            .and_then(|(p, s)| gate(task, p, s))
            .and_then(|(k, pair)| {
                if seen.contains(&k) || local.contains(&k) {
                    Err(Reject::Duplicate)
                } else {
                    Ok((k, pair))
                }
            });
        let accepted = outcome.is_ok();
        match outcome {
            Ok((k, pair)) => {
                stats.accepted += 1;
                local.insert(k.clone());
                samples.push((k, pair));
            }
            Err(r) => stats.reject(r),
        }
        if !window.record(accepted) {
            return Err(GenError::Exhausted { task, stats });
        }
    }
    Ok(Shard { samples, stats })
}

fn shard_seed(seed: u64, index: u64) -> u64 {
    seed ^ (index + 1).wrapping_mul(0x9e37_79b9_7f4a_7c15)
}

/// Generates `count` samples for FWD, BWD, ODE1 or ODE2.
///
/// Work is split into [`SHARDS`] seed-partitioned shards run on the
/// current rayon pool. Shards are merged in index order, dropping problems
/// already seen, and further rounds fill any shortfall, so the output
/// depends only on the arguments.
pub fn generate(task: Task, profile: &GenProfile, count: usize, seed: u64) -> Result<Generated, GenError> {
    assert!(task != Task::Ibp, "use generate_ibp");
    profile.validate()?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut samples = Vec::with_capacity(count);
    let mut stats = GenStats::default();
    let mut round = 0u64;
    while samples.len() < count {
        let missing = count - samples.len();
        let quotas: Vec<usize> = (0..SHARDS as usize)
            .map(|i| missing / SHARDS as usize + usize::from(i < missing % SHARDS as usize))
            .collect();
        let shards: Vec<Result<Shard, GenError>> = quotas
            .par_iter()
            .enumerate()
            .map(|(i, q)| {
                run_shard(
                    task,
                    profile,
                    shard_seed(seed, round * SHARDS + i as u64),
                    *q,
                    &seen,
                )
            })
            .collect();
        for shard in shards {
            let shard = shard?;
            stats.merge(&shard.stats);
            for (k, pair) in shard.samples {
                if samples.len() == count {
                    stats.accepted -= 1;
                    stats.reject(Reject::Surplus);
                } else if seen.insert(k) {
                    samples.push(pair);
                } else {
                    stats.accepted -= 1;
                    stats.reject(Reject::Duplicate);
                }
            }
        }
        round += 1;
    }
    Ok(Generated { samples, stats })
}

/// Generates `count` IBP samples from `table`, adding every emission back
/// into it. Single-threaded since each emission can enable later ones.
///
/// An attempt draws `F` and `G`; when `f G` (with `f = F'`) is in the table
/// the pair `(F g, F G - int f G)` is emitted, and symmetrically for `F g`.
/// Otherwise a table entry `(h, H)` is drawn and `G` is chosen as `h / f`
/// for a small random `F`, so that `f G = h` holds by construction.
pub fn generate_ibp(
    profile: &GenProfile,
    count: usize,
    seed: u64,
    table: &mut PrimitiveTable,
) -> Result<Generated, GenError> {
    profile.validate()?;
    if table.is_empty() && count > 0 {
        return Err(GenError::EmptyTable);
    }
    let mut sampler = Sampler::new(profile.clone().with_seed(seed))?;
    let mut seen: HashSet<String> = HashSet::new();
    let mut samples = Vec::with_capacity(count);
    let mut stats = GenStats::default();
    let mut window = Window::new();
    while samples.len() < count {
        stats.attempts += 1;
        let outcome = ibp_candidate(&mut sampler, table)?
            .and_then(|(p, s)| gate(Task::Ibp, p, s))
            .and_then(|(k, pair)| {
                if seen.contains(&k) {
                    Err(Reject::Duplicate)
                } else {
                    Ok((k, pair))
                }
            });
        let accepted = outcome.is_ok();
        match outcome {
            Ok((k, pair)) => {
                stats.accepted += 1;
                let problem = crate::prefix::decode(&pair.problem).expect("encoded above");
                let solution = crate::prefix::decode(&pair.solution).expect("encoded above");
                let key = normal_key(&problem);
                if !table.index.contains_key(&key) {
                    table.insert_checked(key, problem, solution);
                }
                seen.insert(k);
                samples.push(pair);
            }
            Err(r) => stats.reject(r),
        }
        if !window.record(accepted) {
            return Err(GenError::Exhausted {
                task: Task::Ibp,
                stats,
            });
        }
    }
    Ok(Generated { samples, stats })
}

const GUIDED_MAX_OPS: usize = 4;

fn ibp_candidate(sampler: &mut Sampler, table: &PrimitiveTable) -> Result<Candidate, ProfileError> {
    let (Some(big_f), Some(big_g)) = (sample_with_x(sampler)?, sample_with_x(sampler)?) else {
        return Ok(Err(Reject::NoVariable));
    };
    let f = differentiate(&big_f, Symbol::X);
    let g = differentiate(&big_g, Symbol::X);
    let fg = Expr::mul(big_f.clone(), big_g.clone());
    if let Some(known) = table.get(&Expr::mul(f.clone(), big_g.clone())) {
        let problem = simplify(&Expr::mul(big_f, g));
        return Ok(Ok((problem, simplify(&Expr::sub(fg, known.clone())))));
    }
    if let Some(known) = table.get(&Expr::mul(big_f.clone(), g)) {
        let problem = simplify(&Expr::mul(f, big_g));
        return Ok(Ok((problem, simplify(&Expr::sub(fg, known.clone())))));
    }

    let ops = sampler.rng().gen_range(1..=GUIDED_MAX_OPS);
    let big_f = simplify(&sampler.sample_with_ops(ops)?);
    let f = differentiate(&big_f, Symbol::X);
    if !big_f.contains(Symbol::X) || f.is_zero() {
        return Ok(Err(Reject::NoTableMatch));
    }
    let (h, big_h) = &table.entries[sampler.rng().gen_range(0..table.len())];
    let big_g = simplify(&Expr::div(h.clone(), f));
    if !big_g.contains(Symbol::X) {
        return Ok(Err(Reject::NoTableMatch));
    }
    let g = differentiate(&big_g, Symbol::X);
    let problem = simplify(&Expr::mul(big_f.clone(), g));
    let solution = simplify(&Expr::sub(Expr::mul(big_f, big_g), big_h.clone()));
    Ok(Ok((problem, solution)))
}
