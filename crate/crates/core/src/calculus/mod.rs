//! Differentiation, rule-based integration and equation inversion.

mod diff;
mod integrate;
mod isolate;

pub use diff::{differentiate, total_derivative};
pub use integrate::{integrate_rule_based, IntegrateError, Primitive};
pub use isolate::{isolate_leaf, BranchCondition, IsolateError, IsolationResult};
