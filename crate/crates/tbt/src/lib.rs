//! Ternary-logic temporal behavior trees: a partial-trajectory monitor over
//! Kleene's three-valued logic and a mixed-integer encoding of the same
//! semantics for correct-by-construction control of linear systems.
//!
//! The crate splits into a semantic side and an optimization side:
//!
//! * [`ternary`], [`formula`], [`parser`], [`trace`], [`monitor`] — the K3
//!   algebra, the formula AST and its DSL, and the reference evaluator for
//!   partial trajectories.
//! * [`milp`], [`encoder`], [`synthesis`] — the solver-agnostic model
//!   container, the trit/big-M encoding over the `(t1, t2)` lattice, and
//!   full optimal-control problem assembly with monitor certification.
//!
//! The monitor and the encoder are two independent routes to the same
//! verdicts; the test suite holds them equal on randomized instances.

pub mod encoder;
pub mod formula;
pub mod milp;
pub mod monitor;
pub mod parser;
pub mod synthesis;
pub mod ternary;
pub mod trace;

pub use formula::{Formula, Predicate, SpecDocument};
pub use ternary::Ternary;
pub use trace::Trace;
