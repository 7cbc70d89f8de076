//! Verification laboratory for local hidden-variable models of Bell tests.
//!
//! The crate covers contextual models with setting-dependent instrument
//! variables ([`model`]), the constructions that turn them into ordinary
//! single-space models ([`flatten`]), the CHSH inequalities and post-selection
//! ([`chsh`]), Fine's joint-distribution criterion with an exact simplex
//! solver ([`fine`], [`lp`]), seeded simulation of the causal model
//! ([`montecarlo`]), and a search for detection-loophole models
//! ([`loophole`]). Probabilities are exact [`Rational`]s everywhere except in
//! the simulator's estimators and the search's scoring.
//!
//! Runnable walkthroughs live in the crate's `examples/` directory.

pub mod behavior;
pub mod chsh;
pub mod corpus;
pub mod error;
pub mod fine;
pub mod flatten;
pub mod io;
pub mod loophole;
pub mod lp;
pub mod model;
pub mod montecarlo;
pub mod nonlocal;
pub mod rational;

pub use behavior::{behavior_from_model, Alphabet, BehaviorTable, CorrelationQuad};
pub use error::{Error, Result};
pub use model::{
    counterexample_model, exact_expectation, validate_model, Context, ContextualModel, Label, OutcomeTable, Pmf,
    Setting, Side, ValidationReport, CONTEXTS,
};
pub use rational::Rational;
