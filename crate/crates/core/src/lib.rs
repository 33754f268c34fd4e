//! Interval inference for the Bass, topological, connected and general
//! stable ranks of Banach and C*-algebras.
//!
//! A model written in the `.bra` description language is parsed
//! ([`dsl`]), resolved ([`model`]), turned into constraints by the rule
//! catalog ([`rules`]) and propagated to a fixpoint ([`engine`]). The
//! [`oracle`] module checks the propagator against brute force.

pub mod catalog;
pub mod dsl;
pub mod engine;
pub mod lattice;
pub mod model;
pub mod oracle;
pub mod rules;
pub mod topology;

pub use catalog::CatalogEntry;
pub use engine::{
    check_assertions, explain, propagate, propagate_from, propagate_with, refute, Contradiction, DerivationTree,
    EngineConfig, RankState, Side, TraceStep, Verdict,
};
pub use lattice::{ExtNat, RankInterval, RankKind, MAX_FINITE};
pub use model::{build_model, validate, AlgebraId, Flag, Model, ModelError, Tri};
pub use rules::{instantiate_rules, rule_catalog, ConstraintSet};
