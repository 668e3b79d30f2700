//! Core library of the autoopt toolkit: expression trees and model IR,
//! a LaTeX frontend, a script emitter, classical local solvers (simplex,
//! log-barrier), the decomposition metaheuristic and its baselines, the
//! bundled test problems and the benchmark harness.

pub mod bench;
pub mod engine;
pub mod error;
pub mod expr;
pub mod fixtures;
pub mod ga;
pub mod latex;
pub mod lrvcm;
pub mod model;
pub mod problems;
pub mod registry;
pub mod script;
pub mod solver;
pub mod textexpr;

pub use error::*;
pub use expr::{Expr, Family, FamilyLayout};
pub use model::{
    parse_model_file, serialize_model, ConstraintDef, Domain, ModelIR, Quantifier, ReducedModel,
    Rel, Sense, VariableDef,
};
