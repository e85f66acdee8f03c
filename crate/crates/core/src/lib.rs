//! Horn-clause resolution by term matching, unification and structural
//! resolution, together with proof terms and the realizability transform.

pub mod engine;
pub mod proof;
pub mod realize;
pub mod subst;
pub mod syntax;

pub use engine::{solve, Answer, Budget, DerivationStep, DerivationTrace, Outcome, SolveOptions, StepMode, Strategy};
pub use proof::{Judgement, ProofTerm};
pub use realize::NameScheme;
pub use subst::Substitution;
pub use syntax::{parse_program, parse_query, Atom, GoalSet, HornClause, Program, Term};
