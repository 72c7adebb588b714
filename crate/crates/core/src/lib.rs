//! A Prolog-subset inference engine that records a replayable proof for
//! every answer, plus proof-graph metrics and an evaluation harness.

pub mod clause;
pub mod engine;
pub mod harness;
pub mod metrics;
mod ops;
pub mod parser;
pub mod subst;
pub mod symgen;
pub mod term;

pub use clause::{Builtin, BuiltinOp, Clause, Goal, KnowledgeBase, PredicateKey};
pub use engine::{
    check_proof, classify_answer, depth_limited_solve, ids_solve, solve, solve_naf, AnswerLabel, Classification,
    ProofTree, SearchConfig, SearchStatus, Solution, SolveResult, Strategy,
};
pub use parser::{parse_program, parse_query, parse_term, ParseDiagnostic, Program, SourceProgram};
pub use subst::{apply, unify, Substitution, TermError};
pub use term::{Number, Term, Var};
