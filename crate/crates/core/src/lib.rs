//! Decides threshold queries over probabilistic imperative programs:
//! "is the probability that `{pre} P {post}` is violated at most beta?"
//!
//! The program's control-flow automaton is abstracted into an MDP whose
//! maximum reachability probability upper-bounds the violation
//! probability; counterexample-guided refinement with trace abstraction
//! tightens the bound or finds a set of violating traces whose total
//! weight exceeds the threshold.

pub mod automata;
pub mod cexcheck;
pub mod driver;
pub mod logic;
pub mod mdp;
pub mod pcfa;
pub mod refine;
pub mod stmt;
pub mod syntax;

pub use driver::{verify, EngineConfig, EngineKind, Verdict};
pub use syntax::VerificationTask;
