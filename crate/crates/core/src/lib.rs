//! Recursive state machines, recursive hybrid automata, their reachability
//! games, and a compiler from two-counter machines into time-bounded
//! recursive timed/stopwatch automata together with an exact simulator.

pub mod gadget;
pub mod generate;
pub mod harness;
pub mod lts;
pub mod rational;
pub mod rha;
pub mod rsm;
pub mod structure;
pub mod tcm;
pub mod valuation;

pub use lts::{FiniteArena, Player, Run};
pub use rational::Rational;
pub use structure::{Location, ModelError};
pub use valuation::{VarSet, Valuation};
