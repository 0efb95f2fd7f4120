//! Fleet routing and assignment for temporal-logic ride requests.
//!
//! The crate models a road map as a weighted transition system, compiles
//! each transportation request (a co-safe LTL formula over map labels) into
//! a small deterministic automaton, plans shared vehicle routes on weighted
//! product automata, and assigns requests to vehicles with an exact 0-1
//! integer program that supports approximately envy-free fairness
//! constraints and history-based cost correction. A discrete-event
//! simulator ties the pieces together and records service and fairness
//! metrics.

pub mod assign;
pub mod matching;
pub mod network;
pub mod routing;
pub mod scltl;
pub mod sim;
pub mod time;

#[cfg(test)]
pub(crate) mod testutil;

pub use time::{Duration, Tick};
