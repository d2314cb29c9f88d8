//! Naive reference implementations and data fixtures for the test suites.
//!
//! Oracles here favour the most literal reading of each definition over
//! speed; they share no code with the implementations they check.

pub mod analytics;
pub mod cases;
pub mod fixtures;
pub mod metrics;
pub mod ml;
pub mod rules;
