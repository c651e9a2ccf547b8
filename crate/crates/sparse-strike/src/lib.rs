//! sparse-strike: a black-box adversarial-attack engine for RL policies.
//!
//! Finds minimal pixel perturbations (down to one pixel) on tactically
//! chosen frames: a genetic algorithm searches integer pixel triples
//! (x, y, delta) to maximize an action-flip discrepancy, and a normalized
//! Shannon-entropy gate picks the confident frames worth attacking.
//! Ships a small policy inference engine and deterministic toy
//! environments so complete attack campaigns run at desk scale.

pub mod campaign;
pub mod envs;
pub mod error;
pub mod ga;
pub mod objective;
pub mod perturb;
pub mod policy;
pub mod seeding;
pub mod state;
pub mod tca;

pub use error::{Error, Result};
