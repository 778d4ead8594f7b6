//! Engine and benchmark harness for physics-informed adaptive hyperspectral
//! sampling: spectral index features, semi-supervised belief modeling with
//! bootstrap-ensemble uncertainty, and budgeted station selection learned by
//! a masked deep-Q agent, evaluated against heuristic baselines and an
//! exhaustive subset oracle on synthetic lake scenes.

pub mod agents;
pub mod belief;
pub mod env;
pub mod error;
pub mod harness;
pub mod indices;
pub mod nn;
pub mod rng;
pub mod synth;

pub use error::{Error, Result};
