//! qzlab: a numerical laboratory for collapse arrest in the quantum
//! Zakharov equations.
//!
//! The crate solves the radial ground-state and self-similar profile
//! problems of Langmuir collapse, the perturbative correction systems for
//! weak quantum dispersion, extracts the reduced-model coefficients, and
//! integrates the effective scaling-factor dynamics. An independent
//! split-step simulator for the radially symmetric scalar model
//! cross-validates the reduced dynamics.

pub mod banded;
pub mod coupled;
pub mod error;
pub mod grid;
pub mod operators;
pub mod profile;
pub mod stencil;

pub mod corrections;
pub mod ground_states;
pub use error::{Error, Result};
