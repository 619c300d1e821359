//! marginlab: numerical laboratory for near-max-margin classification in two
//! synthetic high-dimensional problems.
//!
//! The library covers:
//! - `synthdata`: the linear and XOR data models, plus the signal-flipping
//!   "opposite dataset" mappings that drive the uniform-convergence demos.
//! - `linalg`: the small dense kernels everything else rests on (Gram-matrix
//!   concentration diagnostics, minimum-norm solves, the `relu^h` activation).
//! - `linear_margin`: hard-margin training and the analytic good/bad/mixture
//!   constructions for the linear problem.
//! - `xor_net`: two-layer `relu^h` networks, soft-min margin training on the
//!   norm sphere, and the signal/noise decomposition diagnostics.
//! - `opt_chain`: signal-to-noise thresholds, the trivariate margin program
//!   and its closed form, and the explicit network constructions derived from
//!   its solutions.
//! - `harness`: experiment orchestration, CSV/JSON emission, the demo
//!   routines, and the acceptance suite backing the CLI.

pub mod error;
pub mod harness;
pub mod linalg;
pub mod linear_margin;
pub mod opt_chain;
pub mod rng;
pub mod synthdata;
pub mod xor_net;

pub use error::{Error, Result};
