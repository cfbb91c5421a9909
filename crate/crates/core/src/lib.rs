//! Quantized average consensus over digital links using a zooming-in/zooming-out
//! adaptive quantizer.
//!
//! The crate is organized bottom-up:
//!
//! * [`graph`] builds and validates communication digraphs.
//! * [`matrix`] builds the consensus gain `K`, the Perron matrix `P = I + K`
//!   and its spectral data.
//! * [`quantizer`] is the finite-alphabet uniform quantizer.
//! * [`codec`] is the encoder/decoder state machine replicated at sender and receivers.
//! * [`engine`] runs the closed loop, plus the ideal unquantized baseline.
//! * [`analysis`] evaluates the convergence-theorem hypotheses and bit accounting.
//! * [`experiment`] and [`verify`] back the command-line driver.

// `!(a > b)` is used on purpose so that NaN fails the check.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod codec;
pub mod engine;
mod error;
pub mod experiment;
pub mod graph;
pub mod matrix;
pub mod quantizer;
pub mod verify;

pub use analysis::{bits_per_symbol, check_theorem, min_l0, min_m, TheoremCertificate};
pub use codec::{CodecState, ZoomParams};
pub use engine::{
    estimate_rate, gaussian_x0, run_ideal, run_quantized, RunStatus, SimulationConfig,
    SimulationResult, StepMetrics,
};
pub use error::{Error, Result};
pub use graph::Digraph;
pub use matrix::{essential_spectral_radius, ConsensusMatrix, OperatorNorms};
pub use quantizer::{Symbol, UniformQuantizer};

/// Version string written into run manifests.
pub const VERSION: &str = concat!(env!("CARGO_PKG_NAME"), " ", env!("CARGO_PKG_VERSION"));
