//! Optimal control of open quantum systems toward non-unitary target
//! channels, with a flux-biased phase-qubit readout model.

// `!(x > 0.0)` is used deliberately so that NaN is rejected
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bfgs;
pub mod channel;
pub mod error;
pub mod liouville;
pub mod optimizer;
pub mod phase_qubit;
pub mod pulse;
pub mod runner;

pub use error::{Error, Result};
