//! Exciton transport on graphs with absorbing traps: the coherent
//! continuous-time quantum walk (CTQW) driven by the non-Hermitian
//! Hamiltonian H = H0 - iΓP, and its incoherent random-walk (CTRW)
//! counterpart driven by T = -H0 - ΓP.
//!
//! The crate builds both generators, decomposes the quantum one into
//! biorthonormal eigenpairs, evaluates mean survival probabilities, and
//! provides the fits and scaling analyses used to tell the two transport
//! mechanisms apart.

// `!(a < b)` is used on purpose so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod exec;
pub mod graph;
pub mod spectral;
pub mod curve;
pub mod quantum;
pub mod classical;
pub mod analysis;
pub mod pipeline;
pub mod io;
pub mod plot;
pub mod cli;

pub use error::{Error, Result};
