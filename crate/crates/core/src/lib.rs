//! Robust reduced-rank LCMV beamforming.
//!
//! This crate implements robust joint iterative optimization (RJIO) of a
//! rank-reduction matrix, a reduced-rank beamformer and an adaptive diagonal
//! loading, with stochastic-gradient and recursive-least-squares recursions
//! and automatic rank selection, alongside classical full-rank LCMV
//! baselines. A ULA signal simulator with steering-vector mismatch and a
//! Monte Carlo SINR harness drive the comparisons; the `rrbeam` binary
//! exposes the harness on the command line.

pub mod array;
pub mod harness;
pub mod lcmv;
pub mod numerics;
pub mod rank_adapt;
pub mod rjio;

pub mod scenarios;

pub use numerics::{CMatrix, CVector, NumericsError};
