//! Two-stage convex compressive phase retrieval with constrained sensing
//! vectors.
//!
//! Measurements `y_i = (w_iᵀ Ψ x)² + z_i` of a `k`-sparse `x ∈ ℝᵈ` are
//! inverted by
//!
//! 1. a low-rank stage that estimates `B* = Ψ x xᵀ Ψᵀ` by trace minimization
//!    over the PSD cone ([`lowrank`]),
//! 2. a sparse stage that estimates `X* = x xᵀ` from `B̂` by entrywise ℓ1
//!    minimization ([`sparse`]),
//! 3. post-processing projections onto k×k-sparse and rank-one PSD matrices
//!    ([`postprocess`]).
//!
//! [`baselines`] holds the lifted comparison methods, [`oracles`] the
//! brute-force and lemma checkers, and [`experiments`] the Monte-Carlo
//! harness.

pub mod admm;
pub mod baselines;
pub mod error;
pub mod experiments;
pub mod fidelity;
pub mod linalg;
pub mod lowrank;
pub mod measurement;
pub mod oracles;
pub mod pipeline;
pub mod postprocess;
mod proxgrad;
pub mod rng;
pub mod sparse;

pub use admm::{IterRecord, SolveStatus};
pub use error::{CprError, Result};
pub use linalg::{Matrix, Vector};
