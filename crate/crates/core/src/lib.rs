//! Numerical lab for dipolar SLE(4) in the strip `0 < Im z < π` and the
//! Gaussian free field with Dirichlet data on the real line and Neumann data
//! on the line `Im z = π`.
//!
//! The crate is organised bottom up: [`geometry`] holds charts, jets and
//! transformation laws; [`correlators`] evaluates Gaussian correlations of
//! Fock space fields; [`bcc`] adds the boundary condition changing insertion;
//! [`virasoro_checks`] checks the Virasoro, Ward and BPZ-Cardy relations;
//! [`loewner`] and [`observables`] run the flow and evaluate martingale
//! observables along it; [`montecarlo`] holds the ensemble drivers and the
//! lattice Green's function check.

// `!(x > 0.0)` is used on purpose: it also rejects NaN. Index loops are
// kept where they mirror the formulas.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod bcc;
pub mod calculus;
pub mod correlators;
pub mod error;
pub mod geometry;
pub mod loewner;
pub mod montecarlo;
pub mod observables;
pub mod virasoro_checks;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;
