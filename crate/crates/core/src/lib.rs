//! Material-phase dynamics of a driven, damped two-level system.
//!
//! * [`model`]: system, envelopes and phases with exact time derivatives.
//! * [`dressed`]: closed-form dressed-state frequencies, phases and the
//!   generalized adiabatic condition.
//! * [`propagator`]: brute-force integration of the Schrödinger equation,
//!   full-field and rotating-wave.
//! * [`interferometry`]: phase-locked pulse pairs and population fringes.
//! * [`hydro`]: polar decomposition of 1D wavefunctions, quantum potential and
//!   the Hamilton-Jacobi / continuity residuals.
//! * [`cli`]: JSON experiment configs, CSV and summary output.

// `!(x > 0.0)` style checks are used on purpose so that NaN is rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod dressed;
pub mod hydro;
pub mod interferometry;
pub mod model;
pub mod propagator;

pub use num_complex::Complex64;
