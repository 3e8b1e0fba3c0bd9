//! Selects the ridge regularization parameter by solving one convex program:
//! the validation loss is minimized subject to a polytope relaxation of the
//! Tikhonov solution path, so training and validating happen in a single
//! solve instead of a grid sweep.
//!
//! The crate is `no_std`-compatible (`alloc` required); disable the default
//! `std` feature for embedded or wasm targets. All numeric kernels are dense
//! and deterministic, sized for problems up to a few hundred unknowns.
//!
//! Modules, bottom up:
//!
//! * [`mat`] — minimal dense matrix/vector kit shared by everything else.
//! * [`spectral`] — symmetric eigendecomposition (cyclic Jacobi) and
//!   spectrum-space Tikhonov solves.
//! * [`relaxation`] — the linear-constraint polytope over the reparameterized
//!   inverse spectrum, membership tests, and recovery of effective
//!   regularizers from relaxed solutions.
//! * [`qpcore`] — a primal–dual interior-point solver for convex QPs and LPs
//!   with linear equality and inequality constraints.
//! * [`fused`] — the fused train+validate programs (single split and K-fold)
//!   built on the three layers above.
//! * [`baselines`] — reference tuners: grid cross-validation, gradient
//!   descent on the CV loss, generalized cross-validation, and OLS.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod baselines;
pub mod fused;
mod math;
pub mod mat;
pub mod qpcore;
pub mod relaxation;
pub mod spectral;

pub use fused::{Dataset, FoldPlan, FusedFit, LossKind};
pub use qpcore::{ConvexProgram, SolverResult, SolverStatus};
pub use relaxation::RelaxationPolytope;
pub use spectral::{RidgeProblem, Spectrum, SymPsdMatrix};
