//! Fourier neural operators (FNO) and implicit, weight-tied Fourier neural
//! operators (IFNO) written from scratch, together with the pieces needed to
//! train them on heterogeneous Darcy flow:
//!
//! - [`grid`]: uniform-grid fields, truncated real 2D FFTs, boundary padding
//! - [`randfield`]: seeded random-field samplers for inputs
//! - [`darcy`]: finite-difference ground truth and dataset files
//! - [`operator`]: model parameters, forward evaluation, checkpoints
//! - [`train`]: exact reverse-mode gradients, Adam, the training loop
//! - [`fixedpoint`]: fixed-point iteration and a hand-assembled IFNO solver
//! - [`bench`]: experiment specs, depth sweeps, reports

// `!(x > 0.0)` is used on purpose so NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bench;
pub mod darcy;
pub mod error;
pub mod fixedpoint;
pub mod grid;
pub mod operator;
pub mod randfield;
pub mod train;

pub use error::{Error, Result};
pub use grid::{GridField2D, GridShape, SpectralTensor};
pub use operator::{HyperParams, OperatorModel, Variant};
