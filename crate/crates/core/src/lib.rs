//! Numerical core for linear Skorohod equations driven by fractional Brownian
//! motion (fBm) and the fractional Brownian sheet.
//!
//! The crate is `no_std` with `alloc` when the `std` feature is off.
//! Transcendental functions go through [`libm`]. IO and the parallel Monte
//! Carlo driver live in the companion `fbm-chaos` crate.
//!
//! Module map:
//!
//! * [`model`]: parameters, grids, RNG streams and result containers.
//! * [`special`]: `h0`, its negativity interval, Hermite polynomials and the
//!   calibrated Volterra kernel of fBm.
//! * [`fields`]: exact-in-law samplers for fBm paths and fBm sheets.
//! * [`operators`]: the transfer operator `K*`, Riemann-Liouville integrals,
//!   Marchaud derivatives, `K^{-1}F` and the Girsanov density.
//! * [`chaos`]: chaos kernels, multiple integrals and the solution schemes.

#![cfg_attr(not(feature = "std"), no_std)]
#![deny(unsafe_code)]
#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod chaos;
pub mod error;
pub mod fields;
pub mod linalg;
pub mod model;
pub mod operators;
pub mod quadrature;
pub mod special;
pub mod stats;

pub use error::{Error, Result};
pub use model::{
    build_grid, validate_params, Grid2D, HurstPair, ModelParams, MonteCarloResult, RngStreamSpec,
    TimeGrid,
};
