//! Albert–Chib data augmentation for Bayesian probit regression, with
//! computable drift/minorization certificates for its convergence rate.
//!
//! The modules build on each other roughly in this order:
//!
//! - [`symmat`] and [`truncnorm`]: dense symmetric matrix helpers and the
//!   unit-variance truncated normal (moments, `g`, sampler).
//! - [`model`]: datasets, Gaussian priors, the propriety check and the
//!   posterior mode.
//! - [`sampler`]: the Markov kernel, its two flipped chains and a lag-1 rate
//!   estimate.
//! - [`certify`]: drift coefficients, the optimized Rosenthal rate bound and
//!   burn-in certificates.
//! - [`experiments`]: synthetic data and the stability sweeps in `n` and `p`.
//! - [`io`] and [`cli`]: file formats and the command line.

// NaN-rejecting guards are written as `!(x > 0.0)` on purpose.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod certify;
pub mod cli;
pub mod error;
pub mod experiments;
pub mod io;
mod lp;
pub mod model;
pub mod sampler;
pub mod symmat;
pub mod truncnorm;

pub use error::{Error, Result};
