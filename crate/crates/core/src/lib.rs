//! Local orthogonal polynomial expansion (LOrPE) density estimation.
//!
//! The estimator expands the empirical density around every grid point in
//! polynomials that are orthonormal under a kernel weight restricted to the
//! density support. Near a support boundary the polynomials reshape
//! themselves, which removes boundary bias without data reflection; away from
//! boundaries the method is a KDE with a high-order effective kernel.
//!
//! Modules:
//! - [`kernels`]: weight kernels with support and moment metadata
//! - [`orthopoly`]: orthonormal polynomial systems (discretized Stieltjes)
//! - [`lorpe`]: the estimator, tapers, effective kernels
//! - [`tuning`]: plug-in and cross-validation selection of `(h, M)`
//! - [`baselines`]: KDE (optionally mirrored, optionally high-order) and OSDE
//! - [`simlab`]: test distributions, ISE/MISE, oracle and tuning studies

pub mod baselines;
pub mod error;
pub mod kernels;
pub mod lorpe;
pub mod orthopoly;
pub mod quadrature;
pub mod simlab;
pub mod tuning;

pub use error::{Error, Result};
pub use kernels::Kernel;
pub use lorpe::{DensityEstimate, LorpeConfig, Support, Taper};
pub use orthopoly::{BoundaryMode, PolySystem};
