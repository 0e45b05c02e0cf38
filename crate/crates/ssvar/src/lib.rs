//! Vector-autoregressive estimation with simultaneous lag-order selection,
//! stationarity regularization and measurement-noise denoising, plus
//! Granger-causality F-tests built on top of the fitted models.
//!
//! The two solvers are [`ss_admm`] (convex: hierarchical group sparsity and a
//! companion spectral-norm penalty) and [`ssd_admm`] (non-convex: additionally
//! separates wavelet-sparse excitation from Gaussian measurement noise).

pub mod baselines;
pub mod cli;
pub mod companion;
pub mod error;
pub mod granger;
pub mod linalg;
pub mod log_penalty;
pub mod model;
pub mod prox;
pub mod simulate;
pub mod ss_admm;
pub mod ssd_admm;
pub mod wavelet;

pub use error::{Error, Result};
pub use model::{
    build_lag_design, build_restricted_design, nmse, BivariateSeries, Design, FitResult,
    HyperParams, LagDesign, Orders, RestrictedDesign, VarCoefficients,
};
