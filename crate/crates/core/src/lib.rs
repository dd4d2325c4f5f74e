//! Kernel learning for linear Gaussian Markov processes observed on an
//! irregular time grid.
//!
//! The crate is organised bottom-up:
//!
//! * [`ar`]: AR model algebra (partial autocorrelations, covariances,
//!   spectra, model error).
//! * [`statespace`]: companion-form state-space models, eigenbasis
//!   diagonalization and stationary covariances.
//! * [`likelihood`]: exact Gaussian log-likelihood engines for gridded
//!   series with missing samples.
//! * [`estimators`]: multi-start maximum likelihood and HMC posterior-mean
//!   estimators.
//! * [`simlab`]: process generation, case studies, sweeps and timing
//!   benchmarks.
//! * [`io`]: CSV and JSON readers and writers used by the command line tool.

pub mod ar;
pub mod error;
pub mod io;
pub mod likelihood;
pub mod estimators;
pub mod simlab;
pub mod statespace;
mod dense;

pub use ar::{ArModel, CovarianceSpec, MeReport, PartialAutocorr};
pub use error::{Error, Result};
