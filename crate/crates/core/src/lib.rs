//! Data-driven frequency band estimation for multivariate locally stationary
//! time series.
//!
//! The crate locates partition points in frequency where the time-varying
//! behaviour of the spectral matrix changes. Local periodograms are built with
//! a sliding DFT ([`tvspec`]), compared across mirrored frequency
//! neighbourhoods ([`discrepancy`]), tested against a Gaussian null model
//! resampled from a kernel-smoothed time-varying covariance ([`bootstrap`]),
//! and searched over several neighbourhood widths ([`search`]). [`simgen`]
//! provides banded test signals and scoring.
//!
//! The crate is `no_std` (with `alloc`) when the default `std` feature is
//! disabled. With `std`, bootstrap ensembles run on the rayon thread pool;
//! results are identical either way.

#![cfg_attr(not(any(feature = "std", test)), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

pub mod bootstrap;
pub mod discrepancy;
mod error;
mod par;
pub mod search;
mod series;
pub mod simgen;
pub mod tvspec;

pub use error::{Error, Result};
pub use series::TimeSeries;
