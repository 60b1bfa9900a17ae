//! Bayesian variable selection for small regression studies that borrows
//! information from larger external datasets.
//!
//! The two-step workflow fits a spike-and-slab model to the external data
//! ([`ssp`]), turns its posterior into a three-component shrinkage prior
//! ([`apsp`]), fits the internal data under that prior and thresholds the
//! inclusion probabilities against a permutation null ([`null`]).
//! [`baselines`] holds the comparison methods and [`sim`] the simulation
//! benchmark.

pub mod apsp;
pub mod baselines;
pub mod cli;
pub mod data;
pub mod error;
mod kernel;
pub mod mcmc;
pub mod multi;
pub mod null;
pub mod posterior;
pub mod report;
pub mod sim;
pub mod ssp;

pub use error::{Error, Result};
