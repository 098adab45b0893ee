//! Adaptive univariate density estimation with penalized Gaussian mixture sieves.
//!
//! The crate fits finite Gaussian mixtures under box constraints on means and
//! variances (a *sieve*), selects the number of components by a penalized
//! likelihood criterion, and provides the numerical machinery used to study the
//! estimator: Hellinger and Kullback-Leibler divergences, constructive mixture
//! approximation of smooth densities, and the oscillating-density test families
//! used for minimax lower bounds.
//!
//! The Gaussian kernel convention throughout is `psi(x) = pi^{-1/2} exp(-x^2)`
//! with scaled version `psi_sigma(x) = sigma^{-1} psi(x/sigma)`. Note that
//! `psi` has variance 1/2, not 1: a component with scale parameter
//! `sigma^2` has distribution variance `sigma^2 / 2`. Sampling code draws with
//! standard deviation `sigma / sqrt(2)` accordingly.

#![forbid(unsafe_code)]


pub mod approx;
pub mod divergence;
pub mod em;
pub mod error;
pub mod holder;
pub mod kernel;
pub mod mixture;
pub mod quad;
pub mod seed;
pub mod select;
pub mod smoothness;

pub use error::CoreError;
pub use mixture::{Component, Mixture, Sample};
pub use select::{SieveConfig, SieveSpec};

/// Crate result alias.
pub type Result<T> = std::result::Result<T, CoreError>;
