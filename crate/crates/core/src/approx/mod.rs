//! Constructive approximation of smooth densities by finite kernel mixtures:
//! convolution iterates, the corrected density, moment-matched discretization
//! of mixing measures, the finite mixture assembly, and decay measurement.

pub mod conv;
pub mod discretize;
pub mod domination;
pub mod hk;
pub mod moments;
pub mod wp;

pub use conv::{convolve, f_k_eval, ConvolutionOperator, IteratedKernel};
pub use discretize::{
    discretize_mixing, discretize_mixing_with_floor, DiscreteMixingMeasure, DiscretizationReport,
    MixingMeasure,
};
pub use domination::{
    domination_checks, lemma13_sigma_bar, DominationParams, DominationReport, VarianceReading,
};
pub use hk::{build_h_k, HkDensity};
pub use moments::{gaussian_moment_nu, lemma9_sum, lemma9_sum_quadrature};
pub use wp::{build_wp_sigma, kl_decay_curve, DecayCurve, DecayPoint, WpReport};

use crate::error::CoreError;
use crate::smoothness::conv_order_k;
use crate::Result;

/// Scale budget for one approximation pass at smoothness `beta`.
///
/// `k` is the iterate order with `beta in (2k, 2k+2]`, `epsilon =
/// sigma^{6 beta + 5}` drives both the discretization tolerance and the
/// safeguard weight, `mu_sigma` is the mean-window radius, and `h1 = 4 (beta
/// + 1)` is the low-density threshold exponent used by the construction.
#[derive(Debug, Clone, Copy)]
pub struct ApproxBudget {
    pub beta: f64,
    pub k: usize,
    pub sigma: f64,
    pub epsilon: f64,
    pub mu_sigma: f64,
    pub h1: f64,
}

impl ApproxBudget {
    /// `mu_sigma = 2 sqrt(ln(4M/sqrt(pi)) + k ln(4/sqrt(3)) + (6 beta + 4) |ln sigma|)`.
    pub fn new(beta: f64, sigma: f64, envelope_m: f64) -> Result<Self> {
        if !(beta > 0.0 && sigma > 0.0 && sigma < 1.0 && envelope_m > 0.0) {
            return Err(CoreError::InvalidInput(format!(
                "budget needs beta > 0, sigma in (0, 1), M > 0 (got beta = {beta}, sigma = {sigma}, M = {envelope_m})"
            )));
        }
        let k = conv_order_k(beta);
        let epsilon = sigma.powf(6.0 * beta + 5.0);
        if !(epsilon > 0.0 && epsilon < 1.0 / std::f64::consts::PI.sqrt()) {
            return Err(CoreError::InvalidInput(format!(
                "epsilon = sigma^(6 beta + 5) = {epsilon} must lie in (0, pi^(-1/2))"
            )));
        }
        let inner = (4.0 * envelope_m / std::f64::consts::PI.sqrt()).ln()
            + k as f64 * (4.0 / 3.0f64.sqrt()).ln()
            + (6.0 * beta + 4.0) * sigma.ln().abs();
        if inner <= 0.0 {
            return Err(CoreError::InvalidInput(
                "mean-window radius is undefined for these parameters".into(),
            ));
        }
        let mu_sigma = 2.0 * inner.sqrt();
        if mu_sigma < sigma {
            return Err(CoreError::InvalidInput(format!(
                "mean window {mu_sigma} is narrower than sigma = {sigma}"
            )));
        }
        Ok(ApproxBudget {
            beta,
            k,
            sigma,
            epsilon,
            mu_sigma,
            h1: 4.0 * (beta + 1.0),
        })
    }

    /// Discretization tolerance: the theoretical `epsilon` floored at the f64
    /// verification resolution (the safeguard weight keeps the raw value).
    pub fn epsilon_effective(&self) -> f64 {
        self.epsilon
            .max(discretize::SUP_NORM_FLOOR * self.sigma / 2.0)
    }
}
