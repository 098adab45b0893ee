//! Concrete members and verifiers of the log-Holder density classes: the
//! oscillating bump, the base density, the hypercube perturbation families,
//! greedy binary codes with guaranteed Hamming separation, and the pairwise
//! separation audits used for minimax lower-bound studies.

pub mod audit;
pub mod bump;
pub mod class;
pub mod codes;
pub mod omega;

pub use audit::{audit_separation, theorem3_bound, PairAudit, SeparationAudit};
pub use bump::{build_bump, BumpSpec};
pub use class::{
    proposition1_params, verify_class_conditions, ClassParams, ClassReport, SmoothDensity,
};
pub use codes::{choose_d, vg_subset, VgCode};
pub use omega::{build_omega, BaseDensity};

use crate::divergence::NumericDensity;
use crate::error::CoreError;
use crate::mixture::Sample;
use crate::Result;
use std::sync::Arc;

/// One hypercube density `f_theta = omega + sum_j (2 theta_j - 1) phi_j`,
/// where `phi_j` is the bump scaled by `xi D^{-beta} / A` and translated to
/// the `j`-th subinterval of `[-alpha/2, alpha/2]`.
#[derive(Clone)]
pub struct PerturbationFamily {
    pub beta: f64,
    pub d: usize,
    pub theta: Vec<bool>,
    pub base: BaseDensity,
    pub bump: Arc<BumpSpec>,
    /// Envelope constant `M = M_tilde or 3 sqrt(pi) xi exp(alpha^2/4)`,
    /// whichever is larger.
    pub envelope_m: f64,
}

/// Shares base and bump across all theta of a fixed `(beta, D)`.
#[derive(Clone)]
pub struct FamilyBuilder {
    pub beta: f64,
    pub d: usize,
    pub base: BaseDensity,
    pub bump: Arc<BumpSpec>,
}

impl FamilyBuilder {
    pub fn new(beta: f64, d: usize, base: BaseDensity) -> Result<Self> {
        if d < 2 || d % 2 != 0 {
            return Err(CoreError::InvalidInput(format!(
                "D must be an even count >= 2 (got {d})"
            )));
        }
        let bump = Arc::new(build_bump(beta)?);
        Ok(FamilyBuilder {
            beta,
            d,
            base,
            bump,
        })
    }

    pub fn family(&self, theta: &[bool]) -> Result<PerturbationFamily> {
        if theta.len() != self.d {
            return Err(CoreError::InvalidInput(format!(
                "theta has length {}, expected D = {}",
                theta.len(),
                self.d
            )));
        }
        let envelope_m = self.base.envelope_m_tilde.max(
            3.0 * std::f64::consts::PI.sqrt()
                * self.base.xi
                * (self.base.alpha * self.base.alpha / 4.0).exp(),
        );
        Ok(PerturbationFamily {
            beta: self.beta,
            d: self.d,
            theta: theta.to_vec(),
            base: self.base.clone(),
            bump: self.bump.clone(),
            envelope_m,
        })
    }

    pub fn family_from_word(&self, word: u64) -> Result<PerturbationFamily> {
        let theta: Vec<bool> = (0..self.d).map(|j| (word >> j) & 1 == 1).collect();
        self.family(&theta)
    }

    /// Bump amplitude `xi D^{-beta} / A`.
    pub fn amplitude(&self) -> f64 {
        self.base.xi * (self.d as f64).powf(-self.beta) / self.bump.a_phi
    }
}

impl PerturbationFamily {
    pub fn amplitude(&self) -> f64 {
        self.base.xi * (self.d as f64).powf(-self.beta) / self.bump.a_phi
    }

    /// Density value at `x`: outside `[-alpha/2, alpha/2]` it equals `omega`;
    /// inside, exactly one translated bump can contribute.
    pub fn density(&self, x: f64) -> f64 {
        self.base.omega(x) + self.perturbation(x)
    }

    pub fn ln_density(&self, x: f64) -> f64 {
        let p = self.perturbation(x);
        if p == 0.0 {
            self.base.ln_omega(x)
        } else {
            // inside the plateau omega = 2 xi and |p| <= xi, so this is safe
            (self.base.omega(x) + p).ln()
        }
    }

    fn perturbation(&self, x: f64) -> f64 {
        let alpha = self.base.alpha;
        let half = alpha / 2.0;
        if !(-half..half).contains(&x) {
            return 0.0;
        }
        let pos = (x + half) * self.d as f64 / alpha;
        let j = (pos.floor() as usize).min(self.d - 1);
        let z = pos - j as f64;
        let sign = if self.theta[j] { 1.0 } else { -1.0 };
        sign * self.amplitude() * self.bump.eval(z)
    }

    pub fn numeric_density(&self) -> Result<NumericDensity> {
        let owned = self.clone();
        let r = self.base.support_radius();
        NumericDensity::new(
            Arc::new(move |x| owned.density(x)),
            Some(self.envelope_m),
            Some((-r, r)),
        )
    }
}

/// Deterministic random sign pattern for a hypercube member.
pub fn random_theta(d: usize, theta_seed: u64) -> Vec<bool> {
    let mut rng = crate::seed::rng_from(theta_seed);
    (0..d).map(|_| rand::Rng::random::<bool>(&mut rng)).collect()
}

/// Rejection sampling of a family member against its envelope `M psi`;
/// deterministic per seed, returns the sample and the realized acceptance
/// rate. See `divergence::rejection_sample` for the acceptance-rate contract.
pub fn draw_from_family(
    fam: &PerturbationFamily,
    n: usize,
    draw_seed: u64,
) -> Result<(Sample, f64)> {
    let owned = fam.clone();
    crate::divergence::rejection_sample(
        &move |x| owned.density(x),
        fam.envelope_m,
        n,
        draw_seed,
        "draw_from_family",
    )
}
