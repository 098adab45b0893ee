//! The corrected density `h_k`: the iterate `f_k` floored at `f/2` off the set
//! where it stays above that level, then renormalized.

use crate::approx::conv::IteratedKernel;
use crate::approx::ApproxBudget;
use crate::divergence::NumericDensity;
use crate::error::CoreError;
use crate::{quad, Result};
use std::sync::Arc;

/// `h_k = g_k / int g_k` with `g_k = f_k` where `f_k > f/2` and `f/2`
/// elsewhere.
pub struct HkDensity {
    pub k: usize,
    /// `int g_k`; close to 1 for small sigma.
    pub gk_integral: f64,
    kit: Arc<IteratedKernel>,
    base: NumericDensity,
    norm: f64,
}

impl HkDensity {
    pub fn g_k(&self, x: f64) -> f64 {
        let fx = self.base.density(x);
        let fk = self.kit.f_k(self.k, x);
        if fk > 0.5 * fx {
            fk
        } else {
            0.5 * fx
        }
    }

    pub fn density(&self, x: f64) -> f64 {
        self.g_k(x) / self.norm
    }

    pub fn kit(&self) -> &IteratedKernel {
        &self.kit
    }

    pub fn domain(&self) -> (f64, f64) {
        self.kit.domain
    }
}

/// Build `h_k` for the budgeted smoothness bucket, reusing a prebuilt kernel
/// pipeline when supplied.
pub fn build_h_k(
    f: &NumericDensity,
    budget: &ApproxBudget,
    kit: Option<Arc<IteratedKernel>>,
) -> Result<HkDensity> {
    let k = budget.k;
    let kit = match kit {
        Some(k_ref) => {
            if k_ref.max_order < k || (k_ref.sigma - budget.sigma).abs() > 1e-15 {
                return Err(CoreError::InvalidInput(
                    "supplied kernel pipeline does not match the budget".into(),
                ));
            }
            k_ref
        }
        None => Arc::new(IteratedKernel::build(f, budget.sigma, k.max(1))?),
    };
    let mut probe = HkDensity {
        k,
        gk_integral: f64::NAN,
        kit,
        base: f.clone(),
        norm: 1.0,
    };
    let (lo, hi) = probe.kit.domain;
    let integral = quad::adaptive(&|x| probe.g_k(x), lo, hi, 1e-9)?;
    if !(integral > 0.0) {
        return Err(CoreError::Construction(format!(
            "g_k integral {integral} is not positive"
        )));
    }
    probe.gk_integral = integral;
    probe.norm = integral;
    Ok(probe)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::holder::build_omega;

    fn omega_density() -> NumericDensity {
        build_omega(1.0, 0.22, 2.0).unwrap().numeric_density().unwrap()
    }

    #[test]
    fn k0_reduces_to_f() {
        let f = omega_density();
        let budget = ApproxBudget::new(2.0, 0.2, 1.6).unwrap();
        assert_eq!(budget.k, 0);
        let hk = build_h_k(&f, &budget, None).unwrap();
        assert!((hk.gk_integral - 1.0).abs() < 1e-8);
        for i in 0..=50 {
            let x = -3.0 + 6.0 * i as f64 / 50.0;
            assert!((hk.density(x) - f.density(x)).abs() < 1e-9 * f.density(x).max(1e-6));
        }
    }

    #[test]
    fn hk_dominates_half_f() {
        let f = omega_density();
        let budget = ApproxBudget::new(3.0, 0.15, 1.6).unwrap(); // k = 1
        let hk = build_h_k(&f, &budget, None).unwrap();
        let norm = hk.gk_integral;
        for i in 0..=500 {
            let x = -4.0 + 8.0 * i as f64 / 500.0;
            assert!(
                hk.density(x) >= 0.5 * f.density(x) / norm - 1e-12,
                "x = {x}"
            );
        }
    }

    #[test]
    fn gk_integral_approaches_one_as_sigma_shrinks() {
        let f = omega_density();
        let mut prev_gap = f64::INFINITY;
        for &sigma in &[0.3, 0.15, 0.075] {
            let budget = ApproxBudget::new(3.0, sigma, 1.6).unwrap();
            let hk = build_h_k(&f, &budget, None).unwrap();
            let gap = (hk.gk_integral - 1.0).abs();
            assert!(gap < prev_gap + 1e-12, "sigma = {sigma}: gap {gap}");
            prev_gap = gap;
        }
        assert!(prev_gap < 5e-4, "final gap {prev_gap}");
    }

    #[test]
    fn hk_integrates_to_one() {
        let f = omega_density();
        let budget = ApproxBudget::new(3.0, 0.2, 1.6).unwrap();
        let hk = build_h_k(&f, &budget, None).unwrap();
        let (lo, hi) = hk.domain();
        let total = quad::adaptive(&|x| hk.density(x), lo, hi, 1e-9).unwrap();
        assert!((total - 1.0).abs() < 1e-8);
    }
}
