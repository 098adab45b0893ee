//! The base density `omega`: flat at `2 xi` on [-3a/4, 3a/4], value `xi` at
//! `+-a`, Gaussian-compatible quadratic log-tail. Built in log space so the
//! smoothness conditions on `ln omega` are easy to satisfy and verify.

use crate::divergence::NumericDensity;
use crate::error::CoreError;
use crate::kernel::psi;
use crate::{quad, Result};
use std::sync::Arc;

/// Base density parameters. The log-density is
/// `ln(2 xi)` on `[-3a/4, 3a/4]`, blends through a C-infinity smoothstep on
/// `(3a/4, a)`, and equals `-c (|x| - 3a/4)^2 + d` beyond, with
/// `d = ln(xi) + c a^2 / 16` pinning `omega(+-a) = xi` and `c` solved so the
/// total mass is 1.
#[derive(Debug, Clone)]
pub struct BaseDensity {
    pub alpha: f64,
    pub xi: f64,
    /// Quadratic tail coefficient (solved).
    pub tail_coeff: f64,
    /// Quadratic tail offset `d = ln(xi) + c alpha^2 / 16`.
    pub tail_offset: f64,
    /// Measured envelope constant: `omega <= M_tilde psi` on the check grid.
    pub envelope_m_tilde: f64,
}

/// C-infinity step: 0 for `t <= 0`, 1 for `t >= 1`.
pub fn smoothstep(t: f64) -> f64 {
    if t <= 0.0 {
        return 0.0;
    }
    if t >= 1.0 {
        return 1.0;
    }
    let e = |s: f64| if s > 0.0 { (-1.0 / s).exp() } else { 0.0 };
    let a = e(t);
    a / (a + e(1.0 - t))
}

impl BaseDensity {
    pub fn ln_omega(&self, x: f64) -> f64 {
        let base = (2.0 * self.xi).ln();
        let t = x.abs() - 0.75 * self.alpha;
        if t <= 0.0 {
            return base;
        }
        let q = -self.tail_coeff * t * t + self.tail_offset;
        let t1 = 0.25 * self.alpha;
        if t >= t1 {
            return q;
        }
        let s = smoothstep(t / t1);
        (1.0 - s) * base + s * q
    }

    pub fn omega(&self, x: f64) -> f64 {
        self.ln_omega(x).exp()
    }

    /// Radius beyond which `omega` underflows to zero.
    pub fn support_radius(&self) -> f64 {
        0.75 * self.alpha + ((self.tail_offset + 745.0) / self.tail_coeff).max(0.0).sqrt()
    }

    pub fn numeric_density(&self) -> Result<NumericDensity> {
        let owned = self.clone();
        let r = self.support_radius();
        NumericDensity::new(
            Arc::new(move |x| owned.omega(x)),
            Some(self.envelope_m_tilde),
            Some((-r, r)),
        )
    }
}

fn mass_given_coeff(alpha: f64, xi: f64, c: f64) -> f64 {
    let d = xi.ln() + c * alpha * alpha / 16.0;
    let probe = BaseDensity {
        alpha,
        xi,
        tail_coeff: c,
        tail_offset: d,
        envelope_m_tilde: f64::NAN,
    };
    let hi = probe.support_radius();
    let tail = quad::adaptive(&|x| probe.omega(x), 0.75 * alpha, hi, 1e-12)
        .expect("omega tail integrand is smooth and bounded");
    3.0 * xi * alpha + 2.0 * tail
}

/// Construct the base density. `target_beta` only validates the request; the
/// construction is C-infinity, so it lies in every admissible smoothness
/// class whose measured constants are used downstream.
pub fn build_omega(alpha: f64, xi: f64, target_beta: f64) -> Result<BaseDensity> {
    if !(alpha > 0.0 && xi > 0.0 && target_beta > 0.0) {
        return Err(CoreError::InvalidInput(
            "build_omega needs alpha, xi, target_beta > 0".into(),
        ));
    }
    if 3.0 * xi * alpha > 1.0 {
        return Err(CoreError::InvalidInput(format!(
            "plateau mass 3 xi alpha = {} exceeds 1",
            3.0 * xi * alpha
        )));
    }
    // monotonicity of the blend requires d <= ln(2 xi), i.e. c <= 16 ln2 / a^2
    let c_max = 16.0 * std::f64::consts::LN_2 / (alpha * alpha);
    if mass_given_coeff(alpha, xi, c_max) > 1.0 {
        return Err(CoreError::Construction(format!(
            "no normalizing tail coefficient in (0, {c_max:.4}]: plateau mass {} is too close to 1; \
             decrease xi or alpha",
            3.0 * xi * alpha
        )));
    }
    let mut lo = c_max;
    for _ in 0..80 {
        lo *= 0.5;
        if mass_given_coeff(alpha, xi, lo) > 1.0 {
            break;
        }
    }
    if mass_given_coeff(alpha, xi, lo) <= 1.0 {
        return Err(CoreError::Construction(
            "could not bracket the normalizing tail coefficient".into(),
        ));
    }
    let mut hi = c_max;
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let m = mass_given_coeff(alpha, xi, mid);
        if m > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if (mass_given_coeff(alpha, xi, 0.5 * (lo + hi)) - 1.0).abs() < 1e-11 {
            break;
        }
    }
    let c = 0.5 * (lo + hi);
    let d = xi.ln() + c * alpha * alpha / 16.0;
    let mut base = BaseDensity {
        alpha,
        xi,
        tail_coeff: c,
        tail_offset: d,
        envelope_m_tilde: f64::NAN,
    };
    // measured envelope with a small safety margin
    let r = base.support_radius();
    let n = 20_001;
    let mut m_tilde = 0.0f64;
    for i in 0..n {
        let x = -r + 2.0 * r * i as f64 / (n - 1) as f64;
        let p = psi(x);
        if p > 0.0 {
            m_tilde = m_tilde.max(base.omega(x) / p);
        }
    }
    if !m_tilde.is_finite() || m_tilde <= 0.0 {
        return Err(CoreError::Construction(
            "omega envelope measurement failed".into(),
        ));
    }
    base.envelope_m_tilde = m_tilde * 1.001;
    Ok(base)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn standard() -> BaseDensity {
        build_omega(1.0, 0.22, 2.0).unwrap()
    }

    #[test]
    fn plateau_and_edge_values() {
        let w = standard();
        assert!((w.omega(0.0) - 2.0 * w.xi).abs() < 1e-14);
        assert!((w.omega(0.5) - 2.0 * w.xi).abs() < 1e-14);
        assert!((w.omega(0.75) - 2.0 * w.xi).abs() < 1e-14);
        assert!((w.omega(1.0) - w.xi).abs() < 1e-10);
        assert!((w.omega(-1.0) - w.xi).abs() < 1e-10);
    }

    #[test]
    fn normalizes_to_one() {
        let w = standard();
        let r = w.support_radius();
        let total = quad::adaptive(&|x| w.omega(x), -r, r, 1e-11).unwrap();
        assert!((total - 1.0).abs() < 1e-8, "mass {total}");
    }

    #[test]
    fn monotone_outside_half_plateau() {
        let w = standard();
        let r = w.support_radius();
        let n = 8000;
        let mut prev = w.omega(-r);
        for i in 1..=n {
            let x = -r + (r - 0.5 * w.alpha) * i as f64 / n as f64;
            let cur = w.omega(x);
            assert!(cur >= prev - 1e-12, "not nondecreasing at {x}");
            prev = cur;
        }
        let mut prev = w.omega(0.5 * w.alpha);
        for i in 1..=n {
            let x = 0.5 * w.alpha + (r - 0.5 * w.alpha) * i as f64 / n as f64;
            let cur = w.omega(x);
            assert!(cur <= prev + 1e-12, "not nonincreasing at {x}");
            prev = cur;
        }
    }

    #[test]
    fn envelope_holds_on_grid() {
        let w = standard();
        for i in 0..10_000 {
            let x = -10.0 + 20.0 * i as f64 / 9999.0;
            assert!(w.omega(x) <= w.envelope_m_tilde * psi(x) * (1.0 + 1e-12));
        }
    }

    #[test]
    fn tail_dominated_by_kernel() {
        // tail_coeff > 1 means the log-tail falls faster than -x^2
        let w = standard();
        assert!(w.tail_coeff > 1.0, "c = {}", w.tail_coeff);
    }

    #[test]
    fn registers_as_numeric_density() {
        let w = standard();
        let d = w.numeric_density().unwrap();
        assert!((d.integral(1e-9).unwrap() - 1.0).abs() < 1e-8);
    }

    #[test]
    fn rejects_overfull_plateau() {
        assert!(build_omega(1.0, 0.4, 2.0).is_err()); // 3 xi alpha > 1
        assert!(build_omega(1.0, 0.3, 2.0).is_err()); // no admissible tail coefficient
    }
}
