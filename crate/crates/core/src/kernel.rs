//! The Gaussian kernel `psi` and its scaled family.
//!
//! `psi(x) = pi^{-1/2} exp(-x^2)` has variance 1/2. The scaled kernel
//! `psi_sigma(x) = sigma^{-1} psi(x/sigma)` has variance `sigma^2 / 2`, so the
//! standard deviation of a component with scale parameter `sigma` is
//! `sigma / sqrt(2)`. All sampling and closed-form identities in this crate
//! follow that convention.

/// `1 / sqrt(pi)`.
pub const INV_SQRT_PI: f64 = 0.564_189_583_547_756_3;

/// `ln(pi)`.
const LN_PI: f64 = 1.144_729_885_849_400_2;

/// The kernel `psi(x) = pi^{-1/2} exp(-x^2)`.
#[inline]
pub fn psi(x: f64) -> f64 {
    INV_SQRT_PI * (-x * x).exp()
}

/// Scaled kernel `psi_sigma(x) = sigma^{-1} psi(x / sigma)`, computed exactly
/// in that form so the scaling identity holds bitwise.
#[inline]
pub fn psi_sigma(sigma: f64, x: f64) -> f64 {
    psi(x / sigma) / sigma
}

/// `ln psi_sigma(x)`, stable in the far tail.
#[inline]
pub fn ln_psi_sigma(sigma: f64, x: f64) -> f64 {
    let z = x / sigma;
    -sigma.ln() - 0.5 * LN_PI - z * z
}

/// Scale of the convolution `psi_a * psi_b = psi_{sqrt(a^2 + b^2)}`.
#[inline]
pub fn conv_scale(a: f64, b: f64) -> f64 {
    a.hypot(b)
}

/// Standard deviation of a component with scale parameter `sigma`.
#[inline]
pub fn component_sd(sigma: f64) -> f64 {
    sigma * std::f64::consts::FRAC_1_SQRT_2
}

/// Tail mass `P(|X| > t)` for `X ~ psi`; equals `erfc(t)`.
#[inline]
pub fn psi_tail(t: f64) -> f64 {
    statrs::function::erf::erfc(t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad;

    #[test]
    fn peak_value_matches_closed_form() {
        assert!((psi(0.0) - INV_SQRT_PI).abs() < 1e-15);
        assert!((psi_sigma(2.0, 0.0) - INV_SQRT_PI / 2.0).abs() < 1e-15);
    }

    #[test]
    fn scaling_identity_on_grid() {
        for &sigma in &[0.1, 1.0, 10.0] {
            for i in 0..=100 {
                let x = -5.0 + 0.1 * i as f64;
                let direct = psi_sigma(sigma, x);
                let scaled = psi(x / sigma) / sigma;
                assert_eq!(direct.to_bits(), scaled.to_bits());
            }
        }
    }

    #[test]
    fn scaled_kernel_normalizes() {
        for &sigma in &[0.1f64, 1.0, 10.0] {
            let t = 26.0 * sigma.max(1.0);
            let v = quad::adaptive(&|x| psi_sigma(sigma, x), -t, t, 1e-12).unwrap();
            assert!((v - 1.0).abs() < 1e-10, "sigma={sigma} int={v}");
        }
    }

    #[test]
    fn scaled_variance_is_half_sigma_sq() {
        for &sigma in &[0.5, 1.0, 3.0] {
            let t = 30.0 * sigma;
            let v = quad::adaptive(&|x| x * x * psi_sigma(sigma, x), -t, t, 1e-11).unwrap();
            assert!((v - sigma * sigma / 2.0).abs() < 1e-9, "sigma={sigma} var={v}");
        }
    }

    #[test]
    fn ln_psi_agrees_with_direct() {
        for i in 0..200 {
            let x = -10.0 + 0.1 * i as f64;
            let a = ln_psi_sigma(0.7, x);
            let b = psi_sigma(0.7, x).ln();
            assert!((a - b).abs() < 1e-12, "x={x}");
        }
    }

    #[test]
    fn tail_mass_matches_quadrature() {
        // the erfc implementation itself is only ~5e-11 accurate
        for &t in &[0.5, 1.0, 2.0] {
            let q = quad::adaptive(&|x| psi(x), t, t + 24.0, 1e-13).unwrap();
            assert!((2.0 * q - psi_tail(t)).abs() < 2e-10);
        }
    }
}
