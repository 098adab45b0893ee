//! Repeated kernel convolutions `K_sigma^i f` and the alternating iterates
//! `f_k`.
//!
//! Single convolutions evaluate by adaptive quadrature. Higher orders build a
//! shared grid representation once (composite panel quadrature per pass, local
//! cubic interpolation between passes) so both the binomial formula and the
//! recursion read the same `K^i f` values.

use crate::divergence::NumericDensity;
use crate::error::CoreError;
use crate::kernel::psi_sigma;
use crate::{quad, Result};

/// A repeated convolution operator: `order` applications of `f * psi_sigma`.
/// Order 0 is the identity.
#[derive(Debug, Clone, Copy)]
pub struct ConvolutionOperator {
    pub sigma: f64,
    pub order: usize,
}

/// Uniform grid with local cubic (4-point Lagrange) interpolation.
#[derive(Debug, Clone)]
pub struct GridFn {
    lo: f64,
    step: f64,
    values: Vec<f64>,
}

impl GridFn {
    pub fn eval(&self, x: f64) -> f64 {
        let n = self.values.len();
        let pos = (x - self.lo) / self.step;
        if pos <= 0.0 || pos >= (n - 1) as f64 {
            return 0.0;
        }
        let i = (pos.floor() as usize).clamp(1, n - 3);
        let t = pos - i as f64;
        let (y0, y1, y2, y3) = (
            self.values[i - 1],
            self.values[i],
            self.values[i + 1],
            self.values[i + 2],
        );
        // cubic through the four surrounding nodes at t in [0, 1]
        let a = -y0 / 6.0 + y1 / 2.0 - y2 / 2.0 + y3 / 6.0;
        let b = y0 / 2.0 - y1 + y2 / 2.0;
        let c = -y0 / 3.0 - y1 / 2.0 + y2 - y3 / 6.0;
        ((a * t + b) * t + c) * t + y1
    }
}

/// Shared grid pipeline holding `K^i f` for `i = 0..=max_order`.
pub struct IteratedKernel {
    pub sigma: f64,
    pub max_order: usize,
    base: NumericDensity,
    grids: Vec<GridFn>, // index i-1 holds K^i f
    pub domain: (f64, f64),
}

/// Half-width of the kernel window beyond which `psi_sigma` mass is
/// negligible at f64 working precision.
fn kernel_reach(sigma: f64) -> f64 {
    9.0 * sigma
}

impl IteratedKernel {
    /// Precompute `K^i f` up to `max_order` on a grid fine enough for the
    /// kernel scale (step `sigma / 8`, capped at 0.01).
    pub fn build(f: &NumericDensity, sigma: f64, max_order: usize) -> Result<Self> {
        if !(sigma > 0.0) {
            return Err(CoreError::InvalidInput("sigma must be positive".into()));
        }
        let (flo, fhi) = f.domain(1e-12);
        let reach = kernel_reach(sigma) * max_order.max(1) as f64;
        let lo = flo - reach;
        let hi = fhi + reach;
        let step = (sigma / 8.0).min(0.01);
        let n = ((hi - lo) / step).ceil() as usize + 4;
        let mut grids: Vec<GridFn> = Vec::with_capacity(max_order);
        for _order in 1..=max_order {
            let values = {
                let prev = grids.last();
                let prev_eval = |u: f64| -> f64 {
                    match prev {
                        None => f.density(u),
                        Some(g) => g.eval(u),
                    }
                };
                let w = kernel_reach(sigma);
                let panels = ((2.0 * w) / sigma).ceil() as usize;
                use rayon::prelude::*;
                (0..n)
                    .into_par_iter()
                    .map(|i| {
                        let x = lo + step * i as f64;
                        quad::composite_legendre(
                            &|u| prev_eval(u) * psi_sigma(sigma, x - u),
                            x - w,
                            x + w,
                            panels,
                            10,
                        )
                    })
                    .collect::<Vec<f64>>()
            };
            grids.push(GridFn { lo, step, values });
        }
        Ok(IteratedKernel {
            sigma,
            max_order,
            base: f.clone(),
            grids,
            domain: (lo, hi),
        })
    }

    /// `K^i f (x)`.
    pub fn k_pow(&self, i: usize, x: f64) -> f64 {
        if i == 0 {
            self.base.density(x)
        } else {
            self.grids[i - 1].eval(x)
        }
    }

    /// Binomial form `f_k(x) = sum_{i=0}^k C(k+1, i+1) (-1)^i K^i f(x)`.
    pub fn f_k(&self, k: usize, x: f64) -> f64 {
        assert!(k <= self.max_order, "need K^{k} precomputed");
        let mut acc = 0.0;
        let mut binom = (k + 1) as f64; // C(k+1, 1)
        let mut sign = 1.0;
        for i in 0..=k {
            acc += sign * binom * self.k_pow(i, x);
            binom *= (k - i) as f64 / (i + 2) as f64; // C(k+1, i+2)
            sign = -sign;
        }
        acc
    }

    /// Recursive form: `f_0 = f`, `f_{j+1} = f - (K f_j - f_j)`, expanded so
    /// each step reads the cached `K^i f` values through a different
    /// arithmetic path than the binomial route.
    pub fn f_k_recursive(&self, k: usize, x: f64) -> f64 {
        assert!(k <= self.max_order);
        // coefficients of f_j over K^0..K^j, updated as c <- c - (shift(c) - c)
        let mut coeffs = vec![0.0f64; k + 1];
        coeffs[0] = 1.0;
        for j in 0..k {
            let mut next = vec![0.0f64; k + 1];
            next[0] = 1.0; // the fresh f term
            for i in 0..=j {
                next[i] += coeffs[i]; // + f_j
                next[i + 1] -= coeffs[i]; // - K f_j
            }
            coeffs = next;
        }
        coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.k_pow(i, x))
            .sum()
    }
}

/// One-shot convolution `(K_sigma^order f)(x)`; order 0 is the identity and
/// order 1 uses direct adaptive quadrature (the accuracy reference), while
/// higher orders go through the grid pipeline.
pub fn convolve(f: &NumericDensity, sigma: f64, order: usize, x: f64) -> Result<f64> {
    if order == 0 {
        return Ok(f.density(x));
    }
    if order == 1 {
        let w = kernel_reach(sigma).max(1.0);
        let (flo, fhi) = f.domain(1e-12);
        let lo = (x - w).max(flo - kernel_reach(sigma));
        let hi = (x + w).min(fhi + kernel_reach(sigma));
        if lo >= hi {
            return Ok(0.0);
        }
        return quad::adaptive(&|u| f.density(u) * psi_sigma(sigma, x - u), lo, hi, 1e-11);
    }
    let kit = IteratedKernel::build(f, sigma, order)?;
    Ok(kit.k_pow(order, x))
}

/// Evaluate `f_k` through a freshly built pipeline (convenience wrapper; batch
/// callers should build `IteratedKernel` once).
pub fn f_k_eval(f: &NumericDensity, sigma: f64, k: usize, x: f64) -> Result<f64> {
    let kit = IteratedKernel::build(f, sigma, k)?;
    Ok(kit.f_k(k, x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::{conv_scale, psi_sigma};
    use std::sync::Arc;

    fn kernel_density(sigma: f64) -> NumericDensity {
        let reach = 27.0 * sigma.max(1.0);
        NumericDensity::new(
            Arc::new(move |x| psi_sigma(sigma, x)),
            None,
            Some((-reach, reach)),
        )
        .unwrap()
    }

    #[test]
    fn self_convolution_closed_form() {
        // psi_a * psi_b = psi_{sqrt(a^2+b^2)} on a grid
        let f = kernel_density(1.0);
        let s = conv_scale(1.0, 1.0);
        for i in 0..=200 {
            let x = -4.0 + 8.0 * i as f64 / 200.0;
            let v = convolve(&f, 1.0, 1, x).unwrap();
            assert!(
                (v - psi_sigma(s, x)).abs() < 1e-9,
                "x = {x}: {v} vs {}",
                psi_sigma(s, x)
            );
        }
        // reference value at the origin
        let v0 = convolve(&f, 1.0, 1, 0.0).unwrap();
        assert!((v0 - 0.3989422804014327).abs() < 1e-10, "got {v0}");
    }

    #[test]
    fn order_zero_is_identity() {
        let f = kernel_density(0.7);
        assert_eq!(convolve(&f, 0.5, 0, 0.3).unwrap(), f.density(0.3));
    }

    #[test]
    fn grid_pipeline_matches_closed_form_at_order_two() {
        let f = kernel_density(1.0);
        let kit = IteratedKernel::build(&f, 0.5, 2).unwrap();
        let s2 = conv_scale(conv_scale(1.0, 0.5), 0.5);
        for i in 0..=80 {
            let x = -3.0 + 6.0 * i as f64 / 80.0;
            let v = kit.k_pow(2, x);
            assert!(
                (v - psi_sigma(s2, x)).abs() < 1e-8,
                "x = {x}: {v} vs {}",
                psi_sigma(s2, x)
            );
        }
    }

    #[test]
    fn convolution_preserves_mass() {
        let f = kernel_density(0.8);
        let kit = IteratedKernel::build(&f, 0.4, 2).unwrap();
        for order in 1..=2 {
            let total = quad::adaptive(
                &|x| kit.k_pow(order, x),
                kit.domain.0,
                kit.domain.1,
                1e-9,
            )
            .unwrap();
            assert!((total - 1.0).abs() < 1e-8, "order {order}: {total}");
        }
    }

    #[test]
    fn f_k_low_orders() {
        let f = kernel_density(1.0);
        let kit = IteratedKernel::build(&f, 0.5, 2).unwrap();
        // f_0 = f
        assert_eq!(kit.f_k(0, 0.4), f.density(0.4));
        // f_1 = 2 f - K f
        let x = 0.7;
        let expect = 2.0 * f.density(x) - kit.k_pow(1, x);
        assert!((kit.f_k(1, x) - expect).abs() < 1e-14);
    }

    #[test]
    fn binomial_and_recursive_routes_agree() {
        let f = kernel_density(1.0);
        let kit = IteratedKernel::build(&f, 0.4, 3).unwrap();
        for k in 0..=3 {
            for i in 0..=100 {
                let x = -3.0 + 6.0 * i as f64 / 100.0;
                let a = kit.f_k(k, x);
                let b = kit.f_k_recursive(k, x);
                assert!((a - b).abs() <= 1e-8 * a.abs().max(1.0), "k = {k}, x = {x}");
            }
        }
    }
}
