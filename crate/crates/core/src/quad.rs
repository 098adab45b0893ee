//! One-dimensional quadrature: adaptive Gauss-Kronrod and fixed Legendre panels.
//!
//! `adaptive` drives everything that needs a guaranteed absolute tolerance
//! (normalization checks, divergences). `legendre_rule` supplies panel rules
//! for composite integration where the integrand is smooth per panel
//! (convolution passes, per-cell moments).

use crate::error::CoreError;
use crate::Result;
use statrs::function::erf::erfc_inv;
use std::collections::HashMap;
use std::sync::{Mutex, OnceLock};

/// Gauss-Kronrod 7-15 pair, positive abscissae on [-1, 1].
const XGK: [f64; 8] = [
    0.991455371120813,
    0.949107912342759,
    0.864864423359769,
    0.741531185599394,
    0.586087235467691,
    0.405845151377397,
    0.207784955007898,
    0.0,
];
const WGK: [f64; 8] = [
    0.022935322010529,
    0.063092092629979,
    0.104790010322250,
    0.140653259715525,
    0.169004726639267,
    0.190350578064785,
    0.204432940075298,
    0.209482141084728,
];
const WG: [f64; 4] = [
    0.129484966168870,
    0.279705391489277,
    0.381830050505119,
    0.417959183673469,
];

/// One GK15 panel: returns (integral, error estimate).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut res_k = 0.0;
    let mut res_g = 0.0;
    for (i, (&x, &wk)) in XGK.iter().zip(WGK.iter()).enumerate() {
        let (fv, fsum);
        if x == 0.0 {
            fv = f(mid);
            fsum = fv;
        } else {
            let f1 = f(mid - half * x);
            let f2 = f(mid + half * x);
            fsum = f1 + f2;
            fv = fsum;
        }
        res_k += wk * fv;
        if i % 2 == 1 {
            res_g += WG[i / 2] * fsum;
        }
        let _ = fv;
    }
    let integral = res_k * half;
    // the raw Gauss/Kronrod difference is a conservative error estimate
    let err = ((res_k - res_g) * half).abs();
    (integral, err)
}

/// Adaptive bisection with GK15 panels to absolute tolerance `tol`.
///
/// Fails with `CoreError::Quadrature` (carrying the achieved estimate) if the
/// panel budget is exhausted before the summed error estimate drops under
/// `tol`.
pub fn adaptive<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, tol: f64) -> Result<f64> {
    if !(a.is_finite() && b.is_finite()) || !(tol > 0.0) {
        return Err(CoreError::InvalidInput(format!(
            "adaptive quadrature needs finite bounds and tol > 0 (got [{a}, {b}], tol {tol})"
        )));
    }
    if a == b {
        return Ok(0.0);
    }
    let total_len = (b - a).abs();
    const MAX_PANELS: usize = 6000;
    // Seed with enough panels that localized features cannot slip between the
    // nodes of a single wide panel.
    const INIT_PANELS: usize = 64;
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::with_capacity(INIT_PANELS);
    for i in 0..INIT_PANELS {
        let lo = a + (b - a) * i as f64 / INIT_PANELS as f64;
        let hi = a + (b - a) * (i + 1) as f64 / INIT_PANELS as f64;
        let (v, e) = gk15(f, lo, hi);
        panels.push((lo, hi, v, e));
    }
    for _ in 0..MAX_PANELS {
        let total_err: f64 = panels.iter().map(|p| p.3).sum();
        if total_err <= tol {
            return Ok(panels.iter().map(|p| p.2).sum());
        }
        // split the worst panel
        let (idx, _) = panels
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("nonempty");
        let (lo, hi, _, err) = panels.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi || (hi - lo) < total_len * 1e-15 {
            // cannot refine further; treat this panel as converged at its estimate
            let (v, _) = gk15(f, lo, hi);
            panels.push((lo, hi, v, 0.0));
            let _ = err;
            continue;
        }
        let (v1, e1) = gk15(f, lo, mid);
        let (v2, e2) = gk15(f, mid, hi);
        panels.push((lo, mid, v1, e1));
        panels.push((mid, hi, v2, e2));
    }
    let estimate: f64 = panels.iter().map(|p| p.2).sum();
    let achieved: f64 = panels.iter().map(|p| p.3).sum();
    if achieved <= tol {
        return Ok(estimate);
    }
    Err(CoreError::Quadrature {
        tol,
        achieved,
        estimate,
    })
}

/// Truncation radius `T` such that the kernel tail mass beyond `T`, inflated by
/// the envelope constant, is below `tol / 10`: `M * P(|X| > T) < tol / 10` for
/// `X ~ psi`, where `P(|X| > T) = erfc(T)`.
pub fn truncation_radius(envelope_m: f64, tol: f64) -> f64 {
    let arg = (tol / (10.0 * envelope_m)).clamp(1e-290, 1.9);
    erfc_inv(arg).min(26.0).max(1.0)
}

/// Integrate `f` over the whole line given a pointwise envelope `f <= M * psi`.
pub fn integrate_envelope<F: Fn(f64) -> f64>(f: &F, envelope_m: f64, tol: f64) -> Result<f64> {
    let t = truncation_radius(envelope_m, tol);
    adaptive(f, -t, t, tol)
}

/// Gauss-Legendre rule with `n` points on [-1, 1], cached per `n`.
///
/// Nodes are eigenvalues of the Legendre Jacobi matrix, weights come from the
/// first eigenvector components (Golub-Welsch).
pub fn legendre_rule(n: usize) -> (Vec<f64>, Vec<f64>) {
    static CACHE: OnceLock<Mutex<HashMap<usize, (Vec<f64>, Vec<f64>)>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(rule) = cache.lock().unwrap().get(&n) {
        return rule.clone();
    }
    assert!(n >= 1, "legendre_rule needs n >= 1");
    let mut jac = nalgebra::DMatrix::<f64>::zeros(n, n);
    for k in 1..n {
        let kf = k as f64;
        let b = kf / (4.0 * kf * kf - 1.0).sqrt();
        jac[(k - 1, k)] = b;
        jac[(k, k - 1)] = b;
    }
    let eig = nalgebra::SymmetricEigen::new(jac);
    let mut pairs: Vec<(f64, f64)> = (0..n)
        .map(|i| {
            let node = eig.eigenvalues[i];
            let w = 2.0 * eig.eigenvectors[(0, i)] * eig.eigenvectors[(0, i)];
            (node, w)
        })
        .collect();
    pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
    let rule: (Vec<f64>, Vec<f64>) = pairs.into_iter().unzip();
    cache.lock().unwrap().insert(n, rule.clone());
    rule
}

/// Fixed-panel integral of `f` over `[a, b]` with an `n`-point Legendre rule.
pub fn panel_integral<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64, n: usize) -> f64 {
    let (nodes, weights) = legendre_rule(n);
    let half = 0.5 * (b - a);
    let mid = 0.5 * (a + b);
    let mut acc = 0.0;
    for (x, w) in nodes.iter().zip(weights.iter()) {
        acc += w * f(mid + half * x);
    }
    acc * half
}

/// Composite `n`-point Legendre integration over `[a, b]` split into `panels`
/// equal panels.
pub fn composite_legendre<F: Fn(f64) -> f64>(
    f: &F,
    a: f64,
    b: f64,
    panels: usize,
    n: usize,
) -> f64 {
    let h = (b - a) / panels as f64;
    let mut acc = 0.0;
    for i in 0..panels {
        let lo = a + i as f64 * h;
        acc += panel_integral(f, lo, lo + h, n);
    }
    acc
}
