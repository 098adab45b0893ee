//! The oscillating bump `phi`: derivative of the standard compact bump,
//! supported in (1/4, 3/4), with zero integral by construction and unit
//! L2 norm by normalization.

use crate::error::CoreError;
use crate::smoothness::holder_r;
use crate::{quad, Result};

/// The bump and its derivative sup-norms up to order `r + 1`.
#[derive(Debug, Clone)]
pub struct BumpSpec {
    /// `max_{0 <= k <= r+1} sup |phi^{(k)}|`, with `r` from the construction beta.
    pub a_phi: f64,
    /// `sup |phi^{(k)}|` for `k = 0..=r+1`.
    pub sup_derivs: Vec<f64>,
    /// Normalization constant against the `e^{16}`-rescaled raw bump.
    norm: f64,
}

/// Raw derivative-of-bump, rescaled by `e^{16}` (the peak of `exp(-1/u)` on
/// this support is `e^{-16}`) so intermediate values stay O(1):
/// `e^{16} * d/dz exp(-1/((z - 1/4)(3/4 - z)))`.
fn phi_raw(z: f64) -> f64 {
    let u = (z - 0.25) * (0.75 - z);
    if u <= 0.0 {
        return 0.0;
    }
    let lin = 1.0 - 2.0 * z;
    if lin == 0.0 {
        return 0.0;
    }
    // log-space magnitude avoids overflow of 1/u^2 near the support edges
    let magnitude = (16.0 - 1.0 / u - 2.0 * u.ln() + lin.abs().ln()).exp();
    magnitude.copysign(lin)
}

/// Central finite difference of order `k` with one Richardson step.
pub(crate) fn fd_derivative<F: Fn(f64) -> f64>(f: &F, x: f64, k: usize, h: f64) -> f64 {
    if k == 0 {
        return f(x);
    }
    let stencil = |h: f64| -> f64 {
        // iterated central difference: sum_j (-1)^j C(k, j) f(x + (k/2 - j) h)
        let mut acc = 0.0;
        let mut coeff = 1.0;
        for j in 0..=k {
            let offset = (k as f64 / 2.0 - j as f64) * h;
            acc += coeff * f(x + offset);
            coeff *= -((k - j) as f64) / (j + 1) as f64;
        }
        acc / h.powi(k as i32)
    };
    let d1 = stencil(h);
    let d2 = stencil(h / 2.0);
    (4.0 * d2 - d1) / 3.0
}

impl BumpSpec {
    /// `phi(z)`: zero outside (1/4, 3/4).
    pub fn eval(&self, z: f64) -> f64 {
        self.norm * phi_raw(z)
    }

    /// Highest derivative order tracked (`r + 1`).
    pub fn deriv_order(&self) -> usize {
        self.sup_derivs.len() - 1
    }
}

/// Grid on (1/4, 3/4): uniform interior plus geometric refinement toward both
/// support edges, where derivative magnitudes peak before dying off.
fn support_grid(n_uniform: usize) -> Vec<f64> {
    let mut grid = Vec::with_capacity(n_uniform + 160);
    for i in 1..n_uniform {
        grid.push(0.25 + 0.5 * i as f64 / n_uniform as f64);
    }
    for j in 1..=40 {
        let off = 0.25 * 0.5f64.powf(j as f64 / 5.0);
        grid.push(0.25 + off);
        grid.push(0.75 - off);
    }
    grid.sort_by(f64::total_cmp);
    grid.dedup();
    grid
}

fn sup_on_grid<F: Fn(f64) -> f64>(f: &F, grid: &[f64], k: usize, h: f64) -> f64 {
    grid.iter()
        .map(|&z| fd_derivative(f, z, k, h).abs())
        .fold(0.0, f64::max)
}

/// Build the bump for smoothness up to `beta_high`: normalize `phi_raw` so
/// `int phi^2 = 1`, then measure `sup |phi^{(k)}|` for `k <= r + 1` by
/// nested-grid maximization with Richardson-extrapolated differences.
pub fn build_bump(beta_high: f64) -> Result<BumpSpec> {
    if !(beta_high > 0.0) {
        return Err(CoreError::InvalidInput("beta_high must be positive".into()));
    }
    let sq = quad::adaptive(&|z| phi_raw(z) * phi_raw(z), 0.25, 0.75, 1e-13)
        .map_err(|e| CoreError::Construction(format!("bump normalization: {e}")))?;
    if !(sq > 0.0) {
        return Err(CoreError::Construction("bump has zero L2 norm".into()));
    }
    let norm = 1.0 / sq.sqrt();
    let phi = move |z: f64| norm * phi_raw(z);

    let r = holder_r(beta_high);
    let mut sup_derivs = Vec::with_capacity(r + 2);
    for k in 0..=(r + 1) {
        // steps chosen so FD noise (~eps / h^k) stays far below the sup
        let h = match k {
            0 | 1 => 1e-5,
            2 => 1e-4,
            _ => 8e-4,
        };
        let coarse = sup_on_grid(&phi, &support_grid(2000), k, h);
        let fine = sup_on_grid(&phi, &support_grid(4000), k, h);
        if (fine - coarse).abs() > 0.02 * fine.max(1e-12) {
            return Err(CoreError::Construction(format!(
                "bump derivative sup (order {k}) did not stabilize across nested grids: {coarse} vs {fine}"
            )));
        }
        sup_derivs.push(fine.max(coarse));
    }
    let a_phi = sup_derivs.iter().copied().fold(0.0, f64::max);
    if a_phi <= 1.0 {
        return Err(CoreError::Construction(format!(
            "bump constant A = {a_phi} must exceed 1"
        )));
    }
    Ok(BumpSpec {
        a_phi,
        sup_derivs,
        norm,
    })
}
