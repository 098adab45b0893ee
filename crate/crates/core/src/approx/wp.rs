//! The finite mixture approximant: restrict `h_k` to the mean window, replace
//! the restricted measure by its moment-matched discretization, convolve with
//! the kernel at scale sigma, and add a vanishing-weight safeguard component
//! at the origin so the mixture stays bounded below on the whole line.

use crate::approx::conv::IteratedKernel;
use crate::approx::discretize::{discretize_mixing, DiscretizationReport, MixingMeasure};
use crate::approx::hk::build_h_k;
use crate::approx::ApproxBudget;
use crate::divergence::{kl_div, NumericDensity};
use crate::error::CoreError;
use crate::mixture::{Component, Mixture};
use crate::{divergence, quad, Result};
use serde::Serialize;
use std::sync::Arc;

/// Output of the mixture construction.
#[derive(Debug, Clone)]
pub struct WpReport {
    pub mixture: Mixture,
    /// Support-count contract: `54 mu_sigma sigma^{-1} e^2 (1 or ln(1/(sqrt(pi) eps))) + 1`.
    pub component_bound: f64,
    pub discretization: DiscretizationReport,
    /// Mass of `h_k` inside the mean window.
    pub window_mass: f64,
}

/// Build the sigma-scale finite mixture approximating `f`.
pub fn build_wp_sigma(
    f: &NumericDensity,
    budget: &ApproxBudget,
    kit: Option<Arc<IteratedKernel>>,
) -> Result<WpReport> {
    let sigma = budget.sigma;
    let mu = budget.mu_sigma;
    let hk = Arc::new(build_h_k(f, budget, kit)?);
    let window_mass = quad::adaptive(&|x| hk.density(x), -mu, mu, 1e-10)?;
    if !(window_mass > 0.0) {
        return Err(CoreError::Construction(format!(
            "restricted mass {window_mass} is not positive"
        )));
    }
    let restricted = {
        let hk = hk.clone();
        MixingMeasure::Density(Arc::new(move |x| hk.density(x) / window_mass))
    };
    let discretization = discretize_mixing(&restricted, mu, sigma, budget.epsilon_effective())?;
    let safeguard = budget.epsilon; // sigma^{6 beta + 5}
    let denom = window_mass + safeguard;
    let mut components: Vec<Component> = discretization
        .measure
        .support_points
        .iter()
        .zip(discretization.measure.weights.iter())
        .map(|(&p, &w)| Component {
            weight: window_mass * w / denom,
            mean: p,
            variance: sigma * sigma,
        })
        .collect();
    components.push(Component {
        weight: safeguard / denom,
        mean: 0.0,
        variance: sigma * sigma,
    });
    // exact renormalization after assembly
    let total: f64 = components.iter().map(|c| c.weight).sum();
    for c in &mut components {
        c.weight /= total;
    }
    let mixture = Mixture::new(components)?;
    let component_bound = 54.0 * mu / sigma
        * std::f64::consts::E.powi(2)
        * (1.0f64).max((1.0 / (std::f64::consts::PI.sqrt() * budget.epsilon)).ln())
        + 1.0;
    if (mixture.len() as f64) > component_bound {
        return Err(CoreError::Construction(format!(
            "component count {} exceeds the bound {component_bound}",
            mixture.len()
        )));
    }
    Ok(WpReport {
        mixture,
        component_bound,
        discretization,
        window_mass,
    })
}

/// One point of the approximation decay curve.
#[derive(Debug, Clone, Serialize)]
pub struct DecayPoint {
    pub sigma: f64,
    pub kl: Option<f64>,
    pub components: usize,
    pub error: Option<String>,
}

/// KL decay of the mixture approximant along a sigma grid, with the fitted
/// log-log slope over the successful points.
#[derive(Debug, Clone, Serialize)]
pub struct DecayCurve {
    pub beta: f64,
    pub points: Vec<DecayPoint>,
    pub slope: Option<f64>,
}

impl DecayCurve {
    /// CSV `sigma,kl,components`.
    pub fn write_csv<W: std::io::Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "sigma,kl,components")?;
        for p in &self.points {
            writeln!(
                out,
                "{},{},{}",
                p.sigma,
                p.kl.map_or("NA".into(), |v| v.to_string()),
                p.components
            )?;
        }
        Ok(())
    }
}

/// Build the approximant per sigma and measure `KL(f, wp_sigma)`; construction
/// failures are recorded per point.
pub fn kl_decay_curve(f: &NumericDensity, beta: f64, sigma_grid: &[f64]) -> Result<DecayCurve> {
    if sigma_grid.is_empty() {
        return Err(CoreError::InvalidInput("empty sigma grid".into()));
    }
    let envelope = f.tail_envelope_m.ok_or_else(|| {
        CoreError::InvalidInput("decay curve needs an in-class density with an envelope".into())
    })?;
    let mut points = Vec::with_capacity(sigma_grid.len());
    for &sigma in sigma_grid {
        let outcome = ApproxBudget::new(beta, sigma, envelope)
            .and_then(|budget| build_wp_sigma(f, &budget, None))
            .and_then(|wp| {
                let dens = NumericDensity::from_mixture(&wp.mixture)?;
                Ok((kl_div(f, &dens)?, wp.mixture.len()))
            });
        match outcome {
            Ok((kl, components)) => points.push(DecayPoint {
                sigma,
                kl: Some(kl.value()),
                components,
                error: None,
            }),
            Err(e) => points.push(DecayPoint {
                sigma,
                kl: None,
                components: 0,
                error: Some(e.to_string()),
            }),
        }
    }
    let xs: Vec<f64> = points
        .iter()
        .filter(|p| p.kl.is_some_and(|v| v > 0.0))
        .map(|p| p.sigma.ln())
        .collect();
    let ys: Vec<f64> = points
        .iter()
        .filter(|p| p.kl.is_some_and(|v| v > 0.0))
        .map(|p| p.kl.unwrap().ln())
        .collect();
    let slope = divergence::slope_with_ci(&xs, &ys).map(|s| s.slope);
    Ok(DecayCurve {
        beta,
        points,
        slope,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::psi;

    fn kernel_density() -> NumericDensity {
        NumericDensity::new(Arc::new(psi), Some(1.0), None).unwrap()
    }

    #[test]
    fn mixture_respects_contracts() {
        let f = kernel_density();
        let budget = ApproxBudget::new(2.0, 0.3, 1.0).unwrap();
        let wp = build_wp_sigma(&f, &budget, None).unwrap();
        let mix = &wp.mixture;
        assert!((mix.len() as f64) <= wp.component_bound);
        let wsum: f64 = mix.components.iter().map(|c| c.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
        for c in &mix.components {
            assert!((c.variance - budget.sigma * budget.sigma).abs() < 1e-15);
            assert!(c.mean.abs() <= budget.mu_sigma);
        }
    }

    #[test]
    fn kl_to_kernel_is_small_and_positive() {
        let f = kernel_density();
        let budget = ApproxBudget::new(2.0, 0.2, 1.0).unwrap();
        let wp = build_wp_sigma(&f, &budget, None).unwrap();
        let dens = NumericDensity::from_mixture(&wp.mixture).unwrap();
        let kl = kl_div(&f, &dens).unwrap().value();
        assert!(kl >= -1e-9);
        // closed-form reference: KL(psi, psi * psi_sigma) =
        // (ln(1 + s^2) + 1/(1 + s^2) - 1)/2 at s = 0.2
        let s2 = 0.04f64;
        let reference = 0.5 * ((1.0 + s2).ln() + 1.0 / (1.0 + s2) - 1.0);
        assert!(
            (kl - reference).abs() < 0.2 * reference,
            "kl {kl} vs reference {reference}"
        );
    }

    #[test]
    fn decay_curve_shape() {
        let f = kernel_density();
        let curve = kl_decay_curve(&f, 2.0, &[0.4, 0.3, 0.2]).unwrap();
        assert_eq!(curve.points.len(), 3);
        let kls: Vec<f64> = curve.points.iter().map(|p| p.kl.unwrap()).collect();
        assert!(kls.iter().all(|&v| v >= -1e-9));
        // monotone nonincreasing in sigma (up to quadrature tolerance)
        assert!(kls[0] > kls[1] && kls[1] > kls[2]);
        assert!(curve.slope.is_some());
    }
}
