//! Hellinger and Kullback-Leibler divergences between evaluable densities,
//! and Monte Carlo Hellinger risk of estimation procedures.

use crate::error::CoreError;
use crate::kernel::psi;
use crate::mixture::{self, Mixture, Sample};
use crate::quad;
use crate::{seed, Result};
use rayon::prelude::*;
use serde::Serialize;
use std::io::Write;
use std::sync::Arc;

/// Default absolute tolerance for divergence quadratures.
pub const DEFAULT_TOL: f64 = 1e-9;

/// Density values below this floor are treated as exact zeros; the limit
/// `x ln x -> 0` makes their KL contribution vanish.
pub const DENSITY_FLOOR: f64 = 1e-300;

/// Registration tolerance on the integral of a density.
pub const NORMALIZATION_TOL: f64 = 1e-6;

type Evaluator = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// An evaluable density with an optional Gaussian tail envelope `M psi` and an
/// optional support hint. At least one of the two must be present so
/// integration domains can be chosen; registration checks normalization and
/// (when declared) the envelope on a grid.
#[derive(Clone)]
pub struct NumericDensity {
    eval: Evaluator,
    pub tail_envelope_m: Option<f64>,
    pub support_hint: Option<(f64, f64)>,
}

impl std::fmt::Debug for NumericDensity {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("NumericDensity")
            .field("tail_envelope_m", &self.tail_envelope_m)
            .field("support_hint", &self.support_hint)
            .finish()
    }
}

impl NumericDensity {
    /// Register a density: checks `integral = 1` within `NORMALIZATION_TOL`
    /// and, when an envelope is declared, `f <= M psi` on a 10^4-point grid
    /// over [-10, 10].
    pub fn new(
        eval: Evaluator,
        tail_envelope_m: Option<f64>,
        support_hint: Option<(f64, f64)>,
    ) -> Result<Self> {
        if tail_envelope_m.is_none() && support_hint.is_none() {
            return Err(CoreError::InvalidInput(
                "density needs a tail envelope or a support hint".into(),
            ));
        }
        if let Some(m) = tail_envelope_m {
            if !(m > 0.0 && m.is_finite()) {
                return Err(CoreError::InvalidInput(format!(
                    "tail envelope must be positive and finite (got {m})"
                )));
            }
            let n = 10_000;
            for i in 0..n {
                let x = -10.0 + 20.0 * i as f64 / (n - 1) as f64;
                let fx = (eval)(x);
                let bound = m * psi(x);
                if fx > bound * (1.0 + 1e-9) + 1e-300 {
                    return Err(CoreError::InvalidInput(format!(
                        "declared envelope violated at x = {x}: f = {fx}, M psi = {bound}"
                    )));
                }
            }
        }
        let density = NumericDensity {
            eval,
            tail_envelope_m,
            support_hint,
        };
        let total = density.integral(1e-8)?;
        if (total - 1.0).abs() > NORMALIZATION_TOL {
            return Err(CoreError::InvalidInput(format!(
                "density integrates to {total}, expected 1 within {NORMALIZATION_TOL:e}"
            )));
        }
        Ok(density)
    }

    /// Wrap a validated mixture. The support hint covers every component out
    /// to the f64 underflow horizon; no `M psi` envelope is declared because
    /// components with scale >= 1 admit none.
    pub fn from_mixture(mix: &Mixture) -> Result<Self> {
        mix.validate()?;
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for c in &mix.components {
            let reach = 27.0 * c.variance.sqrt().max(1e-6);
            lo = lo.min(c.mean - reach);
            hi = hi.max(c.mean + reach);
        }
        let owned = mix.clone();
        NumericDensity::new(
            Arc::new(move |x| mixture::eval_density(&owned, x).unwrap_or(0.0)),
            None,
            Some((lo, hi)),
        )
    }

    #[inline]
    pub fn density(&self, x: f64) -> f64 {
        (self.eval)(x)
    }

    /// Integration domain: envelope-driven truncation when declared,
    /// otherwise the support hint.
    pub fn domain(&self, tol: f64) -> (f64, f64) {
        match (self.tail_envelope_m, self.support_hint) {
            (Some(m), None) => {
                let t = quad::truncation_radius(m, tol);
                (-t, t)
            }
            (Some(m), Some((lo, hi))) => {
                let t = quad::truncation_radius(m, tol);
                (lo.max(-t), hi.min(t))
            }
            (None, Some(support)) => support,
            (None, None) => unreachable!("constructor enforces a domain source"),
        }
    }

    pub fn integral(&self, tol: f64) -> Result<f64> {
        let (lo, hi) = self.domain(tol);
        quad::adaptive(&|x| self.density(x), lo, hi, tol)
    }
}

/// Adaptive integral of `f` over the whole line given the envelope `f <= M psi`:
/// the domain is truncated where the envelope tail mass drops below `tol / 10`.
pub fn integrate<F: Fn(f64) -> f64>(f: &F, envelope_m: f64, tol: f64) -> Result<f64> {
    quad::integrate_envelope(f, envelope_m, tol)
}

fn joint_domain(f: &NumericDensity, g: &NumericDensity, tol: f64) -> (f64, f64) {
    let (fl, fh) = f.domain(tol);
    let (gl, gh) = g.domain(tol);
    (fl.min(gl), fh.max(gh))
}

/// Squared Hellinger distance `1 - int sqrt(f g)`, clamped to [0, 1].
pub fn hellinger_sq(f: &NumericDensity, g: &NumericDensity) -> Result<f64> {
    hellinger_sq_tol(f, g, DEFAULT_TOL)
}

pub fn hellinger_sq_tol(f: &NumericDensity, g: &NumericDensity, tol: f64) -> Result<f64> {
    let (lo, hi) = joint_domain(f, g, tol);
    let affinity = quad::adaptive(
        &|x| (f.density(x).max(0.0) * g.density(x).max(0.0)).sqrt(),
        lo,
        hi,
        tol,
    )?;
    Ok((1.0 - affinity).clamp(0.0, 1.0))
}

/// Kullback-Leibler divergence as a tagged value: `+inf` is a legitimate
/// result when absolute continuity fails, not an error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum KlDivergence {
    Finite(f64),
    Infinite,
}

impl KlDivergence {
    pub fn value(&self) -> f64 {
        match self {
            KlDivergence::Finite(v) => *v,
            KlDivergence::Infinite => f64::INFINITY,
        }
    }

    pub fn is_infinite(&self) -> bool {
        matches!(self, KlDivergence::Infinite)
    }
}

/// `int f ln(f/g)` with the integrand evaluated in log space; points with
/// `f < DENSITY_FLOOR` contribute zero. If `g` vanishes (below the floor)
/// anywhere `f` does not, the result is the `Infinite` tag.
pub fn kl_div(f: &NumericDensity, g: &NumericDensity) -> Result<KlDivergence> {
    kl_div_tol(f, g, DEFAULT_TOL)
}

pub fn kl_div_tol(f: &NumericDensity, g: &NumericDensity, tol: f64) -> Result<KlDivergence> {
    let (lo, hi) = f.domain(tol);
    // A point violates absolute continuity when g underflows while the
    // f-weighted contribution there is still significant at this tolerance:
    // pure tail-floor artifacts (contribution far below tol) do not flag.
    let significant = |fx: f64| fx * (fx.ln() - DENSITY_FLOOR.ln()) > tol * 1e-3;
    let n_scan = 4001;
    for i in 0..n_scan {
        let x = lo + (hi - lo) * i as f64 / (n_scan - 1) as f64;
        let fx = f.density(x);
        if fx >= DENSITY_FLOOR && g.density(x) < DENSITY_FLOOR && significant(fx) {
            return Ok(KlDivergence::Infinite);
        }
    }
    let violated = std::sync::atomic::AtomicBool::new(false);
    let integrand = |x: f64| {
        let fx = f.density(x);
        if fx < DENSITY_FLOOR {
            return 0.0;
        }
        let gx = g.density(x);
        if gx < DENSITY_FLOOR {
            if significant(fx) {
                violated.store(true, std::sync::atomic::Ordering::Relaxed);
            }
            return 0.0;
        }
        fx * (fx.ln() - gx.ln())
    };
    let value = quad::adaptive(&integrand, lo, hi, tol)?;
    if violated.load(std::sync::atomic::Ordering::Relaxed) {
        return Ok(KlDivergence::Infinite);
    }
    Ok(KlDivergence::Finite(value))
}

/// A density that can also be sampled, for Monte Carlo risk studies.
pub trait SampleableDensity: Sync {
    fn density(&self) -> &NumericDensity;
    fn draw(&self, n: usize, seed: u64) -> Result<Sample>;
}

/// Rejection sampling against the envelope `M psi`: proposals from `psi`,
/// acceptance probability `f(x) / (M psi(x))`. Deterministic per seed.
/// Returns the sample and the realized acceptance rate; errors if the rate
/// falls below `1 / (10 M)` after 10^6 proposals (a mis-declared envelope).
pub fn rejection_sample<F: Fn(f64) -> f64>(
    eval: &F,
    envelope_m: f64,
    n: usize,
    seed_value: u64,
    tag: &str,
) -> Result<(Sample, f64)> {
    if n == 0 {
        return Err(CoreError::InvalidInput("need n >= 1".into()));
    }
    if !(envelope_m > 0.0 && envelope_m.is_finite()) {
        return Err(CoreError::InvalidInput(
            "rejection sampling needs a finite positive envelope".into(),
        ));
    }
    let mut rng = seed::rng_from(seed_value);
    let mut values = Vec::with_capacity(n);
    let mut proposals = 0u64;
    while values.len() < n {
        let z: f64 = rand_distr::Distribution::sample(&rand_distr::StandardNormal, &mut rng);
        let x = z * std::f64::consts::FRAC_1_SQRT_2; // psi has variance 1/2
        let u: f64 = rand::Rng::random(&mut rng);
        proposals += 1;
        if u * envelope_m * psi(x) <= eval(x) {
            values.push(x);
        }
        if proposals % 1_000_000 == 0 {
            let rate = values.len() as f64 / proposals as f64;
            if rate < 1.0 / (10.0 * envelope_m) {
                return Err(CoreError::Sampling(format!(
                    "acceptance rate {rate:.3e} below 1/(10M) = {:.3e} after {proposals} proposals",
                    1.0 / (10.0 * envelope_m)
                )));
            }
        }
    }
    let rate = values.len() as f64 / proposals as f64;
    Ok((
        Sample {
            values,
            seed_provenance: Some(crate::mixture::SeedProvenance {
                seed: seed_value,
                tag: tag.to_string(),
            }),
        },
        rate,
    ))
}

/// Truth wrapper for densities sampled by rejection against their declared
/// envelope.
pub struct EnvelopeTruth {
    density: NumericDensity,
}

impl EnvelopeTruth {
    pub fn new(density: NumericDensity) -> Result<Self> {
        if density.tail_envelope_m.is_none() {
            return Err(CoreError::InvalidInput(
                "EnvelopeTruth needs a declared tail envelope".into(),
            ));
        }
        Ok(EnvelopeTruth { density })
    }
}

impl SampleableDensity for EnvelopeTruth {
    fn density(&self) -> &NumericDensity {
        &self.density
    }

    fn draw(&self, n: usize, seed_value: u64) -> Result<Sample> {
        let m = self.density.tail_envelope_m.expect("checked at construction");
        let d = self.density.clone();
        rejection_sample(&move |x| d.density(x), m, n, seed_value, "envelope_truth")
            .map(|(s, _)| s)
    }
}

/// Mixture truth for risk experiments.
pub struct MixtureTruth {
    pub mixture: Mixture,
    density: NumericDensity,
}

impl MixtureTruth {
    pub fn new(mixture: Mixture) -> Result<Self> {
        let density = NumericDensity::from_mixture(&mixture)?;
        Ok(MixtureTruth { mixture, density })
    }
}

impl SampleableDensity for MixtureTruth {
    fn density(&self) -> &NumericDensity {
        &self.density
    }

    fn draw(&self, n: usize, seed: u64) -> Result<Sample> {
        mixture::draw_sample(&self.mixture, n, seed)
    }
}

/// One row of the Monte Carlo risk table.
#[derive(Debug, Clone, Serialize)]
pub struct RiskRow {
    pub n: usize,
    /// Successful replications contributing to the mean.
    pub reps: usize,
    pub failures: usize,
    pub mean_risk: f64,
    pub stderr: f64,
}

/// Fitted log-log slope with a 95% confidence interval.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Monte Carlo Hellinger-squared risk across sample sizes.
#[derive(Debug, Clone, Serialize)]
pub struct RiskReport {
    pub rows: Vec<RiskRow>,
    /// `None` when fewer than two rows carry positive mean risk.
    pub slope: Option<SlopeFit>,
}

impl RiskReport {
    /// CSV `n,reps,mean_risk,stderr` plus a `slope,ci_low,ci_high` footer row.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "n,reps,mean_risk,stderr")?;
        for r in &self.rows {
            writeln!(out, "{},{},{},{}", r.n, r.reps, r.mean_risk, r.stderr)?;
        }
        match &self.slope {
            Some(s) => writeln!(out, "slope,{},{},{}", s.slope, s.ci_low, s.ci_high)?,
            None => writeln!(out, "slope,NA,NA,NA")?,
        }
        Ok(())
    }
}

/// Least squares of `y` on `x` with a t-based 95% CI for the slope.
pub fn slope_with_ci(xs: &[f64], ys: &[f64]) -> Option<SlopeFit> {
    if xs.len() < 2 || xs.len() != ys.len() {
        return None;
    }
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let slope = sxy / sxx;
    if xs.len() == 2 {
        return Some(SlopeFit {
            slope,
            ci_low: slope,
            ci_high: slope,
        });
    }
    let resid: f64 = xs
        .iter()
        .zip(ys)
        .map(|(x, y)| {
            let pred = my + slope * (x - mx);
            (y - pred) * (y - pred)
        })
        .sum();
    let df = n - 2.0;
    let se = (resid / df / sxx).sqrt();
    use statrs::distribution::ContinuousCDF;
    let t = statrs::distribution::StudentsT::new(0.0, 1.0, df).ok()?;
    let tq = t.inverse_cdf(0.975);
    Some(SlopeFit {
        slope,
        ci_low: slope - tq * se,
        ci_high: slope + tq * se,
    })
}

/// Monte Carlo Hellinger-squared risk of `procedure` against `truth`.
///
/// For each `n` in `n_grid`, `reps` independent samples are drawn on seeds
/// derived from `(seed, n-index, rep)`; cells run in parallel and are reduced
/// in index order, so scheduling cannot change the result. A replication whose
/// procedure call fails is skipped and counted; more than 20% failures on any
/// `n` is an error.
pub fn mc_hellinger_risk<P>(
    truth: &dyn SampleableDensity,
    procedure: &P,
    n_grid: &[usize],
    reps: usize,
    seed: u64,
) -> Result<RiskReport>
where
    P: Fn(&Sample) -> Result<NumericDensity> + Sync,
{
    if reps < 1 || n_grid.is_empty() {
        return Err(CoreError::InvalidInput(
            "mc_hellinger_risk needs reps >= 1 and a nonempty n grid".into(),
        ));
    }
    let mut rows = Vec::with_capacity(n_grid.len());
    for (ni, &n) in n_grid.iter().enumerate() {
        let cells: Vec<Result<f64>> = (0..reps)
            .into_par_iter()
            .map(|rep| {
                let cell_seed = seed::derive_seed(seed, "mc-risk", &[ni as u64, rep as u64]);
                let sample = truth.draw(n, cell_seed)?;
                let estimate = procedure(&sample)?;
                hellinger_sq(truth.density(), &estimate)
            })
            .collect();
        let mut values = Vec::with_capacity(reps);
        let mut failures = 0usize;
        for cell in cells {
            match cell {
                Ok(v) => values.push(v),
                Err(_) => failures += 1,
            }
        }
        if failures * 5 > reps {
            return Err(CoreError::Risk(format!(
                "{failures}/{reps} replications failed at n = {n}"
            )));
        }
        let k = values.len() as f64;
        let mean = values.iter().sum::<f64>() / k;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / k.max(2.0);
        rows.push(RiskRow {
            n,
            reps: values.len(),
            failures,
            mean_risk: mean,
            stderr: (var / k).sqrt(),
        });
    }
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.mean_risk > 0.0)
        .map(|r| ((r.n as f64).ln(), r.mean_risk.ln()))
        .collect();
    let slope = if pts.len() >= 2 {
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let ys: Vec<f64> = pts.iter().map(|p| p.1).collect();
        slope_with_ci(&xs, &ys)
    } else {
        None
    };
    Ok(RiskReport { rows, slope })
}
