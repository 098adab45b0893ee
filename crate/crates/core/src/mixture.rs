//! Gaussian mixtures under the `psi` kernel: density evaluation, likelihood
//! contrast, sampling, MAP clustering and sieve-membership validation.

use crate::error::CoreError;
use crate::kernel::{component_sd, ln_psi_sigma, psi_sigma};
use crate::seed;
use crate::select::SieveSpec;
use crate::Result;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};
use std::path::Path;

/// Weights below this threshold are skipped during evaluation; they cannot
/// affect the density at f64 resolution but would pollute log-space sums.
pub const WEIGHT_FLOOR: f64 = 1e-15;

/// Tolerance on the weight sum of a valid mixture.
pub const WEIGHT_SUM_TOL: f64 = 1e-12;

/// One mixture component: weight `p`, location `mu`, scale parameter
/// `sigma^2` (the distribution variance is `sigma^2 / 2`).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: f64,
    pub variance: f64,
}

/// A finite Gaussian mixture `sum_u p_u psi_{sigma_u}(x - mu_u)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mixture {
    pub components: Vec<Component>,
}

impl Mixture {
    /// Build a validated mixture: at least one component, weights in [0, 1]
    /// summing to 1 within `WEIGHT_SUM_TOL`, all variances positive and finite.
    pub fn new(components: Vec<Component>) -> Result<Self> {
        let mix = Mixture { components };
        mix.validate()?;
        Ok(mix)
    }

    pub fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(CoreError::InvalidInput(
                "mixture needs at least one component".into(),
            ));
        }
        let mut sum = 0.0;
        for (u, c) in self.components.iter().enumerate() {
            if !(c.weight >= 0.0 && c.weight <= 1.0 + WEIGHT_SUM_TOL) {
                return Err(CoreError::InvalidInput(format!(
                    "component {u}: weight {} outside [0, 1]",
                    c.weight
                )));
            }
            if !(c.variance > 0.0 && c.variance.is_finite()) {
                return Err(CoreError::InvalidInput(format!(
                    "component {u}: variance {} must be positive and finite",
                    c.variance
                )));
            }
            if !c.mean.is_finite() {
                return Err(CoreError::InvalidInput(format!(
                    "component {u}: mean {} must be finite",
                    c.mean
                )));
            }
            sum += c.weight;
        }
        if (sum - 1.0).abs() > WEIGHT_SUM_TOL {
            return Err(CoreError::InvalidInput(format!(
                "weights sum to {sum}, expected 1 within {WEIGHT_SUM_TOL:e}"
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.components.len()
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    /// JSON form `{"components":[{"weight":..,"mean":..,"variance":..},..]}`.
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let mix: Mixture = serde_json::from_str(text)?;
        mix.validate()?;
        Ok(mix)
    }
}

/// Observations `X_1..X_n` with optional record of how they were generated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sample {
    pub values: Vec<f64>,
    pub seed_provenance: Option<SeedProvenance>,
}

/// Generator provenance carried alongside drawn samples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedProvenance {
    pub seed: u64,
    pub tag: String,
}

impl Sample {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if values.is_empty() {
            return Err(CoreError::InvalidInput("sample must be nonempty".into()));
        }
        if let Some(bad) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::InvalidInput(format!(
                "sample value at index {bad} is not finite"
            )));
        }
        Ok(Sample {
            values,
            seed_provenance: None,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Read the sample file format: one finite decimal float per line, UTF-8,
    /// no header.
    pub fn read_from(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path)?;
        let reader = std::io::BufReader::new(file);
        let mut values = Vec::new();
        for (i, line) in reader.lines().enumerate() {
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            let v: f64 = trimmed.parse().map_err(|e| {
                CoreError::InvalidInput(format!("line {}: cannot parse '{trimmed}': {e}", i + 1))
            })?;
            values.push(v);
        }
        Sample::new(values)
    }

    pub fn write_to(&self, path: &Path) -> Result<()> {
        let mut file = std::io::BufWriter::new(std::fs::File::create(path)?);
        for v in &self.values {
            writeln!(file, "{v}")?;
        }
        Ok(())
    }
}

/// Mixture density at `x`. Strictly positive for finite `x`; errors on
/// non-finite input.
pub fn eval_density(mix: &Mixture, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(CoreError::InvalidInput(format!(
            "eval_density at non-finite x = {x}"
        )));
    }
    let mut acc = 0.0;
    for c in &mix.components {
        if c.weight < WEIGHT_FLOOR {
            continue;
        }
        acc += c.weight * psi_sigma(c.variance.sqrt(), x - c.mean);
    }
    Ok(acc)
}

/// Log-density via log-sum-exp; finite even where the direct sum underflows.
/// Returns `-inf` only when every component is at least ~850 sigma away.
pub fn log_density(mix: &Mixture, x: f64) -> Result<f64> {
    if !x.is_finite() {
        return Err(CoreError::InvalidInput(format!(
            "log_density at non-finite x = {x}"
        )));
    }
    let mut terms: Vec<f64> = Vec::with_capacity(mix.components.len());
    for c in &mix.components {
        if c.weight < WEIGHT_FLOOR {
            continue;
        }
        terms.push(c.weight.ln() + ln_psi_sigma(c.variance.sqrt(), x - c.mean));
    }
    Ok(log_sum_exp(&terms))
}

pub(crate) fn log_sum_exp(terms: &[f64]) -> f64 {
    let m = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return f64::NEG_INFINITY;
    }
    let s: f64 = terms.iter().map(|t| (t - m).exp()).sum();
    m + s.ln()
}

/// Empirical contrast `gamma_n(mix) = -(1/n) sum_i ln mix(X_i)`.
///
/// Errors with the offending index if the density underflows to exactly zero
/// at some observation.
pub fn empirical_contrast(mix: &Mixture, sample: &Sample) -> Result<f64> {
    let n = sample.len();
    let mut acc = 0.0;
    for (i, &x) in sample.values.iter().enumerate() {
        let ld = log_density(mix, x)?;
        // exp(ld) == 0 detects log levels below the smallest subnormal, i.e.
        // the density value itself underflows to exactly zero
        if !ld.is_finite() || ld.exp() == 0.0 {
            return Err(CoreError::Numeric(format!(
                "density underflow to 0 at sample index {i} (x = {x})"
            )));
        }
        acc += ld;
    }
    Ok(-acc / n as f64)
}

/// Draw `n` observations: component chosen by weight, then a Gaussian draw
/// with mean `mu_u` and standard deviation `sigma_u / sqrt(2)` (the kernel
/// variance convention). Bitwise deterministic given `seed`.
pub fn draw_sample(mix: &Mixture, n: usize, seed: u64) -> Result<Sample> {
    if n == 0 {
        return Err(CoreError::InvalidInput("draw_sample needs n >= 1".into()));
    }
    mix.validate()?;
    let mut rng = seed::rng_from(seed);
    let mut values = Vec::with_capacity(n);
    for _ in 0..n {
        let mut u: f64 = rng.random();
        let mut chosen = mix.components.len() - 1;
        for (idx, c) in mix.components.iter().enumerate() {
            if u < c.weight {
                chosen = idx;
                break;
            }
            u -= c.weight;
        }
        let c = &mix.components[chosen];
        let z: f64 = StandardNormal.sample(&mut rng);
        values.push(c.mean + component_sd(c.variance.sqrt()) * z);
    }
    Ok(Sample {
        values,
        seed_provenance: Some(SeedProvenance {
            seed,
            tag: "draw_sample".into(),
        }),
    })
}

/// MAP clustering output: per-observation labels and the row-normalized
/// posterior matrix (n rows, m columns).
#[derive(Debug, Clone)]
pub struct Clustering {
    pub labels: Vec<usize>,
    pub posteriors: Vec<Vec<f64>>,
}

/// Posterior responsibilities and MAP labels; ties break to the lowest
/// component index.
pub fn map_cluster(mix: &Mixture, sample: &Sample) -> Result<Clustering> {
    mix.validate()?;
    if sample.is_empty() {
        return Err(CoreError::InvalidInput("empty sample".into()));
    }
    let m = mix.len();
    let mut labels = Vec::with_capacity(sample.len());
    let mut posteriors = Vec::with_capacity(sample.len());
    for (i, &x) in sample.values.iter().enumerate() {
        let log_terms: Vec<f64> = mix
            .components
            .iter()
            .map(|c| {
                if c.weight < WEIGHT_FLOOR {
                    f64::NEG_INFINITY
                } else {
                    c.weight.ln() + ln_psi_sigma(c.variance.sqrt(), x - c.mean)
                }
            })
            .collect();
        let lse = log_sum_exp(&log_terms);
        if !lse.is_finite() {
            return Err(CoreError::Numeric(format!(
                "all-zero posterior row at sample index {i} (x = {x})"
            )));
        }
        let row: Vec<f64> = log_terms.iter().map(|t| (t - lse).exp()).collect();
        let mut best = 0usize;
        for u in 1..m {
            if row[u] > row[best] {
                best = u;
            }
        }
        labels.push(best);
        posteriors.push(row);
    }
    Ok(Clustering { labels, posteriors })
}

/// Per-component box-constraint check against a sieve specification.
#[derive(Debug, Clone, Serialize)]
pub struct MembershipReport {
    pub pass: bool,
    pub count_ok: bool,
    pub components: Vec<ComponentMembership>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ComponentMembership {
    pub index: usize,
    pub mean_ok: bool,
    pub variance_ok: bool,
}

/// Check `mu_u` in `[-mu_bound, mu_bound]`, `sigma_u^2` in
/// `[lambda_low, lambda_bar]` per component, and component count `<= m`.
pub fn validate_membership(mix: &Mixture, spec: &SieveSpec) -> MembershipReport {
    let mut all = true;
    let mut rows = Vec::with_capacity(mix.len());
    for (index, c) in mix.components.iter().enumerate() {
        let mean_ok = c.mean >= -spec.mu_bound && c.mean <= spec.mu_bound;
        let variance_ok = c.variance >= spec.lambda_low && c.variance <= spec.lambda_bar;
        all &= mean_ok && variance_ok;
        rows.push(ComponentMembership {
            index,
            mean_ok,
            variance_ok,
        });
    }
    let count_ok = mix.len() <= spec.m;
    MembershipReport {
        pass: all && count_ok,
        count_ok,
        components: rows,
    }
}
