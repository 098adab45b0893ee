//! Constrained maximum-likelihood fitting within a fixed sieve model via EM.
//!
//! The M-step clamps coordinates onto the sieve box: means are clamped first,
//! variances are then computed about the clamped means and clamped themselves.
//! For fixed responsibilities each coordinate update is the constrained argmax
//! of the complete-data objective, so the contrast is nonincreasing even when
//! clamps fire; the spec-level monotonicity property is asserted on unclamped
//! steps only, with a 1e-9 drift tolerance for rounding.

use crate::error::CoreError;
use crate::kernel::ln_psi_sigma;
use crate::mixture::{log_sum_exp, Component, Mixture, Sample, WEIGHT_FLOOR};
use crate::seed;
use crate::select::SieveSpec;
use crate::{mixture, Result};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Initialization strategies for EM starts.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    /// Means at the (2i+1)/(2m) sample quantiles; deterministic.
    Quantile,
    /// Means at m distinct random sample points.
    RandomPoints,
    /// First mean random, later means drawn with probability proportional to
    /// squared distance from the nearest chosen mean.
    PlusPlusStyle,
}

/// EM driver configuration. Also a JSON fragment of the experiment config.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmConfig {
    #[serde(default = "default_max_iterations")]
    pub max_iterations: usize,
    #[serde(default = "default_rel_tolerance")]
    pub rel_tolerance: f64,
    #[serde(default = "default_n_starts")]
    pub n_starts: usize,
    #[serde(default = "default_init_strategy")]
    pub init_strategy: InitStrategy,
    pub seed: u64,
}

fn default_max_iterations() -> usize {
    500
}
fn default_rel_tolerance() -> f64 {
    1e-8
}
fn default_n_starts() -> usize {
    10
}
fn default_init_strategy() -> InitStrategy {
    InitStrategy::Quantile
}

impl EmConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_iterations < 1 {
            return Err(CoreError::Config("max_iterations must be >= 1".into()));
        }
        if !(self.rel_tolerance > 0.0) {
            return Err(CoreError::Config("rel_tolerance must be > 0".into()));
        }
        if self.n_starts < 1 {
            return Err(CoreError::Config("n_starts must be >= 1".into()));
        }
        Ok(())
    }

    pub fn with_seed(seed: u64) -> Self {
        EmConfig {
            max_iterations: default_max_iterations(),
            rel_tolerance: default_rel_tolerance(),
            n_starts: default_n_starts(),
            init_strategy: default_init_strategy(),
            seed,
        }
    }
}

/// Result of one multi-start fit.
#[derive(Debug, Clone, Serialize)]
pub struct FittedModel {
    pub mixture: Mixture,
    pub final_contrast: f64,
    pub iterations_used: usize,
    pub converged: bool,
    pub start_index: usize,
}

/// Diagnostics for a single EM step.
#[derive(Debug, Clone, Default)]
pub struct EmStepInfo {
    /// Whether any mean or variance clamp fired.
    pub clamped: bool,
    /// Components that starved (empty responsibility column) and were
    /// re-seeded at the worst-fit sample point.
    pub reseeded: Vec<usize>,
}

fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n
}

/// Build the starting mixture for one EM run. Means are placed by the chosen
/// strategy and clamped into the sieve box, variances are set to the clamped
/// sample variance, weights are uniform.
pub fn initialize(
    sample: &Sample,
    m: usize,
    spec: &SieveSpec,
    strategy: InitStrategy,
    init_seed: u64,
) -> Result<Mixture> {
    let n = sample.len();
    if m < 1 || n < m {
        return Err(CoreError::InvalidInput(format!(
            "initialize needs n >= m >= 1 (n = {n}, m = {m})"
        )));
    }
    let clamp_mean = |x: f64| x.clamp(-spec.mu_bound, spec.mu_bound);
    let var0 = sample_variance(&sample.values).clamp(spec.lambda_low, spec.lambda_bar);
    let means: Vec<f64> = match strategy {
        InitStrategy::Quantile => {
            let mut sorted = sample.values.clone();
            sorted.sort_by(f64::total_cmp);
            (0..m)
                .map(|i| {
                    let q = (2 * i + 1) as f64 / (2 * m) as f64;
                    let pos = q * (n - 1) as f64;
                    let lo = pos.floor() as usize;
                    let hi = pos.ceil() as usize;
                    let frac = pos - lo as f64;
                    clamp_mean(sorted[lo] * (1.0 - frac) + sorted[hi] * frac)
                })
                .collect()
        }
        InitStrategy::RandomPoints => {
            let mut rng = seed::rng_for(init_seed, "init-random", &[]);
            let mut idx: Vec<usize> = (0..n).collect();
            // partial Fisher-Yates: the first m entries become the choices
            for i in 0..m {
                let j = rng.random_range(i..n);
                idx.swap(i, j);
            }
            idx[..m]
                .iter()
                .map(|&i| clamp_mean(sample.values[i]))
                .collect()
        }
        InitStrategy::PlusPlusStyle => {
            let mut rng = seed::rng_for(init_seed, "init-plus-plus", &[]);
            let mut chosen: Vec<f64> = vec![sample.values[rng.random_range(0..n)]];
            while chosen.len() < m {
                let d2: Vec<f64> = sample
                    .values
                    .iter()
                    .map(|&x| {
                        chosen
                            .iter()
                            .map(|&c| (x - c) * (x - c))
                            .fold(f64::INFINITY, f64::min)
                    })
                    .collect();
                let total: f64 = d2.iter().sum();
                if total <= 0.0 {
                    // all points coincide with chosen means; fall back to any point
                    chosen.push(sample.values[rng.random_range(0..n)]);
                    continue;
                }
                let mut u: f64 = rng.random::<f64>() * total;
                let mut pick = n - 1;
                for (i, &d) in d2.iter().enumerate() {
                    if u < d {
                        pick = i;
                        break;
                    }
                    u -= d;
                }
                chosen.push(sample.values[pick]);
            }
            chosen.into_iter().map(clamp_mean).collect()
        }
    };
    let w = 1.0 / m as f64;
    Mixture::new(
        means
            .into_iter()
            .map(|mean| Component {
                weight: w,
                mean,
                variance: var0,
            })
            .collect(),
    )
}

/// One E+M step with coordinate-wise projection onto the sieve box.
pub fn em_iterate(mix: &Mixture, sample: &Sample, spec: &SieveSpec) -> Result<(Mixture, EmStepInfo)> {
    let n = sample.len();
    let m = mix.len();
    let mut info = EmStepInfo::default();

    // E-step: responsibilities in log space
    let mut resp = vec![0.0f64; n * m];
    let mut col_sum = vec![0.0f64; m];
    let log_w: Vec<f64> = mix
        .components
        .iter()
        .map(|c| {
            if c.weight < WEIGHT_FLOOR {
                f64::NEG_INFINITY
            } else {
                c.weight.ln()
            }
        })
        .collect();
    let sds: Vec<f64> = mix.components.iter().map(|c| c.variance.sqrt()).collect();
    let mut row = vec![0.0f64; m];
    for (i, &x) in sample.values.iter().enumerate() {
        for u in 0..m {
            row[u] = log_w[u] + ln_psi_sigma(sds[u], x - mix.components[u].mean);
        }
        let lse = log_sum_exp(&row);
        if !lse.is_finite() {
            return Err(CoreError::Numeric(format!(
                "E-step underflow at sample index {i} (x = {x})"
            )));
        }
        for u in 0..m {
            let r = (row[u] - lse).exp();
            resp[i * m + u] = r;
            col_sum[u] += r;
        }
    }

    // M-step with projection; starved components are re-seeded afterwards
    let starve_floor = 1e-12 * n as f64;
    let mut comps = Vec::with_capacity(m);
    let mut worst_point: Option<f64> = None;
    for u in 0..m {
        if col_sum[u] <= starve_floor {
            info.reseeded.push(u);
            let worst = *worst_point.get_or_insert_with(|| {
                let mut wx = sample.values[0];
                let mut wd = f64::INFINITY;
                for &x in &sample.values {
                    let d = mixture::log_density(mix, x).unwrap_or(f64::NEG_INFINITY);
                    if d < wd {
                        wd = d;
                        wx = x;
                    }
                }
                wx
            });
            comps.push(Component {
                weight: 1.0 / n as f64,
                mean: worst.clamp(-spec.mu_bound, spec.mu_bound),
                variance: mix.components[u].variance.clamp(spec.lambda_low, spec.lambda_bar),
            });
            continue;
        }
        let nu = col_sum[u];
        let mean_raw: f64 = sample
            .values
            .iter()
            .enumerate()
            .map(|(i, &x)| resp[i * m + u] * x)
            .sum::<f64>()
            / nu;
        let mean = mean_raw.clamp(-spec.mu_bound, spec.mu_bound);
        if mean != mean_raw {
            info.clamped = true;
        }
        // second moment about the clamped mean; parameter variance is twice
        // the distribution variance under the psi convention
        let var_raw: f64 = 2.0
            * sample
                .values
                .iter()
                .enumerate()
                .map(|(i, &x)| resp[i * m + u] * (x - mean) * (x - mean))
                .sum::<f64>()
            / nu;
        let variance = var_raw.clamp(spec.lambda_low, spec.lambda_bar);
        if variance != var_raw {
            info.clamped = true;
        }
        comps.push(Component {
            weight: nu / n as f64,
            mean,
            variance,
        });
    }
    // renormalize weights (exact simplex projection after re-seeding)
    let wsum: f64 = comps.iter().map(|c| c.weight).sum();
    for c in &mut comps {
        c.weight /= wsum;
    }
    Ok((Mixture { components: comps }, info))
}

/// One full EM run from a given start.
fn run_em(
    start: Mixture,
    sample: &Sample,
    spec: &SieveSpec,
    cfg: &EmConfig,
    start_index: usize,
) -> Result<FittedModel> {
    let mut current = start;
    let mut contrast = mixture::empirical_contrast(&current, sample)?;
    let mut converged = false;
    let mut iterations_used = 0;
    for it in 0..cfg.max_iterations {
        let (next, _info) = em_iterate(&current, sample, spec)?;
        let next_contrast = mixture::empirical_contrast(&next, sample)?;
        iterations_used = it + 1;
        let rel = (contrast - next_contrast).abs() / contrast.abs().max(1e-8);
        current = next;
        contrast = next_contrast;
        if rel <= cfg.rel_tolerance {
            converged = true;
            break;
        }
    }
    Ok(FittedModel {
        mixture: current,
        final_contrast: contrast,
        iterations_used,
        converged,
        start_index,
    })
}

/// Best-of-`n_starts` constrained MLE within the model of dimension `m`
/// implied by `spec`. Starts run independently (possibly in parallel) on
/// seeds derived from `(cfg.seed, start_index)`; the winner is the lowest
/// final contrast, ties to the lowest start index, so the outcome does not
/// depend on scheduling.
pub fn fit_mle(sample: &Sample, spec: &SieveSpec, cfg: &EmConfig) -> Result<FittedModel> {
    cfg.validate()?;
    let m = spec.m;
    if sample.len() < m {
        return Err(CoreError::InvalidInput(format!(
            "need n >= m (n = {}, m = {m})",
            sample.len()
        )));
    }
    let results: Vec<(usize, Result<FittedModel>)> = (0..cfg.n_starts)
        .into_par_iter()
        .map(|s| {
            let init_seed = seed::derive_seed(cfg.seed, "em-start", &[s as u64, m as u64]);
            let r = initialize(sample, m, spec, cfg.init_strategy, init_seed)
                .and_then(|start| run_em(start, sample, spec, cfg, s));
            (s, r)
        })
        .collect();
    let mut best: Option<FittedModel> = None;
    let mut errors = Vec::new();
    for (s, r) in results {
        match r {
            Ok(model) => {
                let better = match &best {
                    None => true,
                    Some(b) => {
                        model.final_contrast < b.final_contrast
                            || (model.final_contrast == b.final_contrast
                                && model.start_index < b.start_index)
                    }
                };
                if better {
                    best = Some(model);
                }
            }
            Err(e) => errors.push(format!("start {s}: {e}")),
        }
    }
    best.ok_or_else(|| CoreError::Fit(format!("all {} starts failed: {}", cfg.n_starts, errors.join("; "))))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mixture::{draw_sample, empirical_contrast, validate_membership};
    use crate::select::{sieve_spec, SieveConfig};

    fn test_spec(m: usize) -> SieveSpec {
        sieve_spec(m, &SieveConfig::default_for_tests()).unwrap()
    }

    fn truth2() -> Mixture {
        Mixture::new(vec![
            Component {
                weight: 0.5,
                mean: -3.0,
                variance: 1.0,
            },
            Component {
                weight: 0.5,
                mean: 3.0,
                variance: 1.0,
            },
        ])
        .unwrap()
    }

    #[test]
    fn quantile_init_places_means_at_quartiles() {
        let spec = test_spec(2);
        // symmetric sample around 0
        let values: Vec<f64> = (0..101).map(|i| -2.0 + 0.04 * i as f64).collect();
        let s = Sample::new(values).unwrap();
        let mix = initialize(&s, 2, &spec, InitStrategy::Quantile, 0).unwrap();
        assert!((mix.components[0].mean + 1.0).abs() < 1e-9);
        assert!((mix.components[1].mean - 1.0).abs() < 1e-9);
    }

    #[test]
    fn init_respects_membership_for_all_strategies() {
        let spec = test_spec(3);
        let s = draw_sample(&truth2(), 200, 5).unwrap();
        for strat in [
            InitStrategy::Quantile,
            InitStrategy::RandomPoints,
            InitStrategy::PlusPlusStyle,
        ] {
            let mix = initialize(&s, 3, &spec, strat, 7).unwrap();
            assert!(validate_membership(&mix, &spec).pass, "{strat:?}");
        }
    }

    #[test]
    fn init_is_deterministic() {
        let spec = test_spec(3);
        let s = draw_sample(&truth2(), 100, 5).unwrap();
        for strat in [InitStrategy::RandomPoints, InitStrategy::PlusPlusStyle] {
            let a = initialize(&s, 3, &spec, strat, 99).unwrap();
            let b = initialize(&s, 3, &spec, strat, 99).unwrap();
            assert_eq!(a, b);
        }
    }

    #[test]
    fn init_rejects_m_above_n() {
        let spec = test_spec(3);
        let s = Sample::new(vec![0.0, 1.0]).unwrap();
        assert!(initialize(&s, 3, &spec, InitStrategy::Quantile, 0).is_err());
    }

    #[test]
    fn interior_fixed_point_is_stable() {
        // one well-contained component: EM fixed point is the weighted moments
        let spec = test_spec(2);
        let s = draw_sample(
            &Mixture::new(vec![Component {
                weight: 1.0,
                mean: 0.2,
                variance: (spec.lambda_low * spec.lambda_bar).sqrt(),
            }])
            .unwrap(),
            400,
            21,
        )
        .unwrap();
        // place the single component exactly at the M-step optimum
        let n = s.len() as f64;
        let mean = s.values.iter().sum::<f64>() / n;
        let var = 2.0 * s.values.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        let fixed = Mixture::new(vec![Component {
            weight: 1.0,
            mean,
            variance: var,
        }])
        .unwrap();
        assert!(var > spec.lambda_low && var < spec.lambda_bar, "test setup");
        let (next, info) = em_iterate(&fixed, &s, &spec).unwrap();
        assert!(!info.clamped);
        assert!((next.components[0].mean - mean).abs() < 1e-10);
        assert!((next.components[0].variance - var).abs() < 1e-10);
    }

    #[test]
    fn unclamped_step_matches_weighted_moment_oracle() {
        let spec = test_spec(2);
        let s = Sample::new(vec![-3.2, -2.9, -3.1, 2.8, 3.1, 3.3, 0.1]).unwrap();
        let mix = truth2();
        let (next, info) = em_iterate(&mix, &s, &spec).unwrap();
        assert!(!info.clamped, "chosen data should not trigger clamps");
        // brute-force responsibilities
        let n = s.len();
        let mut r = vec![[0.0f64; 2]; n];
        for (i, &x) in s.values.iter().enumerate() {
            let p0 = 0.5 * crate::kernel::psi_sigma(1.0, x + 3.0);
            let p1 = 0.5 * crate::kernel::psi_sigma(1.0, x - 3.0);
            r[i] = [p0 / (p0 + p1), p1 / (p0 + p1)];
        }
        for u in 0..2 {
            let nu: f64 = (0..n).map(|i| r[i][u]).sum();
            let mean: f64 = (0..n).map(|i| r[i][u] * s.values[i]).sum::<f64>() / nu;
            let var: f64 =
                2.0 * (0..n).map(|i| r[i][u] * (s.values[i] - mean).powi(2)).sum::<f64>() / nu;
            let w = nu / n as f64;
            assert!((next.components[u].mean - mean).abs() < 1e-10);
            assert!((next.components[u].variance - var).abs() < 1e-10);
            assert!((next.components[u].weight - w).abs() < 1e-12);
        }
    }

    #[test]
    fn variance_below_floor_is_clamped_exactly() {
        let spec = test_spec(2);
        // two tight clusters of identical points force variance toward zero
        let s = Sample::new(vec![-1.0, -1.0, -1.0, 1.0, 1.0, 1.0]).unwrap();
        let mix = Mixture::new(vec![
            Component {
                weight: 0.5,
                mean: -1.0,
                variance: spec.lambda_low * 2.0,
            },
            Component {
                weight: 0.5,
                mean: 1.0,
                variance: spec.lambda_low * 2.0,
            },
        ])
        .unwrap();
        let (next, info) = em_iterate(&mix, &s, &spec).unwrap();
        assert!(info.clamped);
        assert_eq!(next.components[0].variance, spec.lambda_low);
        assert_eq!(next.components[1].variance, spec.lambda_low);
    }

    #[test]
    fn contrast_nonincreasing_even_with_clamps() {
        let spec = test_spec(3);
        let s = draw_sample(&truth2(), 300, 33).unwrap();
        let mut mix = initialize(&s, 3, &spec, InitStrategy::RandomPoints, 5).unwrap();
        let mut prev = empirical_contrast(&mix, &s).unwrap();
        for _ in 0..60 {
            let (next, _) = em_iterate(&mix, &s, &spec).unwrap();
            let cur = empirical_contrast(&next, &s).unwrap();
            assert!(cur <= prev + 1e-9, "contrast increased: {prev} -> {cur}");
            mix = next;
            prev = cur;
        }
    }

    #[test]
    fn starved_component_is_reseeded() {
        let spec = test_spec(2);
        let s = Sample::new(vec![0.0, 0.1, -0.1, 0.05, -0.05]).unwrap();
        // second component far outside data with tiny variance: it starves
        let mix = Mixture::new(vec![
            Component {
                weight: 1.0 - 1e-14,
                mean: 0.0,
                variance: 1.0,
            },
            Component {
                weight: 1e-14,
                mean: spec.mu_bound,
                variance: spec.lambda_low,
            },
        ])
        .unwrap();
        let (next, info) = em_iterate(&mix, &s, &spec).unwrap();
        assert_eq!(info.reseeded, vec![1]);
        assert_eq!(next.len(), 2);
        let wsum: f64 = next.components.iter().map(|c| c.weight).sum();
        assert!((wsum - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fitted_contrast_beats_truth_on_large_sample() {
        let spec = test_spec(2);
        let truth = truth2();
        let s = draw_sample(&truth, 3000, 1).unwrap();
        let cfg = EmConfig {
            n_starts: 3,
            init_strategy: InitStrategy::PlusPlusStyle,
            ..EmConfig::with_seed(10)
        };
        let fit = fit_mle(&s, &spec, &cfg).unwrap();
        let truth_contrast = empirical_contrast(&truth, &s).unwrap();
        assert!(fit.final_contrast <= truth_contrast + 1e-6);
        assert!(validate_membership(&fit.mixture, &spec).pass);
    }

    #[test]
    fn more_starts_never_hurt() {
        let spec = test_spec(3);
        let s = draw_sample(&truth2(), 500, 8).unwrap();
        let mk = |n_starts| EmConfig {
            n_starts,
            init_strategy: InitStrategy::RandomPoints,
            ..EmConfig::with_seed(123)
        };
        let one = fit_mle(&s, &spec, &mk(1)).unwrap();
        let ten = fit_mle(&s, &spec, &mk(10)).unwrap();
        assert!(ten.final_contrast <= one.final_contrast + 1e-12);
    }

    #[test]
    fn fit_is_deterministic() {
        let spec = test_spec(2);
        let s = draw_sample(&truth2(), 400, 2).unwrap();
        let cfg = EmConfig {
            n_starts: 4,
            init_strategy: InitStrategy::RandomPoints,
            ..EmConfig::with_seed(55)
        };
        let a = fit_mle(&s, &spec, &cfg).unwrap();
        let b = fit_mle(&s, &spec, &cfg).unwrap();
        assert_eq!(a.mixture, b.mixture);
        assert_eq!(a.final_contrast.to_bits(), b.final_contrast.to_bits());
        assert_eq!(a.start_index, b.start_index);
    }

    #[test]
    fn well_separated_means_recovered_across_seeds() {
        // Monte Carlo oracle: 100 seeds, m = 2, n = 2000
        let spec = test_spec(2);
        let truth = truth2();
        let mut hits = 0;
        for seed in 0..100u64 {
            let s = draw_sample(&truth, 2000, 1000 + seed).unwrap();
            let cfg = EmConfig {
                n_starts: 2,
                max_iterations: 300,
                init_strategy: InitStrategy::Quantile,
                ..EmConfig::with_seed(seed)
            };
            let fit = fit_mle(&s, &spec, &cfg).unwrap();
            let mut means: Vec<f64> = fit.mixture.components.iter().map(|c| c.mean).collect();
            means.sort_by(f64::total_cmp);
            if (means[0] + 3.0).abs() < 0.1 && (means[1] - 3.0).abs() < 0.1 {
                hits += 1;
            }
        }
        assert!(hits >= 90, "only {hits}/100 seeds recovered the means");
    }
}
