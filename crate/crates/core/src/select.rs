//! Sieve parameterization, the penalty with constant `A`, penalized model
//! selection over the component count, and slope-heuristic calibration of the
//! penalty multiplier `kappa`.

use crate::em::{fit_mle, EmConfig, FittedModel};
use crate::error::CoreError;
use crate::mixture::Sample;
use crate::Result;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

/// Tie tolerance when locating the criterion argmin; ties go to the smallest m.
pub const CRIT_TIE_TOL: f64 = 1e-12;

/// Global sieve configuration.
///
/// `kappa` and `c1` are exposed because the source results treat them as
/// absolute constants without giving values. `c1` enters the constant `A`
/// through `mu_bound * sqrt(8 / (c1 * lambda_low))` and is not recoverable
/// from this construction alone; the default 1.0 is a convention, and
/// `calibrate_kappa` offers a data-driven alternative for `kappa`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SieveConfig {
    pub beta_low: f64,
    pub beta_high: f64,
    /// `a > 1` in `sqrt(lambda_low(m)) = a (ln m)^{3/2} / m`.
    pub a_bar: f64,
    /// Scale of the mean box: `mu_bound(m) = g_tilde |ln sqrt(lambda_low(m))|^{1/2}`.
    pub g_tilde: f64,
    /// Shared variance upper bound.
    pub lambda_bar: f64,
    #[serde(default = "default_kappa")]
    pub kappa: f64,
    #[serde(default = "default_c1")]
    pub c1: f64,
    pub m_max: usize,
}

fn default_kappa() -> f64 {
    1.0
}
fn default_c1() -> f64 {
    1.0
}

impl SieveConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.beta_low > 0.0 && self.beta_low < self.beta_high) {
            return Err(CoreError::Config(format!(
                "need 0 < beta_low < beta_high (got {} / {})",
                self.beta_low, self.beta_high
            )));
        }
        if !(self.a_bar > 1.0) {
            return Err(CoreError::Config(format!("a_bar must be > 1 (got {})", self.a_bar)));
        }
        if !(self.g_tilde > 0.0 && self.lambda_bar > 0.0 && self.kappa >= 0.0 && self.c1 > 0.0) {
            return Err(CoreError::Config(
                "g_tilde, lambda_bar, c1 must be positive; kappa nonnegative".into(),
            ));
        }
        if self.m_max < 2 {
            return Err(CoreError::Config("m_max must be >= 2".into()));
        }
        // all sieve levels up to m_max must be well formed
        for m in 2..=self.m_max {
            sieve_spec(m, self)?;
        }
        Ok(())
    }

    /// A reasonable configuration used throughout the test suite: box bounds
    /// wide enough for unit-variance components with means within +-5.
    pub fn default_for_tests() -> Self {
        SieveConfig {
            beta_low: 0.5,
            beta_high: 2.0,
            a_bar: 1.2,
            g_tilde: 5.0,
            lambda_bar: 4.0,
            kappa: 1.0,
            c1: 1.0,
            m_max: 64,
        }
    }
}

/// Per-model sieve bounds.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct SieveSpec {
    pub m: usize,
    pub lambda_low: f64,
    pub mu_bound: f64,
    pub lambda_bar: f64,
}

/// Bounds for the model with `m` components:
/// `sqrt(lambda_low) = a (ln m)^{3/2} / m`, `mu_bound = g_tilde |ln sqrt(lambda_low)|^{1/2}`.
pub fn sieve_spec(m: usize, cfg: &SieveConfig) -> Result<SieveSpec> {
    if m < 2 {
        return Err(CoreError::InvalidInput(format!("sieve_spec needs m >= 2 (got {m})")));
    }
    let mf = m as f64;
    let sqrt_ll = cfg.a_bar * mf.ln().powf(1.5) / mf;
    let lambda_low = sqrt_ll * sqrt_ll;
    if lambda_low >= 1.0 {
        return Err(CoreError::Config(format!(
            "lambda_low({m}) = {lambda_low} >= 1: |ln sqrt(lambda_low)| would flip meaning; reduce a_bar"
        )));
    }
    if lambda_low >= cfg.lambda_bar {
        return Err(CoreError::Config(format!(
            "lambda_low({m}) = {lambda_low} >= lambda_bar = {}",
            cfg.lambda_bar
        )));
    }
    let mu_bound = cfg.g_tilde * sqrt_ll.ln().abs().sqrt();
    Ok(SieveSpec {
        m,
        lambda_low,
        mu_bound,
        lambda_bar: cfg.lambda_bar,
    })
}

/// Model dimension `D(m) = 3m - 1` (m weights on the simplex, m means, m variances).
pub fn dimension(m: usize) -> usize {
    3 * m - 1
}

/// The penalty constant
/// `A = sqrt(ln(6 pi e^2)) + sqrt(pi) + sqrt(ln(mu_bound sqrt(8/(c1 lambda_low)))) + sqrt(ln(144 lambda_bar / lambda_low))`.
///
/// Both logarithm arguments must be >= 1.
pub fn constant_a(spec: &SieveSpec, c1: f64) -> Result<f64> {
    let arg3 = spec.mu_bound * (8.0 / (c1 * spec.lambda_low)).sqrt();
    if arg3 < 1.0 {
        return Err(CoreError::Config(format!(
            "constant A: mu_bound sqrt(8/(c1 lambda_low)) = {arg3} < 1"
        )));
    }
    let arg4 = 144.0 * spec.lambda_bar / spec.lambda_low;
    if arg4 < 1.0 {
        return Err(CoreError::Config(format!(
            "constant A: 144 lambda_bar / lambda_low = {arg4} < 1"
        )));
    }
    let t1 = (6.0 * std::f64::consts::PI * std::f64::consts::E.powi(2)).ln().sqrt();
    let t2 = std::f64::consts::PI.sqrt();
    Ok(t1 + t2 + arg3.ln().sqrt() + arg4.ln().sqrt())
}

/// Penalty shape `(D/n) (1 + 2A^2 + ln(1 / (1 and (D/n) A^2)))`; the penalty is
/// `kappa` times this (equality at the admissible lower bound).
pub fn penalty_shape(m: usize, n: usize, spec: &SieveSpec, cfg: &SieveConfig) -> Result<f64> {
    if n < 1 {
        return Err(CoreError::InvalidInput("penalty needs n >= 1".into()));
    }
    let a = constant_a(spec, cfg.c1)?;
    let ratio = dimension(m) as f64 / n as f64;
    let log_term = -(ratio * a * a).min(1.0).ln();
    Ok(ratio * (1.0 + 2.0 * a * a + log_term))
}

pub fn penalty(m: usize, n: usize, spec: &SieveSpec, cfg: &SieveConfig) -> Result<f64> {
    Ok(cfg.kappa * penalty_shape(m, n, spec, cfg)?)
}

/// One row of the selection table.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionRow {
    pub m: usize,
    pub dimension: usize,
    pub contrast: Option<f64>,
    pub penalty: f64,
    /// Penalty with `kappa = 1`; input to `calibrate_kappa`.
    pub shape: f64,
    pub criterion: Option<f64>,
    pub error: Option<String>,
}

/// Criterion table with the selected model.
#[derive(Debug, Clone, Serialize)]
pub struct SelectionTable {
    pub rows: Vec<SelectionRow>,
    pub selected_m: usize,
}

/// Selection output: the table plus the fitted models per row (same order).
pub struct SelectionOutcome {
    pub table: SelectionTable,
    pub fits: Vec<Option<FittedModel>>,
}

impl SelectionOutcome {
    pub fn selected_fit(&self) -> Option<&FittedModel> {
        self.table
            .rows
            .iter()
            .position(|r| r.m == self.table.selected_m)
            .and_then(|i| self.fits[i].as_ref())
    }
}

/// Smallest m whose criterion is within `CRIT_TIE_TOL` of the minimum.
pub fn argmin_criterion(rows: &[SelectionRow]) -> Option<usize> {
    let min = rows
        .iter()
        .filter_map(|r| r.criterion)
        .fold(f64::INFINITY, f64::min);
    if !min.is_finite() {
        return None;
    }
    rows.iter()
        .filter(|r| r.criterion.is_some_and(|c| c <= min + CRIT_TIE_TOL))
        .map(|r| r.m)
        .min()
}

/// Fit every model in `m_range` (inclusive) and select the criterion argmin.
///
/// Per-model fits are independent and run in parallel; failures are recorded
/// per row and selection proceeds over the successful rows.
pub fn select_model(
    sample: &Sample,
    m_range: (usize, usize),
    cfg: &SieveConfig,
    em_cfg: &EmConfig,
) -> Result<SelectionOutcome> {
    let (lo, hi) = m_range;
    let n = sample.len();
    if lo < 2 || hi < lo || hi > n {
        return Err(CoreError::InvalidInput(format!(
            "m_range must satisfy 2 <= lo <= hi <= n (got [{lo}, {hi}], n = {n})"
        )));
    }
    let results: Vec<(SelectionRow, Option<FittedModel>)> = (lo..=hi)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|m| {
            let spec = match sieve_spec(m, cfg) {
                Ok(s) => s,
                Err(e) => {
                    return (
                        SelectionRow {
                            m,
                            dimension: dimension(m),
                            contrast: None,
                            penalty: f64::NAN,
                            shape: f64::NAN,
                            criterion: None,
                            error: Some(e.to_string()),
                        },
                        None,
                    )
                }
            };
            let shape = match penalty_shape(m, n, &spec, cfg) {
                Ok(s) => s,
                Err(e) => {
                    return (
                        SelectionRow {
                            m,
                            dimension: dimension(m),
                            contrast: None,
                            penalty: f64::NAN,
                            shape: f64::NAN,
                            criterion: None,
                            error: Some(e.to_string()),
                        },
                        None,
                    )
                }
            };
            let pen = cfg.kappa * shape;
            match fit_mle(sample, &spec, em_cfg) {
                Ok(fit) => {
                    let row = SelectionRow {
                        m,
                        dimension: dimension(m),
                        contrast: Some(fit.final_contrast),
                        penalty: pen,
                        shape,
                        criterion: Some(fit.final_contrast + pen),
                        error: None,
                    };
                    (row, Some(fit))
                }
                Err(e) => (
                    SelectionRow {
                        m,
                        dimension: dimension(m),
                        contrast: None,
                        penalty: pen,
                        shape,
                        criterion: None,
                        error: Some(e.to_string()),
                    },
                    None,
                ),
            }
        })
        .collect();
    let (rows, fits): (Vec<_>, Vec<_>) = results.into_iter().unzip();
    let selected_m = argmin_criterion(&rows).ok_or_else(|| {
        CoreError::Selection(format!(
            "no model in [{lo}, {hi}] produced a finite criterion: {}",
            rows.iter()
                .filter_map(|r| r.error.as_deref())
                .collect::<Vec<_>>()
                .join("; ")
        ))
    })?;
    Ok(SelectionOutcome {
        table: SelectionTable { rows, selected_m },
        fits,
    })
}

impl SelectionTable {
    /// CSV with header `m,D,contrast,penalty,criterion,selected`.
    pub fn write_csv<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "m,D,contrast,penalty,criterion,selected")?;
        for r in &self.rows {
            writeln!(
                out,
                "{},{},{},{},{},{}",
                r.m,
                r.dimension,
                r.contrast.map_or(String::from("NA"), |v| v.to_string()),
                r.penalty,
                r.criterion.map_or(String::from("NA"), |v| v.to_string()),
                if r.m == self.selected_m { 1 } else { 0 }
            )?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Slope-heuristic calibration output.
#[derive(Debug, Clone, Serialize)]
pub struct CalibrationReport {
    /// `2 |slope|` of the robust regression of contrast on penalty shape.
    pub kappa_hat: f64,
    /// Theil-Sen slope (expected negative).
    pub slope: f64,
    /// 95% confidence interval for `kappa_hat` from the least-squares fit.
    pub kappa_ci: (f64, f64),
    /// Kappa at the largest dimension jump, with the dimensions on both sides.
    pub kappa_jump: f64,
    pub jump_dimensions: (usize, usize),
    pub rows_used: usize,
}

/// Slope-heuristic estimate of `kappa` from the large-m behavior of the
/// contrast: fit `contrast(m)` against the penalty shape on the upper half of
/// the table by Theil-Sen regression and return `2 |slope|`, plus a
/// dimension-jump diagnostic over a kappa grid.
pub fn calibrate_kappa(table: &SelectionTable) -> Result<CalibrationReport> {
    let valid: Vec<&SelectionRow> = table.rows.iter().filter(|r| r.contrast.is_some()).collect();
    if valid.len() < 10 {
        return Err(CoreError::InvalidInput(format!(
            "calibrate_kappa needs >= 10 rows with valid contrasts (got {})",
            valid.len()
        )));
    }
    // large-m half (rows are produced in ascending m order)
    let start = valid.len() / 2;
    let upper = &valid[start..];
    let xs: Vec<f64> = upper.iter().map(|r| r.shape).collect();
    let ys: Vec<f64> = upper.iter().map(|r| r.contrast.unwrap()).collect();
    let x_span = xs.iter().cloned().fold(f64::NEG_INFINITY, f64::max)
        - xs.iter().cloned().fold(f64::INFINITY, f64::min);
    let x_scale = xs.iter().map(|x| x.abs()).fold(0.0f64, f64::max).max(1e-300);
    if x_span <= 1e-12 * x_scale {
        return Err(CoreError::Calibration(
            "penalty shape has near-zero variance over the calibration rows".into(),
        ));
    }
    // Theil-Sen: median of pairwise slopes
    let mut slopes = Vec::new();
    for i in 0..xs.len() {
        for j in (i + 1)..xs.len() {
            if (xs[j] - xs[i]).abs() > 1e-15 * x_scale {
                slopes.push((ys[j] - ys[i]) / (xs[j] - xs[i]));
            }
        }
    }
    if slopes.is_empty() {
        return Err(CoreError::Calibration("no informative shape pairs".into()));
    }
    slopes.sort_by(f64::total_cmp);
    let slope = if slopes.len() % 2 == 1 {
        slopes[slopes.len() / 2]
    } else {
        0.5 * (slopes[slopes.len() / 2 - 1] + slopes[slopes.len() / 2])
    };
    let y_scale = ys.iter().map(|y| y.abs()).fold(0.0f64, f64::max).max(1.0);
    if slope.abs() <= 1e-12 * y_scale / x_scale.max(1e-300) {
        return Err(CoreError::Calibration(
            "contrasts are constant in the penalty shape; slope heuristic is degenerate".into(),
        ));
    }
    let kappa_hat = 2.0 * slope.abs();

    // least-squares CI on the same rows
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let ols = sxy / sxx;
    let resid_ss: f64 = xs
        .iter()
        .zip(&ys)
        .map(|(x, y)| {
            let pred = my + ols * (x - mx);
            (y - pred) * (y - pred)
        })
        .sum();
    let df = (xs.len() as f64 - 2.0).max(1.0);
    let se = (resid_ss / df / sxx).sqrt();
    let t = statrs::distribution::StudentsT::new(0.0, 1.0, df)
        .map_err(|e| CoreError::Calibration(e.to_string()))?;
    use statrs::distribution::ContinuousCDF;
    let tq = t.inverse_cdf(0.975);
    let lo = (ols.abs() - tq * se).max(0.0) * 2.0;
    let hi = (ols.abs() + tq * se) * 2.0;

    // dimension-jump diagnostic: selected dimension as kappa sweeps up
    let grid_max = 3.0 * kappa_hat;
    let steps = 300;
    let select_at = |kappa: f64| -> usize {
        let min = valid
            .iter()
            .map(|r| r.contrast.unwrap() + kappa * r.shape)
            .fold(f64::INFINITY, f64::min);
        let m = valid
            .iter()
            .filter(|r| r.contrast.unwrap() + kappa * r.shape <= min + CRIT_TIE_TOL)
            .map(|r| r.m)
            .min()
            .expect("nonempty calibration rows");
        dimension(m)
    };
    let mut kappa_jump = 0.0;
    let mut jump_dimensions = (select_at(0.0), select_at(0.0));
    let mut largest = 0i64;
    let mut prev_d = select_at(0.0);
    for i in 1..=steps {
        let kappa = grid_max * i as f64 / steps as f64;
        let d = select_at(kappa);
        let drop = prev_d as i64 - d as i64;
        if drop > largest {
            largest = drop;
            kappa_jump = kappa;
            jump_dimensions = (prev_d, d);
        }
        prev_d = d;
    }
    Ok(CalibrationReport {
        kappa_hat,
        slope,
        kappa_ci: (lo, hi),
        kappa_jump,
        jump_dimensions,
        rows_used: upper.len(),
    })
}

/// Condition-(10)-style feasibility report for the configured `a_bar`:
/// `(G / a) (ln a / ln 2 + 3)^{3/2} <= 1`, where the component-count constant
/// `G` is derived from `g_tilde` via the support-count chain
/// `G = 54 e^2 (6 beta_high + 5) g_tilde + 1`.
#[derive(Debug, Clone, Serialize)]
pub struct Condition10Report {
    pub g_beta: f64,
    pub value: f64,
    pub pass: bool,
}

pub fn condition10_report(cfg: &SieveConfig) -> Condition10Report {
    let g_beta = g_from_g_tilde(cfg.g_tilde, cfg.beta_high);
    let a = cfg.a_bar;
    let value = g_beta / a * (a.ln() / std::f64::consts::LN_2 + 3.0).powf(1.5);
    Condition10Report {
        g_beta,
        value,
        pass: value <= 1.0,
    }
}

/// `g_tilde` from the envelope constant via
/// `2 sqrt(ln(4M/sqrt(pi)) + k ln(4/sqrt(3)) + 6 beta + 4)`.
pub fn g_tilde_from_envelope(envelope_m: f64, beta: f64) -> f64 {
    let k = crate::smoothness::conv_order_k(beta) as f64;
    2.0 * ((4.0 * envelope_m / std::f64::consts::PI.sqrt()).ln()
        + k * (4.0 / 3.0f64.sqrt()).ln()
        + 6.0 * beta
        + 4.0)
        .sqrt()
}

/// Component-count constant from `g_tilde` (dominant term of the support-count
/// chain for sigma < 1/e).
pub fn g_from_g_tilde(g_tilde: f64, beta: f64) -> f64 {
    54.0 * std::f64::consts::E.powi(2) * (6.0 * beta + 5.0) * g_tilde + 1.0
}
