//! `msieve rate`: Monte Carlo Hellinger risk of the full selection pipeline
//! across sample sizes, with the fitted slope next to the theoretical target.

use super::{CliError, CliResult};
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use msieve_core::divergence::{mc_hellinger_risk, NumericDensity};
use msieve_core::mixture::Sample;
use msieve_core::select::select_model;
use msieve_core::seed;
use serde_json::json;

pub fn run(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> CliResult {
    let truth_spec = cfg
        .truth
        .as_ref()
        .ok_or_else(|| CliError::Config("rate needs 'truth'".into()))?;
    let truth = truth_spec.build()?;
    let n_grid = cfg
        .n_grid
        .clone()
        .ok_or_else(|| CliError::Config("rate needs 'n_grid'".into()))?;
    let reps = cfg
        .reps
        .ok_or_else(|| CliError::Config("rate needs 'reps'".into()))?;
    let sieve = cfg.require_sieve()?.clone();
    let m_range = cfg
        .m_range
        .ok_or_else(|| CliError::Config("rate needs 'm_range'".into()))?;
    let em_settings = cfg.em_settings();
    let em_seed = seed::derive_seed(cfg.seed, "rate-em", &[]);
    manifest.record_seed("rate-em", em_seed);
    let risk_seed = seed::derive_seed(cfg.seed, "rate-risk", &[]);
    manifest.record_seed("rate-risk", risk_seed);

    let procedure = |sample: &Sample| -> msieve_core::Result<NumericDensity> {
        let hi = m_range.1.min(sample.len());
        let em = em_settings.to_core(em_seed);
        let outcome = select_model(sample, (m_range.0, hi), &sieve, &em)?;
        let fit = outcome.selected_fit().ok_or_else(|| {
            msieve_core::CoreError::Selection("selected row lost its fit".into())
        })?;
        NumericDensity::from_mixture(&fit.mixture)
    };
    let report = mc_hellinger_risk(truth.as_ref(), &procedure, &n_grid, reps, risk_seed)?;

    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    manifest.emit(&cfg.out_dir, "risk.csv", &csv)?;

    let target = truth_spec
        .effective_beta()
        .map(|b| -2.0 * b / (2.0 * b + 1.0));
    let summary = json!({
        "rows": serde_json::to_value(&report.rows).map_err(|e| CliError::Numeric(e.to_string()))?,
        "slope": serde_json::to_value(&report.slope).map_err(|e| CliError::Numeric(e.to_string()))?,
        "theoretical_slope": target,
    });
    manifest.emit(
        &cfg.out_dir,
        "rate.json",
        serde_json::to_string_pretty(&summary)
            .map_err(|e| CliError::Numeric(e.to_string()))?
            .as_bytes(),
    )?;
    if let Some(s) = &report.slope {
        manifest.note("fitted_slope", s.slope);
    } else {
        manifest.note("fitted_slope", "undefined (fewer than two positive-risk rows)");
    }
    if let Some(t) = target {
        manifest.note("theoretical_slope", t);
    }
    Ok(())
}
