//! `msieve select`: fit every model in the range, emit the criterion table
//! and the selected mixture.

use super::{CliError, CliResult};
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use msieve_core::mixture::Sample;
use msieve_core::select::{condition10_report, select_model};
use msieve_core::seed;
use serde_json::json;

pub fn run(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> CliResult {
    let sample_path = cfg
        .sample_path
        .as_ref()
        .ok_or_else(|| CliError::Config("select needs 'sample_path'".into()))?;
    let sample = Sample::read_from(sample_path)?;
    let sieve = cfg.require_sieve()?;
    let m_range = cfg
        .m_range
        .ok_or_else(|| CliError::Config("select needs 'm_range'".into()))?;
    let em_seed = seed::derive_seed(cfg.seed, "select-em", &[]);
    manifest.record_seed("select-em", em_seed);
    let em = cfg.em_settings().to_core(em_seed);

    let outcome = select_model(&sample, m_range, sieve, &em)?;
    let cond10 = condition10_report(sieve);
    manifest.note("condition10_value", cond10.value);
    manifest.note("condition10_pass", cond10.pass);
    manifest.note("selected_m", outcome.table.selected_m);

    let mut csv = Vec::new();
    outcome.table.write_csv(&mut csv).map_err(CliError::from)?;
    manifest.emit(&cfg.out_dir, "selection.csv", &csv)?;

    let table_json = json!({
        "table": serde_json::to_value(&outcome.table).map_err(|e| CliError::Numeric(e.to_string()))?,
        "condition10": serde_json::to_value(&cond10).map_err(|e| CliError::Numeric(e.to_string()))?,
    });
    manifest.emit(
        &cfg.out_dir,
        "selection.json",
        serde_json::to_string_pretty(&table_json)
            .map_err(|e| CliError::Numeric(e.to_string()))?
            .as_bytes(),
    )?;

    let fit = outcome
        .selected_fit()
        .ok_or_else(|| CliError::Numeric("selected row has no fitted model".into()))?;
    manifest.emit(
        &cfg.out_dir,
        "selected_mixture.json",
        fit.mixture.to_json()?.as_bytes(),
    )?;
    Ok(())
}
