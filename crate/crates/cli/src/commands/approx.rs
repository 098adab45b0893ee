//! `msieve approx`: KL decay of the finite mixture approximant along a sigma
//! grid.

use super::{CliError, CliResult};
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use msieve_core::approx::kl_decay_curve;

pub fn run(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> CliResult {
    let truth = cfg
        .truth
        .as_ref()
        .ok_or_else(|| CliError::Config("approx needs 'truth'".into()))?;
    let beta = cfg
        .beta
        .ok_or_else(|| CliError::Config("approx needs 'beta'".into()))?;
    let sigma_grid = cfg
        .sigma_grid
        .clone()
        .ok_or_else(|| CliError::Config("approx needs 'sigma_grid'".into()))?;
    let density = truth.build_density()?;
    let curve = kl_decay_curve(&density, beta, &sigma_grid)?;

    let mut csv = Vec::new();
    curve.write_csv(&mut csv)?;
    manifest.emit(&cfg.out_dir, "decay.csv", &csv)?;
    manifest.emit(
        &cfg.out_dir,
        "approx.json",
        serde_json::to_string_pretty(&curve)
            .map_err(|e| CliError::Numeric(e.to_string()))?
            .as_bytes(),
    )?;
    if let Some(s) = curve.slope {
        manifest.note("decay_slope", s);
    }
    let failures = curve.points.iter().filter(|p| p.kl.is_none()).count();
    manifest.note("failed_points", failures);
    if failures == curve.points.len() {
        return Err(CliError::Numeric(
            "every sigma point failed to construct".into(),
        ));
    }
    Ok(())
}
