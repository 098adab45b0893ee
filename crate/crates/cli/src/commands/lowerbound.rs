//! `msieve lowerbound`: build the hypercube family at the sample-size-driven
//! dimension, construct a separated code, audit every pair, and report the
//! minimax lower-bound value.

use super::{CliError, CliResult};
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use msieve_core::holder::{audit_separation, build_omega, choose_d, vg_subset, FamilyBuilder};
use msieve_core::holder::audit::DEFAULT_AUDIT_SLACK;
use msieve_core::seed;

pub fn run(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> CliResult {
    let spec = cfg
        .lowerbound
        .as_ref()
        .ok_or_else(|| CliError::Config("lowerbound needs a 'lowerbound' section".into()))?;
    let d = choose_d(spec.n, spec.beta);
    manifest.note("chosen_d", d);
    let code_seed = seed::derive_seed(cfg.seed, "vg-code", &[]);
    manifest.record_seed("vg-code", code_seed);
    let code = vg_subset(d, spec.code_alpha, code_seed)?;
    manifest.note("code_size", code.words.len());
    manifest.note("code_min_distance", code.min_distance);

    let base = build_omega(spec.alpha, spec.xi, spec.beta)?;
    let builder = FamilyBuilder::new(spec.beta, d, base)?;
    let audit = audit_separation(
        &builder,
        &code,
        Some((spec.n, spec.kappa_birge)),
        DEFAULT_AUDIT_SLACK,
    )?;
    manifest.emit(
        &cfg.out_dir,
        "audit.json",
        serde_json::to_string_pretty(&audit)
            .map_err(|e| CliError::Numeric(e.to_string()))?
            .as_bytes(),
    )?;
    if let Some(bound) = audit.theorem3_bound {
        manifest.note("lower_bound_value", bound);
    }
    if !audit.pass {
        let failing = audit.pairs.iter().filter(|p| !p.pass).count();
        return Err(CliError::Audit(format!(
            "{failing}/{} pairs violated the separation bounds",
            audit.pairs.len()
        )));
    }
    Ok(())
}
