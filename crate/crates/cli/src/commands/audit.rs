//! `msieve audit`: class-membership certification of hypercube members plus
//! the kernel-domination inequality grid checks.

use super::{CliError, CliResult};
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use msieve_core::approx::{domination_checks, lemma13_sigma_bar, DominationParams, VarianceReading};
use msieve_core::holder::{build_omega, proposition1_params, FamilyBuilder, SmoothDensity};
use msieve_core::seed;
use serde_json::json;

pub fn run(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> CliResult {
    let spec = cfg
        .audit
        .as_ref()
        .ok_or_else(|| CliError::Config("audit needs an 'audit' section".into()))?;
    let mut case_reports = Vec::new();
    let mut all_pass = true;
    let beta_high = spec
        .cases
        .iter()
        .map(|c| c.0)
        .fold(f64::NEG_INFINITY, f64::max);
    let beta_low = spec.cases.iter().map(|c| c.0).fold(f64::INFINITY, f64::min);

    for &(beta, d) in &spec.cases {
        let base = build_omega(spec.alpha, spec.xi, beta)?;
        let params = proposition1_params(
            (beta_low * 0.999).min(beta),
            (beta_high * 1.001).max(beta),
            &base,
            spec.moment_epsilon,
        )?;
        let builder = FamilyBuilder::new(beta, d, base)?;
        let mut theta_rows = Vec::new();
        for t in 0..spec.n_thetas {
            let theta_seed = seed::derive_seed(cfg.seed, "audit-theta", &[beta.to_bits(), d as u64, t as u64]);
            let theta = msieve_core::holder::random_theta(d, theta_seed);
            let fam = builder.family(&theta)?;
            let smooth = SmoothDensity::from_family(&fam)?;
            let report = msieve_core::holder::verify_class_conditions(&smooth, beta, &params)?;
            all_pass &= report.pass;
            theta_rows.push(json!({
                "theta": theta.iter().map(|&b| if b { '1' } else { '0' }).collect::<String>(),
                "report": serde_json::to_value(&report).map_err(|e| CliError::Numeric(e.to_string()))?,
            }));
        }
        case_reports.push(json!({
            "beta": beta,
            "d": d,
            "params": serde_json::to_value(&params).map_err(|e| CliError::Numeric(e.to_string()))?,
            "thetas": theta_rows,
        }));
    }

    // domination checks on the base density at the first case's parameters
    let domination = if let Some(&(beta, _)) = spec.cases.first() {
        let base = build_omega(spec.alpha, spec.xi, beta)?;
        let f = base.numeric_density()?;
        let params = DominationParams {
            alpha: spec.alpha,
            xi: spec.xi,
            envelope_m: base.envelope_m_tilde,
            p: spec.p,
            q1: 1.0,
            q2: spec.q2,
            reading: VarianceReading::Literal,
        };
        let sigma_bar = lemma13_sigma_bar(spec.alpha, VarianceReading::Literal);
        let report = domination_checks(&f, sigma_bar * spec.sigma_fraction, spec.domination_k, &params)?;
        all_pass &= report.pass;
        Some(serde_json::to_value(&report).map_err(|e| CliError::Numeric(e.to_string()))?)
    } else {
        None
    };

    let out = json!({
        "cases": case_reports,
        "domination": domination,
        "pass": all_pass,
    });
    manifest.emit(
        &cfg.out_dir,
        "class_audit.json",
        serde_json::to_string_pretty(&out)
            .map_err(|e| CliError::Numeric(e.to_string()))?
            .as_bytes(),
    )?;
    manifest.note("pass", all_pass);
    if !all_pass {
        return Err(CliError::Audit("class or domination audit failed".into()));
    }
    Ok(())
}
