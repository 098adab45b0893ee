//! `msieve cluster`: MAP labels and posteriors for a fitted mixture.

use super::{CliError, CliResult};
use crate::config::ExperimentConfig;
use crate::manifest::RunManifest;
use msieve_core::mixture::{map_cluster, Mixture, Sample};
use std::fmt::Write as _;

pub fn run(cfg: &ExperimentConfig, manifest: &mut RunManifest) -> CliResult {
    let sample_path = cfg
        .sample_path
        .as_ref()
        .ok_or_else(|| CliError::Config("cluster needs 'sample_path'".into()))?;
    let sample = Sample::read_from(sample_path)?;
    let mixture_path = cfg
        .mixture_path
        .clone()
        .unwrap_or_else(|| cfg.out_dir.join("selected_mixture.json"));
    let text = std::fs::read_to_string(&mixture_path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", mixture_path.display())))?;
    let mixture = Mixture::from_json(&text)?;

    let clustering = map_cluster(&mixture, &sample)?;
    let m = mixture.len();
    let mut csv = String::new();
    let mut header = String::from("index,label");
    for u in 0..m {
        write!(header, ",p{u}").expect("string write");
    }
    csv.push_str(&header);
    csv.push('\n');
    for (i, (label, row)) in clustering
        .labels
        .iter()
        .zip(clustering.posteriors.iter())
        .enumerate()
    {
        write!(csv, "{i},{label}").expect("string write");
        for p in row {
            write!(csv, ",{p}").expect("string write");
        }
        csv.push('\n');
    }
    manifest.emit(&cfg.out_dir, "labels.csv", csv.as_bytes())?;
    manifest.note("observations", sample.len());
    manifest.note("components", m);
    Ok(())
}
