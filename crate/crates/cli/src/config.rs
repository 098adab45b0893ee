//! Experiment configuration: one JSON file per run, with CLI overrides for
//! seed and output directory.

use msieve_core::divergence::{EnvelopeTruth, MixtureTruth, NumericDensity, SampleableDensity};
use msieve_core::em::{EmConfig, InitStrategy};
use msieve_core::holder::{build_omega, FamilyBuilder};
use msieve_core::kernel::psi;
use msieve_core::mixture::{Component, Mixture};
use msieve_core::select::SieveConfig;
use msieve_core::CoreError;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::sync::Arc;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Select,
    Cluster,
    Rate,
    Approx,
    Lowerbound,
    Audit,
}

impl std::fmt::Display for Command {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Command::Select => "select",
            Command::Cluster => "cluster",
            Command::Rate => "rate",
            Command::Approx => "approx",
            Command::Lowerbound => "lowerbound",
            Command::Audit => "audit",
        };
        f.write_str(name)
    }
}

/// EM settings without the seed (seeds are derived from the root seed per
/// task).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EmSettings {
    #[serde(default = "d_max_iter")]
    pub max_iterations: usize,
    #[serde(default = "d_rel_tol")]
    pub rel_tolerance: f64,
    #[serde(default = "d_n_starts")]
    pub n_starts: usize,
    #[serde(default = "d_init")]
    pub init_strategy: InitStrategy,
}

fn d_max_iter() -> usize {
    500
}
fn d_rel_tol() -> f64 {
    1e-8
}
fn d_n_starts() -> usize {
    10
}
fn d_init() -> InitStrategy {
    InitStrategy::Quantile
}

impl Default for EmSettings {
    fn default() -> Self {
        EmSettings {
            max_iterations: d_max_iter(),
            rel_tolerance: d_rel_tol(),
            n_starts: d_n_starts(),
            init_strategy: d_init(),
        }
    }
}

impl EmSettings {
    pub fn to_core(&self, seed: u64) -> EmConfig {
        EmConfig {
            max_iterations: self.max_iterations,
            rel_tolerance: self.rel_tolerance,
            n_starts: self.n_starts,
            init_strategy: self.init_strategy,
            seed,
        }
    }
}

/// Truth density for simulation commands, by named family member.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum TruthSpec {
    /// Finite mixture with explicit components.
    Mixture { components: Vec<Component> },
    /// The base density of the perturbation families.
    Omega { alpha: f64, xi: f64, beta: f64 },
    /// A hypercube member with theta drawn from the given seed.
    FTheta {
        beta: f64,
        d: usize,
        alpha: f64,
        xi: f64,
        theta_seed: u64,
    },
    /// The kernel itself (in-class with unit envelope).
    Kernel,
}

impl TruthSpec {
    /// The effective smoothness used for theoretical rate targets.
    pub fn effective_beta(&self) -> Option<f64> {
        match self {
            TruthSpec::Omega { beta, .. } | TruthSpec::FTheta { beta, .. } => Some(*beta),
            _ => None,
        }
    }

    pub fn build(&self) -> Result<Box<dyn SampleableDensity>, CoreError> {
        match self {
            TruthSpec::Mixture { components } => {
                let mix = Mixture::new(components.clone())?;
                Ok(Box::new(MixtureTruth::new(mix)?))
            }
            TruthSpec::Omega { alpha, xi, beta } => {
                let base = build_omega(*alpha, *xi, *beta)?;
                Ok(Box::new(EnvelopeTruth::new(base.numeric_density()?)?))
            }
            TruthSpec::FTheta {
                beta,
                d,
                alpha,
                xi,
                theta_seed,
            } => {
                let base = build_omega(*alpha, *xi, *beta)?;
                let builder = FamilyBuilder::new(*beta, *d, base)?;
                let theta = msieve_core::holder::random_theta(*d, *theta_seed);
                let fam = builder.family(&theta)?;
                Ok(Box::new(EnvelopeTruth::new(fam.numeric_density()?)?))
            }
            TruthSpec::Kernel => {
                let density = NumericDensity::new(Arc::new(psi), Some(1.0), None)?;
                Ok(Box::new(EnvelopeTruth::new(density)?))
            }
        }
    }

    /// Density only (for the approximation command).
    pub fn build_density(&self) -> Result<NumericDensity, CoreError> {
        match self {
            TruthSpec::Mixture { components } => {
                NumericDensity::from_mixture(&Mixture::new(components.clone())?)
            }
            TruthSpec::Omega { alpha, xi, beta } => {
                build_omega(*alpha, *xi, *beta)?.numeric_density()
            }
            TruthSpec::FTheta {
                beta,
                d,
                alpha,
                xi,
                theta_seed,
            } => {
                let base = build_omega(*alpha, *xi, *beta)?;
                let builder = FamilyBuilder::new(*beta, *d, base)?;
                let theta = msieve_core::holder::random_theta(*d, *theta_seed);
                builder.family(&theta)?.numeric_density()
            }
            TruthSpec::Kernel => NumericDensity::new(Arc::new(psi), Some(1.0), None),
        }
    }
}

/// Class-membership and domination audit settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AuditSpec {
    /// `(beta, D)` pairs to audit.
    pub cases: Vec<(f64, usize)>,
    #[serde(default = "d_n_thetas")]
    pub n_thetas: usize,
    pub alpha: f64,
    pub xi: f64,
    #[serde(default = "d_eps")]
    pub moment_epsilon: f64,
    /// Domination-check knobs: `sigma = sigma_bar * sigma_fraction`.
    #[serde(default = "d_sigma_fraction")]
    pub sigma_fraction: f64,
    #[serde(default = "d_p")]
    pub p: f64,
    #[serde(default = "d_q2")]
    pub q2: f64,
    #[serde(default = "d_k")]
    pub domination_k: usize,
}

fn d_n_thetas() -> usize {
    10
}
fn d_eps() -> f64 {
    0.5
}
fn d_sigma_fraction() -> f64 {
    0.15
}
fn d_p() -> f64 {
    0.5
}
fn d_q2() -> f64 {
    0.5
}
fn d_k() -> usize {
    1
}

/// Lower-bound audit settings.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LowerboundSpec {
    pub n: usize,
    pub beta: f64,
    pub alpha: f64,
    pub xi: f64,
    #[serde(default = "d_code_alpha")]
    pub code_alpha: f64,
    #[serde(default = "d_kappa_birge")]
    pub kappa_birge: f64,
}

fn d_code_alpha() -> f64 {
    0.5
}
fn d_kappa_birge() -> f64 {
    0.5
}

/// The whole experiment configuration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub command: Command,
    pub seed: u64,
    #[serde(default = "d_out")]
    pub out_dir: PathBuf,
    #[serde(default)]
    pub sample_path: Option<PathBuf>,
    #[serde(default)]
    pub mixture_path: Option<PathBuf>,
    #[serde(default)]
    pub m_range: Option<(usize, usize)>,
    #[serde(default)]
    pub sieve: Option<SieveConfig>,
    #[serde(default)]
    pub em: Option<EmSettings>,
    #[serde(default)]
    pub truth: Option<TruthSpec>,
    #[serde(default)]
    pub n_grid: Option<Vec<usize>>,
    #[serde(default)]
    pub reps: Option<usize>,
    #[serde(default)]
    pub sigma_grid: Option<Vec<f64>>,
    #[serde(default)]
    pub beta: Option<f64>,
    #[serde(default)]
    pub lowerbound: Option<LowerboundSpec>,
    #[serde(default)]
    pub audit: Option<AuditSpec>,
}

fn d_out() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    pub fn load(path: &std::path::Path) -> Result<(Self, Vec<u8>), CoreError> {
        let bytes = std::fs::read(path)?;
        let cfg: ExperimentConfig = serde_json::from_slice(&bytes)?;
        Ok((cfg, bytes))
    }

    pub fn require_sieve(&self) -> Result<&SieveConfig, CoreError> {
        let sieve = self
            .sieve
            .as_ref()
            .ok_or_else(|| CoreError::Config("missing 'sieve' section".into()))?;
        sieve.validate()?;
        Ok(sieve)
    }

    pub fn em_settings(&self) -> EmSettings {
        self.em.clone().unwrap_or_default()
    }
}
