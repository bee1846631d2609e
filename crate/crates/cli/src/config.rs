//! Experiment configuration: one struct that captures everything a study
//! needs, embedded verbatim in every report for reproducibility.

use gridsched_core::scheduler::{CaesMode, Variant};
use gridsched_core::{LinearizationConfig, SolveLimits};
use serde::Serialize;
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum ReportFormat {
    Json,
    Csv,
    Both,
}

#[derive(Debug, Clone, Serialize)]
pub struct ExperimentConfig {
    pub case_path: PathBuf,
    pub scenario_path: Option<PathBuf>,
    /// Variants a variant study runs; single-run commands use the first.
    pub variants: Vec<Variant>,
    pub caes_mode: CaesMode,
    pub lin: LinearizationConfig,
    pub limits: SolveLimits,
    pub out_dir: PathBuf,
    pub format: ReportFormat,
    /// Seed for the synthetic load perturbation; unset means loads are used
    /// as shipped.
    pub seed: Option<u64>,
    /// Relative amplitude of the load perturbation, e.g. 0.05 for +-5%.
    pub perturb_loads: Option<f64>,
    /// Leave wall-clock data out of the report so repeated runs are
    /// byte-identical.
    pub redact_timings: bool,
}

impl ExperimentConfig {
    pub fn new(case_path: impl Into<PathBuf>) -> Self {
        Self {
            case_path: case_path.into(),
            scenario_path: None,
            variants: vec![Variant::Dc, Variant::LacFull, Variant::TlLac],
            caes_mode: CaesMode::Tbm,
            lin: LinearizationConfig::default(),
            limits: SolveLimits::default(),
            out_dir: PathBuf::from("."),
            format: ReportFormat::Json,
            seed: None,
            perturb_loads: None,
            redact_timings: false,
        }
    }

    /// The variant single-run and storage studies use.
    pub fn primary_variant(&self) -> Variant {
        self.variants.first().copied().unwrap_or(Variant::TlLac)
    }
}
