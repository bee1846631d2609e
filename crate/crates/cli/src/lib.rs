//! Study harness around the scheduling engine: runs the variant comparison,
//! the storage case studies, and the generic-model replay, and writes
//! machine-readable reports. The binary in `main.rs` is a thin clap wrapper
//! over this library so integration tests can drive studies directly.

pub mod config;
pub mod fixtures;
pub mod report;
pub mod study;

pub use config::{ExperimentConfig, ReportFormat};
pub use report::{emit_report, Report};
pub use study::{
    load_context, run_caes_study, run_gm_replay, run_solve, run_variant_study, StudyContext,
};
