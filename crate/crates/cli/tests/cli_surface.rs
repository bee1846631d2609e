//! End-to-end coverage of the harness surface on the toy fixtures: loading,
//! studies, report emission, determinism, and the exported-LP round trip.

use gridsched_cli::config::{ExperimentConfig, ReportFormat};
use gridsched_cli::study;
use gridsched_core::scheduler::{CaesMode, Variant};
use std::path::PathBuf;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("../../fixtures")
        .join(name)
}

fn toy_config(out: &std::path::Path) -> ExperimentConfig {
    let mut config = ExperimentConfig::new(fixture("toy2.case"));
    config.scenario_path = Some(fixture("toy2.scen"));
    config.variants = vec![Variant::Dc, Variant::LacFull, Variant::TlLac];
    config.caes_mode = CaesMode::None;
    config.limits.mip_gap = 1e-5;
    config.limits.time_limit = 60.0;
    config.out_dir = out.to_path_buf();
    config
}

#[test]
fn variant_study_on_toy_passes_all_checks() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let ctx = study::load_context(&config).unwrap();
    let report = study::run_variant_study(&ctx);
    assert_eq!(report.runs.len(), 3);
    for run in &report.runs {
        assert!(run.solved, "{} failed: {}", run.label, run.status);
        assert!(run.audits_pass);
    }
    assert!(report.all_pass(), "checks: {:?}", report.checks);
    let paths = report.emit("study_variants").unwrap();
    assert!(paths[0].exists());
}

#[test]
fn reports_embed_config_and_renormalization() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = toy_config(dir.path());
    config.variants = vec![Variant::Dc];
    let ctx = study::load_context(&config).unwrap();
    let report = study::run_solve(&ctx);
    let json = report.to_json();
    let parsed: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(parsed["schema_version"], 1);
    assert!(parsed["config"]["case_path"]
        .as_str()
        .unwrap()
        .ends_with("toy2.case"));
    // The toy probabilities sum to 1 exactly: no renormalization reported.
    assert!(parsed.get("scenario_renormalization").is_none());
    assert!(parsed["footer"].as_str().unwrap().contains("orderings"));
}

#[test]
fn redacted_reports_are_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = toy_config(dir.path());
    config.variants = vec![Variant::Dc, Variant::TlLac];
    config.redact_timings = true;
    config.seed = Some(7);
    config.perturb_loads = Some(0.03);
    let run = || {
        let ctx = study::load_context(&config).unwrap();
        study::run_variant_study(&ctx).to_json()
    };
    let first = run();
    let second = run();
    assert_eq!(first, second);
    let parsed: serde_json::Value = serde_json::from_str(&first).unwrap();
    assert!(parsed.get("timings").is_none());
}

#[test]
fn seeded_perturbation_changes_loads_deterministically() {
    let dir = tempfile::tempdir().unwrap();
    let base = toy_config(dir.path());
    let mut seeded = base.clone();
    seeded.seed = Some(11);
    seeded.perturb_loads = Some(0.05);
    let unperturbed = study::load_context(&base).unwrap();
    let once = study::load_context(&seeded).unwrap();
    let twice = study::load_context(&seeded).unwrap();
    assert_ne!(
        unperturbed.case.buses[1].active_load,
        once.case.buses[1].active_load
    );
    assert_eq!(once.case.buses[1].active_load, twice.case.buses[1].active_load);
}

#[test]
fn csv_report_has_one_table_per_section() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = toy_config(dir.path());
    config.variants = vec![Variant::Dc];
    config.format = ReportFormat::Csv;
    let ctx = study::load_context(&config).unwrap();
    let report = study::run_solve(&ctx);
    let csv = report.to_csv();
    assert!(csv.contains("# section: header"));
    assert!(csv.contains("# section: runs"));
    // No storage in this run: no air trajectory section is emitted.
    assert!(!csv.contains("air_trajectory"));
}

#[test]
fn export_lp_writes_parseable_deterministic_text() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = toy_config(dir.path());
    config.variants = vec![Variant::LacFull];
    let ctx = study::load_context(&config).unwrap();
    let out1 = dir.path().join("m1.lp");
    let out2 = dir.path().join("m2.lp");
    study::run_export_lp(&ctx, &out1).unwrap();
    study::run_export_lp(&ctx, &out2).unwrap();
    let text1 = std::fs::read_to_string(&out1).unwrap();
    let text2 = std::fs::read_to_string(&out2).unwrap();
    assert_eq!(text1, text2);
    assert!(text1.starts_with("Minimize"));
    assert!(text1.contains("Binaries"));

    // The exported file re-imports to the same optimum the backend reports.
    let limits = gridsched_core::SolveLimits {
        mip_gap: 1e-6,
        time_limit: 60.0,
        threads: 1,
    };
    let assembled = gridsched_core::assemble(
        &ctx.case,
        ctx.scenarios.as_ref(),
        &ctx.config.lin,
        Variant::LacFull,
        CaesMode::None,
        None,
    )
    .unwrap();
    use gridsched_core::Backend as _;
    let direct = gridsched_core::HighsBackend::new()
        .solve(&assembled.model, &limits)
        .unwrap();
    let imported = gridsched_core::milp::solve_lp_file(&out1, &limits).unwrap();
    let rel = (imported - direct.objective).abs() / direct.objective.abs().max(1.0);
    assert!(rel < 1e-6, "imported {imported} vs direct {}", direct.objective);
}

#[test]
fn caes_study_rejects_storage_free_cases() {
    let dir = tempfile::tempdir().unwrap();
    let config = toy_config(dir.path());
    let ctx = study::load_context(&config).unwrap();
    assert!(study::run_caes_study(&ctx).is_err());
}

#[test]
fn variant_study_reports_partial_results_on_failure() {
    // An unattainable time limit is rejected by the solver contract; the
    // study must still produce rows for the healthy runs.
    let dir = tempfile::tempdir().unwrap();
    let mut config = toy_config(dir.path());
    config.variants = vec![Variant::Dc, Variant::LacFull];
    config.limits.time_limit = 60.0;
    let ctx = study::load_context(&config).unwrap();
    let report = study::run_variant_study(&ctx);
    assert_eq!(report.runs.len(), 2);
}
