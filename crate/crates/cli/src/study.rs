//! Study drivers: variant comparison, storage case studies, generic-model
//! replay, plus the single-run and export paths the CLI exposes.

use crate::config::ExperimentConfig;
use crate::report::{
    status_label, AirTrajectoryReport, CheckResult, Report, RunReport, TimingsSection,
};
use anyhow::{bail, Context as _, Result};
use gridsched_core::scheduler::{
    apply_schedule_fixings, assemble, decode_solution, solve_single_level, solve_two_level,
    AssembledModel, CaesMode, ScheduleSolution, Variant,
};
use gridsched_core::{
    load_case, load_scenarios, Backend, HighsBackend, ScenarioSet, SolveStatus, SystemCase,
};
use rand::{Rng, SeedableRng};
use std::time::Instant;

pub struct StudyContext {
    pub config: ExperimentConfig,
    pub case: SystemCase,
    pub scenarios: Option<ScenarioSet>,
    pub backend: HighsBackend,
}

/// Load and validate the study inputs, applying the seeded load perturbation
/// when one is configured.
pub fn load_context(config: &ExperimentConfig) -> Result<StudyContext> {
    let mut case = load_case(&config.case_path)
        .with_context(|| format!("loading case {}", config.case_path.display()))?;
    if let (Some(seed), Some(amplitude)) = (config.seed, config.perturb_loads) {
        perturb_loads(&mut case, seed, amplitude);
    }
    let scenarios = match &config.scenario_path {
        Some(path) => Some(
            load_scenarios(path, &case)
                .with_context(|| format!("loading scenarios {}", path.display()))?,
        ),
        None => None,
    };
    Ok(StudyContext {
        config: config.clone(),
        case,
        scenarios,
        backend: HighsBackend::new(),
    })
}

/// Multiplicative load noise, reproducible from the seed. Both load series
/// move together so power factors are preserved.
fn perturb_loads(case: &mut SystemCase, seed: u64, amplitude: f64) {
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    for bus in &mut case.buses {
        for t in 0..bus.active_load.len() {
            let factor = 1.0 + amplitude * rng.random_range(-1.0..=1.0);
            bus.active_load[t] *= factor;
            bus.reactive_load[t] *= factor;
        }
    }
}

/// Outcome of one solved (or failed) run, keeping what later study phases
/// need: the decoded solution, the level split, and the first-level
/// artifacts of two-level runs (the replay restricts that exact model).
pub struct SolvedRun {
    pub report: RunReport,
    pub solution: Option<ScheduleSolution>,
    pub artifacts: Option<gridsched_core::FirstLevelArtifacts>,
    pub wall_s: f64,
    pub level_split_s: Option<(f64, f64)>,
}

fn run_report_from_solution(
    label: &str,
    solution: &ScheduleSolution,
    free_sign_count: Option<usize>,
    floors_doubled: Option<bool>,
) -> RunReport {
    RunReport {
        label: label.to_string(),
        variant: solution.variant,
        caes_mode: solution.caes_mode,
        status: status_label(solution.status).to_string(),
        solved: true,
        objective: Some(solution.objective),
        gap: Some(solution.gap),
        costs: Some((&solution.costs).into()),
        cost_breakdown: Some(solution.costs),
        counts: Some(solution.counts),
        free_sign_count,
        loss_error_aggregate_pct: solution
            .audits
            .loss_audit
            .as_ref()
            .map(|a| a.aggregate_pct),
        air_trajectories: solution.caes.iter().map(AirTrajectoryReport::from).collect(),
        audits: Some(solution.audits.clone()),
        audits_pass: solution.audits.pass,
        floors_doubled,
    }
}

fn failed_run(label: &str, variant: Variant, caes_mode: CaesMode, status: &str) -> RunReport {
    RunReport {
        label: label.to_string(),
        variant,
        caes_mode,
        status: status.to_string(),
        solved: false,
        objective: None,
        gap: None,
        costs: None,
        cost_breakdown: None,
        counts: None,
        free_sign_count: None,
        loss_error_aggregate_pct: None,
        air_trajectories: Vec::new(),
        audits: None,
        audits_pass: false,
        floors_doubled: None,
    }
}

/// Solve one variant on the context's data. Two-level runs go through the
/// driver; the others assemble and solve directly.
pub fn run_one(ctx: &StudyContext, label: &str, variant: Variant, caes_mode: CaesMode) -> SolvedRun {
    let start = Instant::now();
    match variant {
        Variant::TlLac => {
            match solve_two_level(
                &ctx.case,
                ctx.scenarios.as_ref(),
                &ctx.config.lin,
                caes_mode,
                &ctx.backend,
                &ctx.config.limits,
            ) {
                Ok(outcome) => {
                    let free = outcome
                        .artifacts
                        .free_sign_count(ctx.config.lin.fix_scenario_signs);
                    SolvedRun {
                        report: run_report_from_solution(
                            label,
                            &outcome.solution,
                            Some(free),
                            Some(outcome.floors_doubled),
                        ),
                        solution: Some(outcome.solution),
                        artifacts: Some(outcome.artifacts),
                        wall_s: start.elapsed().as_secs_f64(),
                        level_split_s: Some((outcome.level1_wall_s, outcome.level2_wall_s)),
                    }
                }
                Err(err) => SolvedRun {
                    report: failed_run(label, variant, caes_mode, &err.to_string()),
                    solution: None,
                    artifacts: None,
                    wall_s: start.elapsed().as_secs_f64(),
                    level_split_s: None,
                },
            }
        }
        _ => {
            let outcome = (|| -> Result<ScheduleSolution> {
                let outcome = solve_single_level(
                    &ctx.case,
                    ctx.scenarios.as_ref(),
                    &ctx.config.lin,
                    variant,
                    caes_mode,
                    &ctx.backend,
                    &ctx.config.limits,
                )?;
                if !outcome.result.status.has_solution() {
                    bail!("solver status: {}", status_label(outcome.result.status));
                }
                Ok(decode_solution(
                    &outcome.assembled,
                    &outcome.result,
                    &ctx.case,
                    ctx.scenarios.as_ref(),
                )?)
            })();
            match outcome {
                Ok(solution) => SolvedRun {
                    report: run_report_from_solution(label, &solution, None, None),
                    solution: Some(solution),
                    artifacts: None,
                    wall_s: start.elapsed().as_secs_f64(),
                    level_split_s: None,
                },
                Err(err) => SolvedRun {
                    report: failed_run(label, variant, caes_mode, &err.to_string()),
                    solution: None,
                    artifacts: None,
                    wall_s: start.elapsed().as_secs_f64(),
                    level_split_s: None,
                },
            }
        }
    }
}

fn push_timing(timings: &mut TimingsSection, run: &SolvedRun) {
    timings.wall_s.insert(run.report.label.clone(), run.wall_s);
    if let Some(split) = run.level_split_s {
        timings
            .level_split_s
            .insert(run.report.label.clone(), split);
    }
}

fn base_report(ctx: &StudyContext, study: &str) -> Report {
    let mut report = Report::new(study, &ctx.config, &ctx.case.name);
    report.scenario_renormalization = ctx
        .scenarios
        .as_ref()
        .map(|s| s.renormalization)
        .filter(|f| (f - 1.0).abs() > 1e-15);
    report
}

fn cost_of(run: &SolvedRun) -> Option<f64> {
    run.report.objective
}

/// 2x-MIP-gap slack around a reference cost, the tolerance every cost
/// ordering check uses.
fn gap_slack(ctx: &StudyContext, reference: f64) -> f64 {
    2.0 * ctx.config.limits.mip_gap * reference.abs()
}

/// Solve each configured variant on identical data and compare costs, solve
/// times, and booked-loss accuracy.
pub fn run_variant_study(ctx: &StudyContext) -> Report {
    let mut report = base_report(ctx, "variants");
    let mut timings = TimingsSection::default();
    let mut runs: Vec<SolvedRun> = Vec::new();

    for &variant in &ctx.config.variants {
        let run = run_one(ctx, variant.label(), variant, ctx.config.caes_mode);
        push_timing(&mut timings, &run);
        runs.push(run);
    }

    let find = |variant: Variant| runs.iter().find(|r| r.report.variant == variant && r.report.solved);
    if let (Some(dc), Some(tl)) = (find(Variant::Dc), find(Variant::TlLac)) {
        let (dc_cost, tl_cost) = (cost_of(dc).unwrap(), cost_of(tl).unwrap());
        report.checks.push(CheckResult {
            name: "cost(dc) <= cost(tl-lac)".into(),
            pass: dc_cost <= tl_cost + gap_slack(ctx, tl_cost),
            detail: format!("dc {dc_cost:.1} vs tl-lac {tl_cost:.1}"),
        });
    }
    if let (Some(tl), Some(full)) = (find(Variant::TlLac), find(Variant::LacFull)) {
        let (tl_cost, full_cost) = (cost_of(tl).unwrap(), cost_of(full).unwrap());
        report.checks.push(CheckResult {
            name: "cost(tl-lac) <= cost(lac-full)".into(),
            pass: tl_cost <= full_cost + gap_slack(ctx, full_cost),
            detail: format!("tl-lac {tl_cost:.1} vs lac-full {full_cost:.1}"),
        });
        let (tl_err, full_err) = (
            tl.report.loss_error_aggregate_pct.unwrap_or(f64::NAN),
            full.report.loss_error_aggregate_pct.unwrap_or(f64::NAN),
        );
        report.checks.push(CheckResult {
            name: "loss_error(tl-lac) < loss_error(lac-full)".into(),
            pass: tl_err < full_err,
            detail: format!("tl-lac {tl_err:.2}% vs lac-full {full_err:.2}%"),
        });
        timings.checks.push(CheckResult {
            name: "wall(tl-lac) < wall(lac-full)".into(),
            pass: timings.wall_s[&tl.report.label] < timings.wall_s[&full.report.label],
            detail: format!(
                "tl-lac {:.2}s vs lac-full {:.2}s",
                timings.wall_s[&tl.report.label], timings.wall_s[&full.report.label]
            ),
        });
    }

    report.runs = runs.into_iter().map(|r| r.report).collect();
    if !ctx.config.redact_timings {
        report.timings = Some(timings);
    }
    report
}

/// The three-way storage comparison: no storage, generic model, step-curve
/// model, all under the same network variant.
pub fn run_caes_study(ctx: &StudyContext) -> Result<Report> {
    if ctx.case.caes_units.is_empty() {
        bail!("the storage study needs a case with at least one CAES unit");
    }
    if ctx.case.wind_farms.is_empty() || ctx.scenarios.is_none() {
        bail!("the storage study needs wind scenarios");
    }
    let variant = ctx.config.primary_variant();
    let mut report = base_report(ctx, "caes");
    let mut timings = TimingsSection::default();

    let cases = [
        ("case1-no-caes", CaesMode::None),
        ("case2-gm", CaesMode::Gm),
        ("case3-tbm", CaesMode::Tbm),
    ];
    let mut runs = Vec::new();
    for (label, mode) in cases {
        let run = run_one(ctx, label, variant, mode);
        push_timing(&mut timings, &run);
        runs.push(run);
    }

    if let Some(base_cost) = cost_of(&runs[0]) {
        for run in &runs[1..] {
            if let Some(cost) = cost_of(run) {
                let reduction = (base_cost - cost) / base_cost * 100.0;
                report.checks.push(CheckResult {
                    name: format!("cost({}) <= cost(case1-no-caes)", run.report.label),
                    pass: cost <= base_cost + gap_slack(ctx, base_cost),
                    detail: format!("reduction {reduction:.2}% ({cost:.1} vs {base_cost:.1})"),
                });
            }
        }
    }

    report.runs = runs.into_iter().map(|r| r.report).collect();
    if !ctx.config.redact_timings {
        report.timings = Some(timings);
    }
    Ok(report)
}

/// Re-price the generic-model plan under the thermodynamic model: solve GM
/// and TBM, then re-solve the TBM model with GM's commitment and storage
/// windows pinned. The replayed cost can only meet or exceed the TBM optimum;
/// an infeasible replay is itself a finding and is reported as such.
pub fn run_gm_replay(ctx: &StudyContext) -> Result<Report> {
    if ctx.case.caes_units.is_empty() {
        bail!("the replay study needs a case with at least one CAES unit");
    }
    let variant = ctx.config.primary_variant();
    let mut report = base_report(ctx, "gm-replay");
    let mut timings = TimingsSection::default();

    let gm = run_one(ctx, "gm-nominal", variant, CaesMode::Gm);
    push_timing(&mut timings, &gm);
    let tbm = run_one(ctx, "tbm-optimal", variant, CaesMode::Tbm);
    push_timing(&mut timings, &tbm);

    let replay = match (&gm.solution, &tbm.solution) {
        (Some(gm_solution), Some(_)) => {
            replay_under_tbm(ctx, variant, gm_solution, tbm.artifacts.as_ref()).unwrap_or_else(
                |err| SolvedRun {
                    report: failed_run("gm-replayed", variant, CaesMode::Tbm, &err.to_string()),
                    solution: None,
                    artifacts: None,
                    wall_s: 0.0,
                    level_split_s: None,
                },
            )
        }
        _ => SolvedRun {
            report: failed_run(
                "gm-replayed",
                variant,
                CaesMode::Tbm,
                "skipped: donor runs did not both solve",
            ),
            solution: None,
            artifacts: None,
            wall_s: 0.0,
            level_split_s: None,
        },
    };
    push_timing(&mut timings, &replay);

    if let (Some(replayed_cost), Some(tbm_cost)) = (cost_of(&replay), cost_of(&tbm)) {
        report.checks.push(CheckResult {
            name: "cost(gm-replayed) >= cost(tbm-optimal)".into(),
            pass: replayed_cost >= tbm_cost - gap_slack(ctx, tbm_cost),
            detail: format!("replayed {replayed_cost:.1} vs tbm {tbm_cost:.1}"),
        });
        if let Some(gm_cost) = cost_of(&gm) {
            let regret = replayed_cost - gm_cost;
            report.checks.push(CheckResult {
                name: "gm replay regret recorded".into(),
                pass: true,
                detail: format!("nominal {gm_cost:.1}, replayed {replayed_cost:.1}, regret {regret:.1}"),
            });
        }
    } else if !replay.report.solved {
        report.checks.push(CheckResult {
            name: "gm replay feasibility".into(),
            pass: false,
            detail: format!("replay did not solve: {}", replay.report.status),
        });
    }

    report.runs = vec![gm.report, tbm.report, replay.report];
    if !ctx.config.redact_timings {
        report.timings = Some(timings);
    }
    Ok(report)
}

/// Pin the GM plan into the exact model the TBM optimum came from: for the
/// two-level variant that is the level-2 model built from the TBM run's own
/// artifacts, so the replay is a true restriction and can only cost more.
fn replay_under_tbm(
    ctx: &StudyContext,
    variant: Variant,
    gm_solution: &ScheduleSolution,
    tbm_artifacts: Option<&gridsched_core::FirstLevelArtifacts>,
) -> Result<SolvedRun> {
    let start = Instant::now();
    let (build_variant, artifacts) = match variant {
        Variant::TlLac => (Variant::TlLac, tbm_artifacts),
        other => (other, None),
    };
    let mut assembled: AssembledModel = assemble(
        &ctx.case,
        ctx.scenarios.as_ref(),
        &ctx.config.lin,
        build_variant,
        CaesMode::Tbm,
        artifacts,
    )?;
    apply_schedule_fixings(&mut assembled, gm_solution, &ctx.case)?;
    let result = ctx.backend.solve(&assembled.model, &ctx.config.limits)?;
    if result.status == SolveStatus::Infeasible {
        bail!("infeasible: the generic-model plan cannot be realized under the step curves");
    }
    if !result.status.has_solution() {
        bail!("solver status: {}", status_label(result.status));
    }
    let solution = decode_solution(&assembled, &result, &ctx.case, ctx.scenarios.as_ref())?;
    Ok(SolvedRun {
        report: run_report_from_solution("gm-replayed", &solution, None, None),
        solution: Some(solution),
        artifacts: None,
        wall_s: start.elapsed().as_secs_f64(),
        level_split_s: None,
    })
}

/// One solve of the configured variant, reported like a single-row study.
pub fn run_solve(ctx: &StudyContext) -> Report {
    let mut report = base_report(ctx, "solve");
    let mut timings = TimingsSection::default();
    let variant = ctx.config.primary_variant();
    let run = run_one(ctx, variant.label(), variant, ctx.config.caes_mode);
    push_timing(&mut timings, &run);
    report.runs = vec![run.report];
    if !ctx.config.redact_timings {
        report.timings = Some(timings);
    }
    report
}

/// Deterministic LP export of the assembled model.
pub fn run_export_lp(ctx: &StudyContext, out: &std::path::Path) -> Result<()> {
    let variant = ctx.config.primary_variant();
    if variant == Variant::TlLac {
        bail!("export-lp builds a single-level model; pick dc, lac-lossless, or lac-full");
    }
    let assembled = assemble(
        &ctx.case,
        ctx.scenarios.as_ref(),
        &ctx.config.lin,
        variant,
        ctx.config.caes_mode,
        None,
    )?;
    assembled.model.export_lp(out)?;
    Ok(())
}
