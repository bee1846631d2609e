use super::*;
use crate::data::ScenarioSet;
use crate::lacopf::LinearizationConfig;
use crate::milp::{Backend, HighsBackend, SolveLimits, SolveStatus, VarKind, VarRef};
use crate::testutil;

fn backend() -> HighsBackend {
    HighsBackend::new()
}

fn tight_limits() -> SolveLimits {
    SolveLimits {
        mip_gap: 1e-6,
        time_limit: 120.0,
        threads: 1,
    }
}

fn solve_case(
    case: &crate::data::SystemCase,
    scenarios: Option<&ScenarioSet>,
    variant: Variant,
    caes_mode: CaesMode,
) -> (AssembledModel, ScheduleSolution) {
    let config = LinearizationConfig::default();
    let assembled = assemble(case, scenarios, &config, variant, caes_mode, None).unwrap();
    let result = backend().solve(&assembled.model, &tight_limits()).unwrap();
    assert!(
        result.status.has_solution(),
        "{variant:?} solve ended {:?}",
        result.status
    );
    let solution = decode_solution(&assembled, &result, case, scenarios).unwrap();
    (assembled, solution)
}

/// Uniform-probability scenario set scaling each farm's forecast.
fn scaled_scenarios(case: &crate::data::SystemCase, factors: &[f64]) -> ScenarioSet {
    let n = factors.len();
    ScenarioSet {
        probabilities: vec![1.0 / n as f64; n],
        realizations: factors
            .iter()
            .map(|&x| {
                case.wind_farms
                    .iter()
                    .map(|f| f.forecast.iter().map(|w| w * x).collect())
                    .collect()
            })
            .collect(),
        renormalization: 1.0,
    }
}

#[test]
fn single_bus_single_unit_costs_by_hand() {
    // Load 50 MW for one hour: the unit starts, runs at 50, and the objective
    // is startup + no-load + the greedy fill of the cost blocks up to 40 MW
    // above minimum.
    let case = testutil::single_bus_case(vec![50.0]);
    let unit = &case.thermal_units[0];
    let (_, solution) = solve_case(&case, None, Variant::Dc, CaesMode::None);

    assert!(solution.commitment[0][0]);
    assert!(solution.startup[0][0]);
    assert!((solution.dispatch_mw[0][0] - 50.0).abs() < 1e-6);

    let mut expected = unit.startup_cost + unit.no_load_cost;
    let mut above_min = 50.0 - unit.p_min;
    for block in &unit.cost_blocks {
        let fill = above_min.min(block.width);
        expected += fill * block.slope;
        above_min -= fill;
    }
    assert!(
        (solution.objective - expected).abs() < 1e-6,
        "objective {} vs hand {expected}",
        solution.objective
    );
    assert!(solution.audits.pass);
}

#[test]
fn committed_unit_at_minimum_keeps_blocks_empty() {
    let case = testutil::single_bus_case(vec![10.0]);
    let (assembled, solution) = solve_case(&case, None, Variant::Dc, CaesMode::None);
    assert!((solution.dispatch_mw[0][0] - 10.0).abs() < 1e-6);
    // All cost blocks sit at zero when P = Pmin.
    let result = backend().solve(&assembled.model, &tight_limits()).unwrap();
    for &b in &assembled.vars.thermal.blocks[0][0] {
        assert!(result.value(b).abs() < 1e-9);
    }
}

#[test]
fn min_up_time_blocks_early_shutdown() {
    // A start at hour 3 makes a stop at hour 4 infeasible when MU = 2.
    let mut case = testutil::single_bus_case(vec![20.0, 20.0, 20.0, 20.0]);
    case.thermal_units[0].min_up = 2;
    let config = LinearizationConfig::default();
    let mut assembled =
        assemble(&case, None, &config, Variant::Dc, CaesMode::None, None).unwrap();
    let start3 = assembled.vars.thermal.start[0][2];
    let stop4 = assembled.vars.thermal.stop[0][3];
    assembled.model.set_variable_bounds(start3, 1.0, 1.0).unwrap();
    assembled.model.set_variable_bounds(stop4, 1.0, 1.0).unwrap();
    let result = backend().solve(&assembled.model, &tight_limits()).unwrap();
    assert_eq!(result.status, SolveStatus::Infeasible);
}

#[test]
fn reserve_capacity_follows_ramp_and_resolution() {
    // RU = 50 MW/h at a 10-minute resolution caps spinning reserve at 8.33 MW.
    let mut case = testutil::single_bus_case(vec![50.0]);
    case.thermal_units[0].ramp_up = 50.0;
    let config = LinearizationConfig::default();
    let mut assembled =
        assemble(&case, None, &config, Variant::Dc, CaesMode::None, None).unwrap();
    let sr = assembled.vars.thermal.sr_up[0][0];
    assembled.model.add_objective_term(sr, -1000.0).unwrap();
    let result = backend().solve(&assembled.model, &tight_limits()).unwrap();
    assert!(
        (result.value(sr) * case.mva_base - 50.0 / 6.0).abs() < 1e-6,
        "got {}",
        result.value(sr) * case.mva_base
    );
}

#[test]
fn two_bus_flow_orientation() {
    // All load sits at bus 2, all cheap generation at bus 1: the line flow
    // (defined from 1 to 2) is positive and equals the load under DC.
    let case = testutil::two_bus_case(2, 40.0);
    let (_, solution) = solve_case(&case, None, Variant::Dc, CaesMode::None);
    for t in 0..2 {
        assert!((solution.network[0].flow_mw[0][t] - 40.0).abs() < 1e-6);
        assert!(solution.network[0].theta[0][t] > 0.0);
    }
    assert!(solution.audits.pass);
}

#[test]
fn dc_matches_relaxed_lossless_lac_flows() {
    // Widening voltage bounds and zeroing reactive load reduces the lossless
    // LAC active subproblem to the B-theta model.
    let mut case = testutil::two_bus_case(2, 40.0);
    for bus in &mut case.buses {
        bus.dv_min = -10.0;
        bus.dv_max = 10.0;
        bus.reactive_load = vec![0.0; 2];
    }
    let (_, dc) = solve_case(&case, None, Variant::Dc, CaesMode::None);
    let (_, lac) = solve_case(&case, None, Variant::LacLossless, CaesMode::None);
    for t in 0..case.horizon {
        assert!(
            (dc.network[0].flow_mw[0][t] - lac.network[0].flow_mw[0][t]).abs() < 1e-4,
            "dc {} lac {}",
            dc.network[0].flow_mw[0][t],
            lac.network[0].flow_mw[0][t]
        );
    }
}

#[test]
fn zero_load_system_has_zero_angles_and_losses() {
    // No shunt charging: with every unit off there is no reactive sink, so a
    // charged line would make the zero-load case infeasible.
    let mut case = testutil::two_bus_case(2, 0.0);
    case.lines[0].b0 = 0.0;
    let (_, solution) = solve_case(&case, None, Variant::LacFull, CaesMode::None);
    let net = &solution.network[0];
    for t in 0..2 {
        assert!(net.theta[0][t].abs() < 1e-9);
        assert!(net.loss_mw.as_ref().unwrap()[0][t].abs() < 1e-7);
        assert!(net.q_loss_mvar.as_ref().unwrap()[0][t].abs() < 1e-7);
    }
}

#[test]
fn booked_loss_matches_greedy_fill_of_solved_angle() {
    let case = testutil::two_bus_case(2, 60.0);
    let (_, solution) = solve_case(&case, None, Variant::LacFull, CaesMode::None);
    let net = &solution.network[0];
    let line = &case.lines[0];
    for t in 0..2 {
        let theta = net.theta[0][t];
        let cap = net.theta_cap[0][t];
        let expected =
            line.g * crate::lacopf::piecewise_square(theta, cap, 2).unwrap() * case.mva_base;
        let booked = net.loss_mw.as_ref().unwrap()[0][t];
        assert!(
            (booked - expected).abs() < 1e-5,
            "booked {booked} vs greedy {expected}"
        );
    }
}

#[test]
fn mirrored_line_flips_sign_keeps_losses() {
    // The single-ended shunt term makes a charged line direction-sensitive;
    // drop it so the mirrored case is exactly symmetric.
    let mut case = testutil::two_bus_case(1, 60.0);
    case.lines[0].b0 = 0.0;
    let mut mirrored = case.clone();
    mirrored.lines[0].from_bus = 1;
    mirrored.lines[0].to_bus = 0;
    let (_, base) = solve_case(&case, None, Variant::LacFull, CaesMode::None);
    let (_, flip) = solve_case(&mirrored, None, Variant::LacFull, CaesMode::None);
    let b = &base.network[0];
    let f = &flip.network[0];
    assert!((b.theta[0][0] + f.theta[0][0]).abs() < 1e-6);
    assert!((b.flow_mw[0][0] + f.flow_mw[0][0]).abs() < 1e-4);
    assert!(
        (b.loss_mw.as_ref().unwrap()[0][0] - f.loss_mw.as_ref().unwrap()[0][0]).abs() < 1e-5
    );
    // The sign selector flips with the direction.
    assert!(b.sign[0][0] > 0.5 && f.sign[0][0] < 0.5);
}

#[test]
fn forecast_scenario_needs_no_recourse() {
    let mut case = testutil::two_bus_case(2, 40.0);
    testutil::add_wind(&mut case, 1, 10.0);
    let set = scaled_scenarios(&case, &[1.0]);
    let (_, solution) = solve_case(&case, Some(&set), Variant::LacFull, CaesMode::None);
    let recourse = &solution.recourse[0];
    for g in 0..case.thermal_units.len() {
        for t in 0..case.horizon {
            assert!(recourse.deploy_up_mw[g][t].abs() < 1e-6);
            assert!(recourse.deploy_down_mw[g][t].abs() < 1e-6);
        }
    }
    for t in 0..case.horizon {
        // All available wind is used, nothing shed.
        assert!((recourse.wind_used_mw[0][t] - recourse.wind_available_mw[0][t]).abs() < 1e-6);
    }
    assert!(solution.costs.shed_expected.abs() < 1e-9);
    assert!(solution.audits.pass);
}

#[test]
fn forced_shedding_sheds_reactive_proportionally() {
    // PD = 100, QD = 20 at bus 2; forcing 10 MW of shedding drags 2 MVAr of
    // reactive load with it.
    let mut case = testutil::two_bus_case(1, 100.0);
    case.buses[1].reactive_load = vec![20.0];
    testutil::add_wind(&mut case, 1, 5.0);
    let set = scaled_scenarios(&case, &[1.0]);
    let config = LinearizationConfig::default();
    let mut assembled = assemble(
        &case,
        Some(&set),
        &config,
        Variant::LacFull,
        CaesMode::None,
        None,
    )
    .unwrap();
    let shed = assembled.vars.scenarios[0].shed[1][0];
    assembled.model.set_variable_bounds(shed, 0.1, 0.1).unwrap();
    let result = backend().solve(&assembled.model, &tight_limits()).unwrap();
    assert!(result.status.has_solution());
    let solution = decode_solution(&assembled, &result, &case, Some(&set)).unwrap();
    let q_shed = solution.recourse[0].q_shed_mvar.as_ref().unwrap()[1][0];
    assert!((q_shed - 2.0).abs() < 1e-6, "got {q_shed}");
}

#[test]
fn wind_surplus_beyond_down_reserve_is_spilled() {
    // Surplus scenario: the realization is 25 MW above forecast while
    // committed down-reserve covers far less; the rest must be spilled.
    let mut case = testutil::two_bus_case(1, 60.0);
    case.thermal_units[0].ramp_down = 30.0;
    case.thermal_units[1].ramp_down = 30.0;
    testutil::add_wind(&mut case, 1, 10.0);
    let set = scaled_scenarios(&case, &[3.5]); // 35 MW vs 10 forecast
    let (_, solution) = solve_case(&case, Some(&set), Variant::Dc, CaesMode::None);
    let recourse = &solution.recourse[0];
    let surplus = 25.0;
    let deployed_down: f64 = (0..case.thermal_units.len())
        .map(|g| recourse.deploy_down_mw[g][0])
        .sum();
    let spilled = recourse.wind_available_mw[0][0] - recourse.wind_used_mw[0][0];
    assert!(spilled > 0.0, "expected spillage, got none");
    assert!((deployed_down + spilled - surplus).abs() < 1e-5);
    assert!(
        (solution.costs.spill_expected - case.wind_farms[0].spill_price * spilled).abs() < 1e-6
    );
}

#[test]
fn stochastic_degenerates_to_deterministic() {
    let mut case = testutil::two_bus_case(3, 45.0);
    testutil::add_wind(&mut case, 1, 12.0);
    for unit in &mut case.thermal_units {
        unit.deploy_price_up = 0.0;
        unit.deploy_price_down = 0.0;
    }
    let set = scaled_scenarios(&case, &[1.0]);
    let (_, deterministic) = solve_case(&case, None, Variant::LacFull, CaesMode::None);
    let (_, stochastic) = solve_case(&case, Some(&set), Variant::LacFull, CaesMode::None);
    let rel = (deterministic.objective - stochastic.objective).abs()
        / deterministic.objective.abs().max(1.0);
    assert!(rel < 1e-5, "relative gap {rel}");
}

#[test]
fn delta_binary_count_matches_formula() {
    let mut case = testutil::two_bus_case(3, 40.0);
    testutil::add_wind(&mut case, 1, 10.0);
    let set = scaled_scenarios(&case, &[0.8, 1.2]);
    let config = LinearizationConfig::default();
    let assembled = assemble(
        &case,
        Some(&set),
        &config,
        Variant::LacFull,
        CaesMode::None,
        None,
    )
    .unwrap();
    // N_L * T * (1 + N_w) sign binaries.
    assert_eq!(assembled.delta_binaries(), 3 * (1 + 2));
}

#[test]
fn two_level_fixes_signs_and_keeps_cost_sane() {
    let mut case = testutil::two_bus_case(3, 50.0);
    testutil::add_wind(&mut case, 1, 10.0);
    let set = scaled_scenarios(&case, &[0.9, 1.1]);
    let config = LinearizationConfig::default();
    let outcome = solve_two_level(
        &case,
        Some(&set),
        &config,
        CaesMode::None,
        &backend(),
        &tight_limits(),
    )
    .unwrap();
    assert!(!outcome.floors_doubled);
    // The single line is loaded every hour and scenario: every sign is
    // decided, so the second level carries no sign binaries at all.
    assert_eq!(outcome.solution.counts.delta_binaries, 0);
    assert_eq!(
        outcome.artifacts.free_sign_count(config.fix_scenario_signs),
        0
    );
    // Losses only add cost on this fixture.
    assert!(outcome.solution.objective >= outcome.level1_objective - 1e-6);
    assert!(outcome.solution.audits.pass);

    // The adaptive caps remove the artificial losses the global cap books,
    // so the two-level run is cheaper (never pricier) than the single-level
    // full model on the same data.
    let (_, full) = solve_case(&case, Some(&set), Variant::LacFull, CaesMode::None);
    let slack = 2.0 * 1e-6 * full.objective;
    assert!(
        outcome.solution.objective <= full.objective + slack,
        "two-level {} vs full {}",
        outcome.solution.objective,
        full.objective
    );
    let rel = (full.objective - outcome.solution.objective) / full.objective;
    assert!(rel < 0.10, "implausible artificial-loss gap {rel}");
}

#[test]
fn zero_angle_lines_stay_free() {
    // Load moved to the generator bus: the line idles, its sign is ambiguous
    // and must stay free in the artifacts.
    let mut case = testutil::two_bus_case(1, 0.0);
    case.buses[0].active_load = vec![15.0];
    case.lines[0].b0 = 0.0;
    let config = LinearizationConfig::default();
    let assembled = assemble(
        &case,
        None,
        &config,
        Variant::LacLossless,
        CaesMode::None,
        None,
    )
    .unwrap();
    let result = backend().solve(&assembled.model, &tight_limits()).unwrap();
    let solution = decode_solution(&assembled, &result, &case, None).unwrap();
    let artifacts = extract_first_level(&solution, &config).unwrap();
    assert_eq!(artifacts.stage1[0][0].sign, crate::lacopf::SignFix::Free);
    assert_eq!(artifacts.free_sign_count(true), 1);
}

#[test]
fn extraction_requires_lossless_variant() {
    let case = testutil::two_bus_case(1, 30.0);
    let config = LinearizationConfig::default();
    let (_, full) = solve_case(&case, None, Variant::LacFull, CaesMode::None);
    assert!(matches!(
        extract_first_level(&full, &config),
        Err(TwoLevelError::WrongVariant(Variant::LacFull))
    ));
}

#[test]
fn caes_reduces_cost_and_replay_dominates_tbm() {
    // Eight hours with a pronounced valley/peak spread and wind at the cheap
    // bus; the storage arbitrages and the GM plan re-priced under the
    // thermodynamic model can only cost at least the TBM optimum.
    let loads = [40.0, 35.0, 30.0, 45.0, 70.0, 95.0, 100.0, 60.0];
    let mut case = testutil::two_bus_case(loads.len(), 0.0);
    case.buses[1].active_load = loads.to_vec();
    case.buses[1].reactive_load = loads.iter().map(|p| p * 0.25).collect();
    case.lines[0].mva_max = 1.6;
    testutil::add_wind(&mut case, 0, 20.0);
    case.caes_units.push(testutil::caes_unit(1, 1));
    {
        let caes = &mut case.caes_units[0];
        caes.p_ch_min = 4.0;
        caes.p_dis_min = 4.0;
        caes.p_ch_max = 25.0;
        caes.p_dis_max = 25.0;
        caes.cavern_capacity = 1.2e6;
        let dis_width = (caes.p_dis_max - caes.p_dis_min) / 4.0;
        for (s, step) in caes.discharge_steps.iter_mut().enumerate() {
            step.lo = caes.p_dis_min + s as f64 * dis_width;
            step.width = dis_width;
        }
    }
    let set = scaled_scenarios(&case, &[0.7, 1.0, 1.3]);

    let (_, none) = solve_case(&case, Some(&set), Variant::Dc, CaesMode::None);
    let (_, gm) = solve_case(&case, Some(&set), Variant::Dc, CaesMode::Gm);
    let (_, tbm) = solve_case(&case, Some(&set), Variant::Dc, CaesMode::Tbm);

    let slack = 2.0 * 1e-6 * none.objective.abs();
    assert!(
        gm.objective <= none.objective + slack,
        "gm {} none {}",
        gm.objective,
        none.objective
    );
    assert!(tbm.objective <= none.objective + slack);

    let config = LinearizationConfig::default();
    let mut replay =
        assemble(&case, Some(&set), &config, Variant::Dc, CaesMode::Tbm, None).unwrap();
    apply_schedule_fixings(&mut replay, &gm, &case).unwrap();
    let result = backend().solve(&replay.model, &tight_limits()).unwrap();
    assert!(
        result.status.has_solution(),
        "replay infeasible on this fixture"
    );
    let replayed = decode_solution(&replay, &result, &case, Some(&set)).unwrap();
    assert!(
        replayed.objective >= tbm.objective - slack,
        "replayed {} vs tbm {}",
        replayed.objective,
        tbm.objective
    );
}

#[test]
fn brute_force_enumeration_matches_milp() {
    // 2 buses, 2 units, 2 hours, 2 scenarios under DC: 12 binaries.
    let mut case = testutil::two_bus_case(2, 30.0);
    testutil::add_wind(&mut case, 1, 8.0);
    let set = scaled_scenarios(&case, &[0.75, 1.25]);
    let config = LinearizationConfig::default();
    let assembled = assemble(
        &case,
        Some(&set),
        &config,
        Variant::Dc,
        CaesMode::None,
        None,
    )
    .unwrap();

    let binaries: Vec<VarRef> = assembled.model.binary_vars().collect();
    assert!(
        binaries.len() <= 12,
        "expected at most 12 binaries, got {}",
        binaries.len()
    );

    let milp = backend().solve(&assembled.model, &tight_limits()).unwrap();
    assert_eq!(milp.status, SolveStatus::Optimal);

    // Exhaustive oracle: fix every binary pattern, solve the remaining LP.
    let mut best = f64::INFINITY;
    for mask in 0u32..(1 << binaries.len()) {
        let mut candidate = assembled.model.clone();
        for (bit, &var) in binaries.iter().enumerate() {
            let v = ((mask >> bit) & 1) as f64;
            candidate.set_variable_bounds(var, v, v).unwrap();
        }
        let lp = backend().solve(&candidate, &tight_limits()).unwrap();
        if lp.status.has_solution() {
            best = best.min(lp.objective);
        }
    }
    assert!(
        (best - milp.objective).abs() < 1e-6,
        "enumeration {best} vs milp {}",
        milp.objective
    );
}

#[test]
fn deterministic_rebuild_exports_identical_bytes() {
    let mut case = testutil::two_bus_case(2, 35.0);
    testutil::add_wind(&mut case, 1, 9.0);
    case.caes_units.push(testutil::caes_unit(1, 1));
    let set = scaled_scenarios(&case, &[0.9, 1.1]);
    let config = LinearizationConfig::default();
    let build = || {
        let assembled = assemble(
            &case,
            Some(&set),
            &config,
            Variant::LacFull,
            CaesMode::Tbm,
            None,
        )
        .unwrap();
        (
            assembled.model.num_variables(),
            assembled.model.num_constraints(),
            assembled.model.lp_string(),
        )
    };
    let (v1, c1, lp1) = build();
    let (v2, c2, lp2) = build();
    assert_eq!(v1, v2);
    assert_eq!(c1, c2);
    assert_eq!(lp1, lp2);
}

#[test]
fn tl_lac_requires_artifacts() {
    let case = testutil::two_bus_case(1, 30.0);
    let config = LinearizationConfig::default();
    assert!(matches!(
        assemble(&case, None, &config, Variant::TlLac, CaesMode::None, None),
        Err(BuildError::MissingArtifacts(Variant::TlLac))
    ));
}

#[test]
fn adaptive_caps_scale_with_first_level_magnitude() {
    // theta-hat = 0.2 with margin 1.25 gives a 0.25 rad cap; an idle line
    // falls back to the floor.
    let artifacts = FirstLevelArtifacts {
        stage1: vec![
            vec![LineDecision {
                sign: crate::lacopf::SignFix::Positive,
                magnitude: 0.2,
            }],
            vec![LineDecision {
                sign: crate::lacopf::SignFix::Free,
                magnitude: 0.0,
            }],
        ],
        scenarios: vec![],
    };
    let config = LinearizationConfig::default();
    let caps = artifacts.theta_caps(&config);
    let loaded = caps.get(0, 0, None).unwrap();
    let idle = caps.get(1, 0, None).unwrap();
    assert!((loaded - 0.25).abs() < 1e-12);
    assert!((idle - config.theta_max_floor).abs() < 1e-12);
    assert!(caps.get(2, 0, None).is_err());
}

#[test]
fn binaries_all_come_from_known_families() {
    let mut case = testutil::two_bus_case(2, 35.0);
    case.caes_units.push(testutil::caes_unit(1, 1));
    let config = LinearizationConfig::default();
    let assembled =
        assemble(&case, None, &config, Variant::LacFull, CaesMode::Tbm, None).unwrap();
    let known_prefixes = ["u_", "y_", "z_", "delta_", "uch_", "udis_", "uchs_", "udiss_"];
    for def in assembled.model.variables() {
        if def.kind == VarKind::Binary {
            assert!(
                known_prefixes.iter().any(|p| def.name.starts_with(p)),
                "unexpected binary family: {}",
                def.name
            );
        }
    }
}
