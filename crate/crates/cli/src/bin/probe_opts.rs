// Scratch experiment harness (not shipped): solve case30 lac-full with
// different HiGHS option sets to find workable MIP settings.
use gridsched_core::scheduler::{assemble, CaesMode, Variant};
use gridsched_core::{load_case, LinearizationConfig};
use highs::{RowProblem, Sense};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let preset: u32 = args.get(1).map(|s| s.parse().unwrap()).unwrap_or(0);
    let stochastic = preset >= 20;
    let case_path = if stochastic { "fixtures/case30_wind_caes.case" } else { "fixtures/case30.case" };
    let case = load_case(case_path).unwrap();
    let scen = stochastic.then(|| {
        gridsched_core::load_scenarios("fixtures/wind15.scen", &case).unwrap()
    });
    let config = LinearizationConfig::default();
    let variant = if stochastic { Variant::LacLossless } else { Variant::LacFull };
    let caes_mode = if stochastic { CaesMode::Tbm } else { CaesMode::None };
    let mut assembled =
        assemble(&case, scen.as_ref(), &config, variant, caes_mode, None).unwrap();
    if preset == 11 {
        // Pin the commitment pattern: everything on all day.
        for g in 0..case.thermal_units.len() {
            for t in 0..case.horizon {
                let u = assembled.vars.thermal.on[g][t];
                let y = assembled.vars.thermal.start[g][t];
                let z = assembled.vars.thermal.stop[g][t];
                assembled.model.set_variable_bounds(u, 1.0, 1.0).unwrap();
                let y_fix = if t == 0 { 1.0 } else { 0.0 };
                assembled.model.set_variable_bounds(y, y_fix, y_fix).unwrap();
                assembled.model.set_variable_bounds(z, 0.0, 0.0).unwrap();
            }
        }
    }
    let model = &assembled.model;

    let relax = preset == 8 || preset == 20 || preset == 21;
    let mut pb = RowProblem::default();
    let mut cols = Vec::new();
    for (i, def) in model.variables().iter().enumerate() {
        let cost = model.objective_coefficients()[i];
        let col = if relax || def.kind == gridsched_core::milp::VarKind::Continuous {
            pb.add_column(cost, def.lo..=def.hi)
        } else {
            pb.add_integer_column(cost, def.lo..=def.hi)
        };
        cols.push(col);
    }
    for con in model.constraints() {
        let terms: Vec<_> = con.terms.iter().map(|&(v, c)| (cols[v.index()], c)).collect();
        match con.sense {
            gridsched_core::milp::Sense::Le => pb.add_row(..=con.rhs, &terms),
            gridsched_core::milp::Sense::Eq => pb.add_row(con.rhs..=con.rhs, &terms),
            gridsched_core::milp::Sense::Ge => pb.add_row(con.rhs.., &terms),
        };
    }
    let mut m = pb.optimise(Sense::Minimise);
    m.set_option("output_flag", true);
    m.set_option("log_to_console", true);
    m.set_option("time_limit", 150.0);
    m.set_option("mip_rel_gap", 1e-3);
    m.set_option("threads", 1);
    match preset {
        20 => {
            m.set_option("solver", "ipm");
            m.set_option("run_crossover", "on");
        }
        21 => {}
        22 => {
            // Full stochastic lossless MIP with ipm root.
            m.set_option("mip_lp_solver", "ipm");
            m.set_option("time_limit", 600.0);
            m.set_option("mip_rel_gap", 1e-2);
        }
        1 => m.set_option("mip_lp_age_limit", 0),
        2 => m.set_option("mip_heuristic_effort", 1.0),
        3 => m.set_option("mip_rel_gap", 1e-2),
        4 => {
            m.set_option("mip_lp_age_limit", 0);
            m.set_option("mip_heuristic_effort", 0.5);
        }
        5 => m.set_option("presolve", "off"),
        6 => m.set_option("mip_detect_symmetry", false),
        7 => {
            m.set_option("simplex_scale_strategy", 4);
        }
        9 => {
            m.set_option("mip_pscost_minreliable", 0);
            m.set_option("mip_heuristic_effort", 0.5);
        }
        14 => {
            m.set_option("mip_heuristic_run_feasibility_jump", true);
            m.set_option("mip_heuristic_run_rens", true);
            m.set_option("mip_heuristic_run_rins", true);
            m.set_option("mip_heuristic_run_zi_round", true);
            m.set_option("mip_heuristic_run_shifting", true);
            m.set_option("mip_heuristic_effort", 1.0);
            m.set_option("mip_pscost_minreliable", 0);
        }
        12 => {
            m.set_option("primal_feasibility_tolerance", 1e-7);
            m.set_option("mip_feasibility_tolerance", 1e-6);
        }
        10 => {
            m.set_option("mip_pscost_minreliable", 0);
            m.set_option("mip_heuristic_effort", 0.5);
            m.set_option("mip_lp_age_limit", 0);
        }
        _ => {}
    }
    if preset == 13 {
        // Manual pump: relax, round the sign binaries by the relaxed angle
        // sign, fix the commitment all-on, solve the remaining LP.
        use gridsched_core::milp::{Backend, SolveLimits};
        let backend = gridsched_core::HighsBackend::new();
        let mut relaxed = assembled.model.clone();
        // LP relaxation via bound-free binaries is not expressible here, so
        // solve the MIP of the *lossless* variant instead for angle signs.
        let lossless = assemble(
            &case,
            None,
            &config,
            Variant::LacLossless,
            CaesMode::None,
            None,
        )
        .unwrap();
        let limits = SolveLimits { mip_gap: 1e-3, time_limit: 120.0, threads: 1 };
        let base = backend.solve(&lossless.model, &limits).unwrap();
        println!("lossless status {:?}", base.status);
        // Fix deltas by the lossless angle signs; pin everything on.
        for g in 0..case.thermal_units.len() {
            for t in 0..case.horizon {
                relaxed
                    .set_variable_bounds(assembled.vars.thermal.on[g][t], 1.0, 1.0)
                    .unwrap();
                let y = if t == 0 { 1.0 } else { 0.0 };
                relaxed
                    .set_variable_bounds(assembled.vars.thermal.start[g][t], y, y)
                    .unwrap();
                relaxed
                    .set_variable_bounds(assembled.vars.thermal.stop[g][t], 0.0, 0.0)
                    .unwrap();
            }
        }
        for (k, per_t) in assembled.vars.stage1_net.delta.as_ref().unwrap().iter().enumerate() {
            for (t, dv) in per_t.iter().enumerate() {
                if let gridsched_core::lacopf::DeltaVar::Binary(d) = dv {
                    let theta = base.value(lossless.vars.stage1_net.theta[k][t]);
                    let fix = if theta >= 0.0 { 1.0 } else { 0.0 };
                    relaxed.set_variable_bounds(*d, fix, fix).unwrap();
                }
            }
        }
        let fixed = backend.solve(&relaxed, &limits).unwrap();
        println!("fixed-LP status {:?} obj {}", fixed.status, fixed.objective);
        return;
    }
    let start = Instant::now();
    let solved = m.solve();
    println!(
        "preset {preset}: status {:?} obj {} in {:?}",
        solved.status(),
        solved.objective_value(),
        start.elapsed()
    );
}
