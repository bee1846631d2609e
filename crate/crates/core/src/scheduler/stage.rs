//! Constraint and objective emission for both stages.
//!
//! Sign conventions (unit-tested on a two-bus case): line flows are defined
//! from -> to; a bus balance subtracts flows leaving it, adds flows entering
//! it, and carries half of each incident line's loss as extra load. Units
//! start the day offline. Stage-two balances are deltas against stage-one
//! quantities, so only deviations from the day-ahead plan appear.

use super::{Incidence, ModelVars, ScenarioVars};
use crate::data::{ScenarioSet, SystemCase};
use crate::lacopf::{
    emit_flow_and_loss, emit_thermal_capacity, LinearizationConfig,
};
use crate::milp::{ConstraintId, LinExpr, MilpModel, Sense};
use crate::scheduler::{BuildError, CaesMode};

/// Day-ahead commitment, dispatch, reserve, and network constraints, plus the
/// stage-one objective terms.
pub fn build_first_stage(
    model: &mut MilpModel,
    case: &SystemCase,
    config: &LinearizationConfig,
    caes_mode: CaesMode,
    vars: &ModelVars,
) -> Result<Vec<ConstraintId>, BuildError> {
    let mut ids = Vec::new();
    let mva = case.mva_base;
    let tau = case.reserve_resolution;
    let t_count = case.horizon;
    let thermal = &vars.thermal;

    for (g, unit) in case.thermal_units.iter().enumerate() {
        let id = unit.id;
        for t in 0..t_count {
            let tag = |name: &str| format!("{name}_g{id}_t{}", t + 1);

            // Objective: startup + no-load + piecewise energy + reserve prices.
            model.add_objective_term(thermal.start[g][t], unit.startup_cost)?;
            model.add_objective_term(thermal.on[g][t], unit.no_load_cost)?;
            for (n, block) in unit.cost_blocks.iter().enumerate() {
                model.add_objective_term(thermal.blocks[g][t][n], block.slope * mva)?;
            }
            model.add_objective_term(thermal.sr_up[g][t], unit.reserve_price_up * mva)?;
            model.add_objective_term(thermal.sr_down[g][t], unit.reserve_price_down * mva)?;

            // Start/stop bookkeeping against an offline initial state.
            let mut transition = LinExpr::new()
                .term(thermal.start[g][t], 1.0)
                .term(thermal.stop[g][t], -1.0)
                .term(thermal.on[g][t], -1.0);
            if t > 0 {
                transition.push(thermal.on[g][t - 1], 1.0);
            }
            ids.push(model.add_constraint(transition, Sense::Eq, 0.0, tag("Commit"))?);
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(thermal.start[g][t], 1.0)
                    .term(thermal.stop[g][t], 1.0),
                Sense::Le,
                1.0,
                tag("StartStop"),
            )?);

            // Minimum up: a start at t blocks stops for the next MU-1 hours.
            if unit.min_up > 1 {
                let mut window = LinExpr::new().term(thermal.start[g][t], 1.0);
                let mut any = false;
                for n in 1..unit.min_up as usize {
                    if t + n < t_count {
                        window.push(thermal.stop[g][t + n], 1.0);
                        any = true;
                    }
                }
                if any {
                    ids.push(model.add_constraint(window, Sense::Le, 1.0, tag("MinUp"))?);
                }
            }
            // Minimum down: a stop at t blocks starts for the next MD-1 hours.
            if unit.min_down > 1 {
                let mut window = LinExpr::new().term(thermal.stop[g][t], 1.0);
                let mut any = false;
                for n in 1..unit.min_down as usize {
                    if t + n < t_count {
                        window.push(thermal.start[g][t + n], 1.0);
                        any = true;
                    }
                }
                if any {
                    ids.push(model.add_constraint(window, Sense::Le, 1.0, tag("MinDown"))?);
                }
            }

            // Piecewise energy: P = Pmin U + sum of block fills.
            let mut energy = LinExpr::new()
                .term(thermal.p[g][t], 1.0)
                .term(thermal.on[g][t], -unit.p_min / mva);
            for &b in &thermal.blocks[g][t] {
                energy.push(b, -1.0);
            }
            ids.push(model.add_constraint(energy, Sense::Eq, 0.0, tag("Energy"))?);

            // Capacity windows and reserve headroom.
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(thermal.p[g][t], 1.0)
                    .term(thermal.on[g][t], -unit.p_max / mva),
                Sense::Le,
                0.0,
                tag("PMax"),
            )?);
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(thermal.p[g][t], 1.0)
                    .term(thermal.on[g][t], -unit.p_min / mva),
                Sense::Ge,
                0.0,
                tag("PMin"),
            )?);
            if let Some(q) = &thermal.q {
                ids.push(model.add_constraint(
                    LinExpr::new()
                        .term(q[g][t], 1.0)
                        .term(thermal.on[g][t], -unit.q_max / mva),
                    Sense::Le,
                    0.0,
                    tag("QMax"),
                )?);
                ids.push(model.add_constraint(
                    LinExpr::new()
                        .term(q[g][t], 1.0)
                        .term(thermal.on[g][t], -unit.q_min / mva),
                    Sense::Ge,
                    0.0,
                    tag("QMin"),
                )?);
            }
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(thermal.p[g][t], 1.0)
                    .term(thermal.sr_up[g][t], 1.0)
                    .term(thermal.on[g][t], -unit.p_max / mva),
                Sense::Le,
                0.0,
                tag("Headroom"),
            )?);
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(thermal.p[g][t], 1.0)
                    .term(thermal.sr_down[g][t], -1.0)
                    .term(thermal.on[g][t], -unit.p_min / mva),
                Sense::Ge,
                0.0,
                tag("Footroom"),
            )?);
            // Reserve no larger than what the ramp covers in tau hours, and
            // only from committed units.
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(thermal.sr_up[g][t], 1.0)
                    .term(thermal.on[g][t], -unit.ramp_up * tau / mva),
                Sense::Le,
                0.0,
                tag("SrUpCap"),
            )?);
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(thermal.sr_down[g][t], 1.0)
                    .term(thermal.on[g][t], -unit.ramp_down * tau / mva),
                Sense::Le,
                0.0,
                tag("SrDownCap"),
            )?);
        }
    }

    // CAES market offers.
    if caes_mode != CaesMode::None {
        for (c, caes) in case.caes_units.iter().enumerate() {
            for t in 0..t_count {
                model.add_objective_term(vars.caes[c].p_discharge[t], caes.energy_price * mva)?;
                model.add_objective_term(vars.caes[c].sr_up[t], caes.reserve_price_up * mva)?;
                model.add_objective_term(vars.caes[c].sr_down[t], caes.reserve_price_down * mva)?;
            }
        }
    }

    // Network physics for the day-ahead scope.
    ids.extend(emit_flow_and_loss(model, case, config, &vars.stage1_net)?);
    if vars.stage1_net.mode.has_voltage() {
        for k in 0..case.lines.len() {
            ids.extend(emit_thermal_capacity(
                model,
                case,
                k,
                config.polygon_segments,
                &vars.stage1_net,
            )?);
        }
    }

    ids.extend(emit_stage1_balances(model, case, caes_mode, vars)?);
    Ok(ids)
}

fn emit_stage1_balances(
    model: &mut MilpModel,
    case: &SystemCase,
    caes_mode: CaesMode,
    vars: &ModelVars,
) -> Result<Vec<ConstraintId>, BuildError> {
    let mut ids = Vec::new();
    let inc = Incidence::new(case);
    let mva = case.mva_base;
    let net = &vars.stage1_net;

    for (i, bus) in case.buses.iter().enumerate() {
        for t in 0..case.horizon {
            // Active: generation + storage + wind forecast +/- line flows
            // minus half losses equals demand.
            let mut expr = LinExpr::new();
            for &g in &inc.units_at[i] {
                expr.push(vars.thermal.p[g][t], 1.0);
            }
            if caes_mode != CaesMode::None {
                for &c in &inc.caes_at[i] {
                    expr.push(vars.caes[c].p_discharge[t], 1.0);
                    expr.push(vars.caes[c].p_charge[t], -1.0);
                }
            }
            for &k in &inc.lines_to[i] {
                expr.push(net.p_flow[k][t], 1.0);
            }
            for &k in &inc.lines_from[i] {
                expr.push(net.p_flow[k][t], -1.0);
            }
            if let Some(p_loss) = &net.p_loss {
                for &k in inc.lines_to[i].iter().chain(&inc.lines_from[i]) {
                    expr.push(p_loss[k][t], -0.5);
                }
            }
            let wind: f64 = inc.farms_at[i]
                .iter()
                .map(|&f| case.wind_farms[f].forecast[t])
                .sum();
            let rhs = (bus.active_load[t] - wind) / mva;
            ids.push(model.add_constraint(
                expr,
                Sense::Eq,
                rhs,
                format!("BalP_b{}_t{}", bus.id, t + 1),
            )?);

            if let Some(q_gen) = &vars.thermal.q {
                let q_flow = net.q_flow.as_ref().unwrap();
                let mut expr = LinExpr::new();
                for &g in &inc.units_at[i] {
                    expr.push(q_gen[g][t], 1.0);
                }
                for &k in &inc.lines_to[i] {
                    expr.push(q_flow[k][t], 1.0);
                }
                for &k in &inc.lines_from[i] {
                    expr.push(q_flow[k][t], -1.0);
                }
                if let Some(q_loss) = &net.q_loss {
                    for &k in inc.lines_to[i].iter().chain(&inc.lines_from[i]) {
                        expr.push(q_loss[k][t], -0.5);
                    }
                }
                ids.push(model.add_constraint(
                    expr,
                    Sense::Eq,
                    bus.reactive_load[t] / mva,
                    format!("BalQ_b{}_t{}", bus.id, t + 1),
                )?);
            }
        }
    }
    Ok(ids)
}

/// Scenario recourse: deployment caps, wind windows, shedding, delta
/// balances, scenario network physics, ramp feasibility, and the
/// probability-weighted objective terms.
pub fn build_second_stage(
    model: &mut MilpModel,
    case: &SystemCase,
    set: &ScenarioSet,
    config: &LinearizationConfig,
    vars: &mut ModelVars,
) -> Result<Vec<ConstraintId>, BuildError> {
    let mut ids = Vec::new();
    for w in 0..set.len() {
        let rho = set.probabilities[w];
        // Split borrow: scenario block is emitted against the shared
        // first-stage variables.
        let scenario = vars.scenarios[w].clone();
        ids.extend(emit_scenario(model, case, set, config, vars, &scenario, rho)?);
    }
    Ok(ids)
}

fn emit_scenario(
    model: &mut MilpModel,
    case: &SystemCase,
    set: &ScenarioSet,
    config: &LinearizationConfig,
    vars: &ModelVars,
    scen: &ScenarioVars,
    rho: f64,
) -> Result<Vec<ConstraintId>, BuildError> {
    let mut ids = Vec::new();
    let mva = case.mva_base;
    let t_count = case.horizon;
    let w = scen.scenario;
    let thermal = &vars.thermal;

    // Deployment bounded by the procured capacity; objective prices the
    // expected deployment.
    for (g, unit) in case.thermal_units.iter().enumerate() {
        for t in 0..t_count {
            let tag = |name: &str| format!("{name}_g{}_t{}_w{w}", unit.id, t + 1);
            model.add_objective_term(scen.deploy_up[g][t], rho * unit.deploy_price_up * mva)?;
            model.add_objective_term(scen.deploy_down[g][t], rho * unit.deploy_price_down * mva)?;
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(scen.deploy_up[g][t], 1.0)
                    .term(thermal.sr_up[g][t], -1.0),
                Sense::Le,
                0.0,
                tag("DeployUp"),
            )?);
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(scen.deploy_down[g][t], 1.0)
                    .term(thermal.sr_down[g][t], -1.0),
                Sense::Le,
                0.0,
                tag("DeployDown"),
            )?);
            if let Some(q) = &scen.q {
                ids.push(model.add_constraint(
                    LinExpr::new()
                        .term(q[g][t], 1.0)
                        .term(thermal.on[g][t], -unit.q_max / mva),
                    Sense::Le,
                    0.0,
                    tag("QMax"),
                )?);
                ids.push(model.add_constraint(
                    LinExpr::new()
                        .term(q[g][t], 1.0)
                        .term(thermal.on[g][t], -unit.q_min / mva),
                    Sense::Ge,
                    0.0,
                    tag("QMin"),
                )?);
            }
        }
        // Ramp feasibility of the deployed operating point between
        // consecutive hours.
        for t in 0..t_count.saturating_sub(1) {
            let tag = |name: &str| format!("{name}_g{}_t{}_w{w}", unit.id, t + 1);
            let up = LinExpr::new()
                .term(thermal.p[g][t + 1], 1.0)
                .term(scen.deploy_up[g][t + 1], 1.0)
                .term(scen.deploy_down[g][t + 1], -1.0)
                .term(thermal.p[g][t], -1.0)
                .term(scen.deploy_up[g][t], -1.0)
                .term(scen.deploy_down[g][t], 1.0);
            ids.push(model.add_constraint(up, Sense::Le, unit.ramp_up / mva, tag("RampUp"))?);
            let down = LinExpr::new()
                .term(thermal.p[g][t], 1.0)
                .term(scen.deploy_up[g][t], 1.0)
                .term(scen.deploy_down[g][t], -1.0)
                .term(thermal.p[g][t + 1], -1.0)
                .term(scen.deploy_up[g][t + 1], -1.0)
                .term(scen.deploy_down[g][t + 1], 1.0);
            ids.push(model.add_constraint(down, Sense::Le, unit.ramp_down / mva, tag("RampDown"))?);
        }
    }

    for c in 0..vars.caes.len() {
        let caes = &case.caes_units[c];
        for t in 0..t_count {
            let tag = |name: &str| format!("{name}_c{}_t{}_w{w}", caes.id, t + 1);
            model.add_objective_term(scen.caes_deploy_up[c][t], rho * caes.deploy_price_up * mva)?;
            model
                .add_objective_term(scen.caes_deploy_down[c][t], rho * caes.deploy_price_down * mva)?;
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(scen.caes_deploy_up[c][t], 1.0)
                    .term(vars.caes[c].sr_up[t], -1.0),
                Sense::Le,
                0.0,
                tag("CaesDeployUp"),
            )?);
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(scen.caes_deploy_down[c][t], 1.0)
                    .term(vars.caes[c].sr_down[t], -1.0),
                Sense::Le,
                0.0,
                tag("CaesDeployDown"),
            )?);
        }
    }

    // Wind: pay for spillage (available minus used); the constant part of
    // the spill cost goes to the objective offset.
    for (f, farm) in case.wind_farms.iter().enumerate() {
        for t in 0..t_count {
            let available = set.realizations[w][f][t];
            model.add_objective_term(scen.wind_used[f][t], -rho * farm.spill_price * mva)?;
            model.add_objective_constant(rho * farm.spill_price * available);
        }
    }

    // Shedding cost.
    for (i, bus) in case.buses.iter().enumerate() {
        for t in 0..t_count {
            model.add_objective_term(scen.shed[i][t], rho * bus.voll_price * mva)?;
        }
    }

    // Scenario network physics.
    ids.extend(emit_flow_and_loss(model, case, config, &scen.net)?);
    if scen.net.mode.has_voltage() {
        for k in 0..case.lines.len() {
            ids.extend(emit_thermal_capacity(
                model,
                case,
                k,
                config.polygon_segments,
                &scen.net,
            )?);
        }
    }

    // Delta balances against stage one.
    let inc = Incidence::new(case);
    let stage1 = &vars.stage1_net;
    for (i, bus) in case.buses.iter().enumerate() {
        for t in 0..t_count {
            let mut expr = LinExpr::new();
            for &g in &inc.units_at[i] {
                expr.push(scen.deploy_up[g][t], 1.0);
                expr.push(scen.deploy_down[g][t], -1.0);
            }
            if !vars.caes.is_empty() {
                for &c in &inc.caes_at[i] {
                    expr.push(scen.caes_deploy_up[c][t], 1.0);
                    expr.push(scen.caes_deploy_down[c][t], -1.0);
                }
            }
            let mut forecast_const = 0.0;
            for &f in &inc.farms_at[i] {
                expr.push(scen.wind_used[f][t], 1.0);
                forecast_const += case.wind_farms[f].forecast[t] / mva;
            }
            for &k in &inc.lines_to[i] {
                expr.push(scen.net.p_flow[k][t], 1.0);
                expr.push(stage1.p_flow[k][t], -1.0);
            }
            for &k in &inc.lines_from[i] {
                expr.push(scen.net.p_flow[k][t], -1.0);
                expr.push(stage1.p_flow[k][t], 1.0);
            }
            if let (Some(pl_w), Some(pl_0)) = (&scen.net.p_loss, &stage1.p_loss) {
                for &k in inc.lines_to[i].iter().chain(&inc.lines_from[i]) {
                    expr.push(pl_w[k][t], -0.5);
                    expr.push(pl_0[k][t], 0.5);
                }
            }
            expr.push(scen.shed[i][t], 1.0);
            ids.push(model.add_constraint(
                expr,
                Sense::Eq,
                forecast_const,
                format!("BalPw_b{}_t{}_w{w}", bus.id, t + 1),
            )?);

            if let Some(q_scen) = &scen.q {
                let q_stage1 = thermal.q.as_ref().unwrap();
                let qf_w = scen.net.q_flow.as_ref().unwrap();
                let qf_0 = stage1.q_flow.as_ref().unwrap();
                let q_shed = scen.q_shed.as_ref().unwrap();
                let mut expr = LinExpr::new();
                for &g in &inc.units_at[i] {
                    expr.push(q_scen[g][t], 1.0);
                    expr.push(q_stage1[g][t], -1.0);
                }
                for &k in &inc.lines_to[i] {
                    expr.push(qf_w[k][t], 1.0);
                    expr.push(qf_0[k][t], -1.0);
                }
                for &k in &inc.lines_from[i] {
                    expr.push(qf_w[k][t], -1.0);
                    expr.push(qf_0[k][t], 1.0);
                }
                if let (Some(ql_w), Some(ql_0)) = (&scen.net.q_loss, &stage1.q_loss) {
                    for &k in inc.lines_to[i].iter().chain(&inc.lines_from[i]) {
                        expr.push(ql_w[k][t], -0.5);
                        expr.push(ql_0[k][t], 0.5);
                    }
                }
                expr.push(q_shed[i][t], 1.0);
                ids.push(model.add_constraint(
                    expr,
                    Sense::Eq,
                    0.0,
                    format!("BalQw_b{}_t{}_w{w}", bus.id, t + 1),
                )?);

                // Reactive shedding proportional to active shedding:
                // QILS * PD = QD * PILS (parameters PD, QD). Where there is
                // no active load the shed bounds already pin both to zero.
                let pd = bus.active_load[t] / mva;
                let qd = bus.reactive_load[t] / mva;
                if pd > 1e-12 {
                    ids.push(model.add_constraint(
                        LinExpr::new()
                            .term(q_shed[i][t], pd)
                            .term(scen.shed[i][t], -qd),
                        Sense::Eq,
                        0.0,
                        format!("ShedRatio_b{}_t{}_w{w}", bus.id, t + 1),
                    )?);
                }
            }
        }
    }

    Ok(ids)
}
