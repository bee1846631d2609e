//! Name-free, structure-driven decoding of solved models, with every
//! reconstruction audit the reports rely on: balance residuals, reservoir
//! bookkeeping, shed proportionality, reserve consistency, loss error, and
//! reconciliation of the recomputed cost breakdown against the solver
//! objective.

use super::{AssembledModel, CaesMode, Incidence, Variant};
use crate::caes::{decode_air_trajectory, AirTrajectory, CaesError, CaesModelKind};
use crate::data::{ScenarioSet, SystemCase};
use crate::lacopf::{loss_error_audit, LossAudit, NetworkVarSet};
use crate::milp::{SolveResult, SolveStatus, VarRef};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DecodeError {
    #[error("cannot decode a solve with status {0:?}")]
    NoSolution(SolveStatus),
    #[error(
        "cost breakdown disagrees with the solver objective: rebuilt {rebuilt}, solver {solver} \
         (relative error {relative})"
    )]
    Reconciliation {
        rebuilt: f64,
        solver: f64,
        relative: f64,
    },
    #[error("scenario set does not match the assembled model")]
    ScenarioMismatch,
    #[error(transparent)]
    Caes(#[from] CaesError),
}

const RECONCILIATION_TOL: f64 = 1e-5;

/// Cost breakdown in dollars. `energy + startup + reserve_capacity +
/// recourse_expected` reconciles against the solver objective;
/// `recourse_expected` itself splits into deployment, spillage, and shedding.
#[derive(Debug, Clone, Copy, Default, Serialize)]
pub struct CostBreakdown {
    pub total: f64,
    pub energy: f64,
    pub startup: f64,
    pub reserve_capacity: f64,
    pub recourse_expected: f64,
    pub deploy_expected: f64,
    pub spill_expected: f64,
    pub shed_expected: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct NetworkScopeState {
    /// `None` for the day-ahead stage, otherwise the scenario index.
    pub scenario: Option<usize>,
    /// Angle difference per `[line][hour]`, radians.
    pub theta: Vec<Vec<f64>>,
    pub flow_mw: Vec<Vec<f64>>,
    pub q_flow_mvar: Option<Vec<Vec<f64>>>,
    pub loss_mw: Option<Vec<Vec<f64>>>,
    pub q_loss_mvar: Option<Vec<Vec<f64>>>,
    pub voltage_deviation: Option<Vec<Vec<f64>>>,
    /// Angle cap in force per `[line][hour]`, radians.
    pub theta_cap: Vec<Vec<f64>>,
    /// Sign selector value per `[line][hour]` (fixed or solved).
    pub sign: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScenarioRecourse {
    pub scenario: usize,
    pub probability: f64,
    pub deploy_up_mw: Vec<Vec<f64>>,
    pub deploy_down_mw: Vec<Vec<f64>>,
    pub caes_deploy_up_mw: Vec<Vec<f64>>,
    pub caes_deploy_down_mw: Vec<Vec<f64>>,
    pub wind_available_mw: Vec<Vec<f64>>,
    pub wind_used_mw: Vec<Vec<f64>>,
    pub shed_mw: Vec<Vec<f64>>,
    pub q_shed_mvar: Option<Vec<Vec<f64>>>,
}

/// Residual audits recomputed from decoded values, independent of the solver
/// status report. A run is trustworthy only if `pass` holds.
#[derive(Debug, Clone, Serialize)]
pub struct SolutionAudits {
    pub objective_reconciliation_rel: f64,
    pub max_active_balance_residual: f64,
    pub max_reactive_balance_residual: f64,
    pub max_flow_equation_residual: f64,
    pub max_air_balance_residual: f64,
    pub max_air_telescoping_residual: f64,
    pub max_shed_ratio_residual: f64,
    pub simultaneous_charge_discharge: bool,
    pub air_within_bounds: bool,
    pub deploy_within_capacity: bool,
    pub loss_audit: Option<LossAudit>,
    pub pass: bool,
}

pub(crate) const BALANCE_TOL: f64 = 1e-6;
pub(crate) const SHED_RATIO_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, Serialize)]
pub struct ModelCounts {
    pub variables: usize,
    pub constraints: usize,
    pub binaries: usize,
    pub delta_binaries: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct ScheduleSolution {
    pub variant: Variant,
    pub caes_mode: CaesMode,
    pub status: SolveStatus,
    pub objective: f64,
    pub best_bound: f64,
    pub gap: f64,
    pub wall_time_s: f64,
    pub commitment: Vec<Vec<bool>>,
    pub startup: Vec<Vec<bool>>,
    pub shutdown: Vec<Vec<bool>>,
    pub dispatch_mw: Vec<Vec<f64>>,
    pub reactive_mvar: Option<Vec<Vec<f64>>>,
    pub reserve_up_mw: Vec<Vec<f64>>,
    pub reserve_down_mw: Vec<Vec<f64>>,
    pub caes: Vec<AirTrajectory>,
    /// Index 0 is the day-ahead scope; scenarios follow in order.
    pub network: Vec<NetworkScopeState>,
    pub recourse: Vec<ScenarioRecourse>,
    pub costs: CostBreakdown,
    pub audits: SolutionAudits,
    pub counts: ModelCounts,
}

impl ScheduleSolution {
    pub fn stage1_network(&self) -> &NetworkScopeState {
        &self.network[0]
    }
}

fn grid(result: &SolveResult, vars: &[Vec<VarRef>], scale: f64) -> Vec<Vec<f64>> {
    vars.iter()
        .map(|row| row.iter().map(|&v| result.value(v) * scale).collect())
        .collect()
}

fn decode_network(
    result: &SolveResult,
    case: &SystemCase,
    net: &NetworkVarSet,
) -> NetworkScopeState {
    let mva = case.mva_base;
    let sign = net
        .theta
        .iter()
        .enumerate()
        .map(|(k, row)| {
            row.iter()
                .enumerate()
                .map(|(t, _)| match &net.delta {
                    Some(delta) => match delta[k][t] {
                        crate::lacopf::DeltaVar::Binary(v) => result.value(v),
                        crate::lacopf::DeltaVar::Fixed(v) => v,
                    },
                    None => f64::NAN,
                })
                .collect()
        })
        .collect();
    NetworkScopeState {
        scenario: net.scope.scenario(),
        theta: grid(result, &net.theta, 1.0),
        flow_mw: grid(result, &net.p_flow, mva),
        q_flow_mvar: net.q_flow.as_ref().map(|v| grid(result, v, mva)),
        loss_mw: net.p_loss.as_ref().map(|v| grid(result, v, mva)),
        q_loss_mvar: net.q_loss.as_ref().map(|v| grid(result, v, mva)),
        voltage_deviation: net.dv.as_ref().map(|v| grid(result, v, 1.0)),
        theta_cap: net.theta_cap.clone(),
        sign,
    }
}

/// Decode a solved model into a schedule, recompute the cost breakdown, and
/// run every audit. Fails if the solve carries no solution or if the rebuilt
/// costs cannot be reconciled with the solver objective.
pub fn decode_solution(
    assembled: &AssembledModel,
    result: &SolveResult,
    case: &SystemCase,
    scenarios: Option<&ScenarioSet>,
) -> Result<ScheduleSolution, DecodeError> {
    if !result.status.has_solution() {
        return Err(DecodeError::NoSolution(result.status));
    }
    if scenarios.map_or(0, |s| s.len()) != assembled.n_scenarios {
        return Err(DecodeError::ScenarioMismatch);
    }
    let mva = case.mva_base;
    let vars = &assembled.vars;
    let thermal = &vars.thermal;

    let commitment: Vec<Vec<bool>> = thermal
        .on
        .iter()
        .map(|row| row.iter().map(|&v| result.value(v) > 0.5).collect())
        .collect();
    let startup: Vec<Vec<bool>> = thermal
        .start
        .iter()
        .map(|row| row.iter().map(|&v| result.value(v) > 0.5).collect())
        .collect();
    let shutdown: Vec<Vec<bool>> = thermal
        .stop
        .iter()
        .map(|row| row.iter().map(|&v| result.value(v) > 0.5).collect())
        .collect();
    let dispatch_mw = grid(result, &thermal.p, mva);
    let reactive_mvar = thermal.q.as_ref().map(|q| grid(result, q, mva));
    let reserve_up_mw = grid(result, &thermal.sr_up, mva);
    let reserve_down_mw = grid(result, &thermal.sr_down, mva);

    let mut caes = Vec::new();
    for (c, caes_vars) in vars.caes.iter().enumerate() {
        let unit = &case.caes_units[c];
        let gm = (caes_vars.kind == CaesModelKind::Gm).then_some(&vars.gm_params[c]);
        caes.push(decode_air_trajectory(result, case, unit, caes_vars, gm)?);
    }

    let mut network = vec![decode_network(result, case, &vars.stage1_net)];
    for scen in &vars.scenarios {
        network.push(decode_network(result, case, &scen.net));
    }

    let mut recourse = Vec::new();
    if let Some(set) = scenarios {
        for (w, scen) in vars.scenarios.iter().enumerate() {
            recourse.push(ScenarioRecourse {
                scenario: w,
                probability: set.probabilities[w],
                deploy_up_mw: grid(result, &scen.deploy_up, mva),
                deploy_down_mw: grid(result, &scen.deploy_down, mva),
                caes_deploy_up_mw: grid(result, &scen.caes_deploy_up, mva),
                caes_deploy_down_mw: grid(result, &scen.caes_deploy_down, mva),
                wind_available_mw: set.realizations[w].clone(),
                wind_used_mw: grid(result, &scen.wind_used, mva),
                shed_mw: grid(result, &scen.shed, mva),
                q_shed_mvar: scen.q_shed.as_ref().map(|q| grid(result, q, mva)),
            });
        }
    }

    let costs = rebuild_costs(
        assembled,
        case,
        &commitment,
        &startup,
        result,
        &recourse,
    );
    let relative = (costs.total - result.objective).abs() / result.objective.abs().max(1.0);
    if relative > RECONCILIATION_TOL {
        return Err(DecodeError::Reconciliation {
            rebuilt: costs.total,
            solver: result.objective,
            relative,
        });
    }

    let audits = run_audits(
        assembled,
        case,
        result,
        &network,
        &caes,
        &recourse,
        &reserve_up_mw,
        &reserve_down_mw,
        relative,
    );

    Ok(ScheduleSolution {
        variant: assembled.variant,
        caes_mode: assembled.caes_mode,
        status: result.status,
        objective: result.objective,
        best_bound: result.best_bound,
        gap: result.gap,
        wall_time_s: result.wall_time.as_secs_f64(),
        commitment,
        startup,
        shutdown,
        dispatch_mw,
        reactive_mvar,
        reserve_up_mw,
        reserve_down_mw,
        caes,
        network,
        recourse,
        costs,
        audits,
        counts: ModelCounts {
            variables: assembled.model.num_variables(),
            constraints: assembled.model.num_constraints(),
            binaries: assembled.total_binaries(),
            delta_binaries: assembled.delta_binaries(),
        },
    })
}

fn rebuild_costs(
    assembled: &AssembledModel,
    case: &SystemCase,
    commitment: &[Vec<bool>],
    startup: &[Vec<bool>],
    result: &SolveResult,
    recourse: &[ScenarioRecourse],
) -> CostBreakdown {
    let mva = case.mva_base;
    let vars = &assembled.vars;
    let mut costs = CostBreakdown::default();

    for (g, unit) in case.thermal_units.iter().enumerate() {
        for t in 0..case.horizon {
            if startup[g][t] {
                costs.startup += unit.startup_cost;
            }
            if commitment[g][t] {
                costs.energy += unit.no_load_cost;
            }
            for (n, block) in unit.cost_blocks.iter().enumerate() {
                costs.energy += block.slope * result.value(vars.thermal.blocks[g][t][n]) * mva;
            }
            costs.reserve_capacity +=
                unit.reserve_price_up * result.value(vars.thermal.sr_up[g][t]) * mva;
            costs.reserve_capacity +=
                unit.reserve_price_down * result.value(vars.thermal.sr_down[g][t]) * mva;
        }
    }

    for (c, caes_vars) in vars.caes.iter().enumerate() {
        let unit = &case.caes_units[c];
        for t in 0..case.horizon {
            costs.energy += unit.energy_price * result.value(caes_vars.p_discharge[t]) * mva;
            costs.reserve_capacity += unit.reserve_price_up * result.value(caes_vars.sr_up[t]) * mva;
            costs.reserve_capacity +=
                unit.reserve_price_down * result.value(caes_vars.sr_down[t]) * mva;
        }
    }

    for scen in recourse {
        let rho = scen.probability;
        for (g, unit) in case.thermal_units.iter().enumerate() {
            for t in 0..case.horizon {
                costs.deploy_expected += rho * unit.deploy_price_up * scen.deploy_up_mw[g][t];
                costs.deploy_expected += rho * unit.deploy_price_down * scen.deploy_down_mw[g][t];
            }
        }
        for (c, unit) in case.caes_units.iter().enumerate().take(scen.caes_deploy_up_mw.len()) {
            for t in 0..case.horizon {
                costs.deploy_expected += rho * unit.deploy_price_up * scen.caes_deploy_up_mw[c][t];
                costs.deploy_expected +=
                    rho * unit.deploy_price_down * scen.caes_deploy_down_mw[c][t];
            }
        }
        for (f, farm) in case.wind_farms.iter().enumerate() {
            for t in 0..case.horizon {
                let spilled = scen.wind_available_mw[f][t] - scen.wind_used_mw[f][t];
                costs.spill_expected += rho * farm.spill_price * spilled;
            }
        }
        for (i, bus) in case.buses.iter().enumerate() {
            for t in 0..case.horizon {
                costs.shed_expected += rho * bus.voll_price * scen.shed_mw[i][t];
            }
        }
    }

    costs.recourse_expected = costs.deploy_expected + costs.spill_expected + costs.shed_expected;
    costs.total = costs.energy + costs.startup + costs.reserve_capacity + costs.recourse_expected;
    costs
}

#[allow(clippy::too_many_arguments)]
fn run_audits(
    assembled: &AssembledModel,
    case: &SystemCase,
    result: &SolveResult,
    network: &[NetworkScopeState],
    caes: &[AirTrajectory],
    recourse: &[ScenarioRecourse],
    reserve_up_mw: &[Vec<f64>],
    reserve_down_mw: &[Vec<f64>],
    reconciliation: f64,
) -> SolutionAudits {
    let inc = Incidence::new(case);
    let vars = &assembled.vars;
    let mva = case.mva_base;
    let value = |v: VarRef| result.value(v);

    // Active balances, recomputed from decoded values. Stage 1 first.
    let mut max_p = 0.0f64;
    let mut max_q = 0.0f64;
    for (i, bus) in case.buses.iter().enumerate() {
        for t in 0..case.horizon {
            let stage1 = &network[0];
            let mut lhs = 0.0;
            for &g in &inc.units_at[i] {
                lhs += value(vars.thermal.p[g][t]);
            }
            for c in 0..vars.caes.len() {
                if case.caes_units[c].bus == i {
                    lhs += value(vars.caes[c].p_discharge[t]) - value(vars.caes[c].p_charge[t]);
                }
            }
            for &f in &inc.farms_at[i] {
                lhs += case.wind_farms[f].forecast[t] / mva;
            }
            for &k in &inc.lines_to[i] {
                lhs += stage1.flow_mw[k][t] / mva;
            }
            for &k in &inc.lines_from[i] {
                lhs -= stage1.flow_mw[k][t] / mva;
            }
            if let Some(loss) = &stage1.loss_mw {
                for &k in inc.lines_to[i].iter().chain(&inc.lines_from[i]) {
                    lhs -= 0.5 * loss[k][t] / mva;
                }
            }
            max_p = max_p.max((lhs - bus.active_load[t] / mva).abs());

            if let (Some(q_gen), Some(q_flows)) = (&vars.thermal.q, &stage1.q_flow_mvar) {
                let mut lhs = 0.0;
                for &g in &inc.units_at[i] {
                    lhs += value(q_gen[g][t]);
                }
                for &k in &inc.lines_to[i] {
                    lhs += q_flows[k][t] / mva;
                }
                for &k in &inc.lines_from[i] {
                    lhs -= q_flows[k][t] / mva;
                }
                if let Some(q_loss) = &stage1.q_loss_mvar {
                    for &k in inc.lines_to[i].iter().chain(&inc.lines_from[i]) {
                        lhs -= 0.5 * q_loss[k][t] / mva;
                    }
                }
                max_q = max_q.max((lhs - bus.reactive_load[t] / mva).abs());
            }
        }
    }

    // Scenario delta balances.
    for (w, scen) in vars.scenarios.iter().enumerate() {
        let state = &network[w + 1];
        let stage1 = &network[0];
        for (i, _bus) in case.buses.iter().enumerate() {
            for t in 0..case.horizon {
                let mut lhs = 0.0;
                for &g in &inc.units_at[i] {
                    lhs += value(scen.deploy_up[g][t]) - value(scen.deploy_down[g][t]);
                }
                for (c, unit) in case.caes_units.iter().enumerate().take(scen.caes_deploy_up.len())
                {
                    if unit.bus == i {
                        lhs += value(scen.caes_deploy_up[c][t]) - value(scen.caes_deploy_down[c][t]);
                    }
                }
                for &f in &inc.farms_at[i] {
                    lhs += value(scen.wind_used[f][t]) - case.wind_farms[f].forecast[t] / mva;
                }
                for &k in &inc.lines_to[i] {
                    lhs += (state.flow_mw[k][t] - stage1.flow_mw[k][t]) / mva;
                }
                for &k in &inc.lines_from[i] {
                    lhs -= (state.flow_mw[k][t] - stage1.flow_mw[k][t]) / mva;
                }
                if let (Some(loss_w), Some(loss_0)) = (&state.loss_mw, &stage1.loss_mw) {
                    for &k in inc.lines_to[i].iter().chain(&inc.lines_from[i]) {
                        lhs -= 0.5 * (loss_w[k][t] - loss_0[k][t]) / mva;
                    }
                }
                lhs += value(scen.shed[i][t]);
                max_p = max_p.max(lhs.abs());
            }
        }
    }

    // Flow equations from decoded angles and voltages.
    let mut max_flow = 0.0f64;
    let scopes: Vec<(&NetworkVarSet, &NetworkScopeState)> = std::iter::once(&vars.stage1_net)
        .chain(vars.scenarios.iter().map(|s| &s.net))
        .zip(network.iter())
        .collect();
    for (net, state) in &scopes {
        for (k, line) in case.lines.iter().enumerate() {
            for t in 0..case.horizon {
                let theta = state.theta[k][t];
                let p = state.flow_mw[k][t] / mva;
                let expected = match &state.voltage_deviation {
                    Some(dv) => (dv[line.from_bus][t] - dv[line.to_bus][t]) * line.g - line.b * theta,
                    None => -line.b * theta,
                };
                max_flow = max_flow.max((p - expected).abs());
                if let (Some(qf), Some(dv)) = (&state.q_flow_mvar, &state.voltage_deviation) {
                    let q = qf[k][t] / mva;
                    let expected = -(1.0 + 2.0 * dv[line.from_bus][t]) * line.b0
                        - (dv[line.from_bus][t] - dv[line.to_bus][t]) * line.b
                        - line.g * theta;
                    max_flow = max_flow.max((q - expected).abs());
                }
            }
        }
        let _ = net;
    }

    // Reservoir audits.
    let mut max_air = 0.0f64;
    let mut max_tele = 0.0f64;
    let mut simultaneous = false;
    let mut air_within = true;
    for (c, trajectory) in caes.iter().enumerate() {
        let unit = &case.caes_units[c];
        max_air = max_air.max(trajectory.max_balance_residual);
        let per_hour = 3600.0 / unit.cavern_capacity;
        let exchanged: f64 = trajectory
            .air_in
            .iter()
            .zip(&trajectory.air_out)
            .map(|(i, o)| (i - o) * per_hour)
            .sum();
        let first = trajectory.level[0];
        let last = trajectory.level[case.horizon];
        max_tele = max_tele.max((last - first - exchanged).abs());
        for t in 0..case.horizon {
            if trajectory.charging[t] && trajectory.discharging[t] {
                simultaneous = true;
            }
        }
        for &level in &trajectory.level {
            if level < unit.a_min - 1e-9 || level > unit.a_max + 1e-9 {
                air_within = false;
            }
        }
    }

    // Shed proportionality and deployment caps.
    let mut max_ratio = 0.0f64;
    let mut deploy_ok = true;
    for scen in recourse {
        if let Some(q_shed) = &scen.q_shed_mvar {
            for (i, bus) in case.buses.iter().enumerate() {
                for t in 0..case.horizon {
                    if bus.active_load[t] > 0.0 {
                        let residual = q_shed[i][t] / mva * bus.active_load[t] / mva
                            - bus.reactive_load[t] / mva * scen.shed_mw[i][t] / mva;
                        max_ratio = max_ratio.max(residual.abs());
                    }
                }
            }
        }
        for g in 0..case.thermal_units.len() {
            for t in 0..case.horizon {
                if scen.deploy_up_mw[g][t] > reserve_up_mw[g][t] + 1e-6
                    || scen.deploy_down_mw[g][t] > reserve_down_mw[g][t] + 1e-6
                {
                    deploy_ok = false;
                }
            }
        }
        for (c, trajectory) in caes.iter().enumerate().take(scen.caes_deploy_up_mw.len()) {
            for t in 0..case.horizon {
                if scen.caes_deploy_up_mw[c][t] > trajectory.reserve_up_mw[t] + 1e-6
                    || scen.caes_deploy_down_mw[c][t] > trajectory.reserve_down_mw[t] + 1e-6
                {
                    deploy_ok = false;
                }
            }
        }
    }

    // Loss error audit over every scope that carries losses, weighted by
    // scenario probability (stage 1 weighs 1).
    let loss_audit = if assembled.variant.network_mode().has_losses() {
        let mut records = Vec::new();
        for (scope_idx, state) in network.iter().enumerate() {
            let Some(loss) = &state.loss_mw else { continue };
            let weight = match state.scenario {
                None => 1.0,
                Some(w) => assembled.probabilities.get(w).copied().unwrap_or(1.0),
            };
            for (k, line) in case.lines.iter().enumerate() {
                for t in 0..case.horizon {
                    records.push((
                        line.id,
                        t + 1,
                        state.scenario,
                        line.g,
                        state.theta[k][t],
                        loss[k][t] / mva,
                        weight,
                    ));
                }
            }
            let _ = scope_idx;
        }
        Some(loss_error_audit(records))
    } else {
        None
    };

    let pass = reconciliation <= RECONCILIATION_TOL
        && max_p <= BALANCE_TOL
        && max_q <= BALANCE_TOL
        && max_flow <= BALANCE_TOL
        && max_air <= BALANCE_TOL
        && max_tele <= BALANCE_TOL
        && max_ratio <= SHED_RATIO_TOL
        && !simultaneous
        && air_within
        && deploy_ok;

    SolutionAudits {
        objective_reconciliation_rel: reconciliation,
        max_active_balance_residual: max_p,
        max_reactive_balance_residual: max_q,
        max_flow_equation_residual: max_flow,
        max_air_balance_residual: max_air,
        max_air_telescoping_residual: max_tele,
        max_shed_ratio_residual: max_ratio,
        simultaneous_charge_discharge: simultaneous,
        air_within_bounds: air_within,
        deploy_within_capacity: deploy_ok,
        loss_audit,
        pass,
    }
}
