//! Two-stage stochastic scheduling: assemble the co-optimized energy and
//! reserve problem in one of four network variants, solve it, decode it.
//!
//! Stage one commits and dispatches the fleet against the wind forecast;
//! stage two prices the expected cost of balancing each wind scenario with
//! deployed reserves, spillage, and (as a last resort) load shedding. The
//! two-level driver in [`two_level`] first solves the lossless variant to
//! learn angle signs and operating points, then re-solves the full model
//! with those signs fixed and per-line angle caps.

mod decode;
mod solve;
mod stage;
mod two_level;

pub use decode::{
    decode_solution, CostBreakdown, DecodeError, ModelCounts, NetworkScopeState, ScenarioRecourse,
    ScheduleSolution, SolutionAudits,
};
pub use solve::{solve_single_level, SingleLevelError, SingleLevelOutcome};
pub use two_level::{
    extract_first_level, solve_two_level, FirstLevelArtifacts, TwoLevelError, TwoLevelOutcome,
};

use crate::caes::{
    default_big_m, default_gm_params, emit_gm_air_dynamics, emit_power_capacity,
    emit_tbm_air_dynamics, CaesError, CaesModelKind, CaesVarSet, GmParams,
};
use crate::data::{ScenarioSet, SystemCase};
use crate::lacopf::{
    LacError, LinearizationConfig, NetworkMode, NetworkVarSet, Scope, SignFix, SignSource,
    ThetaMaxSource,
};
use crate::milp::{MilpModel, ModelError, VarRef};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Network treatment of one scheduling run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    /// Lossless B-theta flows, active power only.
    Dc,
    /// Linearized AC without losses (the two-level driver's first level).
    LacLossless,
    /// Full linearized AC with piecewise losses, single level.
    LacFull,
    /// Full linearized AC built from first-level artifacts: signs fixed,
    /// per-line adaptive angle caps.
    TlLac,
}

impl Variant {
    pub fn network_mode(self) -> NetworkMode {
        match self {
            Variant::Dc => NetworkMode::Dc,
            Variant::LacLossless => NetworkMode::LacLossless,
            Variant::LacFull | Variant::TlLac => NetworkMode::LacFull,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            Variant::Dc => "dc",
            Variant::LacLossless => "lac-lossless",
            Variant::LacFull => "lac-full",
            Variant::TlLac => "tl-lac",
        }
    }
}

/// Storage treatment: ignore the case's CAES units, model them generically,
/// or model their thermodynamic step curves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum CaesMode {
    None,
    Gm,
    Tbm,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("variant {0:?} requires first-level artifacts")]
    MissingArtifacts(Variant),
    #[error("first-level artifacts do not match the case dimensions ({0})")]
    ArtifactShape(String),
    #[error("scenario set does not match the case ({0})")]
    ScenarioShape(String),
    #[error(transparent)]
    Lac(#[from] LacError),
    #[error(transparent)]
    Caes(#[from] CaesError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// First-stage thermal decision variables, `[unit][hour]`.
#[derive(Debug, Clone)]
pub struct ThermalVars {
    pub on: Vec<Vec<VarRef>>,
    pub start: Vec<Vec<VarRef>>,
    pub stop: Vec<Vec<VarRef>>,
    pub p: Vec<Vec<VarRef>>,
    /// Stage-1 reactive output; absent under DC.
    pub q: Option<Vec<Vec<VarRef>>>,
    /// Fuel-cost block fills, `[unit][hour][block]`, p.u.
    pub blocks: Vec<Vec<Vec<VarRef>>>,
    pub sr_up: Vec<Vec<VarRef>>,
    pub sr_down: Vec<Vec<VarRef>>,
}

/// Recourse variables of one scenario.
#[derive(Debug, Clone)]
pub struct ScenarioVars {
    pub scenario: usize,
    /// Deployed thermal reserve, `[unit][hour]`, p.u.
    pub deploy_up: Vec<Vec<VarRef>>,
    pub deploy_down: Vec<Vec<VarRef>>,
    /// Scenario reactive output of thermal units (LAC modes).
    pub q: Option<Vec<Vec<VarRef>>>,
    /// Deployed CAES reserve, `[caes][hour]`, p.u.
    pub caes_deploy_up: Vec<Vec<VarRef>>,
    pub caes_deploy_down: Vec<Vec<VarRef>>,
    /// Wind actually injected, `[farm][hour]`, p.u.; spillage is the
    /// realization minus this.
    pub wind_used: Vec<Vec<VarRef>>,
    /// Involuntary load shedding, `[bus][hour]`, p.u.
    pub shed: Vec<Vec<VarRef>>,
    /// Reactive shedding tied to active shedding by the load power factor.
    pub q_shed: Option<Vec<Vec<VarRef>>>,
    pub net: NetworkVarSet,
}

#[derive(Debug, Clone)]
pub struct ModelVars {
    pub thermal: ThermalVars,
    pub caes: Vec<CaesVarSet>,
    pub gm_params: Vec<GmParams>,
    pub stage1_net: NetworkVarSet,
    pub scenarios: Vec<ScenarioVars>,
}

/// A built model plus everything needed to decode its solution.
#[derive(Debug, Clone)]
pub struct AssembledModel {
    pub model: MilpModel,
    pub vars: ModelVars,
    pub variant: Variant,
    pub caes_mode: CaesMode,
    pub config: LinearizationConfig,
    pub n_scenarios: usize,
    /// Scenario probabilities captured at build time (empty when
    /// deterministic).
    pub probabilities: Vec<f64>,
}

impl AssembledModel {
    /// Angle-sign binaries actually present in the model.
    pub fn delta_binaries(&self) -> usize {
        self.model.binaries_with_prefix("delta_")
    }

    pub fn total_binaries(&self) -> usize {
        self.model.num_binaries()
    }
}

/// Build the complete two-stage model for a variant. `first_level` feeds the
/// sign fixes and adaptive angle caps and is required (only) for
/// [`Variant::TlLac`]. Deterministic: same inputs give the same variable and
/// constraint ordering.
pub fn assemble(
    case: &SystemCase,
    scenarios: Option<&ScenarioSet>,
    config: &LinearizationConfig,
    variant: Variant,
    caes_mode: CaesMode,
    first_level: Option<&FirstLevelArtifacts>,
) -> Result<AssembledModel, BuildError> {
    config.validate()?;
    if let Some(set) = scenarios {
        check_scenario_shape(case, set)?;
    }
    let n_scenarios = scenarios.map_or(0, |s| s.len());

    let (theta_source, sign_source) = match variant {
        Variant::TlLac => {
            let artifacts = first_level.ok_or(BuildError::MissingArtifacts(variant))?;
            artifacts.check_shape(case, n_scenarios)?;
            (
                artifacts.theta_caps(config),
                artifacts.sign_fixes(config.fix_scenario_signs),
            )
        }
        _ => (
            ThetaMaxSource::Global(config.theta_max),
            SignSource::AllFree,
        ),
    };

    let mode = variant.network_mode();
    let mut model = MilpModel::new();

    let thermal = allocate_thermal(&mut model, case, mode)?;

    let mut caes_vars = Vec::new();
    let mut gm_params = Vec::new();
    if caes_mode != CaesMode::None {
        let kind = match caes_mode {
            CaesMode::Gm => CaesModelKind::Gm,
            _ => CaesModelKind::Tbm,
        };
        for caes in &case.caes_units {
            caes_vars.push(CaesVarSet::allocate(&mut model, case, caes, kind)?);
            gm_params.push(default_gm_params(caes));
        }
    }

    let stage1_net = NetworkVarSet::allocate(
        &mut model,
        case,
        Scope::Stage1,
        mode,
        config,
        &theta_source,
        &sign_source,
    )?;

    let mut scenario_vars = Vec::new();
    if let Some(set) = scenarios {
        for w in 0..set.len() {
            scenario_vars.push(allocate_scenario(
                &mut model,
                case,
                set,
                w,
                mode,
                config,
                &theta_source,
                &sign_source,
                caes_mode != CaesMode::None,
            )?);
        }
    }

    let mut vars = ModelVars {
        thermal,
        caes: caes_vars,
        gm_params,
        stage1_net,
        scenarios: scenario_vars,
    };

    stage::build_first_stage(&mut model, case, config, caes_mode, &vars)?;
    for caes_idx in 0..vars.caes.len() {
        let caes = &case.caes_units[caes_idx];
        emit_power_capacity(&mut model, case, caes, &vars.caes[caes_idx])?;
        match caes_mode {
            CaesMode::Tbm => {
                let big_m = config.big_m.unwrap_or_else(|| default_big_m(caes));
                emit_tbm_air_dynamics(&mut model, case, caes, &vars.caes[caes_idx], big_m)?;
            }
            CaesMode::Gm => {
                let params = vars.gm_params[caes_idx];
                emit_gm_air_dynamics(&mut model, case, caes, &vars.caes[caes_idx], &params)?;
            }
            CaesMode::None => unreachable!(),
        }
    }
    if let Some(set) = scenarios {
        stage::build_second_stage(&mut model, case, set, config, &mut vars)?;
    }

    Ok(AssembledModel {
        model,
        vars,
        variant,
        caes_mode,
        config: config.clone(),
        n_scenarios,
        probabilities: scenarios.map_or_else(Vec::new, |s| s.probabilities.clone()),
    })
}

fn check_scenario_shape(case: &SystemCase, set: &ScenarioSet) -> Result<(), BuildError> {
    if set.is_empty() {
        return Err(BuildError::ScenarioShape("no scenarios".into()));
    }
    if set.probabilities.len() != set.realizations.len() {
        return Err(BuildError::ScenarioShape(
            "probability/realization count mismatch".into(),
        ));
    }
    for (w, farms) in set.realizations.iter().enumerate() {
        if farms.len() != case.wind_farms.len() {
            return Err(BuildError::ScenarioShape(format!(
                "scenario {w} covers {} farms, case has {}",
                farms.len(),
                case.wind_farms.len()
            )));
        }
        for series in farms {
            if series.len() != case.horizon {
                return Err(BuildError::ScenarioShape(format!(
                    "scenario {w} has a series of length {}, horizon is {}",
                    series.len(),
                    case.horizon
                )));
            }
        }
    }
    Ok(())
}

fn allocate_thermal(
    model: &mut MilpModel,
    case: &SystemCase,
    mode: NetworkMode,
) -> Result<ThermalVars, BuildError> {
    let t_count = case.horizon;
    let mva = case.mva_base;
    let tau = case.reserve_resolution;
    let mut on = Vec::new();
    let mut start = Vec::new();
    let mut stop = Vec::new();
    let mut p = Vec::new();
    let mut q = mode.has_voltage().then(Vec::new);
    let mut blocks = Vec::new();
    let mut sr_up = Vec::new();
    let mut sr_down = Vec::new();

    for unit in &case.thermal_units {
        let id = unit.id;
        let mut on_t = Vec::with_capacity(t_count);
        let mut start_t = Vec::with_capacity(t_count);
        let mut stop_t = Vec::with_capacity(t_count);
        let mut p_t = Vec::with_capacity(t_count);
        let mut q_t = Vec::with_capacity(t_count);
        let mut blocks_t = Vec::with_capacity(t_count);
        let mut up_t = Vec::with_capacity(t_count);
        let mut down_t = Vec::with_capacity(t_count);
        for t in 1..=t_count {
            on_t.push(model.add_binary(format!("u_g{id}_t{t}"))?);
            start_t.push(model.add_binary(format!("y_g{id}_t{t}"))?);
            stop_t.push(model.add_binary(format!("z_g{id}_t{t}"))?);
            p_t.push(model.add_continuous(0.0, unit.p_max / mva, format!("p_g{id}_t{t}"))?);
            if mode.has_voltage() {
                q_t.push(model.add_continuous(
                    unit.q_min.min(0.0) / mva,
                    unit.q_max.max(0.0) / mva,
                    format!("q_g{id}_t{t}"),
                )?);
            }
            let mut per_block = Vec::with_capacity(unit.cost_blocks.len());
            for (n, block) in unit.cost_blocks.iter().enumerate() {
                per_block.push(model.add_continuous(
                    0.0,
                    block.width / mva,
                    format!("pe_g{id}_t{t}_n{}", n + 1),
                )?);
            }
            blocks_t.push(per_block);
            up_t.push(model.add_continuous(0.0, unit.ramp_up * tau / mva, format!("srup_g{id}_t{t}"))?);
            down_t.push(model.add_continuous(
                0.0,
                unit.ramp_down * tau / mva,
                format!("srdn_g{id}_t{t}"),
            )?);
        }
        on.push(on_t);
        start.push(start_t);
        stop.push(stop_t);
        p.push(p_t);
        if let Some(q) = q.as_mut() {
            q.push(q_t);
        }
        blocks.push(blocks_t);
        sr_up.push(up_t);
        sr_down.push(down_t);
    }

    Ok(ThermalVars {
        on,
        start,
        stop,
        p,
        q,
        blocks,
        sr_up,
        sr_down,
    })
}

#[allow(clippy::too_many_arguments)]
fn allocate_scenario(
    model: &mut MilpModel,
    case: &SystemCase,
    set: &ScenarioSet,
    scenario: usize,
    mode: NetworkMode,
    config: &LinearizationConfig,
    theta_source: &ThetaMaxSource,
    sign_source: &SignSource,
    include_caes: bool,
) -> Result<ScenarioVars, BuildError> {
    let t_count = case.horizon;
    let mva = case.mva_base;
    let tau = case.reserve_resolution;
    let w = scenario;

    let mut deploy_up = Vec::new();
    let mut deploy_down = Vec::new();
    let mut q = mode.has_voltage().then(Vec::new);
    for unit in &case.thermal_units {
        let id = unit.id;
        let mut up_t = Vec::with_capacity(t_count);
        let mut down_t = Vec::with_capacity(t_count);
        let mut q_t = Vec::with_capacity(t_count);
        for t in 1..=t_count {
            up_t.push(model.add_continuous(
                0.0,
                unit.ramp_up * tau / mva,
                format!("drup_g{id}_t{t}_w{w}"),
            )?);
            down_t.push(model.add_continuous(
                0.0,
                unit.ramp_down * tau / mva,
                format!("drdn_g{id}_t{t}_w{w}"),
            )?);
            if mode.has_voltage() {
                q_t.push(model.add_continuous(
                    unit.q_min.min(0.0) / mva,
                    unit.q_max.max(0.0) / mva,
                    format!("q_g{id}_t{t}_w{w}"),
                )?);
            }
        }
        deploy_up.push(up_t);
        deploy_down.push(down_t);
        if let Some(q) = q.as_mut() {
            q.push(q_t);
        }
    }

    let mut caes_deploy_up = Vec::new();
    let mut caes_deploy_down = Vec::new();
    let caes_units: &[crate::data::CaesUnit] = if include_caes { &case.caes_units } else { &[] };
    for caes in caes_units {
        let id = caes.id;
        let mut up_t = Vec::with_capacity(t_count);
        let mut down_t = Vec::with_capacity(t_count);
        for t in 1..=t_count {
            up_t.push(model.add_continuous(0.0, caes.p_dis_max / mva, format!("cdrup_c{id}_t{t}_w{w}"))?);
            down_t.push(model.add_continuous(0.0, caes.p_ch_max / mva, format!("cdrdn_c{id}_t{t}_w{w}"))?);
        }
        caes_deploy_up.push(up_t);
        caes_deploy_down.push(down_t);
    }

    let mut wind_used = Vec::new();
    for (f, farm) in case.wind_farms.iter().enumerate() {
        let mut used_t = Vec::with_capacity(t_count);
        for t in 1..=t_count {
            let available = set.realizations[w][f][t - 1] / mva;
            used_t.push(model.add_continuous(0.0, available, format!("ws_f{}_t{t}_w{w}", farm.id))?);
        }
        wind_used.push(used_t);
    }

    let mut shed = Vec::new();
    let mut q_shed = mode.has_voltage().then(Vec::new);
    for bus in &case.buses {
        let mut shed_t = Vec::with_capacity(t_count);
        let mut q_shed_t = Vec::with_capacity(t_count);
        for t in 1..=t_count {
            shed_t.push(model.add_continuous(
                0.0,
                bus.active_load[t - 1] / mva,
                format!("pils_b{}_t{t}_w{w}", bus.id),
            )?);
            if mode.has_voltage() {
                // Proportional reactive shedding cannot exist where there is
                // no active load to shed.
                let hi = if bus.active_load[t - 1] > 0.0 {
                    bus.reactive_load[t - 1] / mva
                } else {
                    0.0
                };
                q_shed_t.push(model.add_continuous(0.0, hi, format!("qils_b{}_t{t}_w{w}", bus.id))?);
            }
        }
        shed.push(shed_t);
        if let Some(q_shed) = q_shed.as_mut() {
            q_shed.push(q_shed_t);
        }
    }

    let net = NetworkVarSet::allocate(
        model,
        case,
        Scope::Scenario(w),
        mode,
        config,
        theta_source,
        sign_source,
    )?;

    Ok(ScenarioVars {
        scenario,
        deploy_up,
        deploy_down,
        q,
        caes_deploy_up,
        caes_deploy_down,
        wind_used,
        shed,
        q_shed,
        net,
    })
}

/// Pin another run's first-stage commitment and storage plan into this model:
/// thermal on/off states, CAES charge/discharge states, and the total
/// charge/discharge power windows. Dispatch, reserves, network variables, and
/// all recourse stay free. This is how a generic-storage plan gets re-priced
/// under the thermodynamic model.
pub fn apply_schedule_fixings(
    target: &mut AssembledModel,
    source: &ScheduleSolution,
    case: &SystemCase,
) -> Result<(), BuildError> {
    // Tiny slack on fixed continuous levels keeps the donor optimum feasible
    // under the solver's own feasibility tolerance.
    const SLACK: f64 = 1e-7;
    let mva = case.mva_base;
    for (g, per_t) in source.commitment.iter().enumerate() {
        for (t, &on) in per_t.iter().enumerate() {
            let v = if on { 1.0 } else { 0.0 };
            target
                .model
                .set_variable_bounds(target.vars.thermal.on[g][t], v, v)?;
        }
    }
    for (c, trajectory) in source.caes.iter().enumerate() {
        let vars = &target.vars.caes[c];
        for t in 0..case.horizon {
            let ch = if trajectory.charging[t] { 1.0 } else { 0.0 };
            let dis = if trajectory.discharging[t] { 1.0 } else { 0.0 };
            target.model.set_variable_bounds(vars.u_charge[t], ch, ch)?;
            target.model.set_variable_bounds(vars.u_discharge[t], dis, dis)?;
            let ch_total = trajectory.charge_total_mw[t] / mva;
            let dis_total = trajectory.discharge_total_mw[t] / mva;
            target.model.set_variable_bounds(
                vars.p_charge_total[t],
                (ch_total - SLACK).max(0.0),
                ch_total + SLACK,
            )?;
            target.model.set_variable_bounds(
                vars.p_discharge_total[t],
                (dis_total - SLACK).max(0.0),
                dis_total + SLACK,
            )?;
        }
    }
    Ok(())
}

/// Buses-to-entities incidence used by the balance emitters and the decoder.
pub(crate) struct Incidence {
    pub units_at: Vec<Vec<usize>>,
    pub caes_at: Vec<Vec<usize>>,
    pub farms_at: Vec<Vec<usize>>,
    pub lines_from: Vec<Vec<usize>>,
    pub lines_to: Vec<Vec<usize>>,
}

impl Incidence {
    pub fn new(case: &SystemCase) -> Self {
        let n = case.buses.len();
        let mut inc = Incidence {
            units_at: vec![Vec::new(); n],
            caes_at: vec![Vec::new(); n],
            farms_at: vec![Vec::new(); n],
            lines_from: vec![Vec::new(); n],
            lines_to: vec![Vec::new(); n],
        };
        for (g, unit) in case.thermal_units.iter().enumerate() {
            inc.units_at[unit.bus].push(g);
        }
        for (c, caes) in case.caes_units.iter().enumerate() {
            inc.caes_at[caes.bus].push(c);
        }
        for (f, farm) in case.wind_farms.iter().enumerate() {
            inc.farms_at[farm.bus].push(f);
        }
        for (k, line) in case.lines.iter().enumerate() {
            inc.lines_from[line.from_bus].push(k);
            inc.lines_to[line.to_bus].push(k);
        }
        inc
    }
}

/// Map from first-level artifacts to the per-key structures the network
/// allocator consumes.
#[derive(Debug, Clone, Serialize)]
pub struct LineDecision {
    pub sign: SignFix,
    /// |theta| at the first-level optimum, radians.
    pub magnitude: f64,
}

pub(crate) fn theta_caps_from(
    stage1: &[Vec<LineDecision>],
    scenarios: &[Vec<Vec<LineDecision>>],
    config: &LinearizationConfig,
) -> ThetaMaxSource {
    let mut map = BTreeMap::new();
    let cap = |d: &LineDecision| (config.theta_max_margin * d.magnitude).max(config.theta_max_floor);
    for (k, per_t) in stage1.iter().enumerate() {
        for (t, decision) in per_t.iter().enumerate() {
            map.insert((k, t, None), cap(decision));
        }
    }
    for (w, per_line) in scenarios.iter().enumerate() {
        for (k, per_t) in per_line.iter().enumerate() {
            for (t, decision) in per_t.iter().enumerate() {
                map.insert((k, t, Some(w)), cap(decision));
            }
        }
    }
    ThetaMaxSource::PerKey(map)
}

pub(crate) fn signs_from(
    stage1: &[Vec<LineDecision>],
    scenarios: &[Vec<Vec<LineDecision>>],
    fix_scenarios: bool,
) -> SignSource {
    let mut map = BTreeMap::new();
    for (k, per_t) in stage1.iter().enumerate() {
        for (t, decision) in per_t.iter().enumerate() {
            map.insert((k, t, None), decision.sign);
        }
    }
    for (w, per_line) in scenarios.iter().enumerate() {
        for (k, per_t) in per_line.iter().enumerate() {
            for (t, decision) in per_t.iter().enumerate() {
                let sign = if fix_scenarios { decision.sign } else { SignFix::Free };
                map.insert((k, t, Some(w)), sign);
            }
        }
    }
    SignSource::PerKey(map)
}

#[cfg(test)]
mod tests;
