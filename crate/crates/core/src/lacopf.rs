//! Linearized AC network constraints.
//!
//! Line flows are first-order in voltage deviation and angle difference:
//!
//! ```text
//! P_k  = (dV_i - dV_j) g_k - b_k th_k
//! Q_k  = -(1 + 2 dV_i) b0_k - (dV_i - dV_j) b_k - g_k th_k
//! PL_k = g_k th_k^2          QL_k = |b_k| th_k^2
//! ```
//!
//! The quadratic `th^2` is replaced by `L` ordered linear blocks with slopes
//! `(2l-1) th_max / L`; a binary per line picks the sign of the angle so no
//! spurious loss can be booked on the inactive side. Choosing `th_max` much
//! larger than the operating angle inflates the first block's slope and
//! manufactures losses that the real network does not have; the two-level
//! driver removes that by re-solving with per-line angle caps taken from a
//! lossless solve. Apparent-power ratings are enforced by an inscribed
//! regular polygon in the (P, Q) plane.
//!
//! Everything here emits constraints for one *scope* (the day-ahead stage or
//! one scenario); the scheduler calls it once per scope.

use crate::data::SystemCase;
use crate::milp::{ConstraintId, LinExpr, MilpModel, ModelError, Sense, VarRef};
use serde::Serialize;
use std::collections::BTreeMap;
use thiserror::Error;

/// Which slice of the problem a variable set belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scope {
    Stage1,
    Scenario(usize),
}

impl Scope {
    /// Suffix appended to structured variable names, e.g. `_w3` for scenario 3.
    pub fn suffix(self) -> String {
        match self {
            Scope::Stage1 => String::new(),
            Scope::Scenario(w) => format!("_w{w}"),
        }
    }

    pub fn scenario(self) -> Option<usize> {
        match self {
            Scope::Stage1 => None,
            Scope::Scenario(w) => Some(w),
        }
    }
}

/// How much network physics a variant carries.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum NetworkMode {
    /// Lossless B-theta active flows only.
    Dc,
    /// Linearized AC flows, voltage and reactive power, no losses.
    LacLossless,
    /// Full linearized AC with piecewise losses and sign binaries.
    LacFull,
}

impl NetworkMode {
    pub fn has_voltage(self) -> bool {
        !matches!(self, NetworkMode::Dc)
    }

    pub fn has_losses(self) -> bool {
        matches!(self, NetworkMode::LacFull)
    }
}

#[derive(Debug, Error)]
pub enum LacError {
    #[error("invalid linearization config: {0}")]
    Config(String),
    #[error("no theta_max entry for line {line}, hour {hour}, scenario {scenario:?}")]
    MissingThetaMax {
        line: usize,
        hour: usize,
        scenario: Option<usize>,
    },
    #[error("|theta| = {theta} exceeds theta_max = {theta_max}")]
    ThetaOutOfRange { theta: f64, theta_max: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Knobs of the loss/capacity linearization.
#[derive(Debug, Clone, Serialize)]
pub struct LinearizationConfig {
    /// Loss blocks per line (L).
    pub loss_blocks: usize,
    /// Half-planes in the apparent-power polygon (R).
    pub polygon_segments: usize,
    /// Global angle cap in radians, used wherever no adaptive cap applies.
    pub theta_max: f64,
    /// |theta| below this is treated as sign-ambiguous when extracting
    /// first-level artifacts.
    pub sign_tolerance: f64,
    /// Multiplier on the first-level |theta| when deriving adaptive caps.
    pub theta_max_margin: f64,
    /// Lower bound for adaptive caps, radians.
    pub theta_max_floor: f64,
    /// Override for the big-M in storage airflow products; `None` derives the
    /// smallest valid value from the data.
    pub big_m: Option<f64>,
    /// Whether second-level sign fixing also applies to scenario scopes.
    pub fix_scenario_signs: bool,
}

impl Default for LinearizationConfig {
    fn default() -> Self {
        Self {
            loss_blocks: 2,
            polygon_segments: 12,
            theta_max: 0.6,
            sign_tolerance: 1e-4,
            theta_max_margin: 1.25,
            theta_max_floor: 0.05,
            big_m: None,
            fix_scenario_signs: true,
        }
    }
}

impl LinearizationConfig {
    pub fn validate(&self) -> Result<(), LacError> {
        if self.loss_blocks < 1 {
            return Err(LacError::Config("loss_blocks must be at least 1".into()));
        }
        if self.polygon_segments < 4 {
            return Err(LacError::Config("polygon_segments must be at least 4".into()));
        }
        if self.theta_max <= 0.0 {
            return Err(LacError::Config("theta_max must be positive".into()));
        }
        if !(self.sign_tolerance > 0.0 && self.sign_tolerance < self.theta_max_floor) {
            return Err(LacError::Config(
                "need 0 < sign_tolerance < theta_max_floor".into(),
            ));
        }
        if self.theta_max_margin < 1.0 {
            return Err(LacError::Config("theta_max_margin must be at least 1".into()));
        }
        Ok(())
    }
}

/// Per-(line, hour, scenario) angle cap: one global number or an explicit map.
#[derive(Debug, Clone)]
pub enum ThetaMaxSource {
    Global(f64),
    PerKey(BTreeMap<(usize, usize, Option<usize>), f64>),
}

impl ThetaMaxSource {
    pub fn get(&self, line: usize, hour: usize, scenario: Option<usize>) -> Result<f64, LacError> {
        match self {
            ThetaMaxSource::Global(v) => Ok(*v),
            ThetaMaxSource::PerKey(map) => {
                map.get(&(line, hour, scenario)).copied().ok_or(LacError::MissingThetaMax {
                    line,
                    hour,
                    scenario,
                })
            }
        }
    }
}

/// Sign decision for one line's angle difference, taken from the first level.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SignFix {
    Positive,
    Negative,
    Free,
}

/// Fixed sign constants or per-key decisions for delta variables.
#[derive(Debug, Clone)]
pub enum SignSource {
    AllFree,
    PerKey(BTreeMap<(usize, usize, Option<usize>), SignFix>),
}

impl SignSource {
    fn get(&self, line: usize, hour: usize, scenario: Option<usize>) -> SignFix {
        match self {
            SignSource::AllFree => SignFix::Free,
            SignSource::PerKey(map) => map
                .get(&(line, hour, scenario))
                .copied()
                .unwrap_or(SignFix::Free),
        }
    }
}

/// Angle-sign selector: a real binary, or a constant baked in by the
/// two-level driver.
#[derive(Debug, Clone, Copy)]
pub enum DeltaVar {
    Binary(VarRef),
    Fixed(f64),
}

/// All network variables of one scope.
#[derive(Debug, Clone)]
pub struct NetworkVarSet {
    pub scope: Scope,
    pub mode: NetworkMode,
    /// Bus voltage angles, `[bus][t]`; the slack angle is fixed to zero.
    pub bus_angle: Vec<Vec<VarRef>>,
    /// Voltage deviations from 1 p.u., `[bus][t]` (LAC modes).
    pub dv: Option<Vec<Vec<VarRef>>>,
    /// Angle difference across each line, `[line][t]`.
    pub theta: Vec<Vec<VarRef>>,
    pub theta_pos: Option<Vec<Vec<VarRef>>>,
    pub theta_neg: Option<Vec<Vec<VarRef>>>,
    pub delta: Option<Vec<Vec<DeltaVar>>>,
    /// Loss blocks, `[line][t][l]`.
    pub dtheta: Option<Vec<Vec<Vec<VarRef>>>>,
    pub p_flow: Vec<Vec<VarRef>>,
    pub q_flow: Option<Vec<Vec<VarRef>>>,
    pub p_loss: Option<Vec<Vec<VarRef>>>,
    pub q_loss: Option<Vec<Vec<VarRef>>>,
    /// Resolved angle cap per `[line][t]`, kept for decoding and audits.
    pub theta_cap: Vec<Vec<f64>>,
}

impl NetworkVarSet {
    /// Create every variable the mode needs. Bounds already encode fixed
    /// signs (a fixed positive sign zeroes the negative part outright) and
    /// per-key angle caps.
    pub fn allocate(
        model: &mut MilpModel,
        case: &SystemCase,
        scope: Scope,
        mode: NetworkMode,
        config: &LinearizationConfig,
        theta_max: &ThetaMaxSource,
        signs: &SignSource,
    ) -> Result<Self, LacError> {
        let t_count = case.horizon;
        let sfx = scope.suffix();
        let scen = scope.scenario();
        let inf = f64::INFINITY;

        let mut bus_angle = Vec::with_capacity(case.buses.len());
        for (i, bus) in case.buses.iter().enumerate() {
            let mut per_t = Vec::with_capacity(t_count);
            for t in 0..t_count {
                let (lo, hi) = if i == case.slack_bus { (0.0, 0.0) } else { (-inf, inf) };
                per_t.push(model.add_continuous(lo, hi, format!("ang_b{}_t{}{}", bus.id, t + 1, sfx))?);
            }
            bus_angle.push(per_t);
        }

        let dv = if mode.has_voltage() {
            let mut all = Vec::with_capacity(case.buses.len());
            for bus in &case.buses {
                let mut per_t = Vec::with_capacity(t_count);
                for t in 0..t_count {
                    per_t.push(model.add_continuous(
                        bus.dv_min,
                        bus.dv_max,
                        format!("dv_b{}_t{}{}", bus.id, t + 1, sfx),
                    )?);
                }
                all.push(per_t);
            }
            Some(all)
        } else {
            None
        };

        let mut theta = Vec::with_capacity(case.lines.len());
        let mut theta_cap = Vec::with_capacity(case.lines.len());
        for (k, line) in case.lines.iter().enumerate() {
            let mut per_t = Vec::with_capacity(t_count);
            let mut caps = Vec::with_capacity(t_count);
            for t in 0..t_count {
                let cap = match mode {
                    // DC angles are unconstrained; flows carry the limits.
                    NetworkMode::Dc => inf,
                    _ => theta_max.get(k, t, scen)?,
                };
                caps.push(cap);
                let (lo, hi) = if cap.is_finite() { (-cap, cap) } else { (-inf, inf) };
                per_t.push(model.add_continuous(lo, hi, format!("th_k{}_t{}{}", line.id, t + 1, sfx))?);
            }
            theta.push(per_t);
            theta_cap.push(caps);
        }

        let (theta_pos, theta_neg, delta, dtheta) = if mode.has_losses() {
            let blocks = config.loss_blocks;
            let mut pos = Vec::with_capacity(case.lines.len());
            let mut neg = Vec::with_capacity(case.lines.len());
            let mut del = Vec::with_capacity(case.lines.len());
            let mut dth = Vec::with_capacity(case.lines.len());
            for (k, line) in case.lines.iter().enumerate() {
                let mut pos_t = Vec::with_capacity(t_count);
                let mut neg_t = Vec::with_capacity(t_count);
                let mut del_t = Vec::with_capacity(t_count);
                let mut dth_t = Vec::with_capacity(t_count);
                for t in 0..t_count {
                    let cap = theta_cap[k][t];
                    let fix = signs.get(k, t, scen);
                    let (pos_hi, neg_hi, delta_var) = match fix {
                        SignFix::Positive => (cap, 0.0, DeltaVar::Fixed(1.0)),
                        SignFix::Negative => (0.0, cap, DeltaVar::Fixed(0.0)),
                        SignFix::Free => {
                            let d = model.add_binary(format!("delta_k{}_t{}{}", line.id, t + 1, sfx))?;
                            (cap, cap, DeltaVar::Binary(d))
                        }
                    };
                    pos_t.push(model.add_continuous(0.0, pos_hi, format!("thp_k{}_t{}{}", line.id, t + 1, sfx))?);
                    neg_t.push(model.add_continuous(0.0, neg_hi, format!("thn_k{}_t{}{}", line.id, t + 1, sfx))?);
                    del_t.push(delta_var);
                    let mut blocks_l = Vec::with_capacity(blocks);
                    for l in 0..blocks {
                        blocks_l.push(model.add_continuous(
                            0.0,
                            cap / blocks as f64,
                            format!("dth_k{}_t{}_l{}{}", line.id, t + 1, l + 1, sfx),
                        )?);
                    }
                    dth_t.push(blocks_l);
                }
                pos.push(pos_t);
                neg.push(neg_t);
                del.push(del_t);
                dth.push(dth_t);
            }
            (Some(pos), Some(neg), Some(del), Some(dth))
        } else {
            (None, None, None, None)
        };

        let mut p_flow = Vec::with_capacity(case.lines.len());
        for line in &case.lines {
            let mut per_t = Vec::with_capacity(t_count);
            for t in 0..t_count {
                // DC: the rating is a box on active flow. LAC: the polygon
                // rows bound the flow, the variable itself stays within the
                // rating disc's bounding box.
                let cap = line.mva_max;
                per_t.push(model.add_continuous(-cap, cap, format!("pf_k{}_t{}{}", line.id, t + 1, sfx))?);
            }
            p_flow.push(per_t);
        }

        let q_flow = if mode.has_voltage() {
            let mut all = Vec::with_capacity(case.lines.len());
            for line in &case.lines {
                let mut per_t = Vec::with_capacity(t_count);
                for t in 0..t_count {
                    let cap = line.mva_max;
                    per_t.push(model.add_continuous(-cap, cap, format!("qf_k{}_t{}{}", line.id, t + 1, sfx))?);
                }
                all.push(per_t);
            }
            Some(all)
        } else {
            None
        };

        let (p_loss, q_loss) = if mode.has_losses() {
            let mut pl = Vec::with_capacity(case.lines.len());
            let mut ql = Vec::with_capacity(case.lines.len());
            for line in &case.lines {
                let mut pl_t = Vec::with_capacity(t_count);
                let mut ql_t = Vec::with_capacity(t_count);
                for t in 0..t_count {
                    pl_t.push(model.add_continuous(0.0, inf, format!("pl_k{}_t{}{}", line.id, t + 1, sfx))?);
                    ql_t.push(model.add_continuous(0.0, inf, format!("ql_k{}_t{}{}", line.id, t + 1, sfx))?);
                }
                pl.push(pl_t);
                ql.push(ql_t);
            }
            (Some(pl), Some(ql))
        } else {
            (None, None)
        };

        Ok(NetworkVarSet {
            scope,
            mode,
            bus_angle,
            dv,
            theta,
            theta_pos,
            theta_neg,
            delta,
            dtheta,
            p_flow,
            q_flow,
            p_loss,
            q_loss,
            theta_cap,
        })
    }
}

/// Slopes of the loss blocks: `k(l) = (2l - 1) theta_max / L`, strictly
/// increasing in `l`.
pub fn block_slopes(theta_max: f64, blocks: usize) -> Vec<f64> {
    (1..=blocks)
        .map(|l| (2 * l - 1) as f64 * theta_max / blocks as f64)
        .collect()
}

/// Reference evaluation of the piecewise loss term: fill blocks in order
/// (each capped at `theta_max / L`) until they sum to `|theta|`, then price
/// them at the block slopes. Exact on block boundaries, overestimates
/// everywhere else. This is the least-cost filling a minimizing solver picks,
/// so it doubles as the decode oracle.
pub fn piecewise_square(theta: f64, theta_max: f64, blocks: usize) -> Result<f64, LacError> {
    let magnitude = theta.abs();
    if magnitude > theta_max * (1.0 + 1e-12) {
        return Err(LacError::ThetaOutOfRange {
            theta: magnitude,
            theta_max,
        });
    }
    let width = theta_max / blocks as f64;
    let slopes = block_slopes(theta_max, blocks);
    let mut remaining = magnitude;
    let mut total = 0.0;
    for slope in slopes {
        let fill = remaining.min(width);
        total += slope * fill;
        remaining -= fill;
        if remaining <= 0.0 {
            break;
        }
    }
    Ok(total)
}

/// Half-plane coefficients of the inscribed regular polygon for
/// `P^2 + Q^2 <= rating^2`: for each segment `r`,
/// `p_coeff * P + q_coeff * Q <= rating * sin(2 pi / R)`.
pub fn polygon_coefficients(segments: usize) -> Vec<(f64, f64)> {
    let step = 2.0 * std::f64::consts::PI / segments as f64;
    (1..=segments)
        .map(|r| {
            let a = (r - 1) as f64 * step;
            let b = r as f64 * step;
            (b.sin() - a.sin(), a.cos() - b.cos())
        })
        .collect()
}

/// Emit flow definitions (and loss linearization when the mode carries
/// losses) for every line and hour of the scope.
pub fn emit_flow_and_loss(
    model: &mut MilpModel,
    case: &SystemCase,
    config: &LinearizationConfig,
    vars: &NetworkVarSet,
) -> Result<Vec<ConstraintId>, LacError> {
    let mut ids = Vec::new();
    let sfx = vars.scope.suffix();
    for (k, line) in case.lines.iter().enumerate() {
        for t in 0..case.horizon {
            let tag = |name: &str| format!("{name}_k{}_t{}{}", line.id, t + 1, sfx);
            // theta_k = ang_i - ang_j
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(vars.theta[k][t], 1.0)
                    .term(vars.bus_angle[line.from_bus][t], -1.0)
                    .term(vars.bus_angle[line.to_bus][t], 1.0),
                Sense::Eq,
                0.0,
                tag("AngDiff"),
            )?);

            match vars.mode {
                NetworkMode::Dc => {
                    // P = -b theta
                    ids.push(model.add_constraint(
                        LinExpr::new()
                            .term(vars.p_flow[k][t], 1.0)
                            .term(vars.theta[k][t], line.b),
                        Sense::Eq,
                        0.0,
                        tag("DcFlow"),
                    )?);
                }
                NetworkMode::LacLossless | NetworkMode::LacFull => {
                    let dv = vars.dv.as_ref().unwrap();
                    let q_flow = vars.q_flow.as_ref().unwrap();
                    // P = (dV_i - dV_j) g - b theta
                    ids.push(model.add_constraint(
                        LinExpr::new()
                            .term(vars.p_flow[k][t], 1.0)
                            .term(dv[line.from_bus][t], -line.g)
                            .term(dv[line.to_bus][t], line.g)
                            .term(vars.theta[k][t], line.b),
                        Sense::Eq,
                        0.0,
                        tag("PFlow"),
                    )?);
                    // Q = -(1 + 2 dV_i) b0 - (dV_i - dV_j) b - g theta
                    ids.push(model.add_constraint(
                        LinExpr::new()
                            .term(q_flow[k][t], 1.0)
                            .term(dv[line.from_bus][t], 2.0 * line.b0 + line.b)
                            .term(dv[line.to_bus][t], -line.b)
                            .term(vars.theta[k][t], line.g),
                        Sense::Eq,
                        -line.b0,
                        tag("QFlow"),
                    )?);
                }
            }

            if vars.mode.has_losses() {
                let cap = vars.theta_cap[k][t];
                let slopes = block_slopes(cap, config.loss_blocks);
                let pos = &vars.theta_pos.as_ref().unwrap()[k][t];
                let neg = &vars.theta_neg.as_ref().unwrap()[k][t];
                let blocks = &vars.dtheta.as_ref().unwrap()[k][t];
                let p_loss = vars.p_loss.as_ref().unwrap()[k][t];
                let q_loss = vars.q_loss.as_ref().unwrap()[k][t];

                // theta = theta+ - theta-
                ids.push(model.add_constraint(
                    LinExpr::new()
                        .term(vars.theta[k][t], 1.0)
                        .term(*pos, -1.0)
                        .term(*neg, 1.0),
                    Sense::Eq,
                    0.0,
                    tag("Split"),
                )?);
                // sum of blocks = theta+ + theta-
                let mut expr = LinExpr::new().term(*pos, 1.0).term(*neg, 1.0);
                for &b in blocks {
                    expr.push(b, -1.0);
                }
                ids.push(model.add_constraint(expr, Sense::Eq, 0.0, tag("Fill"))?);
                // Ordered filling.
                for l in 1..blocks.len() {
                    ids.push(model.add_constraint(
                        LinExpr::new().term(blocks[l], 1.0).term(blocks[l - 1], -1.0),
                        Sense::Le,
                        0.0,
                        format!("{}_l{}", tag("Order"), l + 1),
                    )?);
                }
                // Sign exclusivity through the delta selector. Fixed signs
                // are already encoded in the theta+/theta- bounds.
                if let DeltaVar::Binary(d) = vars.delta.as_ref().unwrap()[k][t] {
                    ids.push(model.add_constraint(
                        LinExpr::new().term(*pos, 1.0).term(d, -cap),
                        Sense::Le,
                        0.0,
                        tag("SignP"),
                    )?);
                    ids.push(model.add_constraint(
                        LinExpr::new().term(*neg, 1.0).term(d, cap),
                        Sense::Le,
                        cap,
                        tag("SignN"),
                    )?);
                }
                // PL = g sum k(l) dtheta(l); QL uses |b| so both losses are
                // nonnegative and enter the balances subtractively.
                let mut pl_expr = LinExpr::new().term(p_loss, 1.0);
                let mut ql_expr = LinExpr::new().term(q_loss, 1.0);
                for (l, &b) in blocks.iter().enumerate() {
                    pl_expr.push(b, -line.g * slopes[l]);
                    ql_expr.push(b, -line.b.abs() * slopes[l]);
                }
                ids.push(model.add_constraint(pl_expr, Sense::Eq, 0.0, tag("PLoss"))?);
                ids.push(model.add_constraint(ql_expr, Sense::Eq, 0.0, tag("QLoss"))?);
            }
        }
    }
    Ok(ids)
}

/// Inscribed-polygon thermal capacity for one line across the scope's hours.
pub fn emit_thermal_capacity(
    model: &mut MilpModel,
    case: &SystemCase,
    line_idx: usize,
    segments: usize,
    vars: &NetworkVarSet,
) -> Result<Vec<ConstraintId>, LacError> {
    let line = &case.lines[line_idx];
    let q_flow = vars
        .q_flow
        .as_ref()
        .expect("thermal capacity polygon requires reactive flows");
    let coeffs = polygon_coefficients(segments);
    let rhs = line.mva_max * (2.0 * std::f64::consts::PI / segments as f64).sin();
    let sfx = vars.scope.suffix();
    let mut ids = Vec::with_capacity(case.horizon * segments);
    for t in 0..case.horizon {
        for (r, &(pc, qc)) in coeffs.iter().enumerate() {
            ids.push(model.add_constraint(
                LinExpr::new()
                    .term(vars.p_flow[line_idx][t], pc)
                    .term(q_flow[line_idx][t], qc),
                Sense::Le,
                rhs,
                format!("Cap_k{}_t{}_r{}{}", line.id, t + 1, r + 1, sfx),
            )?);
        }
    }
    Ok(ids)
}

/// Lossless B-theta network: flow definitions only; ratings are carried by
/// the `p_flow` bounds set at allocation.
pub fn emit_dc_network(
    model: &mut MilpModel,
    case: &SystemCase,
    config: &LinearizationConfig,
    vars: &NetworkVarSet,
) -> Result<Vec<ConstraintId>, LacError> {
    debug_assert_eq!(vars.mode, NetworkMode::Dc);
    emit_flow_and_loss(model, case, config, vars)
}

/// One line-hour(-scenario) entry of the loss error audit.
#[derive(Debug, Clone, Serialize)]
pub struct LossAuditEntry {
    pub line_id: u32,
    pub hour: usize,
    pub scenario: Option<usize>,
    /// `g theta^2` evaluated from the solved angle, p.u.
    pub quadratic_loss: f64,
    /// The loss the linear model actually booked, p.u.
    pub model_loss: f64,
    pub error_pct: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct LossAudit {
    pub entries: Vec<LossAuditEntry>,
    /// Loss-weighted mean error, percent. Entries with quadratic loss below
    /// the exclusion threshold carry no weight.
    pub aggregate_pct: f64,
    pub excluded: usize,
}

/// Quadratic losses below this are excluded from the aggregate to avoid 0/0.
pub const LOSS_AUDIT_EXCLUSION: f64 = 1e-10;

/// Compare booked piecewise losses against `g theta^2` from the same solved
/// angles. `records` supplies (line id, hour, scenario, g, theta, model loss,
/// weight); the weight carries scenario probabilities.
pub fn loss_error_audit(
    records: impl IntoIterator<Item = (u32, usize, Option<usize>, f64, f64, f64, f64)>,
) -> LossAudit {
    let mut entries = Vec::new();
    let mut weighted = 0.0;
    let mut weights = 0.0;
    let mut excluded = 0;
    for (line_id, hour, scenario, g, theta, model_loss, probability) in records {
        let quadratic_loss = g * theta * theta;
        if quadratic_loss < LOSS_AUDIT_EXCLUSION {
            excluded += 1;
            continue;
        }
        let error_pct = (quadratic_loss - model_loss).abs() / quadratic_loss * 100.0;
        let weight = probability * quadratic_loss;
        weighted += weight * error_pct;
        weights += weight;
        entries.push(LossAuditEntry {
            line_id,
            hour,
            scenario,
            quadratic_loss,
            model_loss,
            error_pct,
        });
    }
    LossAudit {
        entries,
        aggregate_pct: if weights > 0.0 { weighted / weights } else { 0.0 },
        excluded,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn block_slopes_match_closed_form() {
        let got = block_slopes(0.6, 2);
        assert!((got[0] - 0.3).abs() < 1e-15 && (got[1] - 0.9).abs() < 1e-15);
        let got = block_slopes(0.4, 4);
        let want = [0.1, 0.3, 0.5, 0.7];
        for (g, w) in got.iter().zip(want) {
            assert!((g - w).abs() < 1e-12);
        }
        assert_eq!(block_slopes(0.37, 1), vec![0.37]);
    }

    #[test]
    fn piecewise_square_exact_on_boundaries() {
        // theta = theta_max with L = 2: 0.3*0.3 + 0.9*0.3 = 0.36 = 0.6^2
        let got = piecewise_square(0.6, 0.6, 2).unwrap();
        assert!((got - 0.36).abs() < 1e-15);
        assert_eq!(piecewise_square(0.0, 0.6, 2).unwrap(), 0.0);
    }

    #[test]
    fn piecewise_square_overestimates_inside_first_block() {
        // theta = 0.15 against theta_max = 0.6, L = 2: priced entirely in the
        // first block at slope 0.3 -> 0.045 vs the true 0.0225 (100% error).
        let got = piecewise_square(0.15, 0.6, 2).unwrap();
        assert!((got - 0.045).abs() < 1e-15);
        let true_sq = 0.15f64 * 0.15;
        assert!(((got - true_sq) / true_sq - 1.0).abs() < 1e-12);
    }

    #[test]
    fn piecewise_square_rejects_out_of_range() {
        assert!(matches!(
            piecewise_square(0.7, 0.6, 2),
            Err(LacError::ThetaOutOfRange { .. })
        ));
    }

    #[test]
    fn negative_theta_prices_like_positive() {
        let a = piecewise_square(-0.21, 0.6, 3).unwrap();
        let b = piecewise_square(0.21, 0.6, 3).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn polygon_origin_strictly_inside() {
        for &(pc, qc) in &polygon_coefficients(12) {
            let rhs = 1.0 * (2.0 * std::f64::consts::PI / 12.0).sin();
            assert!(pc * 0.0 + qc * 0.0 < rhs);
        }
    }

    #[test]
    fn polygon_excludes_corner_point() {
        // (rating, rating) sits at radius sqrt(2) * rating: outside.
        let coeffs = polygon_coefficients(12);
        let rhs = (2.0 * std::f64::consts::PI / 12.0).sin();
        let violated = coeffs.iter().any(|&(pc, qc)| pc * 1.0 + qc * 1.0 > rhs + 1e-12);
        assert!(violated);
        // Same check for the minimum segment count.
        let coeffs4 = polygon_coefficients(4);
        let rhs4 = (2.0 * std::f64::consts::PI / 4.0).sin();
        assert!(coeffs4.iter().any(|&(pc, qc)| pc + qc > rhs4 + 1e-12));
    }

    #[test]
    fn polygon_vertices_bind_adjacent_segments() {
        let segments = 12;
        let coeffs = polygon_coefficients(segments);
        let step = 2.0 * std::f64::consts::PI / segments as f64;
        let rhs = step.sin();
        for r in 0..segments {
            let p = (r as f64 * step).cos();
            let q = (r as f64 * step).sin();
            // Vertex r starts segment r and ends segment r-1 (0-indexed).
            let on_r = (coeffs[r].0 * p + coeffs[r].1 * q - rhs).abs();
            let prev = (r + segments - 1) % segments;
            let on_prev = (coeffs[prev].0 * p + coeffs[prev].1 * q - rhs).abs();
            assert!(on_r < 1e-12 && on_prev < 1e-12, "vertex {r}: {on_r} {on_prev}");
            // And inside every other half-plane.
            for (i, &(pc, qc)) in coeffs.iter().enumerate() {
                assert!(pc * p + qc * q <= rhs + 1e-12, "vertex {r} violates segment {i}");
            }
        }
    }

    #[test]
    fn loss_audit_matches_hand_example() {
        // One line at theta = 0.15 with cap 0.6, L = 2: 100% error.
        let model_loss = 5.0 * piecewise_square(0.15, 0.6, 2).unwrap();
        let audit = loss_error_audit([(1, 1, None, 5.0, 0.15, model_loss, 1.0)]);
        assert!((audit.aggregate_pct - 100.0).abs() < 1e-9);
    }

    #[test]
    fn loss_audit_zero_on_block_boundaries() {
        let records = (1..=3).map(|l| {
            let theta = l as f64 * 0.2; // multiples of cap/L = 0.2 with cap 0.6, L = 3
            let loss = 2.0 * piecewise_square(theta, 0.6, 3).unwrap();
            (l as u32, 1, None, 2.0, theta, loss, 1.0)
        });
        let audit = loss_error_audit(records);
        assert!(audit.aggregate_pct < 1e-9);
    }

    #[test]
    fn loss_audit_excludes_negligible_losses() {
        let audit = loss_error_audit([
            (1, 1, None, 2.0, 0.0, 0.0, 1.0),
            (2, 1, None, 2.0, 0.2, 2.0 * 0.04, 1.0),
        ]);
        assert_eq!(audit.excluded, 1);
        assert_eq!(audit.entries.len(), 1);
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #![proptest_config(ProptestConfig::with_cases(512))]

            #[test]
            fn slopes_strictly_increase(theta_max in 0.05f64..1.5, blocks in 1usize..8) {
                let slopes = block_slopes(theta_max, blocks);
                prop_assert!((slopes[0] - theta_max / blocks as f64).abs() < 1e-12);
                for w in slopes.windows(2) {
                    prop_assert!(w[1] > w[0]);
                }
            }

            #[test]
            fn breakpoints_are_exact(theta_max in 0.1f64..1.0, blocks in 1usize..7) {
                let width = theta_max / blocks as f64;
                for m in 0..=blocks {
                    let theta = m as f64 * width;
                    let approx = piecewise_square(theta, theta_max, blocks).unwrap();
                    prop_assert!((approx - theta * theta).abs() < 1e-12,
                        "m={m} approx={approx} true={}", theta * theta);
                }
            }

            #[test]
            fn interior_points_overestimate(
                theta_max in 0.1f64..1.0,
                blocks in 1usize..7,
                frac in 0.0f64..1.0,
            ) {
                let theta = frac * theta_max;
                let approx = piecewise_square(theta, theta_max, blocks).unwrap();
                prop_assert!(approx >= theta * theta - 1e-12);
            }

            #[test]
            fn refinement_never_hurts(
                theta_max in 0.1f64..1.0,
                blocks in 1usize..5,
                frac in 0.0f64..1.0,
            ) {
                let theta = frac * theta_max;
                let coarse = piecewise_square(theta, theta_max, blocks).unwrap();
                let fine = piecewise_square(theta, theta_max, blocks * 2).unwrap();
                let err_coarse = coarse - theta * theta;
                let err_fine = fine - theta * theta;
                prop_assert!(err_fine <= err_coarse + 1e-12);
            }

            // The artificial-loss mechanism: while theta sits strictly inside
            // the first block of both caps, the larger cap books at least as
            // much loss.
            #[test]
            fn larger_cap_books_no_less_loss(
                small in 0.2f64..0.5,
                extra in 0.05f64..0.5,
                blocks in 1usize..5,
                frac in 0.01f64..0.99,
            ) {
                let large = small + extra;
                let theta = frac * small / blocks as f64; // inside first block of both
                let with_small = piecewise_square(theta, small, blocks).unwrap();
                let with_large = piecewise_square(theta, large, blocks).unwrap();
                prop_assert!(with_large >= with_small - 1e-12);
            }

            #[test]
            fn polygon_stays_within_disc_margin(segments in 4usize..24, angle in 0.0f64..6.28) {
                // Any point on the unit circle boundary violates at most the
                // inscribed polygon, never the disc inflated by the segment
                // chord error.
                let coeffs = polygon_coefficients(segments);
                let rhs = (2.0 * std::f64::consts::PI / segments as f64).sin();
                let (p, q) = (angle.cos(), angle.sin());
                // Shrink onto the polygon's inscribed circle: that point must
                // satisfy every half-plane.
                let shrink = (std::f64::consts::PI / segments as f64).cos();
                for &(pc, qc) in &coeffs {
                    prop_assert!(pc * p * shrink + qc * q * shrink <= rhs + 1e-9);
                }
            }
        }
    }
}
