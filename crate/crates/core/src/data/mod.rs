//! Problem data: network, thermal fleet, wind farms, CAES units, demand
//! profiles, and wind scenario sets.
//!
//! Power quantities are stored in the units the case file uses (MW / MVAr);
//! line admittances and thermal ratings are per-unit on the system MVA base.
//! All types are immutable after construction and safe to share across
//! threads. `load_case` refuses invalid data; `validate_case` reports every
//! violated invariant as a diagnostic without failing.

mod parse;
mod scenario;

pub use parse::{load_case, save_case};
pub use scenario::load_scenarios;

use serde::Serialize;
use thiserror::Error;

/// Number of linear blocks the loader derives from a quadratic fuel cost.
pub const FUEL_COST_BLOCKS: usize = 5;

/// Raw probabilities may miss 1 by this much before the scenario file is
/// rejected; anything closer is renormalized.
pub const PROBABILITY_SUM_TOLERANCE: f64 = 0.005;

#[derive(Debug, Error)]
pub enum DataError {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },
    #[error("validation failed:\n{}", diagnostics.iter().map(|d| format!("  - {d}")).collect::<Vec<_>>().join("\n"))]
    Validation { diagnostics: Vec<Diagnostic> },
    #[error("{entity} references unknown bus {bus_id}")]
    DanglingReference { entity: String, bus_id: u32 },
    #[error("scenario probabilities sum to {sum}, more than {tolerance} away from 1")]
    ProbabilitySum { sum: f64, tolerance: f64 },
    #[error("scenario {scenario} has negative probability {probability}")]
    NegativeProbability { scenario: u32, probability: f64 },
    #[error("scenario {scenario} is missing the cell for farm {farm}, hour {hour}")]
    MissingCell { scenario: u32, farm: u32, hour: usize },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
}

/// One violated invariant, naming the entity and field it concerns.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostic {
    pub entity: String,
    pub field: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} / {}: {}", self.entity, self.field, self.message)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bus {
    pub id: u32,
    /// Per-hour active load, MW.
    pub active_load: Vec<f64>,
    /// Per-hour reactive load, MVAr.
    pub reactive_load: Vec<f64>,
    /// Voltage-deviation bounds around 1 p.u.
    pub dv_min: f64,
    pub dv_max: f64,
    /// Involuntary load shedding price, $/MWh.
    pub voll_price: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Line {
    pub id: u32,
    /// Internal indices into `SystemCase::buses`.
    pub from_bus: usize,
    pub to_bus: usize,
    /// Series conductance, p.u.
    pub g: f64,
    /// Series susceptance, p.u. (negative for inductive lines).
    pub b: f64,
    /// Shunt susceptance at the sending end, p.u.
    pub b0: f64,
    /// Thermal MVA rating, p.u. on the system base.
    pub mva_max: f64,
}

/// One block of a piecewise-linear fuel cost: `width` MW priced at `slope`
/// $/MWh above the previous blocks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBlock {
    pub width: f64,
    pub slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ThermalUnit {
    pub id: u32,
    pub bus: usize,
    pub p_min: f64,
    pub p_max: f64,
    pub q_min: f64,
    pub q_max: f64,
    /// Ramp limits, MW/h.
    pub ramp_up: f64,
    pub ramp_down: f64,
    /// Minimum up/down times, hours.
    pub min_up: u32,
    pub min_down: u32,
    /// Cost per start, $.
    pub startup_cost: f64,
    /// Quadratic fuel cost coefficients (a, b, c): a*P^2 + b*P + c in $/h.
    pub fuel_a: f64,
    pub fuel_b: f64,
    pub fuel_c: f64,
    /// Fuel cost at minimum output, $/h while committed. Derived from the
    /// quadratic coefficients by the loader.
    pub no_load_cost: f64,
    /// Piecewise blocks covering [p_min, p_max]. Derived.
    pub cost_blocks: Vec<CostBlock>,
    /// Reserve capacity prices, $/MW.
    pub reserve_price_up: f64,
    pub reserve_price_down: f64,
    /// Reserve deployment prices, $/MWh.
    pub deploy_price_up: f64,
    pub deploy_price_down: f64,
}

impl ThermalUnit {
    /// Sample the marginal cost 2aP + b at each block midpoint over
    /// `blocks` equal-width segments of [p_min, p_max]. Nondecreasing slopes
    /// whenever a >= 0, which keeps the piecewise cost convex.
    pub fn derive_cost_curve(&mut self, blocks: usize) {
        let (no_load, cost_blocks) = quadratic_to_blocks(
            self.fuel_a,
            self.fuel_b,
            self.fuel_c,
            self.p_min,
            self.p_max,
            blocks,
        );
        self.no_load_cost = no_load;
        self.cost_blocks = cost_blocks;
    }
}

pub fn quadratic_to_blocks(
    a: f64,
    b: f64,
    c: f64,
    p_min: f64,
    p_max: f64,
    blocks: usize,
) -> (f64, Vec<CostBlock>) {
    let no_load = a * p_min * p_min + b * p_min + c;
    let width = (p_max - p_min) / blocks as f64;
    let cost_blocks = (0..blocks)
        .map(|n| {
            let midpoint = p_min + (n as f64 + 0.5) * width;
            CostBlock {
                width,
                slope: 2.0 * a * midpoint + b,
            }
        })
        .collect();
    (no_load, cost_blocks)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindFarm {
    pub id: u32,
    pub bus: usize,
    /// Day-ahead forecast, MW per hour.
    pub forecast: Vec<f64>,
    /// Spillage price, $/MWh.
    pub spill_price: f64,
}

/// One step of an airflow-rate curve: over `[lo, lo + width)` the rate is
/// `rate` kg of air per MW per second. Charge steps partition the stored-air
/// range [a_min, a_max]; discharge steps partition the power range
/// [p_dis_min, p_dis_max].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CaesStep {
    pub lo: f64,
    pub width: f64,
    pub rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CaesUnit {
    pub id: u32,
    pub bus: usize,
    pub p_ch_min: f64,
    pub p_ch_max: f64,
    pub p_dis_min: f64,
    pub p_dis_max: f64,
    /// Reservoir air bounds as fractions of `cavern_capacity`.
    pub a_min: f64,
    pub a_max: f64,
    /// Start-of-day fraction; the initial level is `initial_fraction * a_max`.
    pub initial_fraction: f64,
    /// Cavern capacity, kg of air.
    pub cavern_capacity: f64,
    pub charge_steps: Vec<CaesStep>,
    pub discharge_steps: Vec<CaesStep>,
    /// Energy offer, $/MWh discharged.
    pub energy_price: f64,
    /// Reserve capacity prices, $/MW.
    pub reserve_price_up: f64,
    pub reserve_price_down: f64,
    /// Reserve deployment prices, $/MWh.
    pub deploy_price_up: f64,
    pub deploy_price_down: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SystemCase {
    pub name: String,
    pub mva_base: f64,
    /// Scheduling horizon, hours.
    pub horizon: usize,
    /// Internal index of the angle-reference bus.
    pub slack_bus: usize,
    /// Reserve time resolution tau, hours (e.g. 1/6 for 10-minute reserve).
    pub reserve_resolution: f64,
    pub buses: Vec<Bus>,
    pub lines: Vec<Line>,
    pub thermal_units: Vec<ThermalUnit>,
    pub wind_farms: Vec<WindFarm>,
    pub caes_units: Vec<CaesUnit>,
}

impl SystemCase {
    pub fn bus_index(&self, id: u32) -> Option<usize> {
        self.buses.iter().position(|b| b.id == id)
    }

    /// Total active load at one hour, MW.
    pub fn total_load(&self, t: usize) -> f64 {
        self.buses.iter().map(|b| b.active_load[t]).sum()
    }
}

/// Wind realizations per (scenario, farm, hour) with scenario probabilities.
/// Probabilities are renormalized to sum to one; the applied factor is kept
/// for reporting.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSet {
    pub probabilities: Vec<f64>,
    /// `realizations[scenario][farm][hour]`, MW.
    pub realizations: Vec<Vec<Vec<f64>>>,
    /// Probabilities were divided by this raw sum (1.0 when none needed).
    pub renormalization: f64,
}

impl ScenarioSet {
    pub fn len(&self) -> usize {
        self.probabilities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probabilities.is_empty()
    }

    /// Degenerate single-scenario set equal to the case forecast.
    pub fn forecast_only(case: &SystemCase) -> Self {
        ScenarioSet {
            probabilities: vec![1.0],
            realizations: vec![case.wind_farms.iter().map(|f| f.forecast.clone()).collect()],
            renormalization: 1.0,
        }
    }
}

/// Check every type invariant; an empty list means the case is well formed.
pub fn validate_case(case: &SystemCase) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let mut push = |entity: String, field: &str, message: String| {
        out.push(Diagnostic {
            entity,
            field: field.to_string(),
            message,
        });
    };
    let t = case.horizon;

    if case.horizon < 1 {
        push("case".into(), "horizon", "horizon must be at least 1".into());
    }
    if case.mva_base <= 0.0 {
        push("case".into(), "mva_base", "mva_base must be positive".into());
    }
    if case.slack_bus >= case.buses.len() {
        push(
            "case".into(),
            "slack_bus",
            format!("slack bus index {} out of range", case.slack_bus),
        );
    }
    if case.reserve_resolution <= 0.0 {
        push(
            "case".into(),
            "reserve_resolution",
            "reserve resolution must be positive".into(),
        );
    }

    for bus in &case.buses {
        let entity = format!("bus {}", bus.id);
        if !(bus.dv_min <= 0.0 && 0.0 <= bus.dv_max) {
            push(
                entity.clone(),
                "dv_min/dv_max",
                format!("bounds [{}, {}] must bracket 0", bus.dv_min, bus.dv_max),
            );
        }
        if bus.active_load.len() != t || bus.reactive_load.len() != t {
            push(
                entity.clone(),
                "loads",
                format!(
                    "load series lengths ({}, {}) must equal horizon {t}",
                    bus.active_load.len(),
                    bus.reactive_load.len()
                ),
            );
        }
        if bus.active_load.iter().chain(&bus.reactive_load).any(|&v| v < 0.0) {
            push(entity, "loads", "loads must be nonnegative".into());
        }
    }

    for line in &case.lines {
        let entity = format!("line {}", line.id);
        if line.from_bus == line.to_bus {
            push(entity.clone(), "from_bus/to_bus", "line endpoints must differ".into());
        }
        if line.from_bus >= case.buses.len() || line.to_bus >= case.buses.len() {
            push(entity.clone(), "from_bus/to_bus", "endpoint index out of range".into());
        }
        if line.g < 0.0 {
            push(entity.clone(), "g", format!("conductance {} must be nonnegative", line.g));
        }
        if line.mva_max <= 0.0 {
            push(entity, "mva_max", format!("rating {} must be positive", line.mva_max));
        }
    }

    for unit in &case.thermal_units {
        let entity = format!("thermal unit {}", unit.id);
        if unit.bus >= case.buses.len() {
            push(entity.clone(), "bus", "bus index out of range".into());
        }
        if unit.p_min > unit.p_max {
            push(
                entity.clone(),
                "p_min/p_max",
                format!("p_min {} exceeds p_max {}", unit.p_min, unit.p_max),
            );
        }
        if unit.min_up < 1 || unit.min_down < 1 {
            push(entity.clone(), "min_up/min_down", "minimum times must be at least 1".into());
        }
        let width_sum: f64 = unit.cost_blocks.iter().map(|b| b.width).sum();
        if (width_sum - (unit.p_max - unit.p_min)).abs() > 1e-6 {
            push(
                entity.clone(),
                "cost_blocks",
                format!(
                    "block widths sum to {width_sum}, expected {}",
                    unit.p_max - unit.p_min
                ),
            );
        }
        if unit.cost_blocks.windows(2).any(|w| w[1].slope < w[0].slope - 1e-9) {
            push(
                entity,
                "cost_blocks",
                "slopes must be nondecreasing across blocks".into(),
            );
        }
    }

    for farm in &case.wind_farms {
        let entity = format!("wind farm {}", farm.id);
        if farm.bus >= case.buses.len() {
            push(entity.clone(), "bus", "bus index out of range".into());
        }
        if farm.forecast.len() != t {
            push(
                entity.clone(),
                "forecast",
                format!("forecast length {} must equal horizon {t}", farm.forecast.len()),
            );
        }
        if farm.forecast.iter().any(|&v| v < 0.0) {
            push(entity, "forecast", "forecast must be nonnegative".into());
        }
    }

    for caes in &case.caes_units {
        let entity = format!("caes unit {}", caes.id);
        if caes.bus >= case.buses.len() {
            push(entity.clone(), "bus", "bus index out of range".into());
        }
        if !(0.0 <= caes.a_min && caes.a_min < caes.a_max && caes.a_max <= 1.0) {
            push(
                entity.clone(),
                "a_min/a_max",
                format!("need 0 <= a_min < a_max <= 1, got [{}, {}]", caes.a_min, caes.a_max),
            );
        }
        if !(caes.a_min <= caes.initial_fraction && caes.initial_fraction <= caes.a_max) {
            push(
                entity.clone(),
                "initial_fraction",
                format!("initial fraction {} outside [a_min, a_max]", caes.initial_fraction),
            );
        }
        if caes.cavern_capacity <= 0.0 {
            push(entity.clone(), "cavern_capacity", "cavern capacity must be positive".into());
        }
        check_steps(
            &mut push,
            &entity,
            "charge_steps",
            &caes.charge_steps,
            caes.a_min,
            caes.a_max,
        );
        check_steps(
            &mut push,
            &entity,
            "discharge_steps",
            &caes.discharge_steps,
            caes.p_dis_min,
            caes.p_dis_max,
        );
    }

    out
}

fn check_steps(
    push: &mut impl FnMut(String, &str, String),
    entity: &str,
    field: &'static str,
    steps: &[CaesStep],
    range_lo: f64,
    range_hi: f64,
) {
    if steps.is_empty() {
        push(entity.to_string(), field, "at least one step required".into());
        return;
    }
    let tol = 1e-9 * range_hi.abs().max(1.0);
    let mut cursor = range_lo;
    for (i, step) in steps.iter().enumerate() {
        if (step.lo - cursor).abs() > tol {
            push(
                entity.to_string(),
                field,
                format!("step {i} starts at {} but previous coverage ends at {cursor}", step.lo),
            );
        }
        if step.width <= 0.0 {
            push(entity.to_string(), field, format!("step {i} has non-positive width"));
        }
        cursor = step.lo + step.width;
    }
    if (cursor - range_hi).abs() > tol {
        push(
            entity.to_string(),
            field,
            format!("steps cover up to {cursor}, expected {range_hi}"),
        );
    }
    if steps.windows(2).any(|w| w[1].rate > w[0].rate + 1e-12) {
        push(
            entity.to_string(),
            field,
            "airflow rates must be nonincreasing across steps".into(),
        );
    }
}

#[cfg(test)]
mod tests;
