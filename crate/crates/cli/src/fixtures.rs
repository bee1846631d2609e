//! Shipped synthetic fixtures.
//!
//! A 30-bus, 41-line meshed network with six thermal units, optionally a
//! wind farm (bus 23) and a CAES unit (bus 18). Loads follow a stated daily
//! shape (overnight valley at 54% of peak, evening peak at hour 19); wind is
//! night-heavy. The unit ratings and limits match the published 30-bus study
//! table; impedances, profiles, and prices are synthetic, so dollar totals
//! are fixture-specific. The scenario file carries fifteen scalar factors on
//! the forecast with the published probability table (which sums to 1.001 and
//! exercises the loader's renormalization).
//!
//! `make_fixtures` regenerates the committed files; they are deterministic.

use gridsched_core::data::{
    quadratic_to_blocks, save_case, Bus, CaesStep, CaesUnit, DataError, Line, SystemCase,
    ThermalUnit, WindFarm, FUEL_COST_BLOCKS,
};
use std::fmt::Write as _;
use std::path::Path;

pub const HORIZON: usize = 24;

/// Fraction of the daily peak in each hour.
pub const LOAD_SHAPE: [f64; 24] = [
    0.62, 0.58, 0.55, 0.54, 0.55, 0.60, 0.68, 0.78, 0.85, 0.88, 0.90, 0.92, 0.91, 0.89, 0.87,
    0.88, 0.92, 0.97, 1.00, 0.99, 0.95, 0.86, 0.75, 0.66,
];

/// Fraction of installed wind output in each hour (night-heavy).
pub const WIND_SHAPE: [f64; 24] = [
    0.95, 1.00, 0.98, 0.96, 0.92, 0.85, 0.75, 0.62, 0.50, 0.42, 0.38, 0.35, 0.33, 0.35, 0.40,
    0.48, 0.55, 0.60, 0.65, 0.72, 0.80, 0.88, 0.92, 0.95,
];

pub const WIND_CAPACITY_MW: f64 = 55.0;

/// Scale on the per-bus peak loads below.
pub const PEAK_SCALE: f64 = 0.82;

/// Scalar wind factors per scenario, spanning a +-45% band around forecast.
pub const SCENARIO_FACTORS: [f64; 15] = [
    0.55, 0.61, 0.68, 0.74, 0.81, 0.87, 0.94, 1.00, 1.06, 1.13, 1.19, 1.26, 1.32, 1.39, 1.45,
];

/// The published probability table; sums to 1.001 as printed.
pub const SCENARIO_PROBS: [f64; 15] = [
    0.0673, 0.071, 0.1704, 0.0749, 0.0166, 0.0289, 0.065, 0.05, 0.0693, 0.095, 0.0583, 0.0476,
    0.0677, 0.0472, 0.0718,
];

/// Peak active load per bus, MW. Buses missing from the list carry no load.
const PEAK_LOADS: [(u32, f64); 21] = [
    (2, 21.7),
    (3, 2.4),
    (4, 7.6),
    (5, 94.2),
    (7, 22.8),
    (8, 30.0),
    (10, 5.8),
    (12, 11.2),
    (14, 6.2),
    (15, 8.2),
    (16, 3.5),
    (17, 9.0),
    (18, 3.2),
    (19, 9.5),
    (20, 2.2),
    (21, 17.5),
    (23, 3.2),
    (24, 8.7),
    (26, 3.5),
    (29, 2.4),
    (30, 10.6),
];

const POWER_FACTOR_Q: f64 = 0.28;

/// (from, to, series reactance p.u., rating MVA). Resistance is x/4.
const LINES: [(u32, u32, f64, f64); 41] = [
    (1, 2, 0.06, 130.0),
    (1, 3, 0.19, 130.0),
    (2, 4, 0.17, 65.0),
    (3, 4, 0.04, 130.0),
    (2, 5, 0.20, 130.0),
    (2, 6, 0.18, 65.0),
    (4, 6, 0.04, 90.0),
    (5, 7, 0.12, 70.0),
    (6, 7, 0.08, 130.0),
    (6, 8, 0.04, 40.0),
    (6, 9, 0.21, 65.0),
    (6, 10, 0.56, 40.0),
    (9, 10, 0.11, 65.0),
    (9, 11, 0.21, 65.0),
    (4, 12, 0.26, 65.0),
    (12, 13, 0.14, 65.0),
    (12, 14, 0.26, 36.0),
    (12, 15, 0.13, 36.0),
    (12, 16, 0.20, 36.0),
    (14, 15, 0.20, 24.0),
    (15, 18, 0.22, 32.0),
    (16, 17, 0.19, 24.0),
    (10, 17, 0.08, 36.0),
    (18, 19, 0.13, 32.0),
    (19, 20, 0.07, 36.0),
    (10, 20, 0.21, 36.0),
    (10, 21, 0.07, 36.0),
    (10, 22, 0.15, 36.0),
    (21, 22, 0.02, 36.0),
    (15, 23, 0.20, 55.0),
    (22, 24, 0.18, 36.0),
    (23, 24, 0.27, 55.0),
    (24, 25, 0.33, 36.0),
    (25, 26, 0.38, 24.0),
    (25, 27, 0.21, 24.0),
    (27, 28, 0.40, 65.0),
    (8, 28, 0.20, 36.0),
    (6, 28, 0.06, 36.0),
    (27, 29, 0.42, 24.0),
    (27, 30, 0.60, 24.0),
    (29, 30, 0.45, 24.0),
];

/// Published 30-bus thermal table: (SU, RD, RU, MD, MU, c, b, a, Qmin, Qmax,
/// Pmin, Pmax) per unit, placed at the classic generator buses.
const THERMAL: [(u32, f64, f64, f64, u32, u32, f64, f64, f64, f64, f64, f64, f64); 6] = [
    (1, 440.0, 50.0, 50.0, 10, 10, 6.8, 20.0, 0.038, -20.0, 150.0, 10.0, 100.0),
    (2, 440.0, 50.0, 50.0, 10, 10, 6.8, 20.0, 0.25, -20.0, 60.0, 10.0, 80.0),
    (5, 100.0, 25.0, 25.0, 1, 1, 36.0, 42.0, 0.15, -15.0, 40.0, 10.0, 60.0),
    (8, 100.0, 30.0, 30.0, 1, 1, 36.0, 42.0, 0.15, -15.0, 47.8, 10.0, 65.0),
    (11, 100.0, 25.0, 25.0, 1, 1, 36.0, 42.0, 0.15, -15.0, 44.7, 10.0, 70.0),
    (13, 100.0, 30.0, 30.0, 1, 1, 36.0, 42.0, 0.15, -15.0, 62.5, 10.0, 60.0),
];

fn round3(v: f64) -> f64 {
    (v * 1000.0).round() / 1000.0
}

/// Deterministic 30-bus case: thermal fleet only.
pub fn case30_deterministic() -> SystemCase {
    build_case("case30", false)
}

/// The same network with a wind farm at bus 23 and a CAES unit at bus 18.
pub fn case30_wind_caes() -> SystemCase {
    build_case("case30-wind-caes", true)
}

/// The first eight hours of the wind+CAES system: overnight valley with
/// strong wind, then the morning rise. Scenario-expanded studies on the full
/// day outgrow a desk-scale single-core solver budget; this keeps the same
/// network and fleet on a window that still exercises a full storage cycle.
pub fn case30_wind_caes_8h() -> SystemCase {
    let mut case = case30_wind_caes();
    truncate_horizon(&mut case, 8);
    case.name = "case30-wind-caes-8h".to_string();
    case
}

fn truncate_horizon(case: &mut SystemCase, hours: usize) {
    case.horizon = hours;
    for bus in &mut case.buses {
        bus.active_load.truncate(hours);
        bus.reactive_load.truncate(hours);
    }
    for farm in &mut case.wind_farms {
        farm.forecast.truncate(hours);
    }
}

fn build_case(name: &str, with_wind_caes: bool) -> SystemCase {
    let mut buses = Vec::with_capacity(30);
    for id in 1..=30u32 {
        let peak = PEAK_LOADS
            .iter()
            .find(|(bus, _)| *bus == id)
            .map(|(_, mw)| *mw)
            .unwrap_or(0.0);
        let active: Vec<f64> = LOAD_SHAPE
            .iter()
            .map(|s| round3(peak * PEAK_SCALE * s))
            .collect();
        let reactive: Vec<f64> = active.iter().map(|p| round3(p * POWER_FACTOR_Q)).collect();
        buses.push(Bus {
            id,
            active_load: active,
            reactive_load: reactive,
            dv_min: -0.1,
            dv_max: 0.1,
            voll_price: 1000.0,
        });
    }

    let lines = LINES
        .iter()
        .enumerate()
        .map(|(i, &(from, to, x, rating))| {
            let r = x / 4.0;
            let denom = r * r + x * x;
            Line {
                id: i as u32 + 1,
                from_bus: (from - 1) as usize,
                to_bus: (to - 1) as usize,
                g: round3(r / denom),
                b: round3(-x / denom),
                b0: if rating >= 65.0 { 0.015 } else { 0.005 },
                mva_max: rating / 100.0,
            }
        })
        .collect();

    let thermal_units = THERMAL
        .iter()
        .enumerate()
        .map(|(i, &(bus, su, rd, ru, md, mu, c, b, a, q_min, q_max, p_min, p_max))| {
            let baseload = i < 2;
            let (no_load_cost, cost_blocks) =
                quadratic_to_blocks(a, b, c, p_min, p_max, FUEL_COST_BLOCKS);
            ThermalUnit {
                id: i as u32 + 1,
                bus: (bus - 1) as usize,
                p_min,
                p_max,
                q_min,
                q_max,
                ramp_up: ru,
                ramp_down: rd,
                min_up: mu,
                min_down: md,
                startup_cost: su,
                fuel_a: a,
                fuel_b: b,
                fuel_c: c,
                no_load_cost,
                cost_blocks,
                reserve_price_up: if baseload { 7.0 } else { 9.0 },
                reserve_price_down: if baseload { 7.0 } else { 9.0 },
                deploy_price_up: if baseload { 24.0 } else { 46.0 },
                deploy_price_down: 3.0,
            }
        })
        .collect();

    let wind_farms = if with_wind_caes {
        vec![WindFarm {
            id: 1,
            bus: 22, // bus 23
            forecast: WIND_SHAPE
                .iter()
                .map(|s| round3(WIND_CAPACITY_MW * s))
                .collect(),
            spill_price: 100.0,
        }]
    } else {
        Vec::new()
    };

    let caes_units = if with_wind_caes {
        vec![reference_caes()]
    } else {
        Vec::new()
    };

    SystemCase {
        name: name.to_string(),
        mva_base: 100.0,
        horizon: HORIZON,
        slack_bus: 0,
        reserve_resolution: 1.0 / 6.0,
        buses,
        lines,
        thermal_units,
        wind_farms,
        caes_units,
    }
}

/// The reference storage unit: 12-40 MW windows, reservoir between 33% and
/// 100%, starting at 80%. Step tables follow the documented monotone shapes
/// with a charge/discharge air ratio around 0.67 (a gas-assisted expander
/// needs less air per MWh than the compressor stores).
pub fn reference_caes() -> CaesUnit {
    let a_min = 0.33;
    let a_max = 1.0;
    let charge_width = round3((a_max - a_min) / 4.0);
    let charge_rates = [2.3, 2.25, 2.2, 1.6];
    let p_dis_min = 12.0;
    let p_dis_max = 40.0;
    let dis_width = (p_dis_max - p_dis_min) / 4.0;
    let dis_rates = [3.8, 3.0, 2.9, 2.85];
    CaesUnit {
        id: 1,
        bus: 17, // bus 18
        p_ch_min: 12.0,
        p_ch_max: 40.0,
        p_dis_min,
        p_dis_max,
        a_min,
        a_max,
        initial_fraction: 0.8,
        cavern_capacity: 2.6e6,
        charge_steps: (0..4)
            .map(|s| CaesStep {
                lo: round3(a_min + s as f64 * charge_width),
                width: if s == 3 {
                    round3(a_max - (a_min + 3.0 * charge_width))
                } else {
                    charge_width
                },
                rate: charge_rates[s],
            })
            .collect(),
        discharge_steps: (0..4)
            .map(|s| CaesStep {
                lo: p_dis_min + s as f64 * dis_width,
                width: dis_width,
                rate: dis_rates[s],
            })
            .collect(),
        energy_price: 10.0,
        reserve_price_up: 5.0,
        reserve_price_down: 5.0,
        deploy_price_up: 6.0,
        deploy_price_down: 6.0,
    }
}

/// Scenario file body: fifteen scalar factors on the forecast with the
/// published probability column.
pub fn wind15_text(case: &SystemCase) -> String {
    let farm = &case.wind_farms[0];
    let mut out = String::from("scenario,probability,farm,hour,mw\n");
    for (s, (&factor, &prob)) in SCENARIO_FACTORS.iter().zip(&SCENARIO_PROBS).enumerate() {
        for (t, forecast) in farm.forecast.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{prob},{},{},{}",
                s + 1,
                farm.id,
                t + 1,
                round3(forecast * factor)
            );
        }
    }
    out
}

/// Tiny two-bus case exercising every entity type; used by the enumeration
/// oracle (12 binaries under DC) and as a parser smoke fixture.
pub fn toy2() -> SystemCase {
    let horizon = 2;
    SystemCase {
        name: "toy2".to_string(),
        mva_base: 100.0,
        horizon,
        slack_bus: 0,
        reserve_resolution: 1.0 / 6.0,
        buses: vec![
            Bus {
                id: 1,
                active_load: vec![6.0, 9.0],
                reactive_load: vec![1.5, 2.25],
                dv_min: -0.06,
                dv_max: 0.06,
                voll_price: 1000.0,
            },
            Bus {
                id: 2,
                active_load: vec![18.0, 24.0],
                reactive_load: vec![4.5, 6.0],
                dv_min: -0.06,
                dv_max: 0.06,
                voll_price: 1000.0,
            },
        ],
        lines: vec![Line {
            id: 1,
            from_bus: 0,
            to_bus: 1,
            g: 1.0,
            b: -8.0,
            b0: 0.0,
            mva_max: 0.5,
        }],
        thermal_units: vec![toy_unit(1, 0, 16.0), toy_unit(2, 1, 30.0)],
        wind_farms: vec![WindFarm {
            id: 1,
            bus: 1,
            forecast: vec![6.0, 4.0],
            spill_price: 100.0,
        }],
        caes_units: Vec::new(),
    }
}

fn toy_unit(id: u32, bus: usize, fuel_b: f64) -> ThermalUnit {
    let (a, c) = (0.04, 2.0);
    let (p_min, p_max) = (2.0, 30.0);
    let (no_load_cost, cost_blocks) = quadratic_to_blocks(a, fuel_b, c, p_min, p_max, FUEL_COST_BLOCKS);
    ThermalUnit {
        id,
        bus,
        p_min,
        p_max,
        q_min: -10.0,
        q_max: 20.0,
        ramp_up: 30.0,
        ramp_down: 30.0,
        min_up: 1,
        min_down: 1,
        startup_cost: 10.0,
        fuel_a: a,
        fuel_b,
        fuel_c: c,
        no_load_cost,
        cost_blocks,
        reserve_price_up: 2.0,
        reserve_price_down: 2.0,
        deploy_price_up: fuel_b + 4.0,
        deploy_price_down: 1.0,
    }
}

/// Two equally likely scenarios around the toy forecast.
pub fn toy2_scen_text() -> String {
    let case = toy2();
    let farm = &case.wind_farms[0];
    let mut out = String::from("scenario,probability,farm,hour,mw\n");
    for (s, factor) in [0.5, 1.5].iter().enumerate() {
        for (t, forecast) in farm.forecast.iter().enumerate() {
            let _ = writeln!(out, "{},0.5,1,{},{}", s + 1, t + 1, round3(forecast * factor));
        }
    }
    out
}

/// Write every shipped fixture into `dir`.
pub fn write_all(dir: &Path) -> Result<(), DataError> {
    std::fs::create_dir_all(dir).map_err(|source| DataError::Io {
        path: dir.display().to_string(),
        source,
    })?;
    save_case(&case30_deterministic(), dir.join("case30.case"))?;
    let wind_caes = case30_wind_caes();
    save_case(&wind_caes, dir.join("case30_wind_caes.case"))?;
    let wind_caes_8h = case30_wind_caes_8h();
    save_case(&wind_caes_8h, dir.join("case30_wind_caes_8h.case"))?;
    save_case(&toy2(), dir.join("toy2.case"))?;
    for (name, text) in [
        ("wind15.scen", wind15_text(&wind_caes)),
        ("wind15_8h.scen", wind15_text(&wind_caes_8h)),
        ("toy2.scen", toy2_scen_text()),
    ] {
        let path = dir.join(name);
        std::fs::write(&path, text).map_err(|source| DataError::Io {
            path: path.display().to_string(),
            source,
        })?;
    }
    Ok(())
}
