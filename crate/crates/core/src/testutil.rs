//! Small hand-built cases shared by unit tests.

use crate::data::{
    quadratic_to_blocks, Bus, CaesStep, CaesUnit, Line, SystemCase, ThermalUnit, WindFarm,
    FUEL_COST_BLOCKS,
};

pub fn thermal_unit(id: u32, bus: usize, p_min: f64, p_max: f64, fuel_b: f64) -> ThermalUnit {
    let fuel_a = 0.02;
    let fuel_c = 5.0;
    let (no_load_cost, cost_blocks) =
        quadratic_to_blocks(fuel_a, fuel_b, fuel_c, p_min, p_max, FUEL_COST_BLOCKS);
    ThermalUnit {
        id,
        bus,
        p_min,
        p_max,
        q_min: -20.0,
        q_max: 40.0,
        ramp_up: 60.0,
        ramp_down: 60.0,
        min_up: 1,
        min_down: 1,
        startup_cost: 50.0,
        fuel_a,
        fuel_b,
        fuel_c,
        no_load_cost,
        cost_blocks,
        reserve_price_up: 4.0,
        reserve_price_down: 4.0,
        deploy_price_up: fuel_b + 5.0,
        deploy_price_down: 2.0,
    }
}

pub fn bus(id: u32, active: Vec<f64>, reactive: Vec<f64>) -> Bus {
    Bus {
        id,
        active_load: active,
        reactive_load: reactive,
        dv_min: -0.06,
        dv_max: 0.06,
        voll_price: 1000.0,
    }
}

/// One bus, one unit, no network. The smallest case that can be scheduled.
pub fn single_bus_case(load_mw: Vec<f64>) -> SystemCase {
    let horizon = load_mw.len();
    let reactive = load_mw.iter().map(|p| p * 0.2).collect();
    SystemCase {
        name: "single-bus".into(),
        mva_base: 100.0,
        horizon,
        slack_bus: 0,
        reserve_resolution: 1.0 / 6.0,
        buses: vec![bus(1, load_mw, reactive)],
        lines: vec![],
        thermal_units: vec![thermal_unit(1, 0, 10.0, 100.0, 20.0)],
        wind_farms: vec![],
        caes_units: vec![],
    }
}

/// Two buses joined by one line: a cheap unit at bus 1 (slack), an expensive
/// unit and the load at bus 2. Forces flow 1 -> 2.
pub fn two_bus_case(horizon: usize, load_mw: f64) -> SystemCase {
    let active: Vec<f64> = (0..horizon).map(|_| load_mw).collect();
    let reactive: Vec<f64> = active.iter().map(|p| p * 0.25).collect();
    SystemCase {
        name: "two-bus".into(),
        mva_base: 100.0,
        horizon,
        slack_bus: 0,
        reserve_resolution: 1.0 / 6.0,
        buses: vec![
            bus(1, vec![0.0; horizon], vec![0.0; horizon]),
            bus(2, active, reactive),
        ],
        lines: vec![Line {
            id: 1,
            from_bus: 0,
            to_bus: 1,
            g: 1.0,
            b: -8.0,
            b0: 0.01,
            mva_max: 1.2,
        }],
        thermal_units: vec![
            thermal_unit(1, 0, 5.0, 120.0, 18.0),
            thermal_unit(2, 1, 5.0, 60.0, 38.0),
        ],
        wind_farms: vec![],
        caes_units: vec![],
    }
}

pub fn add_wind(case: &mut SystemCase, bus: usize, forecast_mw: f64) {
    let forecast = vec![forecast_mw; case.horizon];
    case.wind_farms.push(WindFarm {
        id: case.wind_farms.len() as u32 + 1,
        bus,
        forecast,
        spill_price: 100.0,
    });
}

/// Four-step airflow tables shaped like the reference curves: charging slows
/// as the reservoir fills, low-power discharge needs more air per MW.
pub fn caes_unit(id: u32, bus: usize) -> CaesUnit {
    let a_min = 0.33;
    let a_max = 1.0;
    let charge_width = (a_max - a_min) / 4.0;
    let charge_rates = [2.3, 2.25, 2.2, 1.6];
    let p_dis_min = 12.0;
    let p_dis_max = 40.0;
    let dis_width = (p_dis_max - p_dis_min) / 4.0;
    let dis_rates = [3.8, 3.0, 2.9, 2.85];
    CaesUnit {
        id,
        bus,
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
                lo: a_min + s as f64 * charge_width,
                width: charge_width,
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
