//! Hot-path benchmarks: the linearization kernels and full model assembly.
//! Solver time dominates end-to-end runs and is tracked by the study
//! reports; these isolate the parts this crate owns.

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use gridsched_core::data::{Bus, Line, SystemCase, ThermalUnit};
use gridsched_core::lacopf::{block_slopes, piecewise_square, polygon_coefficients};
use gridsched_core::scheduler::{assemble, CaesMode, Variant};
use gridsched_core::LinearizationConfig;
use std::hint::black_box;

fn kernel_benches(c: &mut Criterion) {
    c.bench_function("block_slopes_l6", |b| {
        b.iter(|| block_slopes(black_box(0.6), black_box(6)))
    });
    c.bench_function("piecewise_square_l4", |b| {
        b.iter(|| piecewise_square(black_box(0.37), black_box(0.6), black_box(4)).unwrap())
    });
    c.bench_function("polygon_coefficients_r12", |b| {
        b.iter(|| polygon_coefficients(black_box(12)))
    });
}

/// Ring network with one unit and one loaded bus per ring node.
fn ring_case(buses: usize, horizon: usize) -> SystemCase {
    let load = 18.0;
    let bus = |id: u32| Bus {
        id,
        active_load: vec![load; horizon],
        reactive_load: vec![load * 0.3; horizon],
        dv_min: -0.1,
        dv_max: 0.1,
        voll_price: 1000.0,
    };
    let unit = |id: u32, at: usize| {
        let (no_load_cost, cost_blocks) =
            gridsched_core::data::quadratic_to_blocks(0.05, 20.0 + id as f64, 4.0, 5.0, 60.0, 5);
        ThermalUnit {
            id,
            bus: at,
            p_min: 5.0,
            p_max: 60.0,
            q_min: -20.0,
            q_max: 40.0,
            ramp_up: 40.0,
            ramp_down: 40.0,
            min_up: 2,
            min_down: 2,
            startup_cost: 80.0,
            fuel_a: 0.05,
            fuel_b: 20.0 + id as f64,
            fuel_c: 4.0,
            no_load_cost,
            cost_blocks,
            reserve_price_up: 4.0,
            reserve_price_down: 4.0,
            deploy_price_up: 30.0,
            deploy_price_down: 2.0,
        }
    };
    SystemCase {
        name: "ring".into(),
        mva_base: 100.0,
        horizon,
        slack_bus: 0,
        reserve_resolution: 1.0 / 6.0,
        buses: (1..=buses as u32).map(bus).collect(),
        lines: (0..buses)
            .map(|i| Line {
                id: i as u32 + 1,
                from_bus: i,
                to_bus: (i + 1) % buses,
                g: 1.2,
                b: -9.0,
                b0: 0.005,
                mva_max: 0.9,
            })
            .collect(),
        thermal_units: (0..buses).map(|i| unit(i as u32 + 1, i)).collect(),
        wind_farms: vec![],
        caes_units: vec![],
    }
}

fn assembly_benches(c: &mut Criterion) {
    let case = ring_case(12, 24);
    let config = LinearizationConfig::default();
    c.bench_function("assemble_lac_full_ring12_t24", |b| {
        b.iter(|| {
            assemble(
                black_box(&case),
                None,
                black_box(&config),
                Variant::LacFull,
                CaesMode::None,
                None,
            )
            .unwrap()
        })
    });
    let assembled = assemble(&case, None, &config, Variant::LacFull, CaesMode::None, None).unwrap();
    c.bench_function("export_lp_ring12_t24", |b| {
        b.iter_batched(
            || &assembled.model,
            |model| model.lp_string(),
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, kernel_benches, assembly_benches);
criterion_main!(benches);
