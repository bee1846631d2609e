use super::parse::parse_case;
use super::scenario::parse_scenarios;
use super::*;
use crate::testutil;

fn table1_like_case() -> String {
    // Thermal rows carry the published 30-bus unit ratings; the rest of the
    // case is the smallest network that ties them together.
    let units = [
        (1, 10.0, 100.0, -20.0, 150.0),
        (2, 10.0, 80.0, -20.0, 60.0),
        (3, 10.0, 60.0, -15.0, 40.0),
        (4, 10.0, 65.0, -15.0, 47.8),
        (5, 10.0, 70.0, -15.0, 44.7),
        (6, 10.0, 60.0, -15.0, 62.5),
    ];
    let mut text = String::from(
        "[META]\nname = t1\nmva_base = 100\nhorizon = 2\nslack_bus = 1\nreserve_resolution_h = 0.16666666666666666\n\n[BUS]\n",
    );
    for b in 1..=6 {
        text.push_str(&format!("bus {b} -0.05 0.05 1000\n"));
    }
    text.push_str("pload 2 40 50\nqload 2 10 12\n\n[LINE]\n");
    for (i, (f, t)) in [(1u32, 2u32), (2, 3), (3, 4), (4, 5), (5, 6), (6, 1)].iter().enumerate() {
        text.push_str(&format!("line {} {f} {t} 2.0 -8.0 0.01 80\n", i + 1));
    }
    text.push_str("\n[THERMAL]\n");
    for (id, pmin, pmax, qmin, qmax) in units {
        text.push_str(&format!(
            "unit {id} {id} {pmin} {pmax} {qmin} {qmax} 25 25 1 1 100 0.15 42 36 4 4 45 5\n"
        ));
    }
    text
}

#[test]
fn loads_case_with_published_unit_ratings() {
    let case = parse_case(&table1_like_case(), "t1.case").unwrap();
    let ratings: Vec<(f64, f64)> = case
        .thermal_units
        .iter()
        .map(|u| (u.p_min, u.p_max))
        .collect();
    assert_eq!(
        ratings,
        vec![
            (10.0, 100.0),
            (10.0, 80.0),
            (10.0, 60.0),
            (10.0, 65.0),
            (10.0, 70.0),
            (10.0, 60.0)
        ]
    );
    assert_eq!(case.horizon, 2);
    assert_eq!(case.slack_bus, 0);
    // Missing pload/qload rows default to zero series of horizon length.
    assert_eq!(case.buses[2].active_load, vec![0.0, 0.0]);
}

#[test]
fn self_loop_line_rejected() {
    let text = table1_like_case().replace("line 1 1 2", "line 1 2 2");
    let err = parse_case(&text, "t1.case").unwrap_err();
    match err {
        DataError::Validation { diagnostics } => {
            assert!(diagnostics.iter().any(|d| d.entity == "line 1" && d.field == "from_bus/to_bus"));
        }
        other => panic!("expected validation error, got {other}"),
    }
}

#[test]
fn dangling_bus_reference_rejected() {
    let text = table1_like_case().replace("unit 6 6", "unit 6 99");
    let err = parse_case(&text, "t1.case").unwrap_err();
    assert!(matches!(err, DataError::DanglingReference { bus_id: 99, .. }));
}

#[test]
fn caes_section_with_reference_bounds_accepted() {
    let mut text = table1_like_case();
    text.push_str("\n[CAES]\nunit 1 3 12 40 12 40 0.33 1.0 0.8 2600000 10 5 5 6 6\n");
    let charge_width = (1.0 - 0.33) / 4.0;
    for s in 0..4 {
        text.push_str(&format!(
            "charge 1 {} {charge_width} {}\n",
            0.33 + s as f64 * charge_width,
            2.3 - 0.1 * s as f64
        ));
    }
    for s in 0..4 {
        text.push_str(&format!("discharge 1 {} 7 {}\n", 12.0 + 7.0 * s as f64, 3.5 - 0.2 * s as f64));
    }
    let case = parse_case(&text, "t1.case").unwrap();
    let caes = &case.caes_units[0];
    assert_eq!((caes.a_min, caes.a_max), (0.33, 1.0));
    assert_eq!((caes.p_ch_min, caes.p_ch_max), (12.0, 40.0));
    assert_eq!(caes.charge_steps.len(), 4);
}

#[test]
fn parse_error_carries_line_number() {
    let text = table1_like_case().replace("pload 2 40 50", "pload 2 40 oops");
    let err = parse_case(&text, "t1.case").unwrap_err();
    match err {
        DataError::Parse { line, message, .. } => {
            assert_eq!(line, 15);
            assert!(message.contains("oops"));
        }
        other => panic!("expected parse error, got {other}"),
    }
}

#[test]
fn fuel_blocks_partition_operating_range_with_nondecreasing_slopes() {
    let case = parse_case(&table1_like_case(), "t1.case").unwrap();
    for unit in &case.thermal_units {
        let width_sum: f64 = unit.cost_blocks.iter().map(|b| b.width).sum();
        assert!((width_sum - (unit.p_max - unit.p_min)).abs() < 1e-9);
        for w in unit.cost_blocks.windows(2) {
            assert!(w[1].slope >= w[0].slope);
        }
        // Marginal cost at p_min is below the first block slope midpoint sample.
        assert!(unit.no_load_cost > 0.0);
    }
}

#[test]
fn validate_flags_bad_block_widths() {
    let mut case = testutil::two_bus_case(2, 40.0);
    case.thermal_units[0].cost_blocks[0].width += 5.0;
    let diagnostics = validate_case(&case);
    assert_eq!(diagnostics.len(), 1);
    assert_eq!(diagnostics[0].field, "cost_blocks");
}

#[test]
fn validate_flags_charge_step_gap() {
    let mut case = testutil::two_bus_case(2, 40.0);
    case.caes_units.push(testutil::caes_unit(1, 1));
    case.caes_units[0].charge_steps[2].lo += 0.05;
    let diagnostics = validate_case(&case);
    assert!(diagnostics
        .iter()
        .any(|d| d.field == "charge_steps" && d.message.contains("starts at")));
}

#[test]
fn well_formed_case_has_no_diagnostics() {
    let mut case = testutil::two_bus_case(4, 40.0);
    case.caes_units.push(testutil::caes_unit(1, 1));
    testutil::add_wind(&mut case, 1, 15.0);
    assert!(validate_case(&case).is_empty());
}

#[test]
fn save_load_round_trip_is_identity() {
    let mut case = testutil::two_bus_case(3, 37.5);
    case.caes_units.push(testutil::caes_unit(1, 1));
    testutil::add_wind(&mut case, 1, 12.25);
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("roundtrip.case");
    save_case(&case, &path).unwrap();
    let reloaded = load_case(&path).unwrap();
    assert_eq!(case, reloaded);
}

#[test]
fn per_unit_rating_recovers_input_mva() {
    let case = parse_case(&table1_like_case(), "t1.case").unwrap();
    for line in &case.lines {
        let mva = line.mva_max * case.mva_base;
        assert!((mva - 80.0).abs() / 80.0 < 1e-9);
    }
}

// --- scenarios ---

const TABLE7_PROBS: [f64; 15] = [
    0.0673, 0.071, 0.1704, 0.0749, 0.0166, 0.0289, 0.065, 0.05, 0.0693, 0.095, 0.0583, 0.0476,
    0.0677, 0.0472, 0.0718,
];

fn scenario_text(probs: &[f64], horizon: usize) -> String {
    let mut text = String::from("scenario,probability,farm,hour,mw\n");
    for (s, p) in probs.iter().enumerate() {
        for hour in 1..=horizon {
            text.push_str(&format!("{},{p},1,{hour},{}\n", s + 1, 10.0 + s as f64));
        }
    }
    text
}

fn wind_case(horizon: usize) -> SystemCase {
    let mut case = testutil::two_bus_case(horizon, 40.0);
    testutil::add_wind(&mut case, 1, 15.0);
    case
}

#[test]
fn published_probability_table_renormalizes() {
    let case = wind_case(2);
    let set = parse_scenarios(&scenario_text(&TABLE7_PROBS, 2), "w.scen", &case).unwrap();
    assert_eq!(set.len(), 15);
    // The raw table sums to 1.001; the loader records that factor.
    assert!((set.renormalization - 1.001).abs() < 1e-9);
    let total: f64 = set.probabilities.iter().sum();
    assert!((total - 1.0).abs() < 1e-12);
}

#[test]
fn single_certain_scenario_accepted() {
    let case = wind_case(2);
    let set = parse_scenarios(&scenario_text(&[1.0], 2), "w.scen", &case).unwrap();
    assert_eq!(set.len(), 1);
    assert_eq!(set.probabilities, vec![1.0]);
    assert_eq!(set.renormalization, 1.0);
    assert_eq!(set.realizations[0][0], vec![10.0, 10.0]);
}

#[test]
fn probability_sum_far_from_one_rejected() {
    let case = wind_case(2);
    let err = parse_scenarios(&scenario_text(&[0.5, 0.4], 2), "w.scen", &case).unwrap_err();
    assert!(matches!(err, DataError::ProbabilitySum { .. }));
}

#[test]
fn missing_cell_rejected() {
    let case = wind_case(2);
    let mut text = String::from("scenario,probability,farm,hour,mw\n");
    text.push_str("1,1.0,1,1,10\n"); // hour 2 missing
    let err = parse_scenarios(&text, "w.scen", &case).unwrap_err();
    assert!(matches!(
        err,
        DataError::MissingCell {
            scenario: 1,
            farm: 1,
            hour: 2
        }
    ));
}

#[test]
fn negative_probability_rejected() {
    let case = wind_case(1);
    let text = "scenario,probability,farm,hour,mw\n1,-0.2,1,1,10\n2,1.2,1,1,10\n";
    let err = parse_scenarios(text, "w.scen", &case).unwrap_err();
    assert!(matches!(err, DataError::NegativeProbability { scenario: 1, .. }));
}

#[test]
fn unknown_farm_rejected() {
    let case = wind_case(1);
    let text = "scenario,probability,farm,hour,mw\n1,1.0,9,1,10\n";
    assert!(parse_scenarios(text, "w.scen", &case).is_err());
}

mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        // Round-trip through the text format is exact: `{}` formatting of f64
        // is shortest round-trip, so parsing recovers every bit.
        #[test]
        fn round_trip_random_loads(
            loads in proptest::collection::vec(0.0f64..500.0, 1..6),
            rating in 10.0f64..400.0,
        ) {
            let horizon = loads.len();
            let mut case = testutil::two_bus_case(horizon, 0.0);
            case.buses[1].active_load = loads.clone();
            case.buses[1].reactive_load = loads.iter().map(|v| v * 0.31).collect();
            case.lines[0].mva_max = rating / case.mva_base;
            let dir = tempfile::tempdir().unwrap();
            let path = dir.path().join("prop.case");
            save_case(&case, &path).unwrap();
            let reloaded = load_case(&path).unwrap();
            prop_assert_eq!(case, reloaded);
        }

        #[test]
        fn renormalized_probabilities_sum_to_one(
            probs in proptest::collection::vec(0.01f64..0.2, 5..12),
        ) {
            let raw_sum: f64 = probs.iter().sum();
            // Scale into the accepted window around 1.
            let scaled: Vec<f64> = probs.iter().map(|p| p / raw_sum * 1.002).collect();
            let case = wind_case(1);
            let set = parse_scenarios(&scenario_text(&scaled, 1), "w.scen", &case).unwrap();
            let total: f64 = set.probabilities.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }
    }
}
