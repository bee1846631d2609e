//! Wind scenario files: delimited text with header
//! `scenario,probability,farm,hour,mw`, one row per (scenario, farm, hour)
//! cell. Hours are 1-based. The probability column repeats per scenario and
//! must be self-consistent.

use super::{DataError, ScenarioSet, SystemCase, PROBABILITY_SUM_TOLERANCE};
use std::collections::BTreeMap;
use std::path::Path;

pub fn load_scenarios(path: impl AsRef<Path>, case: &SystemCase) -> Result<ScenarioSet, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_scenarios(&text, &path.display().to_string(), case)
}

pub(crate) fn parse_scenarios(
    text: &str,
    path: &str,
    case: &SystemCase,
) -> Result<ScenarioSet, DataError> {
    let err = |line: usize, message: String| DataError::Parse {
        path: path.to_string(),
        line,
        message,
    };

    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| err(1, "empty scenario file".into()))?;
    if header.trim() != "scenario,probability,farm,hour,mw" {
        return Err(err(1, format!("expected header `scenario,probability,farm,hour,mw`, got `{}`", header.trim())));
    }

    let farm_ids: Vec<u32> = case.wind_farms.iter().map(|f| f.id).collect();
    // scenario id -> (probability, farm -> hour -> value)
    let mut scenarios: BTreeMap<u32, (f64, BTreeMap<u32, BTreeMap<usize, f64>>)> = BTreeMap::new();

    for (idx, raw_line) in lines {
        let line_no = idx + 1;
        let content = raw_line.trim();
        if content.is_empty() || content.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = content.split(',').map(str::trim).collect();
        if fields.len() != 5 {
            return Err(err(line_no, format!("expected 5 fields, got {}", fields.len())));
        }
        let scenario: u32 = fields[0]
            .parse()
            .map_err(|_| err(line_no, format!("scenario `{}` is not an integer", fields[0])))?;
        let probability: f64 = fields[1]
            .parse()
            .map_err(|_| err(line_no, format!("probability `{}` is not a number", fields[1])))?;
        let farm: u32 = fields[2]
            .parse()
            .map_err(|_| err(line_no, format!("farm `{}` is not an integer", fields[2])))?;
        let hour: usize = fields[3]
            .parse()
            .map_err(|_| err(line_no, format!("hour `{}` is not an integer", fields[3])))?;
        let mw: f64 = fields[4]
            .parse()
            .map_err(|_| err(line_no, format!("mw `{}` is not a number", fields[4])))?;

        if probability < 0.0 {
            return Err(DataError::NegativeProbability {
                scenario,
                probability,
            });
        }
        if !farm_ids.contains(&farm) {
            return Err(err(line_no, format!("farm {farm} does not exist in the case")));
        }
        if hour < 1 || hour > case.horizon {
            return Err(err(line_no, format!("hour {hour} outside 1..={}", case.horizon)));
        }
        if mw < 0.0 {
            return Err(err(line_no, format!("negative wind realization {mw}")));
        }

        let entry = scenarios.entry(scenario).or_insert((probability, BTreeMap::new()));
        if (entry.0 - probability).abs() > 1e-12 {
            return Err(err(line_no, format!(
                "scenario {scenario} probability {probability} conflicts with earlier value {}",
                entry.0
            )));
        }
        if entry.1.entry(farm).or_default().insert(hour, mw).is_some() {
            return Err(err(line_no, format!(
                "duplicate cell for scenario {scenario}, farm {farm}, hour {hour}"
            )));
        }
    }

    if scenarios.is_empty() {
        return Err(err(1, "scenario file contains no data rows".into()));
    }
    for (&scenario, &ref entry) in &scenarios {
        if entry.0 <= 0.0 {
            return Err(DataError::NegativeProbability {
                scenario,
                probability: entry.0,
            });
        }
    }

    let raw_sum: f64 = scenarios.values().map(|(p, _)| p).sum();
    if (raw_sum - 1.0).abs() > PROBABILITY_SUM_TOLERANCE {
        return Err(DataError::ProbabilitySum {
            sum: raw_sum,
            tolerance: PROBABILITY_SUM_TOLERANCE,
        });
    }

    let mut probabilities = Vec::with_capacity(scenarios.len());
    let mut realizations = Vec::with_capacity(scenarios.len());
    for (&scenario, (probability, cells)) in &scenarios {
        probabilities.push(probability / raw_sum);
        let mut per_farm = Vec::with_capacity(farm_ids.len());
        for &farm in &farm_ids {
            let hours = cells.get(&farm).ok_or(DataError::MissingCell {
                scenario,
                farm,
                hour: 1,
            })?;
            let mut series = Vec::with_capacity(case.horizon);
            for hour in 1..=case.horizon {
                let value = hours.get(&hour).ok_or(DataError::MissingCell {
                    scenario,
                    farm,
                    hour,
                })?;
                series.push(*value);
            }
            per_farm.push(series);
        }
        realizations.push(per_farm);
    }

    Ok(ScenarioSet {
        probabilities,
        realizations,
        renormalization: raw_sum,
    })
}
