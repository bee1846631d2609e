//! Sectioned-text case files.
//!
//! A case file holds six sections: `[META]` key/value pairs, then keyword
//! rows under `[BUS]`, `[LINE]`, `[THERMAL]`, `[WIND]`, `[CAES]`. `#` starts
//! a comment. Powers are MW/MVAr, admittances per-unit, prices $.
//! Column layouts are documented in the repository README; `save_case`
//! writes the same format back, so load -> save -> load is the identity.

use super::{
    validate_case, Bus, CaesStep, CaesUnit, DataError, Line, SystemCase, ThermalUnit, WindFarm,
    FUEL_COST_BLOCKS,
};
use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

pub fn load_case(path: impl AsRef<Path>) -> Result<SystemCase, DataError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_case(&text, &path.display().to_string())
}

pub fn save_case(case: &SystemCase, path: impl AsRef<Path>) -> Result<(), DataError> {
    let path = path.as_ref();
    std::fs::write(path, render_case(case)).map_err(|source| DataError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Section {
    None,
    Meta,
    Bus,
    Line,
    Thermal,
    Wind,
    Caes,
}

struct RawCase {
    meta: BTreeMap<String, (String, usize)>,
    buses: Vec<(Bus, usize)>,
    ploads: Vec<(u32, Vec<f64>, usize)>,
    qloads: Vec<(u32, Vec<f64>, usize)>,
    lines: Vec<(u32, u32, u32, f64, f64, f64, f64, usize)>,
    thermals: Vec<(ThermalUnit, u32, usize)>,
    farms: Vec<(WindFarm, u32, usize)>,
    forecasts: Vec<(u32, Vec<f64>, usize)>,
    caes: Vec<(CaesUnit, u32, usize)>,
    charge_steps: Vec<(u32, CaesStep, usize)>,
    discharge_steps: Vec<(u32, CaesStep, usize)>,
}

pub(crate) fn parse_case(text: &str, path: &str) -> Result<SystemCase, DataError> {
    let err = |line: usize, message: String| DataError::Parse {
        path: path.to_string(),
        line,
        message,
    };

    let mut raw = RawCase {
        meta: BTreeMap::new(),
        buses: Vec::new(),
        ploads: Vec::new(),
        qloads: Vec::new(),
        lines: Vec::new(),
        thermals: Vec::new(),
        farms: Vec::new(),
        forecasts: Vec::new(),
        caes: Vec::new(),
        charge_steps: Vec::new(),
        discharge_steps: Vec::new(),
    };
    let mut section = Section::None;

    for (idx, raw_line) in text.lines().enumerate() {
        let line_no = idx + 1;
        let content = raw_line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.to_ascii_uppercase().as_str() {
                "META" => Section::Meta,
                "BUS" => Section::Bus,
                "LINE" => Section::Line,
                "THERMAL" => Section::Thermal,
                "WIND" => Section::Wind,
                "CAES" => Section::Caes,
                other => return Err(err(line_no, format!("unknown section [{other}]"))),
            };
            continue;
        }
        match section {
            Section::None => {
                return Err(err(line_no, "content before the first section header".into()))
            }
            Section::Meta => {
                let (key, value) = content
                    .split_once('=')
                    .ok_or_else(|| err(line_no, "expected `key = value`".into()))?;
                raw.meta
                    .insert(key.trim().to_string(), (value.trim().to_string(), line_no));
            }
            Section::Bus => parse_bus_row(&mut raw, content, line_no, path)?,
            Section::Line => parse_line_row(&mut raw, content, line_no, path)?,
            Section::Thermal => parse_thermal_row(&mut raw, content, line_no, path)?,
            Section::Wind => parse_wind_row(&mut raw, content, line_no, path)?,
            Section::Caes => parse_caes_row(&mut raw, content, line_no, path)?,
        }
    }

    assemble_case(raw, path)
}

struct Fields<'a> {
    parts: Vec<&'a str>,
    cursor: usize,
    line: usize,
    path: &'a str,
}

impl<'a> Fields<'a> {
    fn new(content: &'a str, line: usize, path: &'a str) -> Self {
        Self {
            parts: content.split_whitespace().collect(),
            cursor: 0,
            line,
            path,
        }
    }

    fn error(&self, message: String) -> DataError {
        DataError::Parse {
            path: self.path.to_string(),
            line: self.line,
            message,
        }
    }

    fn next_str(&mut self, field: &str) -> Result<&'a str, DataError> {
        let part = self
            .parts
            .get(self.cursor)
            .ok_or_else(|| self.error(format!("missing field `{field}`")))?;
        self.cursor += 1;
        Ok(part)
    }

    fn next_f64(&mut self, field: &str) -> Result<f64, DataError> {
        let raw = self.next_str(field)?;
        raw.parse()
            .map_err(|_| self.error(format!("field `{field}`: `{raw}` is not a number")))
    }

    fn next_u32(&mut self, field: &str) -> Result<u32, DataError> {
        let raw = self.next_str(field)?;
        raw.parse()
            .map_err(|_| self.error(format!("field `{field}`: `{raw}` is not an integer")))
    }

    fn rest_f64(&mut self, field: &str) -> Result<Vec<f64>, DataError> {
        let mut out = Vec::with_capacity(self.parts.len() - self.cursor);
        while self.cursor < self.parts.len() {
            out.push(self.next_f64(field)?);
        }
        Ok(out)
    }

    fn finish(&self) -> Result<(), DataError> {
        if self.cursor != self.parts.len() {
            return Err(self.error(format!(
                "unexpected trailing fields: {:?}",
                &self.parts[self.cursor..]
            )));
        }
        Ok(())
    }
}

fn parse_bus_row(raw: &mut RawCase, content: &str, line: usize, path: &str) -> Result<(), DataError> {
    let mut f = Fields::new(content, line, path);
    match f.next_str("keyword")? {
        "bus" => {
            let id = f.next_u32("id")?;
            let dv_min = f.next_f64("dv_min")?;
            let dv_max = f.next_f64("dv_max")?;
            let voll_price = f.next_f64("voll_price")?;
            f.finish()?;
            raw.buses.push((
                Bus {
                    id,
                    active_load: Vec::new(),
                    reactive_load: Vec::new(),
                    dv_min,
                    dv_max,
                    voll_price,
                },
                line,
            ));
        }
        "pload" => {
            let id = f.next_u32("bus")?;
            raw.ploads.push((id, f.rest_f64("mw")?, line));
        }
        "qload" => {
            let id = f.next_u32("bus")?;
            raw.qloads.push((id, f.rest_f64("mvar")?, line));
        }
        other => return Err(f.error(format!("unknown BUS row keyword `{other}`"))),
    }
    Ok(())
}

fn parse_line_row(raw: &mut RawCase, content: &str, line: usize, path: &str) -> Result<(), DataError> {
    let mut f = Fields::new(content, line, path);
    let keyword = f.next_str("keyword")?;
    if keyword != "line" {
        return Err(f.error(format!("unknown LINE row keyword `{keyword}`")));
    }
    let id = f.next_u32("id")?;
    let from = f.next_u32("from_bus")?;
    let to = f.next_u32("to_bus")?;
    let g = f.next_f64("g_pu")?;
    let b = f.next_f64("b_pu")?;
    let b0 = f.next_f64("b0_pu")?;
    let rating = f.next_f64("rating_mva")?;
    f.finish()?;
    raw.lines.push((id, from, to, g, b, b0, rating, line));
    Ok(())
}

fn parse_thermal_row(
    raw: &mut RawCase,
    content: &str,
    line: usize,
    path: &str,
) -> Result<(), DataError> {
    let mut f = Fields::new(content, line, path);
    let keyword = f.next_str("keyword")?;
    if keyword != "unit" {
        return Err(f.error(format!("unknown THERMAL row keyword `{keyword}`")));
    }
    let id = f.next_u32("id")?;
    let bus = f.next_u32("bus")?;
    let unit = ThermalUnit {
        id,
        bus: usize::MAX,
        p_min: f.next_f64("p_min")?,
        p_max: f.next_f64("p_max")?,
        q_min: f.next_f64("q_min")?,
        q_max: f.next_f64("q_max")?,
        ramp_up: f.next_f64("ramp_up")?,
        ramp_down: f.next_f64("ramp_down")?,
        min_up: f.next_u32("min_up")?,
        min_down: f.next_u32("min_down")?,
        startup_cost: f.next_f64("startup_cost")?,
        fuel_a: f.next_f64("fuel_a")?,
        fuel_b: f.next_f64("fuel_b")?,
        fuel_c: f.next_f64("fuel_c")?,
        no_load_cost: 0.0,
        cost_blocks: Vec::new(),
        reserve_price_up: f.next_f64("reserve_price_up")?,
        reserve_price_down: f.next_f64("reserve_price_down")?,
        deploy_price_up: f.next_f64("deploy_price_up")?,
        deploy_price_down: f.next_f64("deploy_price_down")?,
    };
    f.finish()?;
    raw.thermals.push((unit, bus, line));
    Ok(())
}

fn parse_wind_row(raw: &mut RawCase, content: &str, line: usize, path: &str) -> Result<(), DataError> {
    let mut f = Fields::new(content, line, path);
    match f.next_str("keyword")? {
        "farm" => {
            let id = f.next_u32("id")?;
            let bus = f.next_u32("bus")?;
            let spill_price = f.next_f64("spill_price")?;
            f.finish()?;
            raw.farms.push((
                WindFarm {
                    id,
                    bus: usize::MAX,
                    forecast: Vec::new(),
                    spill_price,
                },
                bus,
                line,
            ));
        }
        "forecast" => {
            let id = f.next_u32("farm")?;
            raw.forecasts.push((id, f.rest_f64("mw")?, line));
        }
        other => return Err(f.error(format!("unknown WIND row keyword `{other}`"))),
    }
    Ok(())
}

fn parse_caes_row(raw: &mut RawCase, content: &str, line: usize, path: &str) -> Result<(), DataError> {
    let mut f = Fields::new(content, line, path);
    match f.next_str("keyword")? {
        "unit" => {
            let id = f.next_u32("id")?;
            let bus = f.next_u32("bus")?;
            let unit = CaesUnit {
                id,
                bus: usize::MAX,
                p_ch_min: f.next_f64("p_ch_min")?,
                p_ch_max: f.next_f64("p_ch_max")?,
                p_dis_min: f.next_f64("p_dis_min")?,
                p_dis_max: f.next_f64("p_dis_max")?,
                a_min: f.next_f64("a_min")?,
                a_max: f.next_f64("a_max")?,
                initial_fraction: f.next_f64("initial_fraction")?,
                cavern_capacity: f.next_f64("cavern_capacity_kg")?,
                charge_steps: Vec::new(),
                discharge_steps: Vec::new(),
                energy_price: f.next_f64("energy_price")?,
                reserve_price_up: f.next_f64("reserve_price_up")?,
                reserve_price_down: f.next_f64("reserve_price_down")?,
                deploy_price_up: f.next_f64("deploy_price_up")?,
                deploy_price_down: f.next_f64("deploy_price_down")?,
            };
            f.finish()?;
            raw.caes.push((unit, bus, line));
        }
        kw @ ("charge" | "discharge") => {
            let id = f.next_u32("caes")?;
            let step = CaesStep {
                lo: f.next_f64("lo")?,
                width: f.next_f64("width")?,
                rate: f.next_f64("rate")?,
            };
            f.finish()?;
            if kw == "charge" {
                raw.charge_steps.push((id, step, line));
            } else {
                raw.discharge_steps.push((id, step, line));
            }
        }
        other => return Err(f.error(format!("unknown CAES row keyword `{other}`"))),
    }
    Ok(())
}

fn assemble_case(mut raw: RawCase, path: &str) -> Result<SystemCase, DataError> {
    let err = |line: usize, message: String| DataError::Parse {
        path: path.to_string(),
        line,
        message,
    };

    let meta_f64 = |key: &str| -> Result<(f64, usize), DataError> {
        let (value, line) = raw
            .meta
            .get(key)
            .cloned()
            .ok_or_else(|| err(0, format!("missing META key `{key}`")))?;
        let parsed = value
            .parse()
            .map_err(|_| err(line, format!("META `{key}`: `{value}` is not a number")))?;
        Ok((parsed, line))
    };

    let name = raw
        .meta
        .get("name")
        .map(|(v, _)| v.clone())
        .unwrap_or_else(|| "unnamed".to_string());
    let (mva_base, _) = meta_f64("mva_base")?;
    let (horizon_raw, horizon_line) = meta_f64("horizon")?;
    let horizon = horizon_raw as usize;
    if horizon_raw.fract() != 0.0 || horizon < 1 {
        return Err(err(horizon_line, format!("horizon `{horizon_raw}` must be a positive integer")));
    }
    let (slack_id_raw, slack_line) = meta_f64("slack_bus")?;
    let slack_id = slack_id_raw as u32;
    let (reserve_resolution, _) = meta_f64("reserve_resolution_h")?;

    let mut buses: Vec<Bus> = Vec::with_capacity(raw.buses.len());
    let mut bus_index: BTreeMap<u32, usize> = BTreeMap::new();
    for (mut bus, line) in raw.buses.drain(..) {
        if bus_index.contains_key(&bus.id) {
            return Err(err(line, format!("duplicate bus id {}", bus.id)));
        }
        bus.active_load = vec![0.0; horizon];
        bus.reactive_load = vec![0.0; horizon];
        bus_index.insert(bus.id, buses.len());
        buses.push(bus);
    }

    let lookup_bus = |entity: &str, id: u32| -> Result<usize, DataError> {
        bus_index
            .get(&id)
            .copied()
            .ok_or_else(|| DataError::DanglingReference {
                entity: entity.to_string(),
                bus_id: id,
            })
    };

    for (id, series, line) in raw.ploads.drain(..) {
        let idx = lookup_bus(&format!("pload row at line {line}"), id)?;
        if series.len() != horizon {
            return Err(err(line, format!("pload for bus {id} has {} values, expected {horizon}", series.len())));
        }
        buses[idx].active_load = series;
    }
    for (id, series, line) in raw.qloads.drain(..) {
        let idx = lookup_bus(&format!("qload row at line {line}"), id)?;
        if series.len() != horizon {
            return Err(err(line, format!("qload for bus {id} has {} values, expected {horizon}", series.len())));
        }
        buses[idx].reactive_load = series;
    }

    let mut lines_out = Vec::with_capacity(raw.lines.len());
    for (id, from, to, g, b, b0, rating, _line_no) in raw.lines.drain(..) {
        lines_out.push(Line {
            id,
            from_bus: lookup_bus(&format!("line {id}"), from)?,
            to_bus: lookup_bus(&format!("line {id}"), to)?,
            g,
            b,
            b0,
            mva_max: rating / mva_base,
        });
    }

    let mut thermal_units = Vec::with_capacity(raw.thermals.len());
    for (mut unit, bus, _line_no) in raw.thermals.drain(..) {
        unit.bus = lookup_bus(&format!("thermal unit {}", unit.id), bus)?;
        unit.derive_cost_curve(FUEL_COST_BLOCKS);
        thermal_units.push(unit);
    }

    let mut wind_farms = Vec::with_capacity(raw.farms.len());
    for (mut farm, bus, _line_no) in raw.farms.drain(..) {
        farm.bus = lookup_bus(&format!("wind farm {}", farm.id), bus)?;
        farm.forecast = vec![0.0; horizon];
        wind_farms.push(farm);
    }
    for (id, series, line) in raw.forecasts.drain(..) {
        let farm = wind_farms
            .iter_mut()
            .find(|f| f.id == id)
            .ok_or_else(|| err(line, format!("forecast row for unknown wind farm {id}")))?;
        if series.len() != horizon {
            return Err(err(line, format!("forecast for farm {id} has {} values, expected {horizon}", series.len())));
        }
        farm.forecast = series;
    }

    let mut caes_units = Vec::with_capacity(raw.caes.len());
    for (mut unit, bus, _line_no) in raw.caes.drain(..) {
        unit.bus = lookup_bus(&format!("caes unit {}", unit.id), bus)?;
        caes_units.push(unit);
    }
    for (id, step, line) in raw.charge_steps.drain(..) {
        caes_units
            .iter_mut()
            .find(|c| c.id == id)
            .ok_or_else(|| err(line, format!("charge step for unknown caes unit {id}")))?
            .charge_steps
            .push(step);
    }
    for (id, step, line) in raw.discharge_steps.drain(..) {
        caes_units
            .iter_mut()
            .find(|c| c.id == id)
            .ok_or_else(|| err(line, format!("discharge step for unknown caes unit {id}")))?
            .discharge_steps
            .push(step);
    }

    let slack_bus = lookup_bus("META slack_bus", slack_id).map_err(|_| {
        err(slack_line, format!("slack_bus {slack_id} is not a defined bus"))
    })?;

    let case = SystemCase {
        name,
        mva_base,
        horizon,
        slack_bus,
        reserve_resolution,
        buses,
        lines: lines_out,
        thermal_units,
        wind_farms,
        caes_units,
    };

    let diagnostics = validate_case(&case);
    if !diagnostics.is_empty() {
        return Err(DataError::Validation { diagnostics });
    }
    Ok(case)
}

fn render_case(case: &SystemCase) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# case file written by gridsched");
    let _ = writeln!(out, "[META]");
    let _ = writeln!(out, "name = {}", case.name);
    let _ = writeln!(out, "mva_base = {}", case.mva_base);
    let _ = writeln!(out, "horizon = {}", case.horizon);
    let _ = writeln!(out, "slack_bus = {}", case.buses[case.slack_bus].id);
    let _ = writeln!(out, "reserve_resolution_h = {}", case.reserve_resolution);

    let _ = writeln!(out, "\n[BUS]");
    let _ = writeln!(out, "# bus <id> <dv_min> <dv_max> <voll_price>");
    for bus in &case.buses {
        let _ = writeln!(out, "bus {} {} {} {}", bus.id, bus.dv_min, bus.dv_max, bus.voll_price);
    }
    for bus in &case.buses {
        if bus.active_load.iter().any(|&v| v != 0.0) {
            let _ = writeln!(out, "pload {} {}", bus.id, join(&bus.active_load));
        }
        if bus.reactive_load.iter().any(|&v| v != 0.0) {
            let _ = writeln!(out, "qload {} {}", bus.id, join(&bus.reactive_load));
        }
    }

    let _ = writeln!(out, "\n[LINE]");
    let _ = writeln!(out, "# line <id> <from> <to> <g_pu> <b_pu> <b0_pu> <rating_mva>");
    for line in &case.lines {
        let _ = writeln!(
            out,
            "line {} {} {} {} {} {} {}",
            line.id,
            case.buses[line.from_bus].id,
            case.buses[line.to_bus].id,
            line.g,
            line.b,
            line.b0,
            line.mva_max * case.mva_base,
        );
    }

    let _ = writeln!(out, "\n[THERMAL]");
    let _ = writeln!(
        out,
        "# unit <id> <bus> <p_min> <p_max> <q_min> <q_max> <ramp_up> <ramp_down> <min_up> <min_down> <startup> <fuel_a> <fuel_b> <fuel_c> <res_up> <res_dn> <dep_up> <dep_dn>"
    );
    for u in &case.thermal_units {
        let _ = writeln!(
            out,
            "unit {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            u.id,
            case.buses[u.bus].id,
            u.p_min,
            u.p_max,
            u.q_min,
            u.q_max,
            u.ramp_up,
            u.ramp_down,
            u.min_up,
            u.min_down,
            u.startup_cost,
            u.fuel_a,
            u.fuel_b,
            u.fuel_c,
            u.reserve_price_up,
            u.reserve_price_down,
            u.deploy_price_up,
            u.deploy_price_down,
        );
    }

    let _ = writeln!(out, "\n[WIND]");
    let _ = writeln!(out, "# farm <id> <bus> <spill_price>");
    for farm in &case.wind_farms {
        let _ = writeln!(out, "farm {} {} {}", farm.id, case.buses[farm.bus].id, farm.spill_price);
        let _ = writeln!(out, "forecast {} {}", farm.id, join(&farm.forecast));
    }

    let _ = writeln!(out, "\n[CAES]");
    let _ = writeln!(
        out,
        "# unit <id> <bus> <p_ch_min> <p_ch_max> <p_dis_min> <p_dis_max> <a_min> <a_max> <initial_fraction> <cavern_kg> <energy> <res_up> <res_dn> <dep_up> <dep_dn>"
    );
    for c in &case.caes_units {
        let _ = writeln!(
            out,
            "unit {} {} {} {} {} {} {} {} {} {} {} {} {} {} {}",
            c.id,
            case.buses[c.bus].id,
            c.p_ch_min,
            c.p_ch_max,
            c.p_dis_min,
            c.p_dis_max,
            c.a_min,
            c.a_max,
            c.initial_fraction,
            c.cavern_capacity,
            c.energy_price,
            c.reserve_price_up,
            c.reserve_price_down,
            c.deploy_price_up,
            c.deploy_price_down,
        );
        for s in &c.charge_steps {
            let _ = writeln!(out, "charge {} {} {} {}", c.id, s.lo, s.width, s.rate);
        }
        for s in &c.discharge_steps {
            let _ = writeln!(out, "discharge {} {} {} {}", c.id, s.lo, s.width, s.rate);
        }
    }
    out
}

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| format!("{v}"))
        .collect::<Vec<_>>()
        .join(" ")
}
