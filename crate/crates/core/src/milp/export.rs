//! CPLEX-LP export.
//!
//! The text is a pure function of the model: variables appear in creation
//! order, constraint terms in variable order, so exporting the same model
//! twice is byte-identical.

use super::{MilpModel, Sense, VarKind};
use std::fmt::Write as _;
use std::io::{self, Write};
use std::path::Path;

impl MilpModel {
    pub fn export_lp(&self, path: impl AsRef<Path>) -> io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        self.write_lp(&mut file)?;
        file.flush()
    }

    pub fn write_lp(&self, out: &mut impl Write) -> io::Result<()> {
        let mut text = String::new();
        self.render_lp(&mut text);
        out.write_all(text.as_bytes())
    }

    pub fn lp_string(&self) -> String {
        let mut text = String::new();
        self.render_lp(&mut text);
        text
    }

    fn render_lp(&self, out: &mut String) {
        out.push_str("Minimize\n obj:");
        let mut wrote_term = false;
        for (i, &c) in self.objective.iter().enumerate() {
            if c != 0.0 {
                push_term(out, c, &sanitize(&self.vars[i].name), wrote_term);
                wrote_term = true;
            }
        }
        if self.objective_constant != 0.0 {
            push_const(out, self.objective_constant, wrote_term);
            wrote_term = true;
        }
        if !wrote_term {
            out.push_str(" 0");
        }
        out.push('\n');

        out.push_str("Subject To\n");
        let mut seen_tags: std::collections::BTreeMap<String, u32> = Default::default();
        for con in &self.constraints {
            if con.terms.is_empty() {
                // Vacuous rows are diagnostics, not exportable content.
                continue;
            }
            let base = sanitize(&con.tag);
            let count = seen_tags.entry(base.clone()).or_insert(0);
            let row_name = if *count == 0 {
                base.clone()
            } else {
                format!("{base}_dup{count}")
            };
            *count += 1;
            let _ = write!(out, " {row_name}:");
            let mut first = true;
            for &(v, c) in &con.terms {
                push_term(out, c, &sanitize(&self.vars[v.index()].name), !first);
                first = false;
            }
            let op = match con.sense {
                Sense::Le => "<=",
                Sense::Eq => "=",
                Sense::Ge => ">=",
            };
            let _ = write!(out, " {op} {}\n", fmt_num(con.rhs));
        }

        out.push_str("Bounds\n");
        for v in &self.vars {
            if v.kind == VarKind::Binary {
                // Binary defaults are handled by the Binaries section; only
                // print bounds that tighten them (e.g. fixings).
                if v.lo == 0.0 && v.hi == 1.0 {
                    continue;
                }
            }
            let name = sanitize(&v.name);
            match (v.lo.is_finite(), v.hi.is_finite()) {
                (true, true) if v.lo == v.hi => {
                    let _ = write!(out, " {name} = {}\n", fmt_num(v.lo));
                }
                (true, true) => {
                    let _ = write!(out, " {} <= {name} <= {}\n", fmt_num(v.lo), fmt_num(v.hi));
                }
                (true, false) => {
                    // Default LP lower bound is 0; nonzero ones must be printed.
                    if v.lo != 0.0 {
                        let _ = write!(out, " {name} >= {}\n", fmt_num(v.lo));
                    }
                }
                (false, true) => {
                    let _ = write!(out, " -inf <= {name} <= {}\n", fmt_num(v.hi));
                }
                (false, false) => {
                    let _ = write!(out, " {name} free\n");
                }
            }
        }

        if self.vars.iter().any(|v| v.kind == VarKind::Binary) {
            out.push_str("Binaries\n");
            for v in &self.vars {
                if v.kind == VarKind::Binary {
                    let _ = write!(out, " {}\n", sanitize(&v.name));
                }
            }
        }
        out.push_str("End\n");
    }
}

/// Rust's shortest round-trip `Display` for f64 never emits exponents, which
/// keeps the file readable and re-parsable by any LP reader.
fn fmt_num(x: f64) -> String {
    format!("{x}")
}

fn push_term(out: &mut String, coeff: f64, name: &str, follows: bool) {
    let sign = if coeff < 0.0 { "-" } else { "+" };
    if follows || coeff < 0.0 {
        let _ = write!(out, " {sign} {} {name}", fmt_num(coeff.abs()));
    } else {
        let _ = write!(out, " {} {name}", fmt_num(coeff));
    }
}

fn push_const(out: &mut String, value: f64, follows: bool) {
    let sign = if value < 0.0 { "-" } else { "+" };
    if follows || value < 0.0 {
        let _ = write!(out, " {sign} {}", fmt_num(value.abs()));
    } else {
        let _ = write!(out, " {}", fmt_num(value));
    }
}

/// LP identifiers: keep [A-Za-z0-9_], replace the rest. A leading digit gets
/// an underscore prefix.
fn sanitize(name: &str) -> String {
    let mut s: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.chars().next().unwrap().is_ascii_digit() {
        s.insert(0, '_');
    }
    s
}

#[cfg(test)]
mod tests {
    use crate::milp::{LinExpr, MilpModel, Sense};

    #[test]
    fn export_is_byte_stable() {
        let build = || {
            let mut m = MilpModel::new();
            let x = m.add_continuous(0.0, 10.0, "x").unwrap();
            let u = m.add_binary("u").unwrap();
            m.add_objective_term(x, 1.0).unwrap();
            m.add_objective_term(u, 100.0).unwrap();
            m.add_constraint(
                LinExpr::new().term(x, 1.0).term(u, -10.0),
                Sense::Le,
                0.0,
                "link",
            )
            .unwrap();
            m.lp_string()
        };
        assert_eq!(build(), build());
    }

    #[test]
    fn zero_constraint_model_exports_bounds_only() {
        let mut m = MilpModel::new();
        m.add_continuous(1.0, 2.0, "y").unwrap();
        let text = m.lp_string();
        assert!(text.contains("Subject To"));
        assert!(text.contains(" 1 <= y <= 2"));
        assert!(text.ends_with("End\n"));
    }

    #[test]
    fn duplicate_tags_get_distinct_row_names() {
        let mut m = MilpModel::new();
        let x = m.add_continuous(0.0, 1.0, "x").unwrap();
        m.add_constraint(LinExpr::new().term(x, 1.0), Sense::Le, 1.0, "cap")
            .unwrap();
        m.add_constraint(LinExpr::new().term(x, 2.0), Sense::Le, 2.0, "cap")
            .unwrap();
        let text = m.lp_string();
        assert!(text.contains(" cap:"));
        assert!(text.contains(" cap_dup1:"));
    }

    #[test]
    fn free_variables_marked_free() {
        let mut m = MilpModel::new();
        m.add_continuous(f64::NEG_INFINITY, f64::INFINITY, "theta")
            .unwrap();
        assert!(m.lp_string().contains(" theta free"));
    }
}
