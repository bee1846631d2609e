//! Solver-agnostic mixed-integer linear program representation.
//!
//! Models are built incrementally: register variables, accumulate objective
//! coefficients, add tagged constraints. A [`Backend`] turns the finished
//! model into a [`SolveResult`]; [`MilpModel::write_lp`] exports the exact
//! same model as deterministic CPLEX-LP text.

mod export;
mod highs_backend;

pub use highs_backend::{solve_lp_file, HighsBackend};

use serde::Serialize;
use std::collections::BTreeMap;
use std::time::Duration;
use thiserror::Error;

/// Opaque handle to a registered variable. Valid only for the model that
/// created it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct VarRef(pub(crate) u32);

impl VarRef {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Identifier of a stored constraint.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConstraintId(pub(crate) u32);

impl ConstraintId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VarKind {
    Continuous,
    Binary,
}

#[derive(Debug, Clone)]
pub struct VarDef {
    pub kind: VarKind,
    pub lo: f64,
    pub hi: f64,
    pub name: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Le,
    Eq,
    Ge,
}

/// Sparse linear expression over registered variables.
///
/// Duplicate variable entries are merged when the expression is attached to
/// the model, so emitters can push terms freely.
#[derive(Debug, Clone, Default)]
pub struct LinExpr {
    terms: Vec<(VarRef, f64)>,
}

impl LinExpr {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_capacity(n: usize) -> Self {
        Self {
            terms: Vec::with_capacity(n),
        }
    }

    pub fn term(mut self, var: VarRef, coeff: f64) -> Self {
        self.push(var, coeff);
        self
    }

    pub fn push(&mut self, var: VarRef, coeff: f64) {
        self.terms.push((var, coeff));
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn terms(&self) -> &[(VarRef, f64)] {
        &self.terms
    }

    /// Sort by variable index and merge duplicates. Zero coefficients are
    /// kept only if the variable appears once (an explicit zero still marks
    /// the variable as referenced).
    fn normalize(mut self) -> Vec<(VarRef, f64)> {
        self.terms.sort_by_key(|(v, _)| *v);
        let mut out: Vec<(VarRef, f64)> = Vec::with_capacity(self.terms.len());
        for (v, c) in self.terms {
            match out.last_mut() {
                Some((lv, lc)) if *lv == v => *lc += c,
                _ => out.push((v, c)),
            }
        }
        out
    }
}

/// A stored linear constraint: `sum(coeff * var) sense rhs`, tagged for
/// audit trails (tags name the originating balance/limit and its indices).
#[derive(Debug, Clone)]
pub struct LinConstraint {
    pub terms: Vec<(VarRef, f64)>,
    pub sense: Sense,
    pub rhs: f64,
    pub tag: String,
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("inverted bounds [{lo}, {hi}] for variable `{name}`")]
    InvertedBounds { name: String, lo: f64, hi: f64 },
    #[error("binary variable `{name}` must have bounds within [0, 1], got [{lo}, {hi}]")]
    BinaryBounds { name: String, lo: f64, hi: f64 },
    #[error("non-finite bound for variable `{name}`")]
    NonFiniteBound { name: String },
    #[error("duplicate variable name `{name}`")]
    DuplicateName { name: String },
    #[error("constraint `{tag}` references unknown variable index {index}")]
    UnknownVariable { tag: String, index: usize },
    #[error("constraint `{tag}` has non-finite coefficient on `{var}`")]
    NonFiniteCoefficient { tag: String, var: String },
    #[error("non-finite right-hand side in constraint `{tag}`")]
    NonFiniteRhs { tag: String },
    #[error("objective references unknown variable index {index}")]
    UnknownObjectiveVariable { index: usize },
}

#[derive(Debug, Error)]
pub enum SolveError {
    #[error("model is empty")]
    EmptyModel,
    #[error("backend `{backend}` failed: {message}")]
    Backend { backend: String, message: String },
    #[error("solver returned non-integral value {value} for binary `{name}`")]
    NonIntegralBinary { name: String, value: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    /// Proven optimal within the configured MIP gap.
    Optimal,
    /// Feasible incumbent with a known gap, stopped before proving optimality.
    FeasibleGap,
    Infeasible,
    Unbounded,
    /// Stopped on the time limit without a feasible incumbent.
    TimeLimit,
}

impl SolveStatus {
    pub fn has_solution(self) -> bool {
        matches!(self, SolveStatus::Optimal | SolveStatus::FeasibleGap)
    }
}

/// Limits passed to the backend for a single solve.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct SolveLimits {
    /// Relative MIP gap at which the solver declares optimality.
    pub mip_gap: f64,
    /// Wall-clock limit in seconds.
    pub time_limit: f64,
    pub threads: u32,
}

impl Default for SolveLimits {
    fn default() -> Self {
        Self {
            mip_gap: 1e-4,
            time_limit: 600.0,
            threads: 1,
        }
    }
}

/// Outcome of a backend solve. `values` is indexed by variable creation
/// order and is fully populated whenever the status carries a solution.
#[derive(Debug, Clone)]
pub struct SolveResult {
    pub status: SolveStatus,
    pub objective: f64,
    pub values: Vec<f64>,
    pub best_bound: f64,
    pub gap: f64,
    pub wall_time: Duration,
}

impl SolveResult {
    pub fn value(&self, var: VarRef) -> f64 {
        self.values[var.index()]
    }
}

/// Abstraction over MILP solvers: load the model, apply limits, solve,
/// report status/values. Implementations must populate every variable value
/// when a solution exists and snap binaries that are within integrality
/// tolerance onto {0, 1}.
pub trait Backend {
    fn name(&self) -> &'static str;
    fn solve(&self, model: &MilpModel, limits: &SolveLimits) -> Result<SolveResult, SolveError>;

    /// Solve with a caller-supplied feasible point handed to the solver as
    /// its starting incumbent. Backends without native support ignore the
    /// start. Callers construct starts from problem structure; see the
    /// scheduler's sign bootstrap for the motivating case (the single-level
    /// loss model is feasible but hostile to unaided primal heuristics).
    fn solve_with_start(
        &self,
        model: &MilpModel,
        limits: &SolveLimits,
        _start: &[f64],
    ) -> Result<SolveResult, SolveError> {
        self.solve(model, limits)
    }
}

/// In-memory MILP: typed variables, tagged linear constraints, one linear
/// minimization objective. Building is deterministic: identical call
/// sequences produce identical variable/constraint ordering and identical
/// exported text.
#[derive(Debug, Clone, Default)]
pub struct MilpModel {
    pub(crate) vars: Vec<VarDef>,
    pub(crate) constraints: Vec<LinConstraint>,
    pub(crate) objective: Vec<f64>,
    pub(crate) objective_constant: f64,
    names: BTreeMap<String, VarRef>,
    diagnostics: Vec<String>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_variable(
        &mut self,
        kind: VarKind,
        lo: f64,
        hi: f64,
        name: impl Into<String>,
    ) -> Result<VarRef, ModelError> {
        let name = name.into();
        if lo.is_nan() || hi.is_nan() {
            return Err(ModelError::NonFiniteBound { name });
        }
        if lo > hi {
            return Err(ModelError::InvertedBounds { name, lo, hi });
        }
        if kind == VarKind::Binary && (lo < 0.0 || hi > 1.0) {
            return Err(ModelError::BinaryBounds { name, lo, hi });
        }
        if self.names.contains_key(&name) {
            return Err(ModelError::DuplicateName { name });
        }
        let var = VarRef(self.vars.len() as u32);
        self.names.insert(name.clone(), var);
        self.vars.push(VarDef { kind, lo, hi, name });
        self.objective.push(0.0);
        Ok(var)
    }

    pub fn add_continuous(
        &mut self,
        lo: f64,
        hi: f64,
        name: impl Into<String>,
    ) -> Result<VarRef, ModelError> {
        self.add_variable(VarKind::Continuous, lo, hi, name)
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarRef, ModelError> {
        self.add_variable(VarKind::Binary, 0.0, 1.0, name)
    }

    pub fn add_constraint(
        &mut self,
        expr: LinExpr,
        sense: Sense,
        rhs: f64,
        tag: impl Into<String>,
    ) -> Result<ConstraintId, ModelError> {
        let tag = tag.into();
        if !rhs.is_finite() {
            return Err(ModelError::NonFiniteRhs { tag });
        }
        let terms = expr.normalize();
        for &(v, c) in &terms {
            if v.index() >= self.vars.len() {
                return Err(ModelError::UnknownVariable {
                    tag,
                    index: v.index(),
                });
            }
            if !c.is_finite() {
                return Err(ModelError::NonFiniteCoefficient {
                    tag,
                    var: self.vars[v.index()].name.clone(),
                });
            }
        }
        if terms.is_empty() {
            self.diagnostics.push(format!("vacuous constraint `{tag}`"));
        }
        let id = ConstraintId(self.constraints.len() as u32);
        self.constraints.push(LinConstraint {
            terms,
            sense,
            rhs,
            tag,
        });
        Ok(id)
    }

    /// Accumulate a coefficient onto the (minimization) objective.
    pub fn add_objective_term(&mut self, var: VarRef, coeff: f64) -> Result<(), ModelError> {
        if var.index() >= self.vars.len() {
            return Err(ModelError::UnknownObjectiveVariable { index: var.index() });
        }
        self.objective[var.index()] += coeff;
        Ok(())
    }

    pub fn add_objective_constant(&mut self, value: f64) {
        self.objective_constant += value;
    }

    /// Replace the bounds of an existing variable. Used to fix decisions when
    /// replaying one model's solution inside another and by enumeration
    /// oracles in tests.
    pub fn set_variable_bounds(
        &mut self,
        var: VarRef,
        lo: f64,
        hi: f64,
    ) -> Result<(), ModelError> {
        let def = &mut self.vars[var.index()];
        if lo.is_nan() || hi.is_nan() {
            return Err(ModelError::NonFiniteBound {
                name: def.name.clone(),
            });
        }
        if lo > hi {
            return Err(ModelError::InvertedBounds {
                name: def.name.clone(),
                lo,
                hi,
            });
        }
        def.lo = lo;
        def.hi = hi;
        Ok(())
    }

    pub fn lookup(&self, name: &str) -> Option<VarRef> {
        self.names.get(name).copied()
    }

    pub fn var(&self, var: VarRef) -> &VarDef {
        &self.vars[var.index()]
    }

    pub fn variables(&self) -> &[VarDef] {
        &self.vars
    }

    pub fn constraints(&self) -> &[LinConstraint] {
        &self.constraints
    }

    pub fn num_variables(&self) -> usize {
        self.vars.len()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.vars.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    /// Count binary variables whose name starts with `prefix`. Structured
    /// names make this the hook for per-symbol binary accounting.
    pub fn binaries_with_prefix(&self, prefix: &str) -> usize {
        self.vars
            .iter()
            .filter(|v| v.kind == VarKind::Binary && v.name.starts_with(prefix))
            .count()
    }

    pub fn binary_vars(&self) -> impl Iterator<Item = VarRef> + '_ {
        self.vars
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarRef(i as u32))
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn objective_coefficients(&self) -> &[f64] {
        &self.objective
    }

    /// Evaluate the objective at a value vector (used by decoders to
    /// reconcile recomputed cost breakdowns against the solver objective).
    pub fn eval_objective(&self, values: &[f64]) -> f64 {
        self.objective
            .iter()
            .zip(values)
            .map(|(c, v)| c * v)
            .sum::<f64>()
            + self.objective_constant
    }

    pub fn diagnostics(&self) -> &[String] {
        &self.diagnostics
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn add_variable_assigns_fresh_handles() {
        let mut m = MilpModel::new();
        let a = m.add_binary("delta_k3_t7").unwrap();
        let b = m.add_continuous(0.0, 0.6, "theta_plus").unwrap();
        assert_eq!(a.index(), 0);
        assert_eq!(b.index(), 1);
        assert_eq!(m.num_variables(), 2);
        assert_eq!(m.lookup("theta_plus"), Some(b));
    }

    #[test]
    fn inverted_bounds_rejected() {
        let mut m = MilpModel::new();
        let err = m.add_continuous(5.0, 2.0, "x").unwrap_err();
        assert!(matches!(err, ModelError::InvertedBounds { .. }));
    }

    #[test]
    fn binary_bounds_must_stay_in_unit_interval() {
        let mut m = MilpModel::new();
        let err = m
            .add_variable(VarKind::Binary, 0.0, 2.0, "u")
            .unwrap_err();
        assert!(matches!(err, ModelError::BinaryBounds { .. }));
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut m = MilpModel::new();
        m.add_continuous(0.0, 1.0, "x").unwrap();
        let err = m.add_continuous(0.0, 1.0, "x").unwrap_err();
        assert!(matches!(err, ModelError::DuplicateName { .. }));
    }

    #[test]
    fn constraint_with_unknown_variable_rejected() {
        let mut m = MilpModel::new();
        m.add_continuous(0.0, 1.0, "x").unwrap();
        let ghost = VarRef(7);
        let err = m
            .add_constraint(LinExpr::new().term(ghost, 2.0), Sense::Le, 10.0, "bad")
            .unwrap_err();
        assert!(matches!(err, ModelError::UnknownVariable { .. }));
    }

    #[test]
    fn simple_equality_constraint_accepted() {
        let mut m = MilpModel::new();
        let x = m.add_continuous(0.0, 1.0, "x").unwrap();
        let y = m.add_continuous(0.0, 1.0, "y").unwrap();
        let id = m
            .add_constraint(
                LinExpr::new().term(x, 1.0).term(y, 1.0),
                Sense::Eq,
                1.0,
                "xy",
            )
            .unwrap();
        assert_eq!(id.index(), 0);
        assert!(m.diagnostics().is_empty());
    }

    #[test]
    fn vacuous_constraint_flagged_in_diagnostics() {
        let mut m = MilpModel::new();
        let id = m
            .add_constraint(LinExpr::new(), Sense::Eq, 0.0, "empty")
            .unwrap();
        assert_eq!(id.index(), 0);
        assert_eq!(m.diagnostics().len(), 1);
        assert!(m.diagnostics()[0].contains("empty"));
    }

    #[test]
    fn duplicate_terms_merge() {
        let mut m = MilpModel::new();
        let x = m.add_continuous(0.0, 10.0, "x").unwrap();
        m.add_constraint(
            LinExpr::new().term(x, 1.0).term(x, 2.0),
            Sense::Le,
            5.0,
            "merged",
        )
        .unwrap();
        assert_eq!(m.constraints()[0].terms, vec![(x, 3.0)]);
    }

    #[test]
    fn objective_accumulates() {
        let mut m = MilpModel::new();
        let x = m.add_continuous(0.0, 10.0, "x").unwrap();
        m.add_objective_term(x, 1.5).unwrap();
        m.add_objective_term(x, 0.5).unwrap();
        m.add_objective_constant(3.0);
        assert_eq!(m.eval_objective(&[2.0]), 7.0);
    }
}
