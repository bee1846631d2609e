//! Single-level solve paths.
//!
//! The single-level full model is valid but hostile to unaided MIP
//! heuristics: the relaxation keeps the sign binaries fractional (fractional
//! signs book fewer losses), and rounding them wrong is usually infeasible,
//! so solvers can spend their whole budget without an incumbent. The sign
//! bootstrap manufactures a feasible point the honest way: probe the
//! lossless model for angle signs, solve the full model restricted to those
//! signs (fast, no sign binaries active), and hand that point to the solver
//! as the starting incumbent for the unrestricted model. The model being
//! solved is the complete single-level formulation either way.

use super::{assemble, AssembledModel, BuildError, CaesMode, Variant};
use crate::data::{ScenarioSet, SystemCase};
use crate::lacopf::{DeltaVar, LinearizationConfig, NetworkVarSet};
use crate::milp::{Backend, SolveError, SolveLimits, SolveResult};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum SingleLevelError {
    #[error("solve_single_level drives single-level variants; use the two-level driver for TlLac")]
    WrongVariant,
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
}

#[derive(Debug)]
pub struct SingleLevelOutcome {
    pub assembled: AssembledModel,
    pub result: SolveResult,
    /// The solve was seeded with a sign-bootstrap incumbent.
    pub bootstrapped: bool,
}

/// Assemble and solve one single-level variant. Loss-bearing variants get
/// the sign bootstrap; when any bootstrap stage fails the plain solve runs
/// unaided, so the path degrades gracefully.
pub fn solve_single_level(
    case: &SystemCase,
    scenarios: Option<&ScenarioSet>,
    config: &LinearizationConfig,
    variant: Variant,
    caes_mode: CaesMode,
    backend: &dyn Backend,
    limits: &SolveLimits,
) -> Result<SingleLevelOutcome, SingleLevelError> {
    if variant == Variant::TlLac {
        return Err(SingleLevelError::WrongVariant);
    }
    let assembled = assemble(case, scenarios, config, variant, caes_mode, None)?;

    if variant == Variant::LacFull {
        if let Some(start) = build_sign_start(case, scenarios, config, caes_mode, &assembled, backend, limits)?
        {
            let result = backend.solve_with_start(&assembled.model, limits, &start)?;
            return Ok(SingleLevelOutcome {
                assembled,
                result,
                bootstrapped: true,
            });
        }
    }

    let result = backend.solve(&assembled.model, limits)?;
    Ok(SingleLevelOutcome {
        assembled,
        result,
        bootstrapped: false,
    })
}

/// Probe the lossless model, fix the full model's sign binaries to the
/// probed angle signs, and solve that restriction. Its value vector is a
/// feasible point of the unrestricted model (same columns, wider bounds).
fn build_sign_start(
    case: &SystemCase,
    scenarios: Option<&ScenarioSet>,
    config: &LinearizationConfig,
    caes_mode: CaesMode,
    full: &AssembledModel,
    backend: &dyn Backend,
    limits: &SolveLimits,
) -> Result<Option<Vec<f64>>, SingleLevelError> {
    let lossless = assemble(case, scenarios, config, Variant::LacLossless, caes_mode, None)?;
    let probe = backend.solve(&lossless.model, limits)?;
    if !probe.status.has_solution() {
        return Ok(None);
    }

    let mut restricted = full.model.clone();
    let fix_scope = |restricted: &mut crate::milp::MilpModel,
                     full_net: &NetworkVarSet,
                     probe_net: &NetworkVarSet|
     -> Result<(), SolveError> {
        if let Some(delta) = &full_net.delta {
            for (k, per_t) in delta.iter().enumerate() {
                for (t, dv) in per_t.iter().enumerate() {
                    if let DeltaVar::Binary(d) = dv {
                        let theta = probe.value(probe_net.theta[k][t]);
                        let fix = if theta >= 0.0 { 1.0 } else { 0.0 };
                        restricted
                            .set_variable_bounds(*d, fix, fix)
                            .expect("delta handle belongs to this model");
                    }
                }
            }
        }
        Ok(())
    };
    fix_scope(&mut restricted, &full.vars.stage1_net, &lossless.vars.stage1_net)?;
    for (full_scen, probe_scen) in full.vars.scenarios.iter().zip(&lossless.vars.scenarios) {
        fix_scope(&mut restricted, &full_scen.net, &probe_scen.net)?;
    }

    let seed = backend.solve(&restricted, limits)?;
    if seed.status.has_solution() {
        Ok(Some(seed.values))
    } else {
        Ok(None)
    }
}
