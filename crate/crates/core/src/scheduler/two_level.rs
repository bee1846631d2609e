//! The two-level procedure.
//!
//! Level one solves the lossless linearized model: cheap (no sign binaries,
//! no loss blocks) and close enough to the full problem that the angle signs
//! it finds almost never flip once losses are added. Level two rebuilds the
//! full model with those signs baked in as constants and with per-line angle
//! caps sized to the observed operating point, which removes both most of
//! the binaries and the artificial losses a loose global cap creates.

use super::decode::{decode_solution, DecodeError, ScheduleSolution};
use super::{assemble, BuildError, CaesMode, LineDecision, Variant};
use crate::data::{ScenarioSet, SystemCase};
use crate::lacopf::{LinearizationConfig, SignFix, SignSource, ThetaMaxSource};
use crate::milp::{Backend, SolveError, SolveLimits, SolveStatus};
use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TwoLevelError {
    #[error("first level (lossless) is infeasible: the case cannot be served even without losses")]
    Level1Infeasible,
    #[error("second level stayed infeasible after doubling the angle-cap floors")]
    Level2Infeasible,
    #[error("level {level} solve ended without a usable solution: {status:?}")]
    NoSolution { level: u8, status: SolveStatus },
    #[error("artifacts extracted from a {0:?} solution; the first level must be lossless")]
    WrongVariant(Variant),
    #[error(transparent)]
    Build(#[from] BuildError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Decode(#[from] DecodeError),
}

/// Signs and operating-point magnitudes lifted from a lossless solve, for the
/// day-ahead scope and each scenario scope.
#[derive(Debug, Clone, Serialize)]
pub struct FirstLevelArtifacts {
    /// `[line][hour]`.
    pub stage1: Vec<Vec<LineDecision>>,
    /// `[scenario][line][hour]`.
    pub scenarios: Vec<Vec<Vec<LineDecision>>>,
}

impl FirstLevelArtifacts {
    pub(crate) fn check_shape(
        &self,
        case: &SystemCase,
        n_scenarios: usize,
    ) -> Result<(), BuildError> {
        let lines = case.lines.len();
        let hours = case.horizon;
        let stage_ok = self.stage1.len() == lines
            && self.stage1.iter().all(|per_t| per_t.len() == hours);
        let scen_ok = self.scenarios.len() == n_scenarios
            && self.scenarios.iter().all(|per_line| {
                per_line.len() == lines && per_line.iter().all(|per_t| per_t.len() == hours)
            });
        if stage_ok && scen_ok {
            Ok(())
        } else {
            Err(BuildError::ArtifactShape(format!(
                "have {} lines / {} scenarios, case needs {lines} lines / {n_scenarios} scenarios",
                self.stage1.len(),
                self.scenarios.len()
            )))
        }
    }

    pub(crate) fn theta_caps(&self, config: &LinearizationConfig) -> ThetaMaxSource {
        super::theta_caps_from(&self.stage1, &self.scenarios, config)
    }

    pub(crate) fn sign_fixes(&self, fix_scenarios: bool) -> SignSource {
        super::signs_from(&self.stage1, &self.scenarios, fix_scenarios)
    }

    /// Line-hour keys that keep a sign binary in the second level: the
    /// ambiguous ones, plus every scenario key when scenario fixing is off.
    pub fn free_sign_count(&self, fix_scenarios: bool) -> usize {
        let free = |d: &LineDecision| d.sign == SignFix::Free;
        let stage = self.stage1.iter().flatten().filter(|d| free(d)).count();
        let scen = self
            .scenarios
            .iter()
            .flatten()
            .flatten()
            .filter(|d| !fix_scenarios || free(d))
            .count();
        stage + scen
    }
}

fn classify(theta: f64, tolerance: f64) -> SignFix {
    if theta > tolerance {
        SignFix::Positive
    } else if theta < -tolerance {
        SignFix::Negative
    } else {
        SignFix::Free
    }
}

/// Lift angle signs and magnitudes from a solved lossless schedule.
pub fn extract_first_level(
    solution: &ScheduleSolution,
    config: &LinearizationConfig,
) -> Result<FirstLevelArtifacts, TwoLevelError> {
    if solution.variant != Variant::LacLossless {
        return Err(TwoLevelError::WrongVariant(solution.variant));
    }
    let lift = |theta_grid: &Vec<Vec<f64>>| -> Vec<Vec<LineDecision>> {
        theta_grid
            .iter()
            .map(|per_t| {
                per_t
                    .iter()
                    .map(|&theta| LineDecision {
                        sign: classify(theta, config.sign_tolerance),
                        magnitude: theta.abs(),
                    })
                    .collect()
            })
            .collect()
    };
    Ok(FirstLevelArtifacts {
        stage1: lift(&solution.network[0].theta),
        scenarios: solution.network[1..].iter().map(|s| lift(&s.theta)).collect(),
    })
}

#[derive(Debug)]
pub struct TwoLevelOutcome {
    /// The level-two (full, sign-fixed) solution.
    pub solution: ScheduleSolution,
    pub artifacts: FirstLevelArtifacts,
    pub level1_objective: f64,
    /// Wall time of assemble + solve + decode per level, seconds.
    pub level1_wall_s: f64,
    pub level2_wall_s: f64,
    /// Level two was infeasible once and re-solved with doubled cap floors.
    pub floors_doubled: bool,
}

/// Run both levels. A level-one infeasibility is terminal (the case cannot be
/// served even without losses). A level-two infeasibility gets one retry with
/// doubled angle-cap floors before giving up.
pub fn solve_two_level(
    case: &SystemCase,
    scenarios: Option<&ScenarioSet>,
    config: &LinearizationConfig,
    caes_mode: CaesMode,
    backend: &dyn Backend,
    limits: &SolveLimits,
) -> Result<TwoLevelOutcome, TwoLevelError> {
    let level1_start = std::time::Instant::now();
    let lossless = assemble(case, scenarios, config, Variant::LacLossless, caes_mode, None)?;
    let level1_result = backend.solve(&lossless.model, limits)?;
    if level1_result.status == SolveStatus::Infeasible {
        return Err(TwoLevelError::Level1Infeasible);
    }
    if !level1_result.status.has_solution() {
        return Err(TwoLevelError::NoSolution {
            level: 1,
            status: level1_result.status,
        });
    }
    let level1_solution = decode_solution(&lossless, &level1_result, case, scenarios)?;
    let artifacts = extract_first_level(&level1_solution, config)?;
    let level1_wall_s = level1_start.elapsed().as_secs_f64();

    let level2_start = std::time::Instant::now();
    let full = assemble(
        case,
        scenarios,
        config,
        Variant::TlLac,
        caes_mode,
        Some(&artifacts),
    )?;
    let mut level2_result = backend.solve(&full.model, limits)?;
    let mut floors_doubled = false;
    let mut active = full;
    if level2_result.status == SolveStatus::Infeasible {
        // The fixed caps can pinch off a feasible point that losses shifted;
        // retry once with doubled floors before declaring defeat.
        let mut relaxed = config.clone();
        relaxed.theta_max_floor *= 2.0;
        let retry = assemble(
            case,
            scenarios,
            &relaxed,
            Variant::TlLac,
            caes_mode,
            Some(&artifacts),
        )?;
        level2_result = backend.solve(&retry.model, limits)?;
        floors_doubled = true;
        active = retry;
        if level2_result.status == SolveStatus::Infeasible {
            return Err(TwoLevelError::Level2Infeasible);
        }
    }
    if !level2_result.status.has_solution() {
        return Err(TwoLevelError::NoSolution {
            level: 2,
            status: level2_result.status,
        });
    }
    let solution = decode_solution(&active, &level2_result, case, scenarios)?;
    let level2_wall_s = level2_start.elapsed().as_secs_f64();

    Ok(TwoLevelOutcome {
        solution,
        artifacts,
        level1_objective: level1_result.objective,
        level1_wall_s,
        level2_wall_s,
        floors_doubled,
    })
}
