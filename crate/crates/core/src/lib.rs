//! Day-ahead scheduling engine: two-stage stochastic unit commitment with
//! energy/reserve co-optimization over a linearized AC network, wind
//! scenarios, and thermodynamically modeled compressed-air storage.
//!
//! The crate is organized around the pipeline:
//!
//! 1. [`data`] loads and validates the immutable system description.
//! 2. [`milp`] is the solver-agnostic model representation and backend
//!    contract (HiGHS ships as the default backend).
//! 3. [`lacopf`] and [`caes`] emit network and storage constraints into a
//!    model for any stage/scenario scope.
//! 4. [`scheduler`] assembles the full problem in four network variants,
//!    drives the two-level procedure, and decodes solutions with audits.

pub mod caes;
pub mod data;
pub mod lacopf;
pub mod milp;
pub mod scheduler;

#[cfg(test)]
pub(crate) mod testutil;

pub use data::{load_case, load_scenarios, validate_case, ScenarioSet, SystemCase};
pub use lacopf::LinearizationConfig;
pub use milp::{Backend, HighsBackend, MilpModel, SolveLimits, SolveResult, SolveStatus};
pub use scheduler::{
    apply_schedule_fixings, assemble, decode_solution, extract_first_level, solve_single_level,
    solve_two_level, AssembledModel, CaesMode, FirstLevelArtifacts, ScheduleSolution, Variant,
};
