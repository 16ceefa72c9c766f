//! Sequential conic optimization for multi-phase trajectory problems.
//!
//! The pipeline: a [`ContinuousSystem`] is discretized exactly on dilated
//! intervals ([`discretize`]), the SCP loop ([`scp`]) assembles a convex
//! subproblem in the standard form of [`conic`], and [`pipg`] solves it with
//! only matrix-vector products and projections. [`rocket`] instantiates the
//! loop for a four-phase planar landing.

pub mod conic;
pub mod discretize;
pub mod error;
pub mod pipg;
pub mod rocket;
pub mod scaling;
pub mod scp;
pub mod system;
pub mod vehicle;

pub use conic::{ConicProgram, SetBlock, SetKind, SparseMatrix};
pub use discretize::{discretize_interval, propagate_nonlinear, DiscreteUpdate, HoldKind, IntervalReference};
pub use error::{Error, Result};
pub use pipg::{PipgSettings, PipgSolution, PipgStats};
pub use rocket::{solve_problem, solve_seco, FeasibilityReport, GimbalRateForm, PhasePlan, RocketProblem};
pub use scaling::{ScaleUnits, VariableScaling};
pub use scp::{solve_scp, ProblemSpec, RateLimit, ScpReport, ScpSettings, SeqProblem, Trajectory};
pub use system::{ContinuousSystem, LinearSystem};
pub use vehicle::{PhaseTag, RocketControl, RocketModel, RocketParams, RocketState};
