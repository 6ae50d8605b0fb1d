//! Energy-efficient UAV trajectory planning in the presence of ground jammers.
//!
//! The crate is organised bottom-up:
//!
//! - [`scenario`]: physical parameters, defaults and the scenario file format.
//! - [`physics`]: exact evaluators (channel gain, rate, propulsion energy,
//!   kinematic feasibility). These are the ground truth every surrogate is
//!   checked against.
//! - [`init`]: a strictly feasible starting trajectory and its tight slacks.
//! - [`sca`]: convex surrogates and the per-iteration convex subproblem.
//! - [`solver`]: a primal-dual interior-point method with a banded KKT solve.
//! - [`optimizer`]: the outer successive-convex-approximation loop with the
//!   inner Dinkelbach loop, plus the two benchmark optimizers.
//! - [`experiment`]: case presets, sweeps and the CSV outputs used by the CLI.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod experiment;
pub mod geometry;
pub mod init;
pub mod optimizer;
pub mod physics;
pub mod sca;
pub mod scenario;
pub mod solver;

pub use error::{Error, Result};
pub use geometry::Vec2;
pub use init::{line_init, slack_init, SlackSet};
pub use optimizer::{optimize, AlgoOptions, Mode, RunReport};
pub use physics::Trajectory;
pub use scenario::Scenario;
