//! Convex programming toolkit: smooth terms, program description, banded
//! KKT linear algebra and the interior-point method.

mod ipm;
pub mod linalg;
pub mod program;
pub mod terms;

pub use ipm::{kkt_residuals, solve, write_trace_csv, KktResiduals, Solution, SolverOptions, Status, TraceRow};
pub use linalg::Factorization;
pub use program::{ConvexProgram, Inequality, LinearEquality};
pub use terms::{SmoothFn, Term};
