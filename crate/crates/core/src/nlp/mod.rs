//! Small dense nonlinear programming toolkit: a convex QP solver and an
//! SQP driver for bound- and inequality-constrained problems.

mod qp;
mod sqp;

pub use qp::{solve_qp, QpError, QpSolution};
pub use sqp::{minimize, NlpEval, NlpProblem, SqpError, SqpOptions, SqpResult, SqpStatus};
