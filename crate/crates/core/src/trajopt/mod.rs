//! Trajectory optimization for in-grasp object motion.
//!
//! Decision variables are the joint configurations `Q_1..Q_T` and the object
//! poses `ξ_1..ξ_T` (position plus rotation vector). The objective is
//!
//! ```text
//! J = d(T_o,T, T_o,d; W_o) + Σ_t Σ_i d(T_o,t⁻¹ T_i,t, ᴼT_i,0; W_f) + λ Σ_t ‖Q_t+1 − Q_t‖²
//! ```
//!
//! subject to joint limits and pairwise finger clearance. All gradients are
//! analytical; the Hessian handed to the SQP solver is Gauss-Newton for the
//! pose-distance terms and exact for the joint penalty.

pub(crate) mod assemble;
mod solve;

pub use assemble::{constraints, cost_finger, cost_joint, cost_object, total_cost, ConstraintEval};
pub use solve::{default_initialization, solve, solve_baseline};

use crate::hand::{GraspState, HandError, HandModel};
use crate::se3::{canonicalize_rotvec, Pose, WeightMatrix};
use nalgebra::{DVector, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TrajError {
    #[error("invalid problem: {0}")]
    InvalidProblem(String),
    #[error("hand model has no designated thumb")]
    NoThumb,
    #[error("solver failed: {reason}")]
    SolverFailed { reason: String, vars: Box<TrajVariables>, stats: SolverStats },
    #[error(transparent)]
    Hand(#[from] HandError),
}

/// Horizon, weights and penalty for one optimization.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajParams {
    pub steps: usize,
    pub lambda: f64,
    pub w_o: WeightMatrix,
    pub w_f: WeightMatrix,
    pub collision_enabled: bool,
}

impl TrajParams {
    /// Object weights used for position-only goals.
    pub fn paper_object_weights() -> WeightMatrix {
        WeightMatrix::from_diag([10.0, 10.0, 10.0, 0.01, 0.01, 0.0])
    }

    /// Object weights used for full pose goals.
    pub fn pose_goal_object_weights() -> WeightMatrix {
        WeightMatrix::from_diag([10.0, 10.0, 10.0, 1.0, 1.0, 1.0])
    }

    pub fn paper_finger_weights() -> WeightMatrix {
        WeightMatrix::from_diag([10.0, 10.0, 10.0, 0.001, 0.001, 0.001])
    }

    /// Settings of the first plan toward a waypoint: `T = 3`, `λ = 4e-4`.
    pub fn paper_first_plan() -> Self {
        Self {
            steps: 3,
            lambda: 4e-4,
            w_o: Self::paper_object_weights(),
            w_f: Self::paper_finger_weights(),
            collision_enabled: true,
        }
    }

    /// Settings of every replan: `T = 1`, `λ = 5e-3`.
    pub fn paper_replan() -> Self {
        Self { steps: 1, lambda: 5e-3, ..Self::paper_first_plan() }
    }
}

#[derive(Debug, Clone)]
pub struct TrajProblem {
    pub hand: HandModel,
    pub grasp: GraspState,
    pub goal: Pose,
    pub steps: usize,
    pub w_o: WeightMatrix,
    pub w_f: WeightMatrix,
    pub lambda: f64,
    pub collision_enabled: bool,
}

impl TrajProblem {
    pub fn new(hand: HandModel, grasp: GraspState, goal: Pose, params: &TrajParams) -> Result<Self, TrajError> {
        let prob = Self {
            hand,
            grasp,
            goal,
            steps: params.steps,
            w_o: params.w_o,
            w_f: params.w_f,
            lambda: params.lambda,
            collision_enabled: params.collision_enabled,
        };
        prob.validate()?;
        Ok(prob)
    }

    pub fn validate(&self) -> Result<(), TrajError> {
        let bad = |m: &str| Err(TrajError::InvalidProblem(m.to_string()));
        if self.steps == 0 {
            return bad("steps must be at least 1");
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return bad("lambda must be finite and nonnegative");
        }
        if !self.w_o.is_valid() || !self.w_f.is_valid() {
            return bad("weights must be finite and nonnegative");
        }
        if self.grasp.q0.len() != self.hand.dof() {
            return Err(HandError::DimensionMismatch { expected: self.hand.dof(), got: self.grasp.q0.len() }.into());
        }
        if self.grasp.grasp_points.len() != self.hand.num_fingers() {
            return bad("one grasp point per finger is required");
        }
        Ok(())
    }

    pub fn num_variables(&self) -> usize {
        self.steps * (self.hand.dof() + 6)
    }
}

/// Trajectory iterate: `q[t]` and `xi_o[t]` hold step `t + 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajVariables {
    pub q: Vec<DVector<f64>>,
    pub xi_o: Vec<Vector6<f64>>,
}

impl TrajVariables {
    pub fn steps(&self) -> usize {
        self.q.len()
    }

    pub fn dof(&self) -> usize {
        self.q.first().map_or(0, |q| q.len())
    }

    pub fn object_pose(&self, t: usize) -> Pose {
        Pose::from_vector(self.xi_o[t].as_slice())
    }

    pub fn terminal_object_pose(&self) -> Pose {
        self.object_pose(self.steps() - 1)
    }

    /// Flattened as `[Q_1; ξ_1; Q_2; ξ_2; …]`.
    pub fn to_flat(&self) -> DVector<f64> {
        let width = self.dof() + 6;
        let mut out = DVector::zeros(self.steps() * width);
        for t in 0..self.steps() {
            out.rows_mut(t * width, self.dof()).copy_from(&self.q[t]);
            out.fixed_rows_mut::<6>(t * width + self.dof()).copy_from(&self.xi_o[t]);
        }
        out
    }

    pub fn from_flat(x: &DVector<f64>, dof: usize) -> Self {
        let width = dof + 6;
        assert_eq!(x.len() % width, 0, "flat length must be a multiple of dof + 6");
        let steps = x.len() / width;
        Self {
            q: (0..steps).map(|t| x.rows(t * width, dof).into_owned()).collect(),
            xi_o: (0..steps).map(|t| x.fixed_rows::<6>(t * width + dof).into_owned()).collect(),
        }
    }

    /// Wraps rotation blocks whose angle exceeds π.
    pub fn canonicalize(&mut self) {
        for xi in &mut self.xi_o {
            let r = nalgebra::Vector3::new(xi[3], xi[4], xi[5]);
            if r.norm() > std::f64::consts::PI {
                xi.fixed_rows_mut::<3>(3).copy_from(&canonicalize_rotvec(&r));
            }
        }
    }

    /// Largest distance of any fingertip from its grasp point, measured in
    /// the object frame over all steps.
    pub fn grasp_drift(&self, hand: &HandModel, grasp: &GraspState) -> Result<f64, HandError> {
        let mut worst: f64 = 0.0;
        for t in 0..self.steps() {
            let inv = self.object_pose(t).inverse();
            for (tip, g) in hand.fingertip_positions(&self.q[t])?.iter().zip(&grasp.grasp_points) {
                worst = worst.max((inv.transform_point(tip) - g).norm());
            }
        }
        Ok(worst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct CostBreakdown {
    pub object: f64,
    pub finger: f64,
    pub joint: f64,
}

impl CostBreakdown {
    pub fn total(&self) -> f64 {
        self.object + self.finger + self.joint
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct SolverStats {
    pub iterations: usize,
    pub kkt_residual: f64,
    /// Seconds.
    pub wall_time: f64,
    /// True when the first attempt failed and the default start was used.
    pub restarted: bool,
}

#[derive(Debug, Clone)]
pub struct TrajSolution {
    pub vars: TrajVariables,
    /// Position distance between the planned terminal object pose and the
    /// goal (meters).
    pub planned_error: f64,
    pub cost: CostBreakdown,
    pub initial_cost: f64,
    pub stats: SolverStats,
}

impl TrajSolution {
    /// Rotation angle between planned terminal orientation and the goal.
    pub fn planned_rotation_error(&self, goal: &Pose) -> f64 {
        crate::se3::spatial_error(&self.vars.terminal_object_pose(), goal).rot.norm()
    }
}
