//! Quasi-static grasp simulator.
//!
//! After every commanded configuration the object settles at the rigid
//! transform that best aligns its contact points (object frame) with the
//! fingertip centers. Whatever the fit cannot explain is absorbed by rolling
//! and slip, so the contacts then move to where the fingertips actually are.
//! Contacts also creep by a random walk, joints track their targets with
//! Gaussian error and the reported pose is noisy. The object drops for good
//! when one step's registration residual exceeds the slip threshold or when
//! the contacts have rolled so far from the initial layout that the grasp
//! no longer holds.

use crate::hand::{GraspState, HandError, HandModel};
use crate::se3::{exp_so3, Pose, RotVec};
use nalgebra::{DVector, Matrix3, Vector3};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum PlantError {
    #[error("object dropped: contact mismatch {residual:.4} m exceeds the grasp tolerance")]
    DroppedObject { residual: f64 },
    #[error("degenerate point configuration: {0}")]
    DegenerateConfiguration(String),
    #[error("invalid perturbation config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Hand(#[from] HandError),
}

/// Noise model of one simulated run. Every realization is a function of
/// `seed`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PerturbationConfig {
    /// Per-joint tracking error (rad).
    pub joint_tracking_std: f64,
    /// Random-walk step of every contact point per executed step (m).
    pub contact_drift_std: f64,
    pub sensing_std_pos: f64,
    pub sensing_std_rot: f64,
    /// Per-step registration residual above which the object falls (m).
    pub slip_threshold: f64,
    /// Largest non-rigid change of the contact layout, relative to the
    /// initial grasp, that still holds the object (m).
    #[serde(default = "unlimited")]
    pub deformation_limit: f64,
    pub seed: u64,
}

impl PerturbationConfig {
    /// No noise at all; the grasp never slips.
    pub fn zero(seed: u64) -> Self {
        Self {
            joint_tracking_std: 0.0,
            contact_drift_std: 0.0,
            sensing_std_pos: 0.0,
            sensing_std_rot: 0.0,
            slip_threshold: f64::INFINITY,
            deformation_limit: f64::INFINITY,
            seed,
        }
    }

    /// Noise levels tuned so that open-loop execution of centimeter-scale
    /// moves lands a few millimeters to a centimeter off target.
    pub fn paper_like(seed: u64) -> Self {
        Self {
            joint_tracking_std: 0.01,
            contact_drift_std: 3e-4,
            sensing_std_pos: 5e-4,
            sensing_std_rot: 0.01,
            slip_threshold: 8e-3,
            deformation_limit: 0.025,
            seed,
        }
    }

    /// Looks up a named preset: `zero` or `paper_like`.
    pub fn preset(name: &str, seed: u64) -> Option<Self> {
        match name {
            "zero" | "none" => Some(Self::zero(seed)),
            "paper_like" | "paper-like" => Some(Self::paper_like(seed)),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<(), PlantError> {
        let stds = [self.joint_tracking_std, self.contact_drift_std, self.sensing_std_pos, self.sensing_std_rot];
        if stds.iter().any(|s| !(s.is_finite() && *s >= 0.0)) {
            return Err(PlantError::InvalidConfig("standard deviations must be finite and nonnegative".into()));
        }
        if !(self.slip_threshold > 0.0 && self.deformation_limit > 0.0) {
            return Err(PlantError::InvalidConfig("slip threshold and deformation limit must be positive".into()));
        }
        Ok(())
    }
}

/// Result of one executed step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepReport {
    pub sensed: Pose,
    /// Largest distance between a fingertip center and its contact point
    /// after registration.
    pub max_residual: f64,
}

/// Ground truth of the simulated hand and object.
#[derive(Debug, Clone)]
pub struct PlantState {
    pub hand: HandModel,
    pub q_true: DVector<f64>,
    pub object_pose_true: Pose,
    /// Current contact points in the object frame.
    pub grasp_points_current: Vec<Vector3<f64>>,
    /// Contact layout at reset.
    pub grasp_points_initial: Vec<Vector3<f64>>,
    pub dropped: bool,
    /// Executed steps since reset.
    pub steps: usize,
    /// Sum over steps of the mean contact-point creep.
    pub cumulative_drift: f64,
    cfg: PerturbationConfig,
    rng: ChaCha8Rng,
}

/// Starts a run at the grasp. Needs at least three fingers.
pub fn reset(hand: &HandModel, grasp: &GraspState, cfg: PerturbationConfig) -> Result<PlantState, PlantError> {
    cfg.validate()?;
    if grasp.grasp_points.len() < 3 {
        return Err(PlantError::DegenerateConfiguration("at least three contacts are needed to hold the object".into()));
    }
    if grasp.q0.len() != hand.dof() {
        return Err(HandError::DimensionMismatch { expected: hand.dof(), got: grasp.q0.len() }.into());
    }
    Ok(PlantState {
        hand: hand.clone(),
        q_true: grasp.q0.clone(),
        object_pose_true: grasp.object_pose0,
        grasp_points_current: grasp.grasp_points.clone(),
        grasp_points_initial: grasp.grasp_points.clone(),
        dropped: false,
        steps: 0,
        cumulative_drift: 0.0,
        cfg,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    })
}

fn unlimited() -> f64 {
    f64::INFINITY
}

fn gauss(rng: &mut ChaCha8Rng, std: f64) -> f64 {
    if std == 0.0 {
        return 0.0;
    }
    Normal::new(0.0, std).expect("finite std").sample(rng)
}

fn gauss3(rng: &mut ChaCha8Rng, std: f64) -> Vector3<f64> {
    Vector3::new(gauss(rng, std), gauss(rng, std), gauss(rng, std))
}

impl PlantState {
    pub fn config(&self) -> &PerturbationConfig {
        &self.cfg
    }

    /// A fresh noisy reading of the object pose.
    pub fn sense(&mut self) -> Pose {
        let dp = gauss3(&mut self.rng, self.cfg.sensing_std_pos);
        let dr = gauss3(&mut self.rng, self.cfg.sensing_std_rot);
        let truth = self.object_pose_true;
        Pose::from_parts(truth.p + dp, &(exp_so3(&RotVec(dr)) * truth.rotation()))
    }

    /// Commands one joint configuration and lets the object settle.
    pub fn execute_step(&mut self, q_cmd: &DVector<f64>) -> Result<StepReport, PlantError> {
        if self.dropped {
            return Err(PlantError::DroppedObject { residual: f64::NAN });
        }
        if q_cmd.len() != self.hand.dof() {
            return Err(HandError::DimensionMismatch { expected: self.hand.dof(), got: q_cmd.len() }.into());
        }
        let mut q = q_cmd.clone();
        for v in q.iter_mut() {
            *v += gauss(&mut self.rng, self.cfg.joint_tracking_std);
        }
        self.hand.clamp(&mut q);
        self.q_true = q;

        let mut creep = 0.0;
        for p in &mut self.grasp_points_current {
            let d = gauss3(&mut self.rng, self.cfg.contact_drift_std);
            creep += d.norm();
            *p += d;
        }
        self.cumulative_drift += creep / self.grasp_points_current.len() as f64;
        self.steps += 1;

        let tips = self.hand.fingertip_positions(&self.q_true)?;
        let pose = register_rigid(&self.grasp_points_current, &tips)?;
        let max_residual = self
            .grasp_points_current
            .iter()
            .zip(&tips)
            .map(|(g, t)| (pose.transform_point(g) - t).norm())
            .fold(0.0, f64::max);
        self.object_pose_true = pose;
        if max_residual > self.cfg.slip_threshold {
            self.dropped = true;
            return Err(PlantError::DroppedObject { residual: max_residual });
        }
        // The residual is taken up by rolling and slip: contacts settle where
        // the fingertips now touch the object.
        let inv = pose.inverse();
        for (g, t) in self.grasp_points_current.iter_mut().zip(&tips) {
            *g = inv.transform_point(t);
        }
        let deformation = self.grasp_deformation();
        if deformation > self.cfg.deformation_limit {
            self.dropped = true;
            return Err(PlantError::DroppedObject { residual: deformation });
        }
        Ok(StepReport { sensed: self.sense(), max_residual })
    }

    /// Non-rigid change of the contact layout since reset: largest residual
    /// after fitting the initial contact points onto the current ones.
    pub fn grasp_deformation(&self) -> f64 {
        let Ok(fit) = register_rigid(&self.grasp_points_initial, &self.grasp_points_current) else { return f64::INFINITY };
        self.grasp_points_initial
            .iter()
            .zip(&self.grasp_points_current)
            .map(|(a, b)| (fit.transform_point(a) - b).norm())
            .fold(0.0, f64::max)
    }

}

/// Least-squares rigid transform `G` with `G·src ≈ dst` (Kabsch, no scale).
pub fn register_rigid(src: &[Vector3<f64>], dst: &[Vector3<f64>]) -> Result<Pose, PlantError> {
    if src.len() != dst.len() {
        return Err(PlantError::DegenerateConfiguration(format!("{} source points but {} targets", src.len(), dst.len())));
    }
    if src.len() < 3 {
        return Err(PlantError::DegenerateConfiguration("need at least three points".into()));
    }
    let n = src.len() as f64;
    let cs = src.iter().sum::<Vector3<f64>>() / n;
    let cd = dst.iter().sum::<Vector3<f64>>() / n;
    let mut spread_s = Matrix3::zeros();
    let mut spread_d = Matrix3::zeros();
    let mut h = Matrix3::zeros();
    for (s, d) in src.iter().zip(dst) {
        let (a, b) = (s - cs, d - cd);
        spread_s += a * a.transpose();
        spread_d += b * b.transpose();
        h += a * b.transpose();
    }
    for spread in [spread_s, spread_d] {
        let mut ev = spread.symmetric_eigenvalues();
        ev.as_mut_slice().sort_by(|a, b| b.partial_cmp(a).unwrap());
        // The second principal extent must be nonzero for a unique fit.
        if !(ev[1] > 1e-14 * ev[0].max(1e-300)) || ev[0] <= 1e-24 {
            return Err(PlantError::DegenerateConfiguration("points are collinear or coincident".into()));
        }
    }
    let svd = h.svd(true, true);
    let (u, v_t) = (svd.u.expect("u requested"), svd.v_t.expect("v requested"));
    let v = v_t.transpose();
    let mut fix = Matrix3::identity();
    if (v * u.transpose()).determinant() < 0.0 {
        fix[(svd.singular_values.imin(), svd.singular_values.imin())] = -1.0;
    }
    let mut rot = v * fix * u.transpose();
    // The SVD is only accurate to about eps / (relative spread), which is
    // poor for thin triangles; Gauss-Newton steps on SO(3) polish it.
    let centered: Vec<_> = src.iter().zip(dst).map(|(s, d)| (s - cs, d - cd)).collect();
    for _ in 0..4 {
        let mut m = Matrix3::zeros();
        let mut g = Vector3::zeros();
        for (a, b) in &centered {
            let c = rot * a;
            m += Matrix3::identity() * c.norm_squared() - c * c.transpose();
            g += c.cross(b);
        }
        let Some(phi) = m.cholesky().map(|ch| ch.solve(&g)) else { break };
        rot = exp_so3(&RotVec(phi)) * rot;
        if phi.norm() < 1e-15 {
            break;
        }
    }
    Ok(Pose::from_parts(cd - rot * cs, &rot))
}
