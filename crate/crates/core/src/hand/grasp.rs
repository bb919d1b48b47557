use super::{HandError, HandModel};
use crate::se3::{Pose, RotVec};
use nalgebra::{DVector, Vector3};

/// Initial grasp: joint configuration, object pose and the fingertip frames
/// frozen in the object frame.
#[derive(Debug, Clone, PartialEq)]
pub struct GraspState {
    pub q0: DVector<f64>,
    pub object_pose0: Pose,
    /// Fingertip-center positions in the object frame.
    pub grasp_points: Vec<Vector3<f64>>,
    /// Fingertip orientations in the object frame.
    pub grasp_rotations: Vec<RotVec>,
}

impl GraspState {
    /// Fingertip pose in the object frame for finger `i`.
    pub fn relative_tip(&self, i: usize) -> Pose {
        Pose::new(self.grasp_points[i], self.grasp_rotations[i])
    }

    /// Largest distance between stored grasp points and the fingertips at
    /// `q0`, expressed in the object frame.
    pub fn consistency_error(&self, hand: &HandModel) -> Result<f64, HandError> {
        let inv = self.object_pose0.inverse();
        Ok(hand
            .fingertip_positions(&self.q0)?
            .iter()
            .zip(&self.grasp_points)
            .map(|(tip, g)| (inv.transform_point(tip) - g).norm())
            .fold(0.0, f64::max))
    }
}

/// Records the grasp at `q0`. A positive `inset` moves every stored point
/// that far toward the centroid of the grasp points.
pub fn make_grasp(hand: &HandModel, q0: &DVector<f64>, object_pose0: &Pose, inset: f64) -> Result<GraspState, HandError> {
    let inv = object_pose0.inverse();
    let tips = hand.fingertip_poses(q0)?;
    let rel: Vec<Pose> = tips.iter().map(|t| inv.compose(t)).collect();
    let mut points: Vec<Vector3<f64>> = rel.iter().map(|t| t.p).collect();
    if inset != 0.0 {
        let centroid = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
        for p in &mut points {
            let dir = centroid - *p;
            let n = dir.norm();
            if n > 0.0 {
                *p += dir * (inset / n);
            }
        }
    }
    Ok(GraspState {
        q0: q0.clone(),
        object_pose0: *object_pose0,
        grasp_points: points,
        grasp_rotations: rel.iter().map(|t| t.r).collect(),
    })
}
