//! JSON hand specification (meters and radians).

use super::{CollisionPoint, FingerChain, HandError, HandModel, RevoluteJoint};
use crate::se3::{Pose, RotVec};
use nalgebra::Vector3;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PoseSpec {
    pub p: [f64; 3],
    pub r: [f64; 3],
}

impl PoseSpec {
    fn to_pose(&self) -> Pose {
        Pose::new(self.p.into(), RotVec(self.r.into()))
    }
}

impl From<&Pose> for PoseSpec {
    fn from(p: &Pose) -> Self {
        Self { p: p.p.into(), r: p.r.0.into() }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct JointSpec {
    pub axis: [f64; 3],
    pub offset: PoseSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FingerSpec {
    pub name: String,
    pub base_pose: PoseSpec,
    pub joints: Vec<JointSpec>,
    pub tip_offset: PoseSpec,
    pub limits: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CollisionPointSpec {
    pub finger: usize,
    pub link: usize,
    pub local: [f64; 3],
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HandSpec {
    pub name: String,
    #[serde(default)]
    pub tip_radius: f64,
    pub fingers: Vec<FingerSpec>,
    /// Name of the thumb finger.
    #[serde(default)]
    pub thumb: Option<String>,
    #[serde(default)]
    pub collision_points: Vec<CollisionPointSpec>,
    pub min_pair_distance: f64,
}

impl HandSpec {
    pub fn from_json(text: &str) -> Result<Self, HandError> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn build(&self) -> Result<HandModel, HandError> {
        let fingers = self
            .fingers
            .iter()
            .map(|f| FingerChain {
                name: f.name.clone(),
                base_pose: f.base_pose.to_pose(),
                joints: f
                    .joints
                    .iter()
                    .map(|j| RevoluteJoint { axis: Vector3::from(j.axis), offset: j.offset.to_pose() })
                    .collect(),
                tip_offset: f.tip_offset.to_pose(),
                limits: f.limits.iter().map(|l| (l[0], l[1])).collect(),
            })
            .collect::<Vec<_>>();
        let thumb = match &self.thumb {
            None => None,
            Some(name) => Some(
                fingers
                    .iter()
                    .position(|f| &f.name == name)
                    .ok_or_else(|| HandError::InvalidModel(format!("thumb '{name}' is not a finger")))?,
            ),
        };
        let points = self
            .collision_points
            .iter()
            .map(|c| CollisionPoint { finger: c.finger, link: c.link, local: c.local.into() })
            .collect();
        HandModel::new(self.name.clone(), fingers, thumb, points, self.min_pair_distance, self.tip_radius)
    }
}
