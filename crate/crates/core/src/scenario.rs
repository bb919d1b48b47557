//! Scenario files and the shipped cylinder grasp.
//!
//! Scenario files are JSON. Lengths are in centimeters (millimeters for the
//! small noise and inset values) and angles in degrees unless a field name
//! says otherwise; every field carries its unit as a suffix.

use crate::hand::{ik_fingertips, make_grasp, GraspState, HandError, HandModel, IkOptions};
use crate::pipeline::{competition_waypoints, ErrorMetric, Formulation, LoopConfig, PlannerConfig, Waypoint};
use crate::plant::PerturbationConfig;
use crate::se3::{Pose, RotVec, WeightMatrix};
use nalgebra::{DVector, Vector3};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("cannot read scenario {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error(transparent)]
    Hand(#[from] HandError),
}

/// Name that selects the built-in hand instead of a file.
pub const BUILTIN_HAND: &str = "builtin:synth-3x4";

/// Cylinder center of the shipped grasp (hand frame, meters).
pub const CYLINDER_CENTER: [f64; 3] = [0.0, -0.07, 0.05];
/// Cylinder radius plus fingertip radius (meters).
pub const CYLINDER_CONTACT_RADIUS: f64 = 0.038;
/// Direction of the index/ring contacts from the cylinder axis, measured in
/// the y-z plane from +y (radians, negative tilts toward −z).
pub const CYLINDER_CONTACT_ANGLE: f64 = -std::f64::consts::FRAC_PI_4;

/// Fingertip-center targets of the shipped grasp of a 60 mm cylinder lying
/// along x: index and ring side by side on one flank, thumb opposite.
pub fn cylinder_targets() -> Vec<Vector3<f64>> {
    let c = Vector3::from(CYLINDER_CENTER);
    let n = Vector3::new(0.0, CYLINDER_CONTACT_ANGLE.cos(), CYLINDER_CONTACT_ANGLE.sin()) * CYLINDER_CONTACT_RADIUS;
    let dx = Vector3::new(0.03, 0.0, 0.0);
    vec![c + n + dx, c + n - dx, c - n]
}

/// Per-finger joint seed `[0, 0.3, 0.6, 0.5]`; extra joints repeat the last value.
pub fn default_ik_seed(hand: &HandModel) -> DVector<f64> {
    let mut q = DVector::zeros(hand.dof());
    for f in 0..hand.num_fingers() {
        let r = hand.joint_range(f);
        let init = [0.0, 0.3, 0.6, 0.5];
        for (k, i) in r.enumerate() {
            q[i] = init[k.min(3)];
        }
    }
    q
}

/// The shipped cylinder grasp on the synthetic hand.
pub fn cylinder_grasp(hand: &HandModel) -> Result<GraspState, ScenarioError> {
    let ik = ik_fingertips(hand, &cylinder_targets(), &default_ik_seed(hand), &IkOptions::default())?;
    Ok(make_grasp(hand, &ik.q, &Pose::from_translation(CYLINDER_CENTER.into()), 0.0)?)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged, deny_unknown_fields)]
pub enum GraspSpec {
    Joints {
        q0_rad: Vec<f64>,
    },
    Targets {
        fingertip_targets_cm: Vec<[f64; 3]>,
        #[serde(default)]
        ik_seed_rad: Option<Vec<f64>>,
        #[serde(default)]
        inset_mm: f64,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LoopSpec {
    pub n_replan: usize,
    pub time_budget_s: f64,
    pub first_steps: usize,
    pub replan_steps: usize,
    pub return_to_initial: bool,
    pub error_metric: ErrorMetric,
}

impl Default for LoopSpec {
    fn default() -> Self {
        let d = LoopConfig::default();
        Self {
            n_replan: d.n_replan,
            time_budget_s: d.time_budget,
            first_steps: d.first_steps,
            replan_steps: d.replan_steps,
            return_to_initial: d.return_to_initial,
            error_metric: d.error_metric,
        }
    }
}

/// Weights are dimensionless multipliers of errors in meters and radians,
/// exactly as the optimizer uses them.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlannerSpec {
    pub formulation: Formulation,
    pub first_lambda: f64,
    pub replan_lambda: f64,
    pub object_weights: [f64; 6],
    pub finger_weights: [f64; 6],
    pub collision: bool,
}

impl Default for PlannerSpec {
    fn default() -> Self {
        let d = PlannerConfig::default();
        Self {
            formulation: d.formulation,
            first_lambda: d.first_lambda,
            replan_lambda: d.replan_lambda,
            object_weights: d.object_weights.diag().into(),
            finger_weights: d.finger_weights.diag().into(),
            collision: d.collision_enabled,
        }
    }
}

/// Explicit noise levels, overriding the named preset.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseSpec {
    pub joint_tracking_std_deg: f64,
    pub contact_drift_std_mm: f64,
    pub sensing_std_pos_mm: f64,
    pub sensing_std_rot_deg: f64,
    pub slip_threshold_mm: f64,
    /// Omitted means the grip never gives way from rolling alone.
    #[serde(default)]
    pub deformation_limit_mm: Option<f64>,
}

/// On-disk scenario.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    pub id: String,
    /// Path relative to the scenario file, or `builtin:synth-3x4`.
    pub hand_file: String,
    pub object_position_cm: [f64; 3],
    #[serde(default)]
    pub object_rotation_deg: [f64; 3],
    pub grasp: GraspSpec,
    /// Position goals relative to the initial object position.
    #[serde(default)]
    pub waypoints_cm: Vec<[f64; 3]>,
    /// Pose goals: offset in cm, then a world-frame rotation vector in
    /// degrees.
    #[serde(default)]
    pub pose_waypoints_cm_deg: Vec<[f64; 6]>,
    #[serde(default, rename = "loop")]
    pub loop_spec: LoopSpec,
    #[serde(default)]
    pub planner: PlannerSpec,
    #[serde(default = "default_noise_preset")]
    pub noise_preset: String,
    #[serde(default)]
    pub noise: Option<NoiseSpec>,
    #[serde(default = "default_seeds")]
    pub seeds: Vec<u64>,
}

fn default_noise_preset() -> String {
    "paper_like".into()
}

fn default_seeds() -> Vec<u64> {
    vec![0]
}

/// A scenario with every reference resolved, in SI units.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub id: String,
    pub hand: HandModel,
    pub grasp: GraspState,
    pub waypoints: Vec<Waypoint>,
    pub loop_cfg: LoopConfig,
    pub planner: PlannerConfig,
    /// Seed field is overwritten per run.
    pub noise: PerturbationConfig,
    pub seeds: Vec<u64>,
}

fn deg3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::from(v).map(f64::to_radians)
}

impl ScenarioFile {
    /// Resolves the file; relative hand paths are taken from `base_dir`.
    pub fn resolve(&self, base_dir: &Path) -> Result<Scenario, ScenarioError> {
        let invalid = |m: String| Err(ScenarioError::Invalid(m));
        let hand = if self.hand_file == BUILTIN_HAND {
            HandModel::synth_3x4()
        } else {
            let p = PathBuf::from(&self.hand_file);
            HandModel::from_file(if p.is_absolute() { p } else { base_dir.join(p) })?
        };
        let object_pose0 = Pose::new(Vector3::from(self.object_position_cm) * 0.01, RotVec(deg3(self.object_rotation_deg)));
        let grasp = match &self.grasp {
            GraspSpec::Joints { q0_rad } => {
                let q0 = DVector::from_column_slice(q0_rad);
                if q0.len() != hand.dof() {
                    return invalid(format!("q0_rad has {} entries, the hand has {} joints", q0.len(), hand.dof()));
                }
                make_grasp(&hand, &q0, &object_pose0, 0.0)?
            }
            GraspSpec::Targets { fingertip_targets_cm, ik_seed_rad, inset_mm } => {
                let targets: Vec<Vector3<f64>> = fingertip_targets_cm.iter().map(|t| Vector3::from(*t) * 0.01).collect();
                let seed = match ik_seed_rad {
                    Some(s) => DVector::from_column_slice(s),
                    None => default_ik_seed(&hand),
                };
                let ik = ik_fingertips(&hand, &targets, &seed, &IkOptions::default())?;
                make_grasp(&hand, &ik.q, &object_pose0, inset_mm * 1e-3)?
            }
        };

        let l = &self.loop_spec;
        let loop_cfg = LoopConfig {
            n_replan: l.n_replan,
            time_budget: l.time_budget_s,
            first_steps: l.first_steps,
            replan_steps: l.replan_steps,
            return_to_initial: l.return_to_initial,
            error_metric: l.error_metric,
        };
        if loop_cfg.validate().is_err() {
            return invalid("loop budgets and horizons must be positive".into());
        }

        let waypoints: Vec<Waypoint> = match (self.waypoints_cm.is_empty(), self.pose_waypoints_cm_deg.is_empty()) {
            (_, true) => self.waypoints_cm.iter().map(|w| Waypoint::position(Vector3::from(*w) * 0.01)).collect(),
            (true, false) => {
                if l.error_metric != ErrorMetric::FullPose {
                    return invalid("pose waypoints need error_metric = full_pose".into());
                }
                self.pose_waypoints_cm_deg
                    .iter()
                    .map(|w| Waypoint::pose(Vector3::new(w[0], w[1], w[2]) * 0.01, RotVec(deg3([w[3], w[4], w[5]]))))
                    .collect()
            }
            (false, false) => return invalid("give either waypoints_cm or pose_waypoints_cm_deg, not both".into()),
        };

        let p = &self.planner;
        let planner = PlannerConfig {
            formulation: p.formulation,
            first_lambda: p.first_lambda,
            replan_lambda: p.replan_lambda,
            object_weights: WeightMatrix::from_diag(p.object_weights),
            finger_weights: WeightMatrix::from_diag(p.finger_weights),
            collision_enabled: p.collision,
        };
        if !planner.object_weights.is_valid() || !planner.finger_weights.is_valid() || !(p.first_lambda >= 0.0 && p.replan_lambda >= 0.0) {
            return invalid("weights and penalties must be finite and nonnegative".into());
        }

        let mut noise = match PerturbationConfig::preset(&self.noise_preset, 0) {
            Some(n) => n,
            None => return invalid(format!("unknown noise preset `{}`", self.noise_preset)),
        };
        if let Some(n) = &self.noise {
            noise = PerturbationConfig {
                joint_tracking_std: n.joint_tracking_std_deg.to_radians(),
                contact_drift_std: n.contact_drift_std_mm * 1e-3,
                sensing_std_pos: n.sensing_std_pos_mm * 1e-3,
                sensing_std_rot: n.sensing_std_rot_deg.to_radians(),
                slip_threshold: n.slip_threshold_mm * 1e-3,
                deformation_limit: n.deformation_limit_mm.map_or(f64::INFINITY, |d| d * 1e-3),
                seed: 0,
            };
        }
        if noise.validate().is_err() {
            return invalid("noise levels must be nonnegative with positive slip and deformation limits".into());
        }
        if self.seeds.is_empty() {
            return invalid("at least one seed is required".into());
        }

        Ok(Scenario {
            id: self.id.clone(),
            hand,
            grasp,
            waypoints,
            loop_cfg,
            planner,
            noise,
            seeds: self.seeds.clone(),
        })
    }
}

impl Scenario {
    pub fn from_json(text: &str, base_dir: &Path) -> Result<Self, ScenarioError> {
        serde_json::from_str::<ScenarioFile>(text)?.resolve(base_dir)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, ScenarioError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|source| ScenarioError::Io { path: path.display().to_string(), source })?;
        Self::from_json(&text, path.parent().unwrap_or(Path::new(".")))
    }

    /// The ten competition waypoints on the shipped cylinder grasp with
    /// `paper_like` noise and four replans.
    pub fn competition() -> Self {
        let hand = HandModel::synth_3x4();
        let grasp = cylinder_grasp(&hand).expect("shipped grasp is reachable");
        Self {
            id: "competition".into(),
            hand,
            grasp,
            waypoints: competition_waypoints(),
            loop_cfg: LoopConfig::default(),
            planner: PlannerConfig::default(),
            noise: PerturbationConfig::paper_like(0),
            seeds: vec![0],
        }
    }

    /// Absolute goal of waypoint `k`.
    pub fn goal(&self, k: usize) -> Option<Pose> {
        self.waypoints.get(k).map(|w| w.goal(&self.grasp.object_pose0))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cylinder_grasp_touches_the_targets() {
        let hand = HandModel::synth_3x4();
        let g = cylinder_grasp(&hand).unwrap();
        let tips = hand.fingertip_positions(&g.q0).unwrap();
        for (tip, t) in tips.iter().zip(cylinder_targets()) {
            assert!((tip - t).norm() < 1e-4);
        }
        assert!(hand.within_limits(&g.q0));
        let d = hand.collision_distances(&g.q0).unwrap();
        assert!(d.iter().all(|v| *v > hand.min_pair_distance));
    }

    #[test]
    fn parses_units() {
        let text = r#"{
            "id": "t",
            "hand_file": "builtin:synth-3x4",
            "object_position_cm": [0, -7, 5],
            "grasp": {"fingertip_targets_cm": [[3, -4.313, 2.313], [-3, -4.313, 2.313], [0, -9.687, 7.687]]},
            "waypoints_cm": [[1, 0, 0], [0, 2.5, 0]],
            "loop": {"n_replan": 2},
            "noise_preset": "zero",
            "seeds": [3, 4]
        }"#;
        let s = Scenario::from_json(text, Path::new(".")).unwrap();
        assert_eq!(s.waypoints.len(), 2);
        assert!((s.waypoints[1].offset.y - 0.025).abs() < 1e-15);
        assert!((s.grasp.object_pose0.p - Vector3::new(0.0, -0.07, 0.05)).norm() < 1e-15);
        assert_eq!(s.loop_cfg.n_replan, 2);
        assert_eq!(s.loop_cfg.first_steps, 3);
        assert_eq!(s.seeds, vec![3, 4]);
        assert_eq!(s.noise.sensing_std_pos, 0.0);
    }

    #[test]
    fn rejects_inconsistent_waypoints() {
        let text = r#"{
            "id": "t", "hand_file": "builtin:synth-3x4", "object_position_cm": [0, -7, 5],
            "grasp": {"q0_rad": [0,0.4,1.6,1.6, 0,0.4,1.6,1.6, 0,-0.2,1.1,1.4]},
            "pose_waypoints_cm_deg": [[0, 0, 2, 0, 0, 40]]
        }"#;
        assert!(matches!(Scenario::from_json(text, Path::new(".")), Err(ScenarioError::Invalid(_))));
        let fixed = text.replace(r#""pose_waypoints"#, r#""loop": {"error_metric": "full_pose"}, "pose_waypoints"#);
        let s = Scenario::from_json(&fixed, Path::new(".")).unwrap();
        assert!((s.waypoints[0].rotation.unwrap().0.z - 40f64.to_radians()).abs() < 1e-15);
    }

    #[test]
    fn missing_hand_file_names_the_path() {
        let text = r#"{"id": "t", "hand_file": "nowhere/hand.json", "object_position_cm": [0, 0, 0], "grasp": {"q0_rad": []}}"#;
        let err = Scenario::from_json(text, Path::new("/tmp")).unwrap_err();
        assert!(err.to_string().contains("nowhere/hand.json"), "{err}");
    }
}
