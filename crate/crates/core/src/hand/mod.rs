//! Serial-chain kinematics for a multi-fingered hand.
//!
//! Each finger is a chain of revolute joints. A joint first applies its
//! `offset` (relative to the previous joint frame) and then rotates about its
//! own `axis`; the fingertip frame is the last joint frame followed by
//! `tip_offset`. All Jacobians here use the world-frame convention of
//! [`crate::se3`]: rows `[ṗ; ω]`.

mod grasp;
mod ik;
mod spec;

pub use grasp::{make_grasp, GraspState};
pub use ik::{ik_fingertips, IkOptions, IkSolution};
pub use spec::{FingerSpec, HandSpec, JointSpec};

use crate::se3::Pose;
use nalgebra::{DMatrix, DVector, IsometryMatrix3, Rotation3, Unit, Vector3};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum HandError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("finger index {0} out of range")]
    NoSuchFinger(usize),
    #[error("IK did not converge: max residual {max_residual:.3e} m")]
    IkNotConverged { max_residual: f64, residuals: Vec<f64>, q: DVector<f64> },
    #[error("invalid hand model: {0}")]
    InvalidModel(String),
    #[error("cannot read hand file {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse hand specification: {0}")]
    Parse(#[from] serde_json::Error),
}

#[derive(Debug, Clone, PartialEq)]
pub struct RevoluteJoint {
    /// Unit axis in the joint frame.
    pub axis: Vector3<f64>,
    pub offset: Pose,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FingerChain {
    pub name: String,
    pub base_pose: Pose,
    pub joints: Vec<RevoluteJoint>,
    pub tip_offset: Pose,
    pub limits: Vec<(f64, f64)>,
}

/// World frames of one finger at a joint configuration.
#[derive(Debug, Clone)]
pub struct ChainFrames {
    /// Frame after each joint's rotation.
    pub links: Vec<IsometryMatrix3<f64>>,
    pub tip: IsometryMatrix3<f64>,
}

impl FingerChain {
    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    pub fn frames(&self, q: &[f64]) -> Result<ChainFrames, HandError> {
        if q.len() != self.dof() {
            return Err(HandError::DimensionMismatch { expected: self.dof(), got: q.len() });
        }
        let mut frame = self.base_pose.to_isometry();
        let mut links = Vec::with_capacity(self.dof());
        for (joint, &angle) in self.joints.iter().zip(q) {
            let rot = Rotation3::from_axis_angle(&Unit::new_unchecked(joint.axis), angle);
            frame = frame * joint.offset.to_isometry() * IsometryMatrix3::from_parts(Default::default(), rot);
            links.push(frame);
        }
        let tip = frame * self.tip_offset.to_isometry();
        Ok(ChainFrames { links, tip })
    }

    pub fn fingertip(&self, q: &[f64]) -> Result<Pose, HandError> {
        Ok(Pose::from_isometry(&self.frames(q)?.tip))
    }

    /// 6×dof Jacobian of a point rigidly attached to `link`, located at
    /// `world_point`; joints past `link` contribute zero columns.
    pub fn point_jacobian(&self, frames: &ChainFrames, link: usize, world_point: &Vector3<f64>) -> DMatrix<f64> {
        let mut jac = DMatrix::zeros(6, self.dof());
        for k in 0..(link + 1).min(self.dof()) {
            let frame = &frames.links[k];
            let w = frame.rotation * self.joints[k].axis;
            let v = w.cross(&(world_point - frame.translation.vector));
            jac.fixed_view_mut::<3, 1>(0, k).copy_from(&v);
            jac.fixed_view_mut::<3, 1>(3, k).copy_from(&w);
        }
        jac
    }

    pub fn tip_jacobian(&self, frames: &ChainFrames) -> DMatrix<f64> {
        if self.dof() == 0 {
            return DMatrix::zeros(6, 0);
        }
        self.point_jacobian(frames, self.dof() - 1, &frames.tip.translation.vector)
    }

    pub fn clamp(&self, q: &mut [f64]) {
        for (x, (lo, hi)) in q.iter_mut().zip(&self.limits) {
            *x = x.clamp(*lo, *hi);
        }
    }
}

/// Critical point used for finger-finger collision avoidance.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CollisionPoint {
    pub finger: usize,
    pub link: usize,
    pub local: Vector3<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HandModel {
    pub name: String,
    pub fingers: Vec<FingerChain>,
    /// Finger treated as the thumb by the rigid-contact baseline.
    pub thumb: Option<usize>,
    pub collision_points: Vec<CollisionPoint>,
    pub min_pair_distance: f64,
    pub tip_radius: f64,
    offsets: Vec<usize>,
    pairs: Vec<(usize, usize)>,
}

const SYNTH_3X4: &str = include_str!("../../data/synth-3x4.json");

impl HandModel {
    pub fn new(
        name: impl Into<String>,
        fingers: Vec<FingerChain>,
        thumb: Option<usize>,
        collision_points: Vec<CollisionPoint>,
        min_pair_distance: f64,
        tip_radius: f64,
    ) -> Result<Self, HandError> {
        if fingers.len() < 2 {
            return Err(HandError::InvalidModel("a hand needs at least two fingers".into()));
        }
        for f in &fingers {
            if f.limits.len() != f.dof() {
                return Err(HandError::InvalidModel(format!("finger {}: one limit pair per joint", f.name)));
            }
            for j in &f.joints {
                if (j.axis.norm() - 1.0).abs() > 1e-9 {
                    return Err(HandError::InvalidModel(format!("finger {}: joint axis not unit-norm", f.name)));
                }
            }
            if f.limits.iter().any(|(lo, hi)| !(lo < hi)) {
                return Err(HandError::InvalidModel(format!("finger {}: min must be below max", f.name)));
            }
        }
        if let Some(t) = thumb {
            if t >= fingers.len() {
                return Err(HandError::NoSuchFinger(t));
            }
        }
        for c in &collision_points {
            let f = fingers.get(c.finger).ok_or(HandError::NoSuchFinger(c.finger))?;
            if c.link >= f.dof() {
                return Err(HandError::InvalidModel(format!("collision point on missing link {}", c.link)));
            }
        }
        let mut offsets = Vec::with_capacity(fingers.len() + 1);
        let mut acc = 0;
        for f in &fingers {
            offsets.push(acc);
            acc += f.dof();
        }
        offsets.push(acc);
        let mut pairs = Vec::new();
        for a in 0..collision_points.len() {
            for b in a + 1..collision_points.len() {
                if collision_points[a].finger != collision_points[b].finger {
                    pairs.push((a, b));
                }
            }
        }
        Ok(Self {
            name: name.into(),
            fingers,
            thumb,
            collision_points,
            min_pair_distance,
            tip_radius,
            offsets,
            pairs,
        })
    }

    /// The shipped three-finger, four-joint synthetic hand.
    pub fn synth_3x4() -> Self {
        HandSpec::from_json(SYNTH_3X4)
            .and_then(|s| s.build())
            .expect("shipped hand specification is valid")
    }

    pub fn from_file(path: impl AsRef<std::path::Path>) -> Result<Self, HandError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|source| HandError::Io { path: path.display().to_string(), source })?;
        HandSpec::from_json(&text)?.build()
    }

    pub fn num_fingers(&self) -> usize {
        self.fingers.len()
    }

    pub fn dof(&self) -> usize {
        self.offsets[self.fingers.len()]
    }

    /// Range of the finger's joints inside the full joint vector `Q`.
    pub fn joint_range(&self, finger: usize) -> std::ops::Range<usize> {
        self.offsets[finger]..self.offsets[finger + 1]
    }

    pub fn finger(&self, finger: usize) -> Result<&FingerChain, HandError> {
        self.fingers.get(finger).ok_or(HandError::NoSuchFinger(finger))
    }

    pub fn lower_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.fingers.iter().flat_map(|f| f.limits.iter().map(|l| l.0)))
    }

    pub fn upper_limits(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.fingers.iter().flat_map(|f| f.limits.iter().map(|l| l.1)))
    }

    pub fn clamp(&self, q: &mut DVector<f64>) {
        for (i, f) in self.fingers.iter().enumerate() {
            f.clamp(&mut q.as_mut_slice()[self.joint_range(i)]);
        }
    }

    pub fn within_limits(&self, q: &DVector<f64>) -> bool {
        let lo = self.lower_limits();
        let hi = self.upper_limits();
        q.iter().zip(lo.iter().zip(hi.iter())).all(|(x, (l, h))| x >= l && x <= h)
    }

    /// Midpoint of each joint range.
    pub fn mid_configuration(&self) -> DVector<f64> {
        (self.lower_limits() + self.upper_limits()) * 0.5
    }

    fn check_finger_q<'a>(&self, finger: usize, q: &'a [f64]) -> Result<&'a [f64], HandError> {
        let f = self.finger(finger)?;
        if q.len() != f.dof() {
            return Err(HandError::DimensionMismatch { expected: f.dof(), got: q.len() });
        }
        Ok(q)
    }

    /// Fingertip pose in the hand frame; `q` holds only this finger's joints.
    pub fn fk_fingertip(&self, finger: usize, q: &[f64]) -> Result<Pose, HandError> {
        let q = self.check_finger_q(finger, q)?;
        self.fingers[finger].fingertip(q)
    }

    /// 6×dof(finger) space Jacobian of the fingertip.
    pub fn space_jacobian(&self, finger: usize, q: &[f64]) -> Result<DMatrix<f64>, HandError> {
        let q = self.check_finger_q(finger, q)?;
        let f = &self.fingers[finger];
        Ok(f.tip_jacobian(&f.frames(q)?))
    }

    /// Fingertip positions for the full joint vector.
    pub fn fingertip_positions(&self, q: &DVector<f64>) -> Result<Vec<Vector3<f64>>, HandError> {
        self.check_full(q)?;
        (0..self.num_fingers())
            .map(|i| Ok(self.fk_fingertip(i, &q.as_slice()[self.joint_range(i)])?.p))
            .collect()
    }

    pub fn fingertip_poses(&self, q: &DVector<f64>) -> Result<Vec<Pose>, HandError> {
        self.check_full(q)?;
        (0..self.num_fingers())
            .map(|i| self.fk_fingertip(i, &q.as_slice()[self.joint_range(i)]))
            .collect()
    }

    pub(crate) fn check_full(&self, q: &DVector<f64>) -> Result<(), HandError> {
        if q.len() != self.dof() {
            return Err(HandError::DimensionMismatch { expected: self.dof(), got: q.len() });
        }
        Ok(())
    }

    /// Index pairs of critical points that lie on different fingers.
    pub fn collision_pairs(&self) -> &[(usize, usize)] {
        &self.pairs
    }

    fn collision_point_world(&self, frames: &[ChainFrames], c: &CollisionPoint) -> Vector3<f64> {
        (frames[c.finger].links[c.link] * nalgebra::Point3::from(c.local)).coords
    }

    fn all_frames(&self, q: &DVector<f64>) -> Result<Vec<ChainFrames>, HandError> {
        self.check_full(q)?;
        (0..self.num_fingers())
            .map(|i| self.fingers[i].frames(&q.as_slice()[self.joint_range(i)]))
            .collect()
    }

    /// Euclidean distance of every configured critical-point pair.
    pub fn collision_distances(&self, q: &DVector<f64>) -> Result<Vec<f64>, HandError> {
        let frames = self.all_frames(q)?;
        Ok(self
            .pairs
            .iter()
            .map(|&(a, b)| {
                let pa = self.collision_point_world(&frames, &self.collision_points[a]);
                let pb = self.collision_point_world(&frames, &self.collision_points[b]);
                (pa - pb).norm()
            })
            .collect())
    }

    /// Pair distances and their gradients with respect to the full `Q`
    /// (one row per pair).
    pub fn collision_distances_with_gradient(
        &self,
        q: &DVector<f64>,
    ) -> Result<(Vec<f64>, DMatrix<f64>), HandError> {
        let frames = self.all_frames(q)?;
        let mut grad = DMatrix::zeros(self.pairs.len(), self.dof());
        let mut dist = Vec::with_capacity(self.pairs.len());
        for (row, &(a, b)) in self.pairs.iter().enumerate() {
            let ca = &self.collision_points[a];
            let cb = &self.collision_points[b];
            let pa = self.collision_point_world(&frames, ca);
            let pb = self.collision_point_world(&frames, cb);
            let diff = pa - pb;
            let d = diff.norm();
            dist.push(d);
            if d == 0.0 {
                continue;
            }
            let n = diff / d;
            for (c, p, sign) in [(ca, pa, 1.0), (cb, pb, -1.0)] {
                let f = &self.fingers[c.finger];
                let jac = f.point_jacobian(&frames[c.finger], c.link, &p);
                let cols = self.joint_range(c.finger);
                for (k, col) in cols.enumerate() {
                    let v = Vector3::new(jac[(0, k)], jac[(1, k)], jac[(2, k)]);
                    grad[(row, col)] += sign * n.dot(&v);
                }
            }
        }
        Ok((dist, grad))
    }

    /// Returns a copy with every finger base pre-multiplied by `g`.
    pub fn transformed(&self, g: &Pose) -> HandModel {
        let mut out = self.clone();
        for f in &mut out.fingers {
            f.base_pose = g.compose(&f.base_pose);
        }
        out
    }
}

/// Convenience for tests and examples: a joint vector from a slice.
pub fn joint_vector(values: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(values)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::se3::RotVec;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn random_q(hand: &HandModel, rng: &mut ChaCha8Rng) -> DVector<f64> {
        let lo = hand.lower_limits();
        let hi = hand.upper_limits();
        DVector::from_fn(hand.dof(), |i, _| rng.gen_range(lo[i]..hi[i]))
    }

    #[test]
    fn synth_hand_zero_configuration() {
        let hand = HandModel::synth_3x4();
        assert_eq!(hand.dof(), 12);
        assert_eq!(hand.thumb, Some(2));
        // Index finger: base (0.03, 0, -0.03) plus 50 + 50 + 40 + 30 mm along
        // the hand z axis.
        let tip = hand.fk_fingertip(0, &[0.0; 4]).unwrap();
        assert_relative_eq!(tip.p, Vector3::new(0.030, 0.0, 0.140), epsilon = 1e-12);
        let thumb = hand.fk_fingertip(2, &[0.0; 4]).unwrap();
        assert_relative_eq!(thumb.p, Vector3::new(0.0, -0.14, 0.140), epsilon = 1e-12);
    }

    #[test]
    fn flexion_curls_fingers_toward_each_other() {
        let hand = HandModel::synth_3x4();
        let bent = [0.0, 0.5, 0.5, 0.5];
        assert!(hand.fk_fingertip(0, &bent).unwrap().p.y < 0.0);
        assert!(hand.fk_fingertip(2, &bent).unwrap().p.y > -0.14);
    }

    #[test]
    fn revolute_periodicity() {
        let hand = HandModel::synth_3x4();
        let q = [0.2, 0.4, -0.1, 0.9];
        let mut q2 = q;
        q2[2] += 2.0 * PI;
        let a = hand.fk_fingertip(1, &q).unwrap();
        let b = hand.fk_fingertip(1, &q2).unwrap();
        assert_relative_eq!(a.p, b.p, epsilon = 1e-12);
        assert_relative_eq!(a.rotation(), b.rotation(), epsilon = 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let hand = HandModel::synth_3x4();
        assert!(matches!(
            hand.fk_fingertip(0, &[0.0; 3]),
            Err(HandError::DimensionMismatch { expected: 4, got: 3 })
        ));
        assert!(matches!(hand.space_jacobian(5, &[0.0; 4]), Err(HandError::NoSuchFinger(5))));
    }

    #[test]
    fn zero_dof_chain_has_empty_jacobian() {
        let chain = FingerChain {
            name: "stub".into(),
            base_pose: Pose::identity(),
            joints: vec![],
            tip_offset: Pose::from_translation(Vector3::new(0.0, 0.0, 0.1)),
            limits: vec![],
        };
        let frames = chain.frames(&[]).unwrap();
        let j = chain.tip_jacobian(&frames);
        assert_eq!((j.nrows(), j.ncols()), (6, 0));
    }

    #[test]
    fn first_axis_column() {
        let chain = FingerChain {
            name: "z".into(),
            base_pose: Pose::identity(),
            joints: vec![RevoluteJoint { axis: Vector3::z(), offset: Pose::identity() }],
            tip_offset: Pose::from_translation(Vector3::new(0.1, 0.0, 0.0)),
            limits: vec![(-1.0, 1.0)],
        };
        let j = chain.tip_jacobian(&chain.frames(&[0.0]).unwrap());
        assert_relative_eq!(j.fixed_view::<3, 1>(3, 0).into_owned(), Vector3::z());
        assert_relative_eq!(j.fixed_view::<3, 1>(0, 0).into_owned(), Vector3::new(0.0, 0.1, 0.0));
    }

    #[test]
    fn jacobian_matches_finite_differences() {
        let hand = HandModel::synth_3x4();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = 1e-7;
        for _ in 0..200 {
            let finger = rng.gen_range(0..3);
            let q: Vec<f64> = (0..4).map(|_| rng.gen_range(-0.5..1.5)).collect();
            let jac = hand.space_jacobian(finger, &q).unwrap();
            for k in 0..4 {
                let mut qp = q.clone();
                qp[k] += h;
                let mut qm = q.clone();
                qm[k] -= h;
                let fd = (hand.fk_fingertip(finger, &qp).unwrap().p - hand.fk_fingertip(finger, &qm).unwrap().p)
                    / (2.0 * h);
                let an = Vector3::new(jac[(0, k)], jac[(1, k)], jac[(2, k)]);
                let rel = (fd - an).norm() / an.norm().max(1e-9);
                assert!(rel < 1e-5, "finger {finger} joint {k}: rel {rel}");
            }
        }
    }

    #[test]
    fn angular_jacobian_matches_rotation_differences() {
        let hand = HandModel::synth_3x4();
        let q = [0.1, 0.3, 0.7, 0.2];
        let jac = hand.space_jacobian(2, &q).unwrap();
        let h = 1e-7;
        let r0 = hand.fk_fingertip(2, &q).unwrap().rotation();
        for k in 0..4 {
            let mut qp = q;
            qp[k] += h;
            let r1 = hand.fk_fingertip(2, &qp).unwrap().rotation();
            let w = crate::se3::log_so3_unchecked(&(r1 * r0.transpose())) / h;
            let an = Vector3::new(jac[(3, k)], jac[(4, k)], jac[(5, k)]);
            assert!((w - an).norm() < 1e-6);
        }
    }

    #[test]
    fn fk_is_frame_equivariant() {
        let hand = HandModel::synth_3x4();
        let g = Pose::new(Vector3::new(0.3, -0.2, 0.5), RotVec::new(0.4, -1.1, 0.3));
        let moved = hand.transformed(&g);
        let q = [0.2, 0.5, 0.4, 0.3];
        for i in 0..3 {
            let a = g.compose(&hand.fk_fingertip(i, &q).unwrap());
            let b = moved.fk_fingertip(i, &q).unwrap();
            assert_relative_eq!(a.p, b.p, epsilon = 1e-10);
            assert_relative_eq!(a.rotation(), b.rotation(), epsilon = 1e-10);
        }
    }

    #[test]
    fn collision_distances_at_zero_config() {
        let hand = HandModel::synth_3x4();
        assert_eq!(hand.collision_pairs().len(), 4);
        let d = hand.collision_distances(&DVector::zeros(12)).unwrap();
        // Index and ring run parallel 60 mm apart when straight; the two
        // points on each link sit 15 mm apart along it.
        let mut sorted = d.clone();
        sorted.sort_by(f64::total_cmp);
        let diag = (0.06f64.powi(2) + 0.015f64.powi(2)).sqrt();
        for (x, want) in sorted.iter().zip([0.06, 0.06, diag, diag]) {
            assert!(*x > hand.min_pair_distance);
            assert_relative_eq!(*x, want, epsilon = 1e-12);
        }
    }

    #[test]
    fn coincident_points_have_zero_distance() {
        let mut hand = HandModel::synth_3x4();
        // Put both ring points where the index points are by mirroring the base.
        hand.fingers[1].base_pose = hand.fingers[0].base_pose;
        let d = hand.collision_distances(&DVector::zeros(12)).unwrap();
        assert!(d.contains(&0.0));
    }

    #[test]
    fn collision_gradient_matches_finite_differences() {
        let hand = HandModel::synth_3x4();
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let h = 1e-7;
        for _ in 0..50 {
            let q = random_q(&hand, &mut rng);
            let (d, g) = hand.collision_distances_with_gradient(&q).unwrap();
            for k in 0..hand.dof() {
                let mut qp = q.clone();
                qp[k] += h;
                let mut qm = q.clone();
                qm[k] -= h;
                let dp = hand.collision_distances(&qp).unwrap();
                let dm = hand.collision_distances(&qm).unwrap();
                for r in 0..d.len() {
                    let fd = (dp[r] - dm[r]) / (2.0 * h);
                    assert!((fd - g[(r, k)]).abs() <= 1e-6 * g.row(r).norm().max(1e-3));
                }
            }
        }
    }

    #[test]
    fn collision_distances_are_lipschitz() {
        let hand = HandModel::synth_3x4();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        // Each critical point sits at most 0.17 m from its base along the
        // chain, which bounds how fast it can move per radian.
        let lipschitz = 2.0 * 0.17 * 2.0;
        for _ in 0..100 {
            let q = random_q(&hand, &mut rng);
            let delta = DVector::from_fn(12, |_, _| rng.gen_range(-1e-3..1e-3));
            let a = hand.collision_distances(&q).unwrap();
            let b = hand.collision_distances(&(&q + &delta)).unwrap();
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() <= lipschitz * delta.norm());
            }
        }
    }

    #[test]
    fn rejects_invalid_models() {
        let mut spec = HandSpec::from_json(SYNTH_3X4).unwrap();
        spec.fingers[0].limits[1] = [1.0, 0.5];
        assert!(matches!(spec.build(), Err(HandError::InvalidModel(_))));
        let mut spec = HandSpec::from_json(SYNTH_3X4).unwrap();
        spec.fingers[0].joints[0].axis = [0.0, 0.0, 2.0];
        assert!(matches!(spec.build(), Err(HandError::InvalidModel(_))));
        let mut spec = HandSpec::from_json(SYNTH_3X4).unwrap();
        spec.fingers.truncate(1);
        spec.collision_points.clear();
        spec.thumb = None;
        assert!(spec.build().is_err());
    }
}
