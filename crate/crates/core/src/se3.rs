//! Rotation and pose primitives.
//!
//! Orientations are stored as canonical axis-angle vectors (`‖r‖ ≤ π`) and
//! converted to matrices on demand. Poses use the product parameterization
//! `ξ = [p; r]`: position is composed additively, orientation through SO(3).
//! Perturbations are always applied on the left, in the world frame, and
//! twists are written `[linear; angular]` with the linear part being the
//! velocity of the frame origin.

use nalgebra::{IsometryMatrix3, Matrix3, Matrix6, Rotation3, Translation3, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Below this angle `exp`/`log` switch to their series forms.
pub const EXP_LOG_SMALL_ANGLE: f64 = 1e-8;
/// Below this angle the left Jacobian and its inverse use Taylor expansions.
pub const JACOBIAN_SMALL_ANGLE: f64 = 1e-6;
/// Frobenius tolerance for accepting a matrix as a rotation.
pub const ORTHONORMAL_TOL: f64 = 1e-8;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Se3Error {
    #[error("matrix is not a proper rotation (orthonormality defect {defect:.3e}, det {det:.6})")]
    NonOrthonormalInput { defect: f64, det: f64 },
}

/// Skew-symmetric matrix `v^` such that `v^ w = v × w`.
#[inline]
pub fn skew(v: &Vector3<f64>) -> Matrix3<f64> {
    Matrix3::new(0.0, -v.z, v.y, v.z, 0.0, -v.x, -v.y, v.x, 0.0)
}

/// Inverse of [`skew`] applied to the antisymmetric part of `m`.
#[inline]
pub fn vee(m: &Matrix3<f64>) -> Vector3<f64> {
    Vector3::new(
        0.5 * (m[(2, 1)] - m[(1, 2)]),
        0.5 * (m[(0, 2)] - m[(2, 0)]),
        0.5 * (m[(1, 0)] - m[(0, 1)]),
    )
}

/// Axis-angle rotation vector.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RotVec(pub Vector3<f64>);

impl Default for RotVec {
    fn default() -> Self {
        Self::identity()
    }
}

impl RotVec {
    pub fn new(x: f64, y: f64, z: f64) -> Self {
        Self(Vector3::new(x, y, z))
    }

    pub fn identity() -> Self {
        Self(Vector3::zeros())
    }

    pub fn from_axis_angle(axis: &Vector3<f64>, angle: f64) -> Self {
        Self(axis.normalize() * angle)
    }

    pub fn angle(&self) -> f64 {
        self.0.norm()
    }

    /// Unit axis, or `None` for the identity rotation.
    pub fn axis(&self) -> Option<Vector3<f64>> {
        let theta = self.angle();
        (theta > 0.0).then(|| self.0 / theta)
    }

    pub fn to_matrix(&self) -> Matrix3<f64> {
        exp_so3(self)
    }

    pub fn from_matrix(rot: &Matrix3<f64>) -> Result<Self, Se3Error> {
        log_so3(rot)
    }

    /// Same rotation with `‖r‖ ≤ π`.
    pub fn canonical(&self) -> Self {
        Self(canonicalize_rotvec(&self.0))
    }
}

/// Maps a rotation vector of any magnitude onto its principal value.
pub fn canonicalize_rotvec(r: &Vector3<f64>) -> Vector3<f64> {
    let theta = r.norm();
    if theta <= std::f64::consts::PI {
        return *r;
    }
    let axis = r / theta;
    let wrapped = (theta + std::f64::consts::PI).rem_euclid(2.0 * std::f64::consts::PI)
        - std::f64::consts::PI;
    axis * wrapped
}

/// Rodrigues' formula.
pub fn exp_so3(r: &RotVec) -> Matrix3<f64> {
    let theta = r.angle();
    let k = skew(&r.0);
    if theta < EXP_LOG_SMALL_ANGLE {
        return Matrix3::identity() + k + 0.5 * k * k;
    }
    let a = theta.sin() / theta;
    let h = (0.5 * theta).sin() / theta;
    let b = 2.0 * h * h;
    Matrix3::identity() + a * k + b * k * k
}

/// Principal logarithm of a rotation matrix.
pub fn log_so3(rot: &Matrix3<f64>) -> Result<RotVec, Se3Error> {
    let defect = (rot.transpose() * rot - Matrix3::identity()).norm();
    let det = rot.determinant();
    if !(defect <= ORTHONORMAL_TOL && det > 0.0) {
        return Err(Se3Error::NonOrthonormalInput { defect, det });
    }
    Ok(RotVec(log_so3_unchecked(rot)))
}

/// [`log_so3`] without the orthonormality check, for matrices built
/// internally from products of rotations.
pub(crate) fn log_so3_unchecked(rot: &Matrix3<f64>) -> Vector3<f64> {
    let v = vee(rot);
    let s = v.norm();
    let c = ((rot.trace() - 1.0) * 0.5).clamp(-1.0, 1.0);
    let theta = s.atan2(c);
    if theta < EXP_LOG_SMALL_ANGLE {
        return v;
    }
    if c > -0.5 {
        return v * (theta / s);
    }
    // Near π the antisymmetric part vanishes; recover the axis from the
    // symmetric part (1 - cos θ) a aᵀ instead.
    let sym = 0.5 * (rot + rot.transpose()) - Matrix3::identity() * c;
    let (k, _) = (0..3)
        .map(|i| (i, sym[(i, i)]))
        .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
    let mut axis: Vector3<f64> = sym.column(k).into();
    axis.normalize_mut();
    let dot = axis.dot(&v);
    if dot < 0.0 {
        axis = -axis;
    } else if dot == 0.0 {
        let (m, _) = (0..3)
            .map(|i| (i, axis[i].abs()))
            .fold((0, f64::MIN), |acc, x| if x.1 > acc.1 { x } else { acc });
        if axis[m] < 0.0 {
            axis = -axis;
        }
    }
    axis * theta
}

/// Left Jacobian of SO(3).
pub fn left_jacobian(r: &RotVec) -> Matrix3<f64> {
    let theta = r.angle();
    let k = skew(&r.0);
    if theta < JACOBIAN_SMALL_ANGLE {
        return Matrix3::identity() + 0.5 * k + k * k / 6.0;
    }
    let a = r.0 / theta;
    let sin_t = theta.sin() / theta;
    Matrix3::identity() * sin_t
        + (1.0 - sin_t) * a * a.transpose()
        + (2.0 * (0.5 * theta).sin().powi(2) / theta) * skew(&a)
}

/// Closed-form inverse of [`left_jacobian`]. Valid for `‖r‖ < 2π`.
pub fn left_jacobian_inv(r: &RotVec) -> Matrix3<f64> {
    let theta = r.angle();
    let k = skew(&r.0);
    if theta < JACOBIAN_SMALL_ANGLE {
        return Matrix3::identity() - 0.5 * k + k * k / 12.0;
    }
    let a = r.0 / theta;
    let half = 0.5 * theta;
    let hc = half / half.tan();
    Matrix3::identity() * hc + (1.0 - hc) * a * a.transpose() - half * skew(&a)
}

/// Rigid transform stored as position plus rotation vector.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Pose {
    pub p: Vector3<f64>,
    pub r: RotVec,
}

impl Pose {
    pub fn new(p: Vector3<f64>, r: RotVec) -> Self {
        Self { p, r }
    }

    pub fn identity() -> Self {
        Self::default()
    }

    pub fn from_translation(p: Vector3<f64>) -> Self {
        Self { p, r: RotVec::identity() }
    }

    /// Builds a pose from a rotation matrix that is known to be orthonormal.
    pub fn from_parts(p: Vector3<f64>, rot: &Matrix3<f64>) -> Self {
        Self { p, r: RotVec(log_so3_unchecked(rot)) }
    }

    pub fn rotation(&self) -> Matrix3<f64> {
        exp_so3(&self.r)
    }

    /// `self · other`.
    pub fn compose(&self, other: &Pose) -> Pose {
        let ra = self.rotation();
        Pose::from_parts(self.p + ra * other.p, &(ra * other.rotation()))
    }

    pub fn inverse(&self) -> Pose {
        let rt = self.rotation().transpose();
        Pose::from_parts(-(rt * self.p), &rt)
    }

    pub fn transform_point(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * x + self.p
    }

    /// The product coordinates `ξ = [p; r]`.
    pub fn to_vector(&self) -> Vector6<f64> {
        Vector6::new(self.p.x, self.p.y, self.p.z, self.r.0.x, self.r.0.y, self.r.0.z)
    }

    pub fn from_vector(xi: &[f64]) -> Pose {
        Pose {
            p: Vector3::new(xi[0], xi[1], xi[2]),
            r: RotVec::new(xi[3], xi[4], xi[5]),
        }
    }

    pub fn to_isometry(&self) -> IsometryMatrix3<f64> {
        IsometryMatrix3::from_parts(
            Translation3::from(self.p),
            Rotation3::from_matrix_unchecked(self.rotation()),
        )
    }

    pub fn from_isometry(iso: &IsometryMatrix3<f64>) -> Pose {
        Pose::from_parts(iso.translation.vector, iso.rotation.matrix())
    }

    /// Left-perturbs the pose by the twist `[δp; φ]`.
    pub fn perturbed(&self, delta: &Vector6<f64>) -> Pose {
        let dp = Vector3::new(delta[0], delta[1], delta[2]);
        let phi = RotVec::new(delta[3], delta[4], delta[5]);
        Pose::from_parts(self.p + dp, &(exp_so3(&phi) * self.rotation()))
    }
}

/// Stacked position and rotation error `e = [p_e; r_e]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpatialError {
    pub pos: Vector3<f64>,
    pub rot: Vector3<f64>,
}

impl SpatialError {
    pub fn as_vector(&self) -> Vector6<f64> {
        Vector6::new(self.pos.x, self.pos.y, self.pos.z, self.rot.x, self.rot.y, self.rot.z)
    }
}

/// Diagonal weighting `W = diag(W_p, W_r)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightMatrix {
    pub pos: Vector3<f64>,
    pub rot: Vector3<f64>,
}

impl WeightMatrix {
    /// Panics if any weight is negative or non-finite.
    pub fn new(pos: [f64; 3], rot: [f64; 3]) -> Self {
        let w = Self { pos: pos.into(), rot: rot.into() };
        assert!(w.is_valid(), "weights must be finite and nonnegative: {w:?}");
        w
    }

    pub fn from_diag(d: [f64; 6]) -> Self {
        Self::new([d[0], d[1], d[2]], [d[3], d[4], d[5]])
    }

    pub fn is_valid(&self) -> bool {
        self.pos.iter().chain(self.rot.iter()).all(|w| w.is_finite() && *w >= 0.0)
    }

    pub fn diag(&self) -> Vector6<f64> {
        Vector6::new(self.pos.x, self.pos.y, self.pos.z, self.rot.x, self.rot.y, self.rot.z)
    }

    pub fn has_rotation(&self) -> bool {
        self.rot.iter().any(|w| *w > 0.0)
    }
}

/// Error between two poses: `p₁ − p₂` and `ln(R₁R₂ᵀ)`.
pub fn spatial_error(t1: &Pose, t2: &Pose) -> SpatialError {
    let rel = t1.rotation() * t2.rotation().transpose();
    SpatialError { pos: t1.p - t2.p, rot: log_so3_unchecked(&rel) }
}

/// Weighted distance `½ eᵀ W e`, returned together with `e`.
pub fn pose_distance(t: &Pose, t_d: &Pose, w: &WeightMatrix) -> (f64, SpatialError) {
    let e = spatial_error(t, t_d);
    (weighted_half_norm(&e, w), e)
}

pub(crate) fn weighted_half_norm(e: &SpatialError, w: &WeightMatrix) -> f64 {
    0.5 * (e.pos.component_mul(&e.pos).dot(&w.pos) + e.rot.component_mul(&e.rot).dot(&w.rot))
}

/// `∂e/∂φ = blockdiag(I, J_l(r_e)⁻¹)` for a left perturbation `φ` of the
/// first pose.
pub fn error_jacobian(e: &SpatialError) -> Matrix6<f64> {
    let mut m = Matrix6::identity();
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&left_jacobian_inv(&RotVec(e.rot)));
    m
}

/// `∂d/∂φ = eᵀ W blockdiag(I, J_l(r_e)⁻¹)` as a column vector.
pub fn distance_twist_gradient(e: &SpatialError, w: &WeightMatrix) -> Vector6<f64> {
    let we = e.as_vector().component_mul(&w.diag());
    error_jacobian(e).transpose() * we
}

/// Gradient of [`pose_distance`] with respect to a variable `x`, given the
/// 6×n Jacobian relating the twist of `t` to `ẋ`.
pub fn pose_distance_grad(
    t: &Pose,
    t_d: &Pose,
    w: &WeightMatrix,
    j_x: &nalgebra::DMatrix<f64>,
) -> nalgebra::DVector<f64> {
    assert_eq!(j_x.nrows(), 6, "twist Jacobian must have 6 rows");
    let e = spatial_error(t, t_d);
    let g = distance_twist_gradient(&e, w);
    j_x.transpose() * nalgebra::DVector::from_column_slice(g.as_slice())
}

/// Twist Jacobian of a pose parameterized by its own coordinates `ξ = [p; r]`.
pub fn pose_coordinate_jacobian(r: &RotVec) -> Matrix6<f64> {
    let mut m = Matrix6::identity();
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&left_jacobian(r));
    m
}
