//! Cost, gradient, Gauss-Newton Hessian and constraint assembly.

use super::{CostBreakdown, TrajProblem, TrajVariables};
use crate::nlp::{NlpEval, NlpProblem};
use crate::se3::{error_jacobian, pose_coordinate_jacobian, skew, spatial_error, weighted_half_norm, Pose, SpatialError, WeightMatrix};
use nalgebra::{DMatrix, DVector, Matrix3, Matrix6};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub(crate) enum Formulation {
    /// Joints and object poses are both variables.
    Proposed,
    /// Joints only; the object rides rigidly on the thumb tip.
    Baseline,
}

#[derive(Debug, Clone)]
pub(crate) struct Layout {
    pub form: Formulation,
    pub dof: usize,
    pub steps: usize,
    /// Baseline only: object pose in the thumb-tip frame at the grasp.
    pub thumb_to_object: Option<(usize, Pose)>,
}

impl Layout {
    pub fn proposed(prob: &TrajProblem) -> Self {
        Self { form: Formulation::Proposed, dof: prob.hand.dof(), steps: prob.steps, thumb_to_object: None }
    }

    pub fn baseline(prob: &TrajProblem, thumb: usize) -> Result<Self, crate::hand::HandError> {
        let tip0 = prob.hand.fk_fingertip(thumb, &prob.grasp.q0.as_slice()[prob.hand.joint_range(thumb)])?;
        let rel = tip0.inverse().compose(&prob.grasp.object_pose0);
        Ok(Self { form: Formulation::Baseline, dof: prob.hand.dof(), steps: prob.steps, thumb_to_object: Some((thumb, rel)) })
    }

    pub fn width(&self) -> usize {
        match self.form {
            Formulation::Proposed => self.dof + 6,
            Formulation::Baseline => self.dof,
        }
    }

    pub fn len(&self) -> usize {
        self.steps * self.width()
    }

    pub fn q_col(&self, t: usize) -> usize {
        t * self.width()
    }

    pub fn xi_col(&self, t: usize) -> usize {
        debug_assert_eq!(self.form, Formulation::Proposed);
        t * self.width() + self.dof
    }

    pub fn q(&self, x: &DVector<f64>, t: usize) -> DVector<f64> {
        x.rows(self.q_col(t), self.dof).into_owned()
    }
}

pub(crate) struct Accum {
    pub f: f64,
    pub grad: Option<DVector<f64>>,
    pub hess: Option<DMatrix<f64>>,
}

impl Accum {
    pub fn new(n: usize, derivs: bool) -> Self {
        Self {
            f: 0.0,
            grad: derivs.then(|| DVector::zeros(n)),
            hess: derivs.then(|| DMatrix::zeros(n, n)),
        }
    }

    /// Adds `½eᵀWe`; each block is a column offset and the 6×k twist
    /// Jacobian of the first pose with respect to those columns.
    fn add_pose_term(&mut self, e: &SpatialError, w: &WeightMatrix, blocks: &[(usize, DMatrix<f64>)]) {
        self.f += weighted_half_norm(e, w);
        let (Some(grad), Some(hess)) = (self.grad.as_mut(), self.hess.as_mut()) else { return };
        let emat = to_dmatrix(&error_jacobian(e));
        let wdiag = w.diag();
        let we = DVector::from_column_slice(e.as_vector().component_mul(&wdiag).as_slice());
        let jes: Vec<DMatrix<f64>> = blocks.iter().map(|(_, b)| &emat * b).collect();
        for ((col, _), je) in blocks.iter().zip(&jes) {
            let mut rows = grad.rows_mut(*col, je.ncols());
            rows += je.transpose() * &we;
        }
        let wjes: Vec<DMatrix<f64>> = jes
            .iter()
            .map(|je| {
                let mut m = je.clone();
                for r in 0..6 {
                    m.row_mut(r).scale_mut(wdiag[r]);
                }
                m
            })
            .collect();
        for ((ca, _), ja) in blocks.iter().zip(&jes) {
            for ((cb, _), wjb) in blocks.iter().zip(&wjes) {
                let mut view = hess.view_mut((*ca, *cb), (ja.ncols(), wjb.ncols()));
                view += ja.transpose() * wjb;
            }
        }
    }
}

fn to_dmatrix(m: &Matrix6<f64>) -> DMatrix<f64> {
    DMatrix::from_column_slice(6, 6, m.as_slice())
}

/// Kinematic quantities of one trajectory step.
pub(crate) struct StepKinematics {
    pub tips: Vec<Pose>,
    pub tip_jacobians: Vec<DMatrix<f64>>,
    pub object: Pose,
    pub object_blocks: Vec<(usize, DMatrix<f64>)>,
}

pub(crate) fn step_kinematics(prob: &TrajProblem, layout: &Layout, x: &DVector<f64>, t: usize, derivs: bool) -> StepKinematics {
    let q = layout.q(x, t);
    let hand = &prob.hand;
    let mut tips = Vec::with_capacity(hand.num_fingers());
    let mut tip_jacobians = Vec::new();
    for (i, f) in hand.fingers.iter().enumerate() {
        let frames = f.frames(&q.as_slice()[hand.joint_range(i)]).expect("layout matches hand dof");
        tips.push(Pose::from_isometry(&frames.tip));
        if derivs {
            tip_jacobians.push(f.tip_jacobian(&frames));
        }
    }
    let (object, object_blocks) = match (layout.form, &layout.thumb_to_object) {
        (Formulation::Proposed, _) => {
            let col = layout.xi_col(t);
            let xi = x.fixed_rows::<6>(col).into_owned();
            let pose = Pose::from_vector(xi.as_slice());
            let blocks = if derivs { vec![(col, to_dmatrix(&pose_coordinate_jacobian(&pose.r)))] } else { Vec::new() };
            (pose, blocks)
        }
        (Formulation::Baseline, Some((thumb, rel))) => {
            let tip = tips[*thumb];
            let pose = tip.compose(rel);
            let blocks = if derivs {
                let mut shift = DMatrix::<f64>::identity(6, 6);
                shift.view_mut((0, 3), (3, 3)).copy_from(&(-skew(&(pose.p - tip.p))));
                vec![(layout.q_col(t) + hand.joint_range(*thumb).start, shift * &tip_jacobians[*thumb])]
            } else {
                Vec::new()
            };
            (pose, blocks)
        }
        (Formulation::Baseline, None) => unreachable!("baseline layout carries the thumb transform"),
    };
    StepKinematics { tips, tip_jacobians, object, object_blocks }
}

pub(crate) fn object_term(prob: &TrajProblem, kin: &StepKinematics, acc: &mut Accum) {
    let e = spatial_error(&kin.object, &prob.goal);
    acc.add_pose_term(&e, &prob.w_o, &kin.object_blocks);
}

pub(crate) fn finger_terms(prob: &TrajProblem, layout: &Layout, kin: &StepKinematics, t: usize, acc: &mut Accum) {
    let hand = &prob.hand;
    let derivs = acc.grad.is_some();
    let inv = kin.object.inverse();
    let rot_t = kin.object.rotation().transpose();
    let skip = layout.thumb_to_object.map(|(th, _)| th);
    for i in 0..hand.num_fingers() {
        if Some(i) == skip {
            continue;
        }
        let rel = inv.compose(&kin.tips[i]);
        let e = spatial_error(&rel, &prob.grasp.relative_tip(i));
        if !derivs {
            acc.add_pose_term(&e, &prob.w_f, &[]);
            continue;
        }
        // Relative twist = Ω·twist_f − Ψ·Ω·twist_o.
        let mut omega = DMatrix::<f64>::zeros(6, 6);
        omega.view_mut((0, 0), (3, 3)).copy_from(&rot_t);
        omega.view_mut((3, 3), (3, 3)).copy_from(&rot_t);
        let mut psi = DMatrix::<f64>::identity(6, 6);
        let s: Matrix3<f64> = skew(&rel.p);
        psi.view_mut((0, 3), (3, 3)).copy_from(&(-s));
        let mut blocks = vec![(layout.q_col(t) + hand.joint_range(i).start, &omega * &kin.tip_jacobians[i])];
        let po = -(&psi * &omega);
        for (col, b) in &kin.object_blocks {
            blocks.push((*col, &po * b));
        }
        acc.add_pose_term(&e, &prob.w_f, &blocks);
    }
}

pub(crate) fn joint_term(layout: &Layout, x: &DVector<f64>, q0: &DVector<f64>, lambda: f64, acc: &mut Accum) {
    let dof = layout.dof;
    for t in 0..layout.steps {
        let prev = if t == 0 { q0.clone() } else { layout.q(x, t - 1) };
        let diff = layout.q(x, t) - prev;
        acc.f += lambda * diff.norm_squared();
        let (Some(grad), Some(hess)) = (acc.grad.as_mut(), acc.hess.as_mut()) else { continue };
        let c = layout.q_col(t);
        let mut g = grad.rows_mut(c, dof);
        g += &diff * (2.0 * lambda);
        for k in 0..dof {
            hess[(c + k, c + k)] += 2.0 * lambda;
        }
        if t > 0 {
            let p = layout.q_col(t - 1);
            let mut g = grad.rows_mut(p, dof);
            g -= &diff * (2.0 * lambda);
            for k in 0..dof {
                hess[(p + k, p + k)] += 2.0 * lambda;
                hess[(p + k, c + k)] -= 2.0 * lambda;
                hess[(c + k, p + k)] -= 2.0 * lambda;
            }
        }
    }
}

/// Collision values `min_pair_distance − dist` for every step and pair,
/// with their Jacobian when requested.
pub(crate) fn collision_rows(prob: &TrajProblem, layout: &Layout, x: &DVector<f64>, derivs: bool) -> (DVector<f64>, DMatrix<f64>) {
    if !prob.collision_enabled {
        return (DVector::zeros(0), DMatrix::zeros(0, layout.len()));
    }
    let hand = &prob.hand;
    let pairs = hand.collision_pairs().len();
    let mut c = DVector::zeros(layout.steps * pairs);
    let mut jac = DMatrix::zeros(if derivs { layout.steps * pairs } else { 0 }, layout.len());
    for t in 0..layout.steps {
        let q = layout.q(x, t);
        if derivs {
            let (dist, grad) = hand.collision_distances_with_gradient(&q).expect("layout matches hand dof");
            for (k, d) in dist.iter().enumerate() {
                c[t * pairs + k] = hand.min_pair_distance - d;
                let mut row = jac.view_mut((t * pairs + k, layout.q_col(t)), (1, layout.dof));
                row -= grad.row(k);
            }
        } else {
            let dist = hand.collision_distances(&q).expect("layout matches hand dof");
            for (k, d) in dist.iter().enumerate() {
                c[t * pairs + k] = hand.min_pair_distance - d;
            }
        }
    }
    (c, jac)
}

/// Per-term costs and (optionally) the summed gradient and Hessian.
pub(crate) fn assemble(prob: &TrajProblem, layout: &Layout, x: &DVector<f64>, derivs: bool) -> (CostBreakdown, Accum) {
    let n = layout.len();
    let mut acc = Accum::new(n, derivs);
    let mut breakdown = CostBreakdown::default();
    for t in 0..layout.steps {
        let kin = step_kinematics(prob, layout, x, t, derivs);
        let before = acc.f;
        finger_terms(prob, layout, &kin, t, &mut acc);
        breakdown.finger += acc.f - before;
        if t + 1 == layout.steps {
            let before = acc.f;
            object_term(prob, &kin, &mut acc);
            breakdown.object += acc.f - before;
        }
    }
    let before = acc.f;
    joint_term(layout, x, &prob.grasp.q0, prob.lambda, &mut acc);
    breakdown.joint = acc.f - before;
    (breakdown, acc)
}

pub(crate) struct TrajNlp<'a> {
    pub prob: &'a TrajProblem,
    pub layout: Layout,
}

impl NlpProblem for TrajNlp<'_> {
    fn dim(&self) -> usize {
        self.layout.len()
    }

    fn bounds(&self) -> (DVector<f64>, DVector<f64>) {
        let n = self.layout.len();
        let mut lo = DVector::from_element(n, f64::NEG_INFINITY);
        let mut hi = DVector::from_element(n, f64::INFINITY);
        let (ql, qh) = (self.prob.hand.lower_limits(), self.prob.hand.upper_limits());
        for t in 0..self.layout.steps {
            lo.rows_mut(self.layout.q_col(t), self.layout.dof).copy_from(&ql);
            hi.rows_mut(self.layout.q_col(t), self.layout.dof).copy_from(&qh);
        }
        (lo, hi)
    }

    fn value(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let (_, acc) = assemble(self.prob, &self.layout, x, false);
        (acc.f, collision_rows(self.prob, &self.layout, x, false).0)
    }

    fn evaluate(&self, x: &DVector<f64>) -> NlpEval {
        let (_, acc) = assemble(self.prob, &self.layout, x, true);
        let (c, jac) = collision_rows(self.prob, &self.layout, x, true);
        NlpEval { f: acc.f, grad: acc.grad.unwrap(), hess: acc.hess.unwrap(), c, jac }
    }

    fn normalize(&self, x: &mut DVector<f64>) {
        if self.layout.form != Formulation::Proposed {
            return;
        }
        let mut vars = TrajVariables::from_flat(x, self.layout.dof);
        vars.canonicalize();
        *x = vars.to_flat();
    }
}

fn check_vars(vars: &TrajVariables, prob: &TrajProblem) {
    assert_eq!(vars.steps(), prob.steps, "variable horizon must match the problem");
    assert_eq!(vars.dof(), prob.hand.dof(), "variable dof must match the hand");
}

fn single_term(vars: &TrajVariables, prob: &TrajProblem, object: bool) -> (f64, DVector<f64>) {
    check_vars(vars, prob);
    let layout = Layout::proposed(prob);
    let x = vars.to_flat();
    let mut acc = Accum::new(layout.len(), true);
    for t in 0..layout.steps {
        let kin = step_kinematics(prob, &layout, &x, t, true);
        if object && t + 1 == layout.steps {
            object_term(prob, &kin, &mut acc);
        } else if !object {
            finger_terms(prob, &layout, &kin, t, &mut acc);
        }
    }
    (acc.f, acc.grad.unwrap())
}

/// Terminal object-pose cost and its gradient over the flattened variables.
pub fn cost_object(vars: &TrajVariables, prob: &TrajProblem) -> (f64, DVector<f64>) {
    single_term(vars, prob, true)
}

/// Constant-grasp cost and its gradient over the flattened variables.
pub fn cost_finger(vars: &TrajVariables, prob: &TrajProblem) -> (f64, DVector<f64>) {
    single_term(vars, prob, false)
}

/// Joint-motion penalty `λ Σ ‖Q_t+1 − Q_t‖²` with `Q_0 = q0` fixed.
pub fn cost_joint(vars: &TrajVariables, q0: &DVector<f64>, lambda: f64) -> (f64, DVector<f64>) {
    let layout = Layout { form: Formulation::Proposed, dof: vars.dof(), steps: vars.steps(), thumb_to_object: None };
    let mut acc = Accum::new(layout.len(), true);
    joint_term(&layout, &vars.to_flat(), q0, lambda, &mut acc);
    (acc.f, acc.grad.unwrap())
}

/// All three costs and the gradient of their sum.
pub fn total_cost(vars: &TrajVariables, prob: &TrajProblem) -> (CostBreakdown, DVector<f64>) {
    check_vars(vars, prob);
    let (b, acc) = assemble(prob, &Layout::proposed(prob), &vars.to_flat(), true);
    (b, acc.grad.unwrap())
}

#[derive(Debug, Clone)]
pub struct ConstraintEval {
    /// Box bounds over the flattened variables (infinite for object poses).
    pub lower: DVector<f64>,
    pub upper: DVector<f64>,
    /// Largest bound violation (zero when feasible).
    pub bound_violation: f64,
    /// `min_pair_distance − dist`, step-major; feasible when `≤ 0`.
    pub collision: DVector<f64>,
    pub collision_jacobian: DMatrix<f64>,
}

pub fn constraints(vars: &TrajVariables, prob: &TrajProblem) -> ConstraintEval {
    check_vars(vars, prob);
    let nlp = TrajNlp { prob, layout: Layout::proposed(prob) };
    let x = vars.to_flat();
    let (lower, upper) = nlp.bounds();
    let bound_violation = (0..x.len()).map(|k| (lower[k] - x[k]).max(x[k] - upper[k]).max(0.0)).fold(0.0, f64::max);
    let (collision, collision_jacobian) = collision_rows(prob, &nlp.layout, &x, true);
    ConstraintEval { lower, upper, bound_violation, collision, collision_jacobian }
}

/// Costs and gradient of the baseline formulation over `[Q_1; …; Q_T]`.
pub(crate) fn baseline_cost(prob: &TrajProblem, thumb: usize, x: &DVector<f64>) -> (CostBreakdown, DVector<f64>) {
    let layout = Layout::baseline(prob, thumb).expect("grasp matches hand");
    let (b, acc) = assemble(prob, &layout, x, true);
    (b, acc.grad.unwrap())
}
