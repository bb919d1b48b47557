use super::assemble::{assemble, Layout, TrajNlp};
use super::{SolverStats, TrajError, TrajProblem, TrajSolution, TrajVariables};
use crate::nlp::{minimize, NlpProblem, SqpOptions, SqpResult};
use crate::se3::{exp_so3, log_so3_unchecked, Pose, RotVec};
use nalgebra::DVector;
use std::time::Instant;

/// Joints held at the grasp; object position interpolated linearly toward
/// the goal. The orientation is slerped when the goal orientation carries
/// weight and held constant otherwise.
pub fn default_initialization(prob: &TrajProblem) -> TrajVariables {
    let start = prob.grasp.object_pose0;
    let rot0 = start.rotation();
    let delta = log_so3_unchecked(&(prob.goal.rotation() * rot0.transpose()));
    let slerp = prob.w_o.has_rotation();
    let steps = prob.steps;
    let mut q = Vec::with_capacity(steps);
    let mut xi_o = Vec::with_capacity(steps);
    for t in 1..=steps {
        let s = t as f64 / steps as f64;
        q.push(prob.grasp.q0.clone());
        let p = start.p + (prob.goal.p - start.p) * s;
        let pose = if slerp { Pose::from_parts(p, &(exp_so3(&RotVec(delta * s)) * rot0)) } else { Pose::new(p, start.r) };
        xi_o.push(pose.to_vector());
    }
    TrajVariables { q, xi_o }
}

fn run(nlp: &TrajNlp, x0: &DVector<f64>, seeded: bool, x_default: impl Fn() -> DVector<f64>) -> (Result<SqpResult, crate::nlp::SqpError>, f64, bool) {
    let opts = SqpOptions::default();
    let initial = nlp.value(x0).0;
    match minimize(nlp, x0, &opts) {
        Ok(r) => (Ok(r), initial, false),
        Err(e) if seeded => {
            let xd = x_default();
            let initial = nlp.value(&xd).0;
            match minimize(nlp, &xd, &opts) {
                Ok(r) => (Ok(r), initial, true),
                Err(_) => (Err(e), initial, true),
            }
        }
        Err(e) => (Err(e), initial, false),
    }
}

/// Solves the full formulation from `seed` (or the default start).
pub fn solve(prob: &TrajProblem, seed: Option<&TrajVariables>) -> Result<TrajSolution, TrajError> {
    prob.validate()?;
    let clock = Instant::now();
    let layout = Layout::proposed(prob);
    let nlp = TrajNlp { prob, layout: layout.clone() };
    if let Some(s) = seed {
        if s.steps() != prob.steps || s.dof() != prob.hand.dof() {
            return Err(TrajError::InvalidProblem("seed does not match the problem dimensions".into()));
        }
    }
    let x0 = seed.map_or_else(|| default_initialization(prob).to_flat(), |s| s.to_flat());
    let (result, initial_cost, restarted) = run(&nlp, &x0, seed.is_some(), || default_initialization(prob).to_flat());
    let wall_time = clock.elapsed().as_secs_f64();
    match result {
        Ok(r) => {
            let vars = TrajVariables::from_flat(&r.x, layout.dof);
            let (cost, _) = assemble(prob, &layout, &r.x, false);
            let planned_error = (vars.terminal_object_pose().p - prob.goal.p).norm();
            Ok(TrajSolution {
                vars,
                planned_error,
                cost,
                initial_cost,
                stats: SolverStats { iterations: r.iterations, kkt_residual: r.kkt_residual, wall_time, restarted },
            })
        }
        Err(e) => Err(TrajError::SolverFailed {
            reason: e.reason.clone(),
            vars: Box::new(TrajVariables::from_flat(&e.x, layout.dof)),
            stats: SolverStats { iterations: e.iterations, kkt_residual: e.kkt_residual, wall_time, restarted },
        }),
    }
}

/// Rigid-thumb baseline: only joints are optimized and the object follows
/// the thumb tip with the relative pose it had at the grasp. The finger
/// term covers the other fingers; the joint penalty acts as the soft limit
/// on joint motion. The returned `xi_o` holds the derived object poses.
pub fn solve_baseline(prob: &TrajProblem, seed: Option<&TrajVariables>) -> Result<TrajSolution, TrajError> {
    prob.validate()?;
    let thumb = prob.hand.thumb.ok_or(TrajError::NoThumb)?;
    let clock = Instant::now();
    let layout = Layout::baseline(prob, thumb)?;
    let nlp = TrajNlp { prob, layout: layout.clone() };
    let dof = layout.dof;
    let flat_q = |qs: &[DVector<f64>]| {
        let mut x = DVector::zeros(layout.len());
        for (t, q) in qs.iter().enumerate() {
            x.rows_mut(layout.q_col(t), dof).copy_from(q);
        }
        x
    };
    let x_default = || flat_q(&vec![prob.grasp.q0.clone(); prob.steps]);
    if let Some(s) = seed {
        if s.steps() != prob.steps || s.dof() != dof {
            return Err(TrajError::InvalidProblem("seed does not match the problem dimensions".into()));
        }
    }
    let x0 = seed.map_or_else(x_default, |s| flat_q(&s.q));
    let (result, initial_cost, restarted) = run(&nlp, &x0, seed.is_some(), x_default);
    let wall_time = clock.elapsed().as_secs_f64();
    let derived = |x: &DVector<f64>| -> Result<TrajVariables, TrajError> {
        let (_, rel) = layout.thumb_to_object.expect("baseline layout");
        let range = prob.hand.joint_range(thumb);
        let mut q = Vec::with_capacity(prob.steps);
        let mut xi_o = Vec::with_capacity(prob.steps);
        for t in 0..prob.steps {
            let qt = layout.q(x, t);
            let tip = prob.hand.fk_fingertip(thumb, &qt.as_slice()[range.clone()])?;
            xi_o.push(tip.compose(&rel).to_vector());
            q.push(qt);
        }
        Ok(TrajVariables { q, xi_o })
    };
    match result {
        Ok(r) => {
            let vars = derived(&r.x)?;
            let (cost, _) = assemble(prob, &layout, &r.x, false);
            let planned_error = (vars.terminal_object_pose().p - prob.goal.p).norm();
            Ok(TrajSolution {
                vars,
                planned_error,
                cost,
                initial_cost,
                stats: SolverStats { iterations: r.iterations, kkt_residual: r.kkt_residual, wall_time, restarted },
            })
        }
        Err(e) => Err(TrajError::SolverFailed {
            reason: e.reason.clone(),
            vars: Box::new(derived(&e.x)?),
            stats: SolverStats { iterations: e.iterations, kkt_residual: e.kkt_residual, wall_time, restarted },
        }),
    }
}
