//! Finite-difference verification of every analytical gradient.

use crate::hand::{make_grasp, HandModel};
use crate::se3::{pose_coordinate_jacobian, pose_distance, pose_distance_grad, Pose, RotVec, WeightMatrix};
use crate::trajopt::assemble::baseline_cost;
use crate::trajopt::{constraints, cost_finger, cost_joint, cost_object, total_cost, TrajParams, TrajProblem, TrajVariables};
use nalgebra::{DMatrix, DVector, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

/// Central-difference step on every coordinate.
pub const FD_STEP: f64 = 1e-6;

/// Gradient categories checked on every trial.
pub const CHECKS: [&str; 7] = ["distance", "object", "finger", "joint", "total", "collision", "baseline"];

/// Worst relative error seen for one category.
#[derive(Debug, Clone, Serialize)]
pub struct CheckStat {
    pub name: String,
    pub worst: f64,
    pub worst_trial: usize,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct GradcheckReport {
    pub trials: usize,
    pub tolerance: f64,
    pub seed: u64,
    pub checks: Vec<CheckStat>,
}

impl GradcheckReport {
    pub fn max_error(&self) -> f64 {
        self.checks.iter().map(|c| c.worst).fold(0.0, f64::max)
    }

    pub fn passed(&self) -> bool {
        self.max_error() <= self.tolerance
    }

    pub fn worst(&self) -> Option<&CheckStat> {
        self.checks.iter().max_by(|a, b| a.worst.total_cmp(&b.worst))
    }
}

/// `‖a − b‖ / (‖b‖ + 1e-10)`, with `b` the finite-difference reference.
pub fn relative_error(analytic: &DVector<f64>, reference: &DVector<f64>) -> f64 {
    (analytic - reference).norm() / (reference.norm() + 1e-10)
}

/// Central differences of `f` at `x`.
pub fn central_difference(f: impl Fn(&DVector<f64>) -> f64, x: &DVector<f64>, h: f64) -> DVector<f64> {
    let mut g = DVector::zeros(x.len());
    let mut xp = x.clone();
    for k in 0..x.len() {
        let orig = xp[k];
        xp[k] = orig + h;
        let fp = f(&xp);
        xp[k] = orig - h;
        let fm = f(&xp);
        xp[k] = orig;
        g[k] = (fp - fm) / (2.0 * h);
    }
    g
}

fn uniform3(rng: &mut ChaCha8Rng, lo: f64, hi: f64) -> Vector3<f64> {
    Vector3::new(rng.gen_range(lo..hi), rng.gen_range(lo..hi), rng.gen_range(lo..hi))
}

fn random_rotation(rng: &mut ChaCha8Rng, max_angle: f64) -> RotVec {
    let axis = uniform3(rng, -1.0, 1.0).normalize();
    RotVec(axis * rng.gen_range(0.0..max_angle))
}

fn random_weights(rng: &mut ChaCha8Rng) -> WeightMatrix {
    let p = uniform3(rng, 0.5, 20.0);
    let r = uniform3(rng, 0.01, 2.0);
    WeightMatrix::new(p.into(), r.into())
}

/// A random problem on a randomly placed synthetic hand, with a random
/// iterate near the grasp. Rotations stay well inside the principal range.
pub fn random_instance(rng: &mut ChaCha8Rng, steps: usize) -> (TrajProblem, TrajVariables) {
    let placement = Pose::new(uniform3(rng, -0.2, 0.2), random_rotation(rng, 1.5));
    let hand = HandModel::synth_3x4().transformed(&placement);
    let (lo, hi) = (hand.lower_limits(), hand.upper_limits());
    let q0 = DVector::from_fn(hand.dof(), |k, _| rng.gen_range(lo[k]..hi[k]));
    let tips = hand.fingertip_positions(&q0).expect("dof matches");
    let centroid = tips.iter().sum::<Vector3<f64>>() / tips.len() as f64;
    let object = Pose::new(centroid + uniform3(rng, -0.02, 0.02), random_rotation(rng, 2.0));
    let grasp = make_grasp(&hand, &q0, &object, 0.0).expect("dof matches");
    let goal = object.perturbed(&nalgebra::Vector6::from_iterator(
        uniform3(rng, -0.04, 0.04).iter().copied().chain(random_rotation(rng, 0.6).0.iter().copied()),
    ));
    let params = TrajParams {
        steps,
        lambda: rng.gen_range(0.0..0.01),
        w_o: random_weights(rng),
        w_f: random_weights(rng),
        collision_enabled: true,
    };
    let prob = TrajProblem::new(hand, grasp, goal, &params).expect("valid random problem");
    let vars = TrajVariables {
        q: (0..steps).map(|_| DVector::from_fn(q0.len(), |k, _| q0[k] + rng.gen_range(-0.15..0.15))).collect(),
        xi_o: (0..steps)
            .map(|_| {
                let delta = nalgebra::Vector6::from_iterator(
                    uniform3(rng, -0.02, 0.02).iter().copied().chain(random_rotation(rng, 0.4).0.iter().copied()),
                );
                object.perturbed(&delta).to_vector()
            })
            .collect(),
    };
    (prob, vars)
}

/// Relative errors of every category on one instance, in [`CHECKS`]
/// order. `None` marks a category with nothing to compare (no collision
/// pair far enough from coincidence).
pub fn check_instance(prob: &TrajProblem, vars: &TrajVariables, rng: &mut ChaCha8Rng) -> [Option<f64>; 7] {
    let dof = prob.hand.dof();
    let x = vars.to_flat();
    let h = FD_STEP;
    let at = |y: &DVector<f64>| TrajVariables::from_flat(y, dof);

    // Pose distance against object coordinates.
    let w = random_weights(rng);
    let xi = x.fixed_rows::<6>(dof).into_owned();
    let pose = Pose::from_vector(xi.as_slice());
    let jx = DMatrix::from_column_slice(6, 6, pose_coordinate_jacobian(&pose.r).as_slice());
    let analytic = pose_distance_grad(&pose, &prob.goal, &w, &jx);
    let fd = central_difference(|y| pose_distance(&Pose::from_vector(y.as_slice()), &prob.goal, &w).0, &DVector::from_column_slice(xi.as_slice()), h);
    let distance = relative_error(&analytic, &fd);

    let object = relative_error(&cost_object(vars, prob).1, &central_difference(|y| cost_object(&at(y), prob).0, &x, h));
    let finger = relative_error(&cost_finger(vars, prob).1, &central_difference(|y| cost_finger(&at(y), prob).0, &x, h));
    let q0 = &prob.grasp.q0;
    let joint = relative_error(
        &cost_joint(vars, q0, prob.lambda).1,
        &central_difference(|y| cost_joint(&at(y), q0, prob.lambda).0, &x, h),
    );
    let total = relative_error(&total_cost(vars, prob).1, &central_difference(|y| total_cost(&at(y), prob).0.total(), &x, h));

    let cons = constraints(vars, prob);
    let mut collision: Option<f64> = None;
    for row in 0..cons.collision.len() {
        // Distances near zero have no usable derivative.
        if prob.hand.min_pair_distance - cons.collision[row] < 1e-3 {
            continue;
        }
        let fd = central_difference(|y| constraints(&at(y), prob).collision[row], &x, h);
        let analytic = cons.collision_jacobian.row(row).transpose();
        let e = relative_error(&analytic, &fd);
        collision = Some(collision.map_or(e, |c: f64| c.max(e)));
    }

    let baseline = prob.hand.thumb.map(|thumb| {
        let mut xq = DVector::zeros(prob.steps * dof);
        for (t, q) in vars.q.iter().enumerate() {
            xq.rows_mut(t * dof, dof).copy_from(q);
        }
        let analytic = baseline_cost(prob, thumb, &xq).1;
        relative_error(&analytic, &central_difference(|y| baseline_cost(prob, thumb, y).0.total(), &xq, h))
    });

    [Some(distance), Some(object), Some(finger), Some(joint), Some(total), collision, baseline]
}

/// Runs `trials` random instances with horizons cycling through 1, 3, 5.
pub fn run(trials: usize, tolerance: f64, seed: u64) -> GradcheckReport {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checks: Vec<CheckStat> = CHECKS
        .iter()
        .map(|n| CheckStat { name: n.to_string(), worst: 0.0, worst_trial: 0, evaluations: 0 })
        .collect();
    for trial in 0..trials {
        let steps = [1, 3, 5][trial % 3];
        let (prob, vars) = random_instance(&mut rng, steps);
        for (stat, err) in checks.iter_mut().zip(check_instance(&prob, &vars, &mut rng)) {
            let Some(e) = err else { continue };
            stat.evaluations += 1;
            // NaN must count as a failure.
            if !(e <= stat.worst) {
                stat.worst = if e.is_nan() { f64::INFINITY } else { e };
                stat.worst_trial = trial;
            }
        }
    }
    GradcheckReport { trials, tolerance, seed, checks }
}
