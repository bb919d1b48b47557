//! Damped least-squares inverse kinematics for fingertip positions.

use super::{HandError, HandModel};
use nalgebra::{DVector, Matrix3, Vector3};

#[derive(Debug, Clone, Copy)]
pub struct IkOptions {
    pub max_iterations: usize,
    /// Largest per-finger residual accepted as converged (meters).
    pub acceptance: f64,
    /// Early exit once every residual is below this (meters).
    pub tolerance: f64,
}

impl Default for IkOptions {
    fn default() -> Self {
        Self { max_iterations: 100, acceptance: 2e-3, tolerance: 1e-9 }
    }
}

#[derive(Debug, Clone)]
pub struct IkSolution {
    pub q: DVector<f64>,
    /// Final position residual per finger (meters).
    pub residuals: Vec<f64>,
    /// Largest iteration count over fingers.
    pub iterations: usize,
}

impl IkSolution {
    pub fn max_residual(&self) -> f64 {
        self.residuals.iter().cloned().fold(0.0, f64::max)
    }
}

/// Solves each finger independently for its target fingertip position,
/// starting from `q_seed` and never leaving the joint limits.
pub fn ik_fingertips(
    hand: &HandModel,
    targets: &[Vector3<f64>],
    q_seed: &DVector<f64>,
    opts: &IkOptions,
) -> Result<IkSolution, HandError> {
    if targets.len() != hand.num_fingers() {
        return Err(HandError::DimensionMismatch { expected: hand.num_fingers(), got: targets.len() });
    }
    hand.check_full(q_seed)?;
    let mut q = q_seed.clone();
    hand.clamp(&mut q);
    let mut residuals = Vec::with_capacity(targets.len());
    let mut iterations = 0;
    for (i, target) in targets.iter().enumerate() {
        let range = hand.joint_range(i);
        let chain = &hand.fingers[i];
        let mut qi: Vec<f64> = q.as_slice()[range.clone()].to_vec();
        let mut err = target - chain.fingertip(&qi)?.p;
        let mut damping = 1e-3;
        let mut it = 0;
        while it < opts.max_iterations && err.norm() > opts.tolerance {
            it += 1;
            let frames = chain.frames(&qi)?;
            let jac = chain.tip_jacobian(&frames);
            let jp = jac.rows(0, 3).into_owned();
            // Joints pinned at a limit and pushed outward are frozen for the step.
            let grad = jp.transpose() * err;
            let mut active = jp.clone();
            for (k, (lo, hi)) in chain.limits.iter().enumerate() {
                if (qi[k] <= *lo && grad[k] < 0.0) || (qi[k] >= *hi && grad[k] > 0.0) {
                    active.column_mut(k).fill(0.0);
                }
            }
            let jjt: Matrix3<f64> = (&active * active.transpose()).fixed_view::<3, 3>(0, 0).into_owned();
            let mut improved = false;
            for _ in 0..12 {
                let sys = jjt + Matrix3::identity() * (damping * damping);
                let Some(inv) = sys.try_inverse() else {
                    damping *= 4.0;
                    continue;
                };
                let step = active.transpose() * (inv * err);
                let mut trial: Vec<f64> = qi.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                chain.clamp(&mut trial);
                let trial_err = target - chain.fingertip(&trial)?.p;
                if trial_err.norm() < err.norm() {
                    qi = trial;
                    err = trial_err;
                    damping = (damping * 0.5).max(1e-6);
                    improved = true;
                    break;
                }
                damping *= 4.0;
            }
            if !improved {
                break;
            }
        }
        iterations = iterations.max(it);
        residuals.push(err.norm());
        q.as_mut_slice()[range].copy_from_slice(&qi);
    }
    let max_residual = residuals.iter().cloned().fold(0.0, f64::max);
    if max_residual > opts.acceptance {
        return Err(HandError::IkNotConverged { max_residual, residuals, q });
    }
    Ok(IkSolution { q, residuals, iterations })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn fixed_point_needs_no_iterations() {
        let hand = HandModel::synth_3x4();
        let seed = DVector::from_column_slice(&[0.1, 0.4, 0.6, 0.5, -0.1, 0.3, 0.7, 0.4, 0.0, 0.5, 0.5, 0.5]);
        let targets = hand.fingertip_positions(&seed).unwrap();
        let sol = ik_fingertips(&hand, &targets, &seed, &IkOptions::default()).unwrap();
        assert_eq!(sol.iterations, 0);
        assert_eq!(sol.q, seed);
    }

    #[test]
    fn recovers_random_reachable_targets() {
        let hand = HandModel::synth_3x4();
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let lo = hand.lower_limits();
        let hi = hand.upper_limits();
        let seed = DVector::from_column_slice(&[0.0, 0.4, 0.6, 0.5, 0.0, 0.4, 0.6, 0.5, 0.0, 0.4, 0.6, 0.5]);
        for _ in 0..30 {
            // Stay a little inside the limits so the target is not on the boundary.
            let q_star = DVector::from_fn(12, |i, _| {
                let pad = 0.15 * (hi[i] - lo[i]);
                rng.gen_range(lo[i] + pad..hi[i] - pad)
            });
            let targets = hand.fingertip_positions(&q_star).unwrap();
            let sol = ik_fingertips(&hand, &targets, &seed, &IkOptions::default()).unwrap();
            assert!(sol.max_residual() < 1e-4, "residual {}", sol.max_residual());
            assert!(hand.within_limits(&sol.q));
        }
    }

    #[test]
    fn unreachable_target_is_reported() {
        let hand = HandModel::synth_3x4();
        let seed = hand.mid_configuration();
        let mut targets = hand.fingertip_positions(&seed).unwrap();
        targets[1] += Vector3::new(1.0, 0.0, 0.0);
        match ik_fingertips(&hand, &targets, &seed, &IkOptions::default()) {
            Err(HandError::IkNotConverged { max_residual, q, .. }) => {
                assert!(max_residual > 0.5);
                assert!(hand.within_limits(&q));
            }
            other => panic!("expected IkNotConverged, got {other:?}"),
        }
    }

    #[test]
    fn wrong_target_count() {
        let hand = HandModel::synth_3x4();
        let seed = hand.mid_configuration();
        let r = ik_fingertips(&hand, &[Vector3::zeros()], &seed, &IkOptions::default());
        assert!(matches!(r, Err(HandError::DimensionMismatch { .. })));
    }
}
