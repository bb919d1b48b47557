//! Sequential quadratic programming with a Gauss-Newton Hessian supplied by
//! the problem, Levenberg damping, a box trust region and an L1 merit line
//! search.

use super::qp::{solve_qp, QpError};
use nalgebra::{DMatrix, DVector};
use thiserror::Error;

/// First- and second-order information at one iterate.
#[derive(Debug, Clone)]
pub struct NlpEval {
    pub f: f64,
    pub grad: DVector<f64>,
    /// Positive semidefinite Hessian approximation.
    pub hess: DMatrix<f64>,
    /// Inequality values, feasible when `c ≤ 0`.
    pub c: DVector<f64>,
    /// Jacobian of `c` (one row per constraint).
    pub jac: DMatrix<f64>,
}

pub trait NlpProblem {
    fn dim(&self) -> usize;
    fn bounds(&self) -> (DVector<f64>, DVector<f64>);
    /// Objective and inequality values only.
    fn value(&self, x: &DVector<f64>) -> (f64, DVector<f64>);
    fn evaluate(&self, x: &DVector<f64>) -> NlpEval;
    /// Chart maintenance applied to accepted iterates.
    fn normalize(&self, _x: &mut DVector<f64>) {}
}

#[derive(Debug, Clone, Copy)]
pub struct SqpOptions {
    pub max_iterations: usize,
    pub kkt_tolerance: f64,
    /// Half-width of the box trust region on the step.
    pub trust_radius: f64,
    /// Relative merit decrease below which an iteration counts as stalled.
    pub progress_tolerance: f64,
    /// Constraint violation accepted as feasible.
    pub feasibility_tolerance: f64,
}

impl Default for SqpOptions {
    fn default() -> Self {
        Self {
            max_iterations: 200,
            kkt_tolerance: 1e-6,
            trust_radius: 0.5,
            progress_tolerance: 1e-12,
            feasibility_tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SqpStatus {
    Converged,
    /// Feasible, but the merit function stopped decreasing.
    Stalled,
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct SqpResult {
    pub x: DVector<f64>,
    pub f: f64,
    pub c: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub status: SqpStatus,
}

#[derive(Debug, Error, Clone)]
#[error("SQP failed after {iterations} iterations: {reason} (violation {violation:.3e})")]
pub struct SqpError {
    pub reason: String,
    pub x: DVector<f64>,
    pub iterations: usize,
    pub kkt_residual: f64,
    pub violation: f64,
}

fn violation(c: &DVector<f64>) -> f64 {
    c.iter().fold(0.0, |acc, v| acc + v.max(0.0))
}

pub fn minimize<P: NlpProblem + ?Sized>(problem: &P, x0: &DVector<f64>, opts: &SqpOptions) -> Result<SqpResult, SqpError> {
    let n = problem.dim();
    assert_eq!(x0.len(), n);
    let (lower, upper) = problem.bounds();
    let mut x = x0.clone();
    for k in 0..n {
        x[k] = x[k].clamp(lower[k], upper[k]);
    }
    problem.normalize(&mut x);

    let mut eval = problem.evaluate(&x);
    let mut nu: f64 = 1.0;
    let mut mu: f64 = 1e-10;
    let mut kkt = f64::INFINITY;
    let mut stalls = 0;
    let fail = |reason: &str, x: &DVector<f64>, it: usize, kkt: f64, c: &DVector<f64>| SqpError {
        reason: reason.to_string(),
        x: x.clone(),
        iterations: it,
        kkt_residual: kkt,
        violation: violation(c),
    };

    for it in 0..opts.max_iterations {
        let lo = DVector::from_fn(n, |k, _| (lower[k] - x[k]).max(-opts.trust_radius));
        let hi = DVector::from_fn(n, |k, _| (upper[k] - x[k]).min(opts.trust_radius));
        let diag_scale = (0..n).map(|k| eval.hess[(k, k)].abs()).fold(0.0, f64::max).max(1e-12);

        let mut accepted = None;
        for _attempt in 0..8 {
            let h = &eval.hess + DMatrix::identity(n, n) * (mu * diag_scale);
            let b = -&eval.c;
            let qp = match solve_qp(&h, &eval.grad, &eval.jac, &b, &lo, &hi) {
                Ok(s) => s,
                Err(QpError::Infeasible) => {
                    // Only ask violated constraints not to get worse.
                    let relaxed = DVector::from_fn(eval.c.len(), |i, _| (-eval.c[i]).max(0.0));
                    match solve_qp(&h, &eval.grad, &eval.jac, &relaxed, &lo, &hi) {
                        Ok(s) => s,
                        Err(_) => {
                            mu *= 10.0;
                            continue;
                        }
                    }
                }
                Err(_) => {
                    mu *= 10.0;
                    continue;
                }
            };
            let d = qp.x;
            let lambda = qp.lambda;

            let grad_l = &eval.grad + eval.jac.transpose() * &lambda;
            let proj = (0..n)
                .map(|k| (x[k] - (x[k] - grad_l[k]).clamp(lower[k], upper[k])).abs())
                .fold(0.0, f64::max);
            let viol_max = eval.c.iter().fold(0.0f64, |a, v| a.max(*v));
            let comp = lambda.iter().zip(eval.c.iter()).map(|(l, c)| (l * c).abs()).fold(0.0, f64::max);
            kkt = proj.max(viol_max).max(comp);
            if kkt < opts.kkt_tolerance || d.amax() == 0.0 {
                return Ok(SqpResult {
                    x,
                    f: eval.f,
                    c: eval.c,
                    iterations: it,
                    kkt_residual: kkt,
                    status: SqpStatus::Converged,
                });
            }

            nu = nu.max(1.5 * lambda.amax());
            let merit0 = eval.f + nu * violation(&eval.c);
            let slope = eval.grad.dot(&d) - nu * violation(&eval.c);
            let mut alpha = 1.0;
            for _ in 0..30 {
                let mut trial = &x + &d * alpha;
                for k in 0..n {
                    trial[k] = trial[k].clamp(lower[k], upper[k]);
                }
                let (f, c) = problem.value(&trial);
                let merit = f + nu * violation(&c);
                if merit <= merit0 + 1e-4 * alpha * slope.min(0.0) && merit.is_finite() {
                    accepted = Some((trial, merit0, merit));
                    break;
                }
                alpha *= 0.5;
            }
            if accepted.is_some() {
                mu = (mu * 0.3).max(1e-10);
                break;
            }
            mu *= 10.0;
        }

        let Some((mut trial, merit0, merit)) = accepted else {
            if violation(&eval.c) <= opts.feasibility_tolerance {
                return Ok(SqpResult {
                    x,
                    f: eval.f,
                    c: eval.c,
                    iterations: it,
                    kkt_residual: kkt,
                    status: SqpStatus::Stalled,
                });
            }
            return Err(fail("line search failed at an infeasible point", &x, it, kkt, &eval.c));
        };
        problem.normalize(&mut trial);
        x = trial;
        eval = problem.evaluate(&x);

        if merit0 - merit <= opts.progress_tolerance * merit0.abs().max(1e-300) {
            stalls += 1;
        } else {
            stalls = 0;
        }
        if stalls >= 3 && violation(&eval.c) <= opts.feasibility_tolerance {
            return Ok(SqpResult {
                x,
                f: eval.f,
                c: eval.c,
                iterations: it + 1,
                kkt_residual: kkt,
                status: SqpStatus::Stalled,
            });
        }
    }
    if violation(&eval.c) <= opts.feasibility_tolerance {
        return Ok(SqpResult {
            x,
            f: eval.f,
            c: eval.c,
            iterations: opts.max_iterations,
            kkt_residual: kkt,
            status: SqpStatus::IterationLimit,
        });
    }
    Err(fail("iteration limit reached while infeasible", &x, opts.max_iterations, kkt, &eval.c))
}
