//! Dense strictly convex QP solver (Goldfarb-Idnani dual active set).
//!
//! Solves `min ½xᵀHx + gᵀx  s.t.  A x ≤ b,  lower ≤ x ≤ upper`.
//! Infinite bounds are ignored.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("Hessian is not positive definite")]
    NotPositiveDefinite,
    #[error("constraints are infeasible")]
    Infeasible,
    #[error("active-set iteration limit reached")]
    IterationLimit,
}

#[derive(Debug, Clone)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Multipliers of the rows of `A` (nonnegative).
    pub lambda: DVector<f64>,
    /// Signed bound multipliers: positive at an active upper bound,
    /// negative at an active lower bound. `Hx + g + Aᵀλ + bound_mult = 0`.
    pub bound_mult: DVector<f64>,
    pub iterations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Row {
    General(usize),
    Lower(usize),
    Upper(usize),
}

struct Rows<'a> {
    a: &'a DMatrix<f64>,
    b: &'a DVector<f64>,
    lower: &'a DVector<f64>,
    upper: &'a DVector<f64>,
}

// Every row is stored internally as `nᵀx ≥ rhs`.
impl Rows<'_> {
    fn normal(&self, row: Row, n: usize) -> DVector<f64> {
        match row {
            Row::General(i) => -self.a.row(i).transpose(),
            Row::Lower(j) => {
                let mut v = DVector::zeros(n);
                v[j] = 1.0;
                v
            }
            Row::Upper(j) => {
                let mut v = DVector::zeros(n);
                v[j] = -1.0;
                v
            }
        }
    }

    fn slack(&self, row: Row, x: &DVector<f64>) -> f64 {
        match row {
            Row::General(i) => self.b[i] - self.a.row(i).dot(&x.transpose()),
            Row::Lower(j) => x[j] - self.lower[j],
            Row::Upper(j) => self.upper[j] - x[j],
        }
    }
}

pub fn solve_qp(
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    a: &DMatrix<f64>,
    b: &DVector<f64>,
    lower: &DVector<f64>,
    upper: &DVector<f64>,
) -> Result<QpSolution, QpError> {
    let n = g.len();
    assert_eq!(h.shape(), (n, n));
    assert_eq!(a.ncols(), n);
    assert_eq!(a.nrows(), b.len());
    assert_eq!(lower.len(), n);
    assert_eq!(upper.len(), n);

    let chol = h.clone().cholesky().ok_or(QpError::NotPositiveDefinite)?;
    let l_inv = chol
        .l()
        .solve_lower_triangular(&DMatrix::identity(n, n))
        .ok_or(QpError::NotPositiveDefinite)?;
    let mut j = l_inv.transpose();
    let mut r = DMatrix::<f64>::zeros(n, n);
    let mut x = chol.solve(&(-g));

    let rows = Rows { a, b, lower, upper };
    let mut all = Vec::with_capacity(a.nrows() + 2 * n);
    all.extend((0..a.nrows()).map(Row::General));
    for k in 0..n {
        if lower[k].is_finite() {
            all.push(Row::Lower(k));
        }
        if upper[k].is_finite() {
            all.push(Row::Upper(k));
        }
    }
    let mut active: Vec<Row> = Vec::new();
    let mut u: Vec<f64> = Vec::new();

    let scale = 1.0 + g.amax() + b.amax();
    let tol = 1e-12 * scale;
    let max_iter = 20 * (all.len() + n) + 50;
    let mut iterations = 0;

    loop {
        // Most violated inactive constraint.
        let mut worst: Option<(Row, f64)> = None;
        for &row in &all {
            if active.contains(&row) {
                continue;
            }
            let s = rows.slack(row, &x);
            if s < -tol && worst.is_none_or(|(_, w)| s < w) {
                worst = Some((row, s));
            }
        }
        let Some((p, mut s_p)) = worst else { break };
        let np = rows.normal(p, n);
        let mut u_p = 0.0;

        loop {
            iterations += 1;
            if iterations > max_iter {
                return Err(QpError::IterationLimit);
            }
            let iq = active.len();
            let d = j.transpose() * &np;
            let z = j.columns(iq, n - iq) * d.rows(iq, n - iq);
            let rvec = back_substitute(&r, &d, iq);

            let mut t1 = f64::INFINITY;
            let mut drop_at = None;
            for k in 0..iq {
                if rvec[k] > 0.0 {
                    let ratio = u[k] / rvec[k];
                    if ratio < t1 {
                        t1 = ratio;
                        drop_at = Some(k);
                    }
                }
            }
            let znp = z.dot(&np);
            let t2 = if z.amax() > 1e-14 && znp > 0.0 { -s_p / znp } else { f64::INFINITY };

            if t1.is_infinite() && t2.is_infinite() {
                return Err(QpError::Infeasible);
            }
            if t2.is_infinite() {
                for k in 0..iq {
                    u[k] -= t1 * rvec[k];
                }
                u_p += t1;
                let k = drop_at.expect("finite partial step has a blocking constraint");
                drop_constraint(&mut j, &mut r, &mut active, &mut u, k);
                continue;
            }
            let t = t1.min(t2);
            x += &z * t;
            for k in 0..iq {
                u[k] -= t * rvec[k];
            }
            u_p += t;
            if t2 <= t1 {
                add_constraint(&mut j, &mut r, &d, iq);
                active.push(p);
                u.push(u_p);
                break;
            }
            let k = drop_at.expect("partial step has a blocking constraint");
            drop_constraint(&mut j, &mut r, &mut active, &mut u, k);
            s_p = rows.slack(p, &x);
            if s_p >= -tol {
                break;
            }
        }
    }

    let mut lambda = DVector::zeros(a.nrows());
    let mut bound_mult = DVector::zeros(n);
    for (row, mult) in active.iter().zip(&u) {
        match *row {
            Row::General(i) => lambda[i] = *mult,
            Row::Lower(k) => bound_mult[k] -= *mult,
            Row::Upper(k) => bound_mult[k] += *mult,
        }
    }
    Ok(QpSolution { x, lambda, bound_mult, iterations })
}

/// Solves `R[..iq, ..iq] r = d[..iq]` for upper-triangular `R`.
fn back_substitute(r: &DMatrix<f64>, d: &DVector<f64>, iq: usize) -> DVector<f64> {
    let mut out = DVector::zeros(iq);
    for i in (0..iq).rev() {
        let mut sum = d[i];
        for k in i + 1..iq {
            sum -= r[(i, k)] * out[k];
        }
        out[i] = sum / r[(i, i)];
    }
    out
}

fn rotate_columns(j: &mut DMatrix<f64>, a: usize, b: usize, c: f64, s: f64) {
    for k in 0..j.nrows() {
        let (x, y) = (j[(k, a)], j[(k, b)]);
        j[(k, a)] = c * x + s * y;
        j[(k, b)] = -s * x + c * y;
    }
}

fn add_constraint(j: &mut DMatrix<f64>, r: &mut DMatrix<f64>, d: &DVector<f64>, iq: usize) {
    let n = d.len();
    let mut d = d.clone();
    for k in (iq + 1..n).rev() {
        let (a, b) = (d[k - 1], d[k]);
        let h = a.hypot(b);
        if h == 0.0 {
            continue;
        }
        let (c, s) = (a / h, b / h);
        d[k - 1] = h;
        d[k] = 0.0;
        rotate_columns(j, k - 1, k, c, s);
    }
    for k in 0..=iq {
        r[(k, iq)] = d[k];
    }
}

fn drop_constraint(j: &mut DMatrix<f64>, r: &mut DMatrix<f64>, active: &mut Vec<Row>, u: &mut Vec<f64>, l: usize) {
    let iq = active.len();
    active.remove(l);
    u.remove(l);
    for col in l..iq - 1 {
        for k in 0..r.nrows() {
            r[(k, col)] = r[(k, col + 1)];
        }
    }
    r.column_mut(iq - 1).fill(0.0);
    let iq = iq - 1;
    for k in l..iq {
        let (a, b) = (r[(k, k)], r[(k + 1, k)]);
        let h = a.hypot(b);
        if h == 0.0 {
            continue;
        }
        let (c, s) = (a / h, b / h);
        for col in k..iq {
            let (x, y) = (r[(k, col)], r[(k + 1, col)]);
            r[(k, col)] = c * x + s * y;
            r[(k + 1, col)] = -s * x + c * y;
        }
        r[(k + 1, k)] = 0.0;
        rotate_columns(j, k, k + 1, c, s);
    }
}
