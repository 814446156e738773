//! Small numerical kernels: BFGS with backtracking, Richardson-extrapolated
//! finite-difference Jacobians and damped Newton iterations.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// One objective evaluation in the optimizer's coordinates.
#[derive(Debug, Clone)]
pub struct Eval {
    pub f: f64,
    pub grad: Vec<f64>,
    /// Norm used for the stopping rule (may live in other coordinates).
    pub conv_norm: f64,
}

#[derive(Debug, Clone, Copy)]
pub struct BfgsOptions {
    pub tol: f64,
    pub max_iter: usize,
}

#[derive(Debug, Clone)]
pub struct BfgsOutcome {
    pub x: Vec<f64>,
    pub eval: Eval,
    pub iterations: usize,
    pub converged: bool,
}

const ARMIJO_C1: f64 = 1e-4;
const MIN_STEP: f64 = 1e-14;

/// Minimizes with BFGS and Armijo backtracking. Failed evaluations inside
/// the line search count as `+∞`, which keeps iterates inside the support.
pub fn bfgs<F>(mut f: F, x0: &[f64], opts: BfgsOptions) -> Result<BfgsOutcome>
where
    F: FnMut(&[f64]) -> Result<Eval>,
{
    let d = x0.len();
    let mut x = DVector::from_column_slice(x0);
    let mut cur = f(x0)?;
    if !cur.f.is_finite() {
        return Err(Error::Domain(format!("objective is not finite at the start {x0:?}")));
    }
    let mut h = DMatrix::<f64>::identity(d, d);
    let mut fresh = true;
    let mut iterations = 0;
    while iterations < opts.max_iter {
        if cur.conv_norm <= opts.tol {
            return Ok(BfgsOutcome {
                x: x.as_slice().to_vec(),
                eval: cur,
                iterations,
                converged: true,
            });
        }
        iterations += 1;
        let g = DVector::from_column_slice(&cur.grad);
        let mut dir = -(&h * &g);
        let mut slope = g.dot(&dir);
        if slope >= 0.0 || !slope.is_finite() {
            h = DMatrix::identity(d, d);
            dir = -g.clone();
            slope = g.dot(&dir);
            fresh = true;
        }
        // first step from identity: cap the move length
        let mut step = if fresh {
            (1.0 / dir.norm()).min(1.0)
        } else {
            1.0
        };
        let mut accepted = None;
        while step >= MIN_STEP {
            let trial = &x + step * &dir;
            if let Ok(ev) = f(trial.as_slice()) {
                if ev.f.is_finite() && ev.f <= cur.f + ARMIJO_C1 * step * slope {
                    accepted = Some((trial, ev));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, ev)) = accepted else {
            if fresh {
                break;
            }
            h = DMatrix::identity(d, d);
            fresh = true;
            continue;
        };
        let s = &xn - &x;
        let y = DVector::from_column_slice(&ev.grad) - &g;
        let sy = s.dot(&y);
        if sy > 1e-12 * s.norm() * y.norm() {
            if fresh {
                // scale the initial inverse Hessian
                h = DMatrix::identity(d, d) * (sy / y.dot(&y));
            }
            let rho = 1.0 / sy;
            let hy = &h * &y;
            let yhy = y.dot(&hy);
            h += (rho * rho * yhy + rho) * (&s * s.transpose())
                - rho * (&hy * s.transpose() + &s * hy.transpose());
            fresh = false;
        }
        x = xn;
        cur = ev;
    }
    let converged = cur.conv_norm <= opts.tol;
    Ok(BfgsOutcome {
        x: x.as_slice().to_vec(),
        eval: cur,
        iterations,
        converged,
    })
}

/// Central-difference Jacobian with one Richardson extrapolation step.
/// Column `j` uses `h_j = rel_step (1 + |x_j|)`; a failed evaluation halves
/// the step a few times before giving up.
pub fn jacobian_fd<F>(mut f: F, x: &[f64], rel_step: f64) -> Result<DMatrix<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let d = x.len();
    let mut cols: Vec<Vec<f64>> = Vec::with_capacity(d);
    let mut m = None;
    for j in 0..d {
        let mut h = rel_step * (1.0 + x[j].abs());
        let mut last_err = None;
        let mut col = None;
        for _ in 0..6 {
            match richardson_column(&mut f, x, j, h) {
                Ok(c) => {
                    col = Some(c);
                    break;
                }
                Err(e) => {
                    last_err = Some(e);
                    h *= 0.25;
                }
            }
        }
        let col = match col {
            Some(c) => c,
            None => return Err(last_err.expect("at least one attempt")),
        };
        m = Some(col.len());
        cols.push(col);
    }
    let m = m.unwrap_or(0);
    Ok(DMatrix::from_fn(m, d, |i, j| cols[j][i]))
}

fn richardson_column<F>(f: &mut F, x: &[f64], j: usize, h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut central = |h: f64| -> Result<Vec<f64>> {
        let mut a = x.to_vec();
        let mut b = x.to_vec();
        a[j] += h;
        b[j] -= h;
        let fa = f(&a)?;
        let fb = f(&b)?;
        Ok(fa.iter().zip(&fb).map(|(p, m)| (p - m) / (2.0 * h)).collect())
    };
    let d1 = central(h)?;
    let d2 = central(0.5 * h)?;
    let out: Vec<f64> = d1
        .iter()
        .zip(&d2)
        .map(|(a, b)| (4.0 * b - a) / 3.0)
        .collect();
    if out.iter().all(|v| v.is_finite()) {
        Ok(out)
    } else {
        Err(Error::Overflow(format!("non-finite difference quotient in direction {j}")))
    }
}

/// Solves `a x = b`, reporting a singular system with context.
pub fn solve(a: &DMatrix<f64>, b: &DVector<f64>, what: &str) -> Result<DVector<f64>> {
    let sol = a
        .clone()
        .lu()
        .solve(b)
        .filter(|s| s.iter().all(|v| v.is_finite()));
    sol.ok_or_else(|| Error::Singular(format!("{what} is singular")))
}

/// Inverse of a square matrix, with the same error reporting as [`solve`].
pub fn inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .try_inverse()
        .filter(|m| m.iter().all(|v| v.is_finite()))
        .ok_or_else(|| Error::Singular(format!("{what} is singular")))
}
