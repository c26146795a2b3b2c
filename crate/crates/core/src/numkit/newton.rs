//! Damped Newton iteration for square nonlinear systems.

use super::linalg::{Matrix, Vector};
use crate::error::{Error, Result};

/// Maximum number of step halvings in the backtracking line search.
pub const MAX_HALVINGS: usize = 30;

#[derive(Debug, Clone, Copy)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    pub max_halvings: usize,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            max_halvings: MAX_HALVINGS,
        }
    }
}

impl NewtonOptions {
    pub fn new(tol: f64, max_iter: usize) -> Self {
        Self {
            tol,
            max_iter,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone)]
pub struct NewtonOutcome {
    pub x: Vector,
    pub iterations: usize,
    pub residual_norm: f64,
}

/// Solves `residual(x) = 0` from `x0` with Newton steps damped by halving
/// until the residual norm decreases. Residual evaluations that fail inside
/// the line search (e.g. a probe leaving the domain) count as no decrease.
pub fn newton_solve<R, J>(
    residual: R,
    jacobian: J,
    x0: &Vector,
    opts: NewtonOptions,
) -> Result<NewtonOutcome>
where
    R: Fn(&Vector) -> Result<Vector>,
    J: Fn(&Vector) -> Result<Matrix>,
{
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("Newton start point is not finite".into()));
    }
    let mut x = x0.clone();
    let mut r = residual(&x)?;
    let mut norm = r.norm();
    for iter in 0..=opts.max_iter {
        if norm <= opts.tol {
            return Ok(NewtonOutcome {
                x,
                iterations: iter,
                residual_norm: norm,
            });
        }
        if iter == opts.max_iter {
            break;
        }
        let jac = jacobian(&x)?;
        if jac.nrows() != r.len() || jac.ncols() != x.len() {
            return Err(Error::InvalidInput(format!(
                "Jacobian is {}x{}, expected {}x{}",
                jac.nrows(),
                jac.ncols(),
                r.len(),
                x.len()
            )));
        }
        let step = jac
            .lu()
            .solve(&(-&r))
            .filter(|s| s.iter().all(|v| v.is_finite()))
            .ok_or_else(|| {
                Error::SingularSystem(format!("singular Jacobian at iteration {iter}"))
            })?;

        let mut lambda = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_halvings {
            let trial = &x + &step * lambda;
            if let Ok(rt) = residual(&trial) {
                let nt = rt.norm();
                if nt.is_finite() && (nt < norm || nt <= opts.tol) {
                    accepted = Some((trial, rt, nt));
                    break;
                }
            }
            lambda *= 0.5;
        }
        match accepted {
            Some((xt, rt, nt)) => {
                x = xt;
                r = rt;
                norm = nt;
            }
            None => {
                return Err(Error::SingularSystem(format!(
                    "no descent after {} halvings at iteration {iter} (residual {norm:e})",
                    opts.max_halvings
                )))
            }
        }
    }
    Err(Error::NoConvergence {
        iterations: opts.max_iter,
        residual_norm: norm,
        last_iterate: x.iter().copied().collect(),
    })
}

/// Scalar bisection on a sign-changing bracket.
pub fn bisect<F: Fn(f64) -> f64>(f: F, mut lo: f64, mut hi: f64, tol: f64) -> Result<f64> {
    let mut flo = f(lo);
    let fhi = f(hi);
    if flo == 0.0 {
        return Ok(lo);
    }
    if fhi == 0.0 {
        return Ok(hi);
    }
    if flo.signum() == fhi.signum() {
        return Err(Error::InvalidInput(format!(
            "bracket [{lo}, {hi}] has no sign change"
        )));
    }
    while hi - lo > tol {
        let mid = 0.5 * (lo + hi);
        let fm = f(mid);
        if fm == 0.0 {
            return Ok(mid);
        }
        if fm.signum() == flo.signum() {
            lo = mid;
            flo = fm;
        } else {
            hi = mid;
        }
        if mid == lo && mid == hi {
            break;
        }
    }
    Ok(0.5 * (lo + hi))
}
