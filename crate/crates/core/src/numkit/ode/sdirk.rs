//! Five-stage, stiffly accurate, L-stable SDIRK of order 4 with an embedded
//! order-3 solution (γ = 1/4, Hairer–Wanner). Stage equations are solved by
//! simplified Newton with one LU of `I − hγJ` per step attempt.

use super::{domain_exit, min_step, underflow, Output, Run};
use crate::error::{Error, Result};
use crate::numkit::fd::fd_jacobian;
use crate::numkit::linalg::{Matrix, Vector};
use crate::numkit::ode::TimeGrid;

const GAMMA: f64 = 0.25;
const STAGES: usize = 5;
const C: [f64; STAGES] = [0.25, 0.75, 11.0 / 20.0, 0.5, 1.0];
const A: [[f64; STAGES]; STAGES] = [
    [0.25, 0.0, 0.0, 0.0, 0.0],
    [0.5, 0.25, 0.0, 0.0, 0.0],
    [17.0 / 50.0, -1.0 / 25.0, 0.25, 0.0, 0.0],
    [371.0 / 1360.0, -137.0 / 2720.0, 15.0 / 544.0, 0.25, 0.0],
    [25.0 / 24.0, -49.0 / 48.0, 125.0 / 16.0, -85.0 / 12.0, 0.25],
];
const B_HAT: [f64; STAGES] = [59.0 / 48.0, -17.0 / 96.0, 225.0 / 32.0, -85.0 / 12.0, 0.0];

const NEWTON_MAX_ITER: usize = 10;
const NEWTON_KAPPA: f64 = 1e-3;

enum Outcome {
    Accepted { y: Vector, err: f64 },
    Rejected { err: f64 },
    NewtonFailure,
}

fn jacobian<F>(run: &mut Run<'_, F>, t: f64, y: &Vector) -> Result<Matrix>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    run.stats.jacobian_evaluations += 1;
    let step = 1e-7 * (1.0 + y.amax());
    run.stats.field_evaluations += 2 * y.len();
    fd_jacobian(|x: &Vector| (run.field)(t, x), y, step)
}

fn attempt<F>(run: &mut Run<'_, F>, t: f64, y: &Vector, jac: &Matrix, h: f64) -> Result<Outcome>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    let n = y.len();
    let iteration = Matrix::identity(n, n) - jac * (h * GAMMA);
    run.stats.lu_decompositions += 1;
    let lu = iteration.lu();
    if !lu.is_invertible() {
        return Ok(Outcome::NewtonFailure);
    }

    let mut k: Vec<Vector> = Vec::with_capacity(STAGES);
    let mut z_prev = Vector::zeros(n);
    for s in 0..STAGES {
        let mut rhs = Vector::zeros(n);
        for (j, kj) in k.iter().enumerate() {
            rhs.axpy(h * A[s][j], kj, 1.0);
        }
        // z = rhs + hγ f(t + c h, y + z)
        let mut z = z_prev.clone();
        let mut converged = false;
        let mut prev_norm = f64::INFINITY;
        for _ in 0..NEWTON_MAX_ITER {
            let f = run.eval(t + C[s] * h, &(y + &z))?;
            let g = &z - &rhs - f * (h * GAMMA);
            let delta = match lu.solve(&(-g)) {
                Some(d) => d,
                None => return Ok(Outcome::NewtonFailure),
            };
            z += &delta;
            let dnorm = run.error_norm(&delta, y, &(y + &z));
            if !dnorm.is_finite() {
                return Ok(Outcome::NewtonFailure);
            }
            let rate = dnorm / prev_norm;
            if rate >= 1.0 {
                return Ok(Outcome::NewtonFailure);
            }
            // estimated remaining error of z, in tolerance units
            let remaining = if prev_norm.is_finite() { dnorm * rate / (1.0 - rate) } else { dnorm };
            if remaining <= NEWTON_KAPPA || dnorm <= 1e-3 {
                converged = true;
                break;
            }
            prev_norm = dnorm;
        }
        if !converged {
            return Ok(Outcome::NewtonFailure);
        }
        k.push((&z - &rhs) / (h * GAMMA));
        z_prev = z;
    }

    // stiffly accurate: the last stage value is the new solution
    let y_new = y + &z_prev;
    let mut err = Vector::zeros(n);
    for (s, ks) in k.iter().enumerate() {
        err.axpy(h * (A[STAGES - 1][s] - B_HAT[s]), ks, 1.0);
    }
    let filtered = lu.solve(&err).unwrap_or(err);
    let err = run.error_norm(&filtered, y, &y_new);
    if err <= 1.0 {
        // evaluate once more so a domain exit at the new point is caught here
        run.eval(t + h, &y_new)?;
        Ok(Outcome::Accepted { y: y_new, err })
    } else {
        Ok(Outcome::Rejected { err })
    }
}

pub(super) fn integrate<F>(run: &mut Run<'_, F>, x0: &Vector, grid: &TimeGrid, out: &mut Output) -> Result<()>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    let times = grid.times();
    let (t0, t_end) = grid.span();
    let span = t_end - t0;
    let mut t = t0;
    let mut y = x0.clone();
    let f0 = run.eval(t, &y).map_err(|e| domain_exit(t, &y, &e))?;
    let mut h = run.initial_step(t, &y, &f0, 4, span)?;
    let mut next = 1;
    let mut last_reject = false;
    let mut jac = jacobian(run, t, &y).map_err(|e| domain_exit(t, &y, &e))?;

    while next < times.len() {
        if run.stats.accepted_steps + run.stats.rejected_steps >= run.config.max_steps {
            return Err(Error::NoConvergence {
                iterations: run.config.max_steps,
                residual_norm: f64::NAN,
                last_iterate: y.iter().copied().collect(),
            });
        }
        let target = times[next];
        let proposal = h.min(run.config.max_step);
        let (h_try, hits) = if t + proposal * (1.0 + 1e-10) >= target {
            (target - t, true)
        } else {
            (proposal, false)
        };
        if h_try < min_step(t, span) {
            return Err(underflow(t, h_try, &y));
        }
        match attempt(run, t, &y, &jac, h_try) {
            Err(e) => {
                run.stats.rejected_steps += 1;
                h = 0.25 * h_try;
                if h < min_step(t, span) {
                    return Err(domain_exit(t, &y, &e));
                }
                last_reject = true;
            }
            Ok(Outcome::NewtonFailure) => {
                run.stats.rejected_steps += 1;
                h = 0.5 * h_try;
                if h < min_step(t, span) {
                    return Err(underflow(t, h, &y));
                }
                last_reject = true;
            }
            Ok(Outcome::Rejected { err }) => {
                run.stats.rejected_steps += 1;
                let fac = if err.is_finite() { 0.9 * err.powf(-0.25) } else { 0.2 };
                h = h_try * fac.clamp(0.2, 1.0);
                last_reject = true;
            }
            Ok(Outcome::Accepted { y: y_new, err }) => {
                run.stats.accepted_steps += 1;
                let mut fac = (0.9 * err.max(1e-10).powf(-0.25)).clamp(0.2, 5.0);
                if last_reject {
                    fac = fac.min(1.0);
                }
                t = if hits { target } else { t + h_try };
                y = y_new;
                h = if hits { proposal.max(h_try * fac) } else { h_try * fac };
                last_reject = false;
                if hits {
                    out.push(t, &y);
                    next += 1;
                }
                if next < times.len() {
                    jac = jacobian(run, t, &y).map_err(|e| domain_exit(t, &y, &e))?;
                }
            }
        }
    }
    Ok(())
}
