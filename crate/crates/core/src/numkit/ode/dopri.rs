use super::{domain_exit, min_step, underflow, Output, Run};
use crate::error::{Error, Result};
use crate::numkit::ode::TimeGrid;
use crate::numkit::linalg::Vector;

const C: [f64; 7] = [0.0, 1.0 / 5.0, 3.0 / 10.0, 4.0 / 5.0, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [1.0 / 5.0, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
// fifth-order weights minus embedded fourth-order weights
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Step {
    y: Vector,
    f: Vector,
    err: f64,
}

fn attempt<F>(run: &mut Run<'_, F>, t: f64, y: &Vector, f0: &Vector, h: f64) -> Result<Step>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    let mut k: Vec<Vector> = Vec::with_capacity(7);
    k.push(f0.clone());
    for s in 1..7 {
        let mut ys = y.clone();
        for (j, kj) in k.iter().enumerate() {
            if A[s][j] != 0.0 {
                ys.axpy(h * A[s][j], kj, 1.0);
            }
        }
        k.push(run.eval(t + C[s] * h, &ys)?);
    }
    // the seventh stage is evaluated at the new solution (FSAL)
    let mut y_new = y.clone();
    for (j, kj) in k.iter().take(6).enumerate() {
        if A[6][j] != 0.0 {
            y_new.axpy(h * A[6][j], kj, 1.0);
        }
    }
    let mut err = Vector::zeros(y.len());
    for (j, kj) in k.iter().enumerate() {
        if E[j] != 0.0 {
            err.axpy(h * E[j], kj, 1.0);
        }
    }
    let err = run.error_norm(&err, y, &y_new);
    Ok(Step {
        y: y_new,
        f: k.pop().expect("seven stages"),
        err,
    })
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
    let mut f0 = run.eval(t, &y).map_err(|e| domain_exit(t, &y, &e))?;
    let mut h = run.initial_step(t, &y, &f0, 5, span)?;
    let mut next = 1;
    let mut last_reject = false;

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
        match attempt(run, t, &y, &f0, h_try) {
            Err(e) => {
                run.stats.rejected_steps += 1;
                h = 0.25 * h_try;
                if h < min_step(t, span) {
                    return Err(domain_exit(t, &y, &e));
                }
                last_reject = true;
            }
            Ok(step) if step.err <= 1.0 => {
                run.stats.accepted_steps += 1;
                let mut fac = (0.9 * step.err.max(1e-10).powf(-0.2)).clamp(0.2, 5.0);
                if last_reject {
                    fac = fac.min(1.0);
                }
                t = if hits { target } else { t + h_try };
                y = step.y;
                f0 = step.f;
                h = if hits { proposal.max(h_try * fac) } else { h_try * fac };
                last_reject = false;
                if hits {
                    out.push(t, &y);
                    next += 1;
                }
            }
            Ok(step) => {
                run.stats.rejected_steps += 1;
                h = h_try * (0.9 * step.err.powf(-0.2)).clamp(0.2, 1.0);
                last_reject = true;
            }
        }
    }
    Ok(())
}
