//! Central finite differences.

use super::linalg::{Matrix, Vector};
use crate::error::{Error, Result};

/// Step `1e-6 · (1 + ‖x‖)`, balancing truncation against rounding for
/// central differences.
pub fn default_fd_step(x: &Vector) -> f64 {
    1e-6 * (1.0 + x.norm())
}

/// Central-difference Jacobian of `f` at `x`. A failed evaluation is
/// reported with the probe point where it happened.
pub fn fd_jacobian<F>(f: F, x: &Vector, step: f64) -> Result<Matrix>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    if !(step > 0.0 && step.is_finite()) {
        return Err(Error::InvalidInput(format!("invalid difference step {step}")));
    }
    let n = x.len();
    let mut jac: Option<Matrix> = None;
    let mut probe = x.clone();
    for j in 0..n {
        probe[j] = x[j] + step;
        let fp = eval_at(&f, &probe)?;
        probe[j] = x[j] - step;
        let fm = eval_at(&f, &probe)?;
        probe[j] = x[j];
        let jac = jac.get_or_insert_with(|| Matrix::zeros(fp.len(), n));
        if fp.len() != jac.nrows() || fm.len() != jac.nrows() {
            return Err(Error::InvalidInput("function output length varies".into()));
        }
        jac.set_column(j, &((fp - fm) / (2.0 * step)));
    }
    match jac {
        Some(j) => Ok(j),
        None => {
            let m = eval_at(&f, x)?.len();
            Ok(Matrix::zeros(m, 0))
        }
    }
}

fn eval_at<F>(f: &F, probe: &Vector) -> Result<Vector>
where
    F: Fn(&Vector) -> Result<Vector>,
{
    f(probe).map_err(|e| match e {
        Error::Evaluation { .. } => e,
        other => Error::Evaluation {
            location: probe.iter().copied().collect(),
            message: other.to_string(),
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn linear_map_is_reproduced() {
        let m = Matrix::from_row_slice(2, 3, &[1.0, -2.0, 0.5, 3.0, 0.0, 4.0]);
        let m2 = m.clone();
        let x = Vector::from_vec(vec![0.3, -1.0, 2.0]);
        let j = fd_jacobian(move |x: &Vector| Ok(&m2 * x), &x, 1e-5).unwrap();
        assert!((j - m).amax() < 1e-9);
    }

    #[test]
    fn circuit_constraint_jacobian() {
        let f2 = |v: &Vector| {
            let (x, y, z) = (v[0], v[1], v[2]);
            Ok(Vector::from_vec(vec![y + z, x - y * y - 2.0 * y]))
        };
        let x = Vector::from_vec(vec![0.1, 0.2, 0.3]);
        let j = fd_jacobian(f2, &x, default_fd_step(&x)).unwrap();
        let expected = Matrix::from_row_slice(2, 3, &[0.0, 1.0, 1.0, 1.0, -2.4, 0.0]);
        assert!((j - expected).amax() < 1e-8);
    }

    #[test]
    fn sine_derivative_at_zero() {
        let x = Vector::from_element(1, 0.0);
        let j = fd_jacobian(|x: &Vector| Ok(x.map(f64::sin)), &x, 1e-5).unwrap();
        assert!((j[(0, 0)] - 1.0).abs() < 1e-10);
    }

    #[test]
    fn failure_carries_probe_location() {
        let x = Vector::from_vec(vec![1.0, 0.0]);
        let err = fd_jacobian(
            |v: &Vector| {
                if v[1] > 0.0 {
                    Err(Error::InvalidInput("outside".into()))
                } else {
                    Ok(v.clone())
                }
            },
            &x,
            1e-3,
        )
        .unwrap_err();
        match err {
            Error::Evaluation { location, .. } => assert_eq!(location, vec![1.0, 1e-3]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
