//! Built-in scenarios: the cubic example, the capacitor / nonlinear resistor
//! circuit, a non-involutive contact distribution and user-supplied linear
//! index-1 systems.

use std::sync::Arc;

use super::{Chart, Constraint, DaeSystem, Domain, InwfData, LinearSpec, Scenario, ScenarioDefaults};
use crate::error::{Error, Result};
use crate::numkit::{newton_solve, numeric_rank, Matrix, NewtonOptions, Vector, DEFAULT_RANK_TOL};

/// Distance kept from chart boundaries and singular loci.
pub const CHART_MARGIN: f64 = 1e-6;

const INV_SQRT3: f64 = 0.577_350_269_189_625_8;

pub fn builtin_names() -> &'static [&'static str] {
    &["cubic", "circuit", "contact", "linear", "cubic-inwf", "circuit-inwf"]
}

pub fn builtin(name: &str) -> Option<Scenario> {
    match name {
        "cubic" => Some(scenario_cubic()),
        "circuit" => Some(scenario_circuit()),
        "contact" => Some(scenario_contact()),
        "linear" => Some(decoupled_linear_example()),
        "cubic-inwf" => scenario_cubic().inwf_system().ok(),
        "circuit-inwf" => scenario_circuit().inwf_system().ok(),
        _ => None,
    }
}

fn v2(a: f64, b: f64) -> Vector {
    Vector::from_vec(vec![a, b])
}

fn v3(a: f64, b: f64, c: f64) -> Vector {
    Vector::from_vec(vec![a, b, c])
}

/// Root `s > 1/√3` of `s³ − s = value`, by Newton from 1.2. On this branch
/// the cubic is increasing and convex, so the iteration cannot leave it.
pub fn cubic_branch_root(value: f64) -> Result<f64> {
    let floor = INV_SQRT3.powi(3) - INV_SQRT3;
    if !value.is_finite() || value <= floor {
        return Err(Error::ChartRange { xi: vec![value] });
    }
    let out = newton_solve(
        |s: &Vector| Ok(Vector::from_element(1, s[0].powi(3) - s[0] - value)),
        |s: &Vector| Ok(Matrix::from_element(1, 1, 3.0 * s[0] * s[0] - 1.0)),
        &Vector::from_element(1, 1.2),
        NewtonOptions::new(2e-15 * (1.0 + value.abs()), 100),
    )?;
    let root = out.x[0];
    if root <= INV_SQRT3 {
        return Err(Error::ChartRange { xi: vec![value] });
    }
    Ok(root)
}

/// `[1, 3x₂² − 1; 0, 0]·ẋ = (−x₂, x₁)` with chart `ψ = (x₁ + x₂³ − x₂, x₁)`
/// on `x₂ > √3/3`.
pub fn scenario_cubic() -> Scenario {
    let system = DaeSystem {
        n: 2,
        e: Arc::new(|x: &Vector| Matrix::from_row_slice(2, 2, &[1.0, 3.0 * x[1] * x[1] - 1.0, 0.0, 0.0])),
        f: Arc::new(|x: &Vector| v2(-x[1], x[0])),
        df: Some(Arc::new(|_| Matrix::from_row_slice(2, 2, &[0.0, -1.0, 1.0, 0.0]))),
        constraint: Some(Constraint {
            value: Arc::new(|x: &Vector| Vector::from_element(1, x[0])),
            jacobian: Arc::new(|_| Matrix::from_row_slice(1, 2, &[1.0, 0.0])),
        }),
        domain: Domain::everywhere(2),
        nominal_point: v2(0.0, 1.0),
    };
    let chart = Chart {
        r: 1,
        psi: Arc::new(|x: &Vector| v2(x[0] + x[1].powi(3) - x[1], x[0])),
        psi_inv: Arc::new(|xi: &Vector| Ok(v2(xi[1], cubic_branch_root(xi[0] - xi[1])?))),
        dpsi: Arc::new(|x: &Vector| Matrix::from_row_slice(2, 2, &[1.0, 3.0 * x[1] * x[1] - 1.0, 1.0, 0.0])),
        domain: Domain::new("x2 > sqrt(3)/3", |x: &Vector| x[1] > INV_SQRT3 + CHART_MARGIN),
    };
    // F₁ = −g(ξ₁ − ξ₂) = F*(ξ₁) + c·ξ₂ with g the branch inverse and c the
    // divided difference of g; Q = [1, −c; 0, 1] removes the coupling.
    let q_equiv = |x: &Vector| -> Matrix {
        let xi1 = x[0] + x[1].powi(3) - x[1];
        let xi2 = x[0];
        let c = match cubic_branch_root(xi1) {
            Ok(g1) if xi2.abs() > 1e-6 => (g1 - x[1]) / xi2,
            Ok(g1) => 1.0 / (3.0 * g1 * g1 - 1.0),
            Err(_) => f64::NAN,
        };
        Matrix::from_row_slice(2, 2, &[1.0, -c, 0.0, 1.0])
    };
    let inwf = InwfData {
        f_star: Arc::new(|xi1: &Vector| Vector::from_element(1, -cubic_branch_root(xi1[0]).unwrap_or(f64::NAN))),
        q_equiv: Arc::new(q_equiv),
    };
    Scenario {
        name: "cubic".into(),
        system,
        chart: Some(chart),
        inwf: Some(inwf),
        reference_points: vec![
            ("x_minus".into(), v2(1.0, 0.7)),
            ("x_p".into(), v2(0.0, 1.0)),
            // kernel-rule value quoted in the literature for x_minus
            ("kernel_rule_quoted".into(), v2(0.0, 0.109)),
        ],
        notes: vec![
            "cubic DAE with a fold of E at x2 = ±sqrt(3)/3".into(),
            "chart inverse by Newton on the branch x2 > sqrt(3)/3; the closed-form root is not used".into(),
        ],
        manifold_branch: Domain::new("x2 > sqrt(3)/3", |x: &Vector| x[1] > INV_SQRT3),
        defaults: ScenarioDefaults {
            x_minus: v2(1.0, 0.7),
            t_end: 0.5,
            region_lower: v2(-0.5, 0.7),
            region_upper: v2(0.5, 1.6),
        },
        linear: None,
    }
}

/// Capacitor, nonlinear resistor `0 = x − y² − 2y` and a current source
/// `i = y·ẏ`: states η = (x, y, z) = (resistor current, resistor voltage,
/// capacitor voltage).
pub fn scenario_circuit() -> Scenario {
    let system = DaeSystem {
        n: 3,
        e: Arc::new(|v: &Vector| Matrix::from_row_slice(3, 3, &[0.0, -v[1], 1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])),
        f: Arc::new(|v: &Vector| {
            let (x, y, z) = (v[0], v[1], v[2]);
            v3(x, y + z, x - y * y - 2.0 * y)
        }),
        df: Some(Arc::new(|v: &Vector| {
            Matrix::from_row_slice(3, 3, &[1.0, 0.0, 0.0, 0.0, 1.0, 1.0, 1.0, -2.0 * v[1] - 2.0, 0.0])
        })),
        constraint: Some(Constraint {
            value: Arc::new(|v: &Vector| {
                let (x, y, z) = (v[0], v[1], v[2]);
                v2(y + z, x - y * y - 2.0 * y)
            }),
            jacobian: Arc::new(|v: &Vector| Matrix::from_row_slice(2, 3, &[0.0, 1.0, 1.0, 1.0, -2.0 * v[1] - 2.0, 0.0])),
        }),
        // Both y = 1 (the stated rank locus) and y = −1 (where Dψ and the
        // perturbed matrix degenerate) are excluded.
        domain: Domain::new("y != 1 and y != -1", |v: &Vector| {
            (v[1] - 1.0).abs() > CHART_MARGIN && (v[1] + 1.0).abs() > CHART_MARGIN
        }),
        nominal_point: v3(0.0, 0.0, 0.0),
    };
    let chart = Chart {
        r: 1,
        psi: Arc::new(|v: &Vector| {
            let (x, y, z) = (v[0], v[1], v[2]);
            v3(-0.5 * y * y + z, y + z, x - y * y - 2.0 * y)
        }),
        psi_inv: Arc::new(|xi: &Vector| {
            // y²/2 + y + (ξ₁ − ξ₂) = 0 on the branch y > −1
            let d = xi[0] - xi[1];
            let disc = 1.0 - 2.0 * d;
            if !(disc > 0.0) {
                return Err(Error::ChartRange {
                    xi: xi.iter().copied().collect(),
                });
            }
            let y = -2.0 * d / (1.0 + disc.sqrt());
            let z = xi[1] - y;
            let x = xi[2] + y * y + 2.0 * y;
            Ok(v3(x, y, z))
        }),
        dpsi: Arc::new(|v: &Vector| {
            let y = v[1];
            Matrix::from_row_slice(3, 3, &[0.0, -y, 1.0, 0.0, 1.0, 1.0, 1.0, -2.0 * y - 2.0, 0.0])
        }),
        domain: Domain::new("-1 < y < 1", |v: &Vector| v[1] > -1.0 + CHART_MARGIN && v[1] < 1.0 - CHART_MARGIN),
    };
    let q = Matrix::from_row_slice(3, 3, &[1.0, -2.0, -1.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]);
    let inwf = InwfData {
        f_star: Arc::new(|xi1: &Vector| xi1 * -2.0),
        q_equiv: Arc::new(move |_| q.clone()),
    };
    Scenario {
        name: "circuit".into(),
        system,
        chart: Some(chart),
        inwf: Some(inwf),
        reference_points: vec![
            ("eta_minus".into(), v3(0.0, 0.0, 0.1)),
            ("eta_p".into(), v3(0.0, 0.0, 0.0)),
        ],
        notes: vec![
            "C = 1, a(x, y) = x - y^2 - 2y, b(x, y) = y".into(),
            "the rank condition is usually quoted on y != 1, but Dpsi and the perturbed matrix are singular at y = -1; both loci are excluded".into(),
        ],
        manifold_branch: Domain::new("-1 < y < 1", |v: &Vector| v[1] > -1.0 && v[1] < 1.0),
        defaults: ScenarioDefaults {
            x_minus: v3(0.0, 0.0, 0.1),
            t_end: 1.0,
            region_lower: v3(-0.5, -0.5, -0.5),
            region_upper: v3(0.5, 0.5, 0.5),
        },
        linear: None,
    }
}

/// `ker E = span{∂₁ + x₂∂₃, ∂₂}`, whose bracket −∂₃ leaves the distribution.
pub fn scenario_contact() -> Scenario {
    let system = DaeSystem {
        n: 3,
        e: Arc::new(|v: &Vector| Matrix::from_row_slice(3, 3, &[v[1], 0.0, -1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0])),
        f: Arc::new(|v: &Vector| v3(v[2], v[0], v[1])),
        df: None,
        constraint: None,
        domain: Domain::everywhere(3),
        nominal_point: v3(0.0, 0.0, 0.0),
    };
    Scenario {
        name: "contact".into(),
        system,
        chart: None,
        inwf: None,
        reference_points: vec![("x_p".into(), v3(0.0, 0.0, 0.0))],
        notes: vec!["synthetic system with a non-involutive kernel distribution".into()],
        manifold_branch: Domain::everywhere(3),
        defaults: ScenarioDefaults {
            x_minus: v3(0.0, 0.0, 0.1),
            t_end: 1.0,
            region_lower: v3(-0.5, -0.5, -0.5),
            region_upper: v3(0.5, 0.5, 0.5),
        },
        linear: None,
    }
}

/// Transformation `(Q, P)` with `Q·E·P⁻¹ = [I 0; 0 0]` and
/// `Q·H·P⁻¹ = [A₁ 0; 0 I]`.
#[derive(Debug, Clone)]
pub struct LinearDecoupling {
    pub q: Matrix,
    pub p: Matrix,
    pub a1: Option<Matrix>,
}

const BLOCK_TOL: f64 = 1e-9;

fn block_error(actual: &Matrix, expected: &Matrix) -> f64 {
    (actual - expected).amax() / (1.0 + expected.amax())
}

/// Linear index-1 DAE `E·ẋ = H·x` with a user-supplied decoupling. The chart
/// is `ψ(x) = P·x` and the reduced dynamics are `ξ̇₁ = A₁·ξ₁`.
pub fn scenario_linear(name: &str, e: &Matrix, h: &Matrix, decoupling: &LinearDecoupling) -> Result<Scenario> {
    let n = e.nrows();
    for (label, m) in [("E", e), ("H", h), ("Q", &decoupling.q), ("P", &decoupling.p)] {
        if m.shape() != (n, n) {
            return Err(Error::Validation(format!("{label} must be {n}x{n}, got {:?}", m.shape())));
        }
        if !m.iter().all(|v| v.is_finite()) {
            return Err(Error::Validation(format!("{label} has non-finite entries")));
        }
    }
    let n1 = numeric_rank(e, DEFAULT_RANK_TOL)?.rank;
    if n1 == n {
        return Err(Error::Validation(
            "E is invertible: no algebraic part (n2 = 0), this is a pure ODE".into(),
        ));
    }
    let p_inv = decoupling
        .p
        .clone()
        .try_inverse()
        .ok_or_else(|| Error::Validation("P is not invertible".into()))?;
    if !decoupling.q.clone().lu().is_invertible() {
        return Err(Error::Validation("Q is not invertible".into()));
    }
    let qe = &decoupling.q * e * &p_inv;
    let qh = &decoupling.q * h * &p_inv;
    let n2 = n - n1;
    let mut e_block = Matrix::zeros(n, n);
    for i in 0..n1 {
        e_block[(i, i)] = 1.0;
    }
    if block_error(&qe, &e_block) > BLOCK_TOL {
        return Err(Error::Validation(format!(
            "Q E P^-1 is not [I 0; 0 0] (deviation {:e})",
            block_error(&qe, &e_block)
        )));
    }
    let a1 = qh.view((0, 0), (n1, n1)).into_owned();
    let mut h_block = Matrix::zeros(n, n);
    h_block.view_mut((0, 0), (n1, n1)).copy_from(&a1);
    for i in 0..n2 {
        h_block[(n1 + i, n1 + i)] = 1.0;
    }
    if block_error(&qh, &h_block) > BLOCK_TOL {
        return Err(Error::Validation(format!(
            "Q H P^-1 is not [A1 0; 0 I] (deviation {:e})",
            block_error(&qh, &h_block)
        )));
    }
    if let Some(given) = &decoupling.a1 {
        if given.shape() != a1.shape() || block_error(given, &a1) > BLOCK_TOL {
            return Err(Error::Validation("supplied A1 does not match Q H P^-1".into()));
        }
    }

    let q2h = (decoupling.q.rows(n1, n2) * h).into_owned();
    let e_c = e.clone();
    let h_c = h.clone();
    let h_f = h.clone();
    let p = decoupling.p.clone();
    let p_psi = p.clone();
    let q = decoupling.q.clone();
    let a1_f = a1.clone();
    let q2h_jac = q2h.clone();
    let system = DaeSystem {
        n,
        e: Arc::new(move |_| e_c.clone()),
        f: Arc::new(move |x: &Vector| &h_f * x),
        df: Some(Arc::new(move |_| h_c.clone())),
        constraint: Some(Constraint {
            value: Arc::new(move |x: &Vector| &q2h * x),
            jacobian: Arc::new(move |_| q2h_jac.clone()),
        }),
        domain: Domain::everywhere(n),
        nominal_point: Vector::zeros(n),
    };
    let chart = Chart {
        r: n1,
        psi: Arc::new(move |x: &Vector| &p_psi * x),
        psi_inv: Arc::new(move |xi: &Vector| Ok(&p_inv * xi)),
        dpsi: Arc::new(move |_| p.clone()),
        domain: Domain::everywhere(n),
    };
    let inwf = InwfData {
        f_star: Arc::new(move |xi1: &Vector| &a1_f * xi1),
        q_equiv: Arc::new(move |_| q.clone()),
    };
    let to_rows = |m: &Matrix| -> Vec<Vec<f64>> { m.row_iter().map(|r| r.iter().copied().collect()).collect() };
    let mut x_minus = Vector::zeros(n);
    x_minus.fill(0.1);
    Ok(Scenario {
        name: name.to_string(),
        system,
        chart: Some(chart),
        inwf: Some(inwf),
        reference_points: vec![("x_p".into(), Vector::zeros(n))],
        notes: vec![format!("linear index-1 DAE, n1 = {n1}, n2 = {n2}")],
        manifold_branch: Domain::everywhere(n),
        defaults: ScenarioDefaults {
            x_minus,
            t_end: 1.0,
            region_lower: Vector::from_element(n, -1.0),
            region_upper: Vector::from_element(n, 1.0),
        },
        linear: Some(LinearSpec {
            e: to_rows(e),
            h: to_rows(h),
            q: to_rows(&decoupling.q),
            p: to_rows(&decoupling.p),
            a1: Some(to_rows(&a1)),
        }),
    })
}

/// `diag(1, 0)·ẋ = diag(−2, 1)·x`: the normal form with `F*(ξ₁) = −2ξ₁`.
fn decoupled_linear_example() -> Scenario {
    let e = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
    let h = Matrix::from_row_slice(2, 2, &[-2.0, 0.0, 0.0, 1.0]);
    let d = LinearDecoupling {
        q: Matrix::identity(2, 2),
        p: Matrix::identity(2, 2),
        a1: None,
    };
    scenario_linear("linear", &e, &h, &d).expect("identity decoupling is valid")
}
