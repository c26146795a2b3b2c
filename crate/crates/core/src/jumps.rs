//! Consistent initialization: maps an inconsistent `x⁻` to a point `x⁺` on
//! the consistency manifold.
//!
//! * `projector_chart`: `Ω = ψ⁻¹∘π∘ψ`, which keeps `ξ₁` and zeroes `ξ₂`.
//! * `projector_fastflow`: the same map obtained numerically by running the
//!   perturbed system through its boundary layer and extrapolating `ε → 0`.
//! * `kernel_rule`: `x⁺ − x⁻ ∈ ker E(x⁺)` together with `F₂(x⁺) = 0`.
//! * `nearest_point`: the consistent point closest to `x⁻` in the Euclidean
//!   norm, a stand-in for generic numerical consistent-initialization search.
//!
//! Only the projector commutes with changes of coordinates.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::analysis::Region;
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::numkit::linalg::{align_basis, distance_to_span, row_space_matrix};
use crate::numkit::{
    default_fd_step, fd_jacobian, kernel_matrix, newton_solve, IntegratorConfig, Matrix, NewtonOptions, TimeGrid,
    Vector, DEFAULT_RANK_TOL,
};
use crate::perturbation::{integrate_perturbed, PerturbedField};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JumpMethod {
    ProjectorChart,
    ProjectorFastflow,
    KernelRule,
    NearestPoint,
}

impl JumpMethod {
    pub const ALL: [JumpMethod; 4] = [
        JumpMethod::ProjectorChart,
        JumpMethod::ProjectorFastflow,
        JumpMethod::KernelRule,
        JumpMethod::NearestPoint,
    ];

    pub fn name(self) -> &'static str {
        match self {
            JumpMethod::ProjectorChart => "projector_chart",
            JumpMethod::ProjectorFastflow => "projector_fastflow",
            JumpMethod::KernelRule => "kernel_rule",
            JumpMethod::NearestPoint => "nearest_point",
        }
    }
}

impl fmt::Display for JumpMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpResult {
    pub method: JumpMethod,
    pub x_minus: Vec<f64>,
    pub x_plus: Vec<f64>,
    /// `‖F₂(x⁺)‖`
    pub constraint_residual: f64,
    /// distance of `x⁺ − x⁻` to `ker E(x⁺)`; kernel rule only
    #[serde(default)]
    pub kernel_residual: Option<f64>,
    pub iterations: usize,
    /// fast-flow only: distance between the extrapolated point and the
    /// endpoint at the smallest ε
    #[serde(default)]
    pub error_estimate: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub other_roots: Vec<Vec<f64>>,
    pub diagnostics: Vec<String>,
}

impl JumpResult {
    pub fn x_plus(&self) -> Vector {
        Vector::from_column_slice(&self.x_plus)
    }
}

fn to_vec(x: &Vector) -> Vec<f64> {
    x.iter().copied().collect()
}

fn constraint_residual(s: &Scenario, x_ref: &Vector, x: &Vector) -> Result<f64> {
    Ok(s.system.constraint_near(x_ref)?.value(x)?.norm())
}

/// `Ω(x⁻) = ψ⁻¹(ξ₁(x⁻), 0)`.
pub fn project_consistent_chart(s: &Scenario, x_minus: &Vector) -> Result<JumpResult> {
    let chart = s.chart()?;
    let xi1 = chart.xi1(x_minus)?;
    let zeros = Vector::zeros(s.dim() - chart.r);
    let x_plus = chart.compose_inv(&xi1, &zeros)?;
    Ok(JumpResult {
        method: JumpMethod::ProjectorChart,
        x_minus: to_vec(x_minus),
        x_plus: to_vec(&x_plus),
        constraint_residual: constraint_residual(s, x_minus, &x_plus)?,
        kernel_residual: None,
        iterations: 0,
        error_estimate: None,
        other_roots: Vec::new(),
        diagnostics: vec![format!("xi1 = {:?} kept, xi2 set to 0", xi1.as_slice())],
    })
}

/// Residual of `ξ₂` at which a fast-flow run stops.
pub const DEFAULT_LAYER_TOL: f64 = 1e-8;

/// Layer window `1.1·ε·ln(‖ξ₂‖/layer_tol)`, at least `1.1·ε`.
pub fn layer_window(eps: f64, xi2_norm: f64, layer_tol: f64) -> f64 {
    1.1 * eps * (xi2_norm / layer_tol).ln().max(1.0)
}

/// Runs the perturbed system across the boundary layer for each ε and
/// extrapolates the endpoints, in chart coordinates, linearly in ε to
/// `ε = 0` from the two smallest values.
pub fn project_consistent_fastflow(
    s: &Scenario,
    x_minus: &Vector,
    eps_schedule: &[f64],
    layer_tol: f64,
    config: &IntegratorConfig,
) -> Result<JumpResult> {
    if eps_schedule.len() < 2 {
        return Err(Error::Config(format!(
            "fast-flow projection needs at least 2 epsilon values, got {}",
            eps_schedule.len()
        )));
    }
    if !eps_schedule.iter().all(|e| *e > 0.0 && e.is_finite()) || !(layer_tol > 0.0) {
        return Err(Error::Config("epsilon values and layer tolerance must be positive".into()));
    }
    let mut eps: Vec<f64> = eps_schedule.to_vec();
    eps.sort_by(f64::total_cmp);
    eps.dedup();
    if eps.len() < 2 {
        return Err(Error::Config("fast-flow projection needs 2 distinct epsilon values".into()));
    }
    let chart = s.chart()?;
    s.inwf()?;
    let xi2_norm = chart.xi2(x_minus)?.norm();

    let mut diagnostics = Vec::new();
    let mut endpoints = Vec::with_capacity(2);
    let mut steps = 0;
    for &e in &eps[..2] {
        let t_layer = layer_window(e, xi2_norm, layer_tol);
        let pf = PerturbedField::new(s, e)?;
        let grid = TimeGrid::new(vec![0.0, t_layer])?;
        let traj = integrate_perturbed(&pf, x_minus, &grid, config)?;
        steps += traj.stats.accepted_steps;
        let end = traj.last_state().expect("two output times");
        diagnostics.push(format!(
            "eps = {e:e}: window T = {t_layer:.6e}, {:?} steps, endpoint {:?}",
            traj.stats.accepted_steps,
            end.as_slice()
        ));
        endpoints.push(end);
    }
    let (e0, e1) = (eps[0], eps[1]);
    // ξ(ε) ≈ ξ₀ + c·ε through the two smallest values; extrapolating in the
    // chart keeps the result on the constraint set when F₂ is curved
    let xi0 = chart.psi(&endpoints[0])?;
    let xi1 = chart.psi(&endpoints[1])?;
    let xi_plus = (&xi0 * e1 - &xi1 * e0) / (e1 - e0);
    let x_plus = chart.psi_inv(&xi_plus)?;
    let estimate = (&x_plus - &endpoints[0]).norm();
    diagnostics.push(format!("linear extrapolation in chart coordinates to eps = 0 from eps = {e0:e}, {e1:e}"));
    Ok(JumpResult {
        method: JumpMethod::ProjectorFastflow,
        x_minus: to_vec(x_minus),
        x_plus: to_vec(&x_plus),
        constraint_residual: constraint_residual(s, x_minus, &x_plus)?,
        kernel_residual: None,
        iterations: steps,
        error_estimate: Some(estimate),
        other_roots: Vec::new(),
        diagnostics,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelRuleOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Also starts Newton from the points of this region and reports every
    /// distinct root.
    #[serde(default)]
    pub multistart: Option<Region>,
}

impl Default for KernelRuleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            multistart: None,
        }
    }
}

/// Residual `[F₂(x); W(x)ᵀ(x − x⁻)]` with `W(x)` an orthonormal basis of
/// the row space of `E(x)` rotated to match the basis at `x⁻`.
fn kernel_rule_residual(s: &Scenario, x_minus: &Vector, w_ref: &Matrix, x: &Vector) -> Result<Vector> {
    let f2 = s.system.constraint_near(x_minus)?.value(x)?;
    let w = row_space_matrix(&s.system.eval_e(x)?, DEFAULT_RANK_TOL)?;
    if w.ncols() != w_ref.ncols() {
        return Err(Error::Evaluation {
            location: to_vec(x),
            message: "rank of E changed".into(),
        });
    }
    let w = align_basis(&w, w_ref);
    let tangential = w.transpose() * (x - x_minus);
    let mut r = Vector::zeros(f2.len() + tangential.len());
    r.rows_mut(0, f2.len()).copy_from(&f2);
    r.rows_mut(f2.len(), tangential.len()).copy_from(&tangential);
    Ok(r)
}

fn kernel_rule_newton(s: &Scenario, x_minus: &Vector, w_ref: &Matrix, start: &Vector, opts: &KernelRuleOptions) -> Result<(Vector, usize)> {
    let res = |x: &Vector| kernel_rule_residual(s, x_minus, w_ref, x);
    let out = newton_solve(
        res,
        |x: &Vector| fd_jacobian(res, x, default_fd_step(x)),
        start,
        NewtonOptions::new(opts.tol, opts.max_iter),
    )?;
    Ok((out.x, out.iterations))
}

/// Distance of `d` to `ker E(x)`.
pub fn kernel_distance(s: &Scenario, x: &Vector, d: &Vector) -> Result<f64> {
    let k = kernel_matrix(&s.system.eval_e(x)?, DEFAULT_RANK_TOL)?;
    Ok(distance_to_span(d, &k))
}

/// Name of the reference point holding a previously quoted kernel-rule
/// result, checked against the defining equations when present.
pub const QUOTED_KERNEL_RULE_POINT: &str = "kernel_rule_quoted";

pub fn jump_kernel_rule(s: &Scenario, x_minus: &Vector, opts: &KernelRuleOptions) -> Result<JumpResult> {
    s.system.domain.check(x_minus)?;
    let w_ref = row_space_matrix(&s.system.eval_e(x_minus)?, DEFAULT_RANK_TOL)?;
    let (x_plus, iterations) = kernel_rule_newton(s, x_minus, &w_ref, x_minus, opts)?;
    let mut diagnostics = vec![
        "complement of ker E(x+): orthonormal row-space basis of E(x+), Procrustes-aligned to the basis at x-".to_string(),
    ];

    let mut other_roots = Vec::new();
    if let Some(region) = &opts.multistart {
        let mut roots = vec![x_plus.clone()];
        for start in region.samples() {
            if !s.system.domain.contains(&start) {
                continue;
            }
            if let Ok((r, _)) = kernel_rule_newton(s, x_minus, &w_ref, &start, opts) {
                if roots.iter().all(|q| (q - &r).norm() > 1e-6 * (1.0 + r.norm())) {
                    roots.push(r);
                }
            }
        }
        other_roots = roots[1..].iter().map(to_vec).collect();
        if other_roots.is_empty() {
            diagnostics.push(format!("multistart over {} points found no other root", region.count + region.probes.len()));
        } else {
            diagnostics.push(format!("warning: multistart found {} further root(s)", other_roots.len()));
        }
    }

    if let Some(quoted) = s.point(QUOTED_KERNEL_RULE_POINT) {
        if (x_minus - &s.defaults.x_minus).amax() == 0.0 {
            match kernel_rule_residual(s, x_minus, &w_ref, quoted) {
                Ok(r) => diagnostics.push(format!(
                    "quoted value {:?} does not satisfy the kernel-rule equations (residual {:.3e}); computed root {:?}",
                    quoted.as_slice(),
                    r.norm(),
                    x_plus.as_slice()
                )),
                Err(e) => diagnostics.push(format!("quoted value {:?} could not be checked: {e}", quoted.as_slice())),
            }
        }
    }

    Ok(JumpResult {
        method: JumpMethod::KernelRule,
        x_minus: to_vec(x_minus),
        x_plus: to_vec(&x_plus),
        constraint_residual: constraint_residual(s, x_minus, &x_plus)?,
        kernel_residual: Some(kernel_distance(s, &x_plus, &(&x_plus - x_minus))?),
        iterations,
        error_estimate: None,
        other_roots,
        diagnostics,
    })
}

/// Minimizes `‖x − x⁻‖` subject to `F₂(x) = 0` by Newton on the KKT system
/// `x − x⁻ + DF₂(x)ᵀλ = 0`, `F₂(x) = 0`.
pub fn jump_nearest(s: &Scenario, x_minus: &Vector, tol: f64, max_iter: usize) -> Result<JumpResult> {
    s.system.domain.check(x_minus)?;
    let c = s.system.constraint_near(x_minus)?;
    let n = s.dim();
    let m = c.value(x_minus)?.len();
    let split = |z: &Vector| (z.rows(0, n).into_owned(), z.rows(n, m).into_owned());
    let kkt = |z: &Vector| -> Result<Vector> {
        let (x, lambda) = split(z);
        let mut r = Vector::zeros(n + m);
        r.rows_mut(0, n).copy_from(&(&x - x_minus + c.jacobian(&x)?.transpose() * lambda));
        r.rows_mut(n, m).copy_from(&c.value(&x)?);
        Ok(r)
    };
    let kkt_jacobian = |z: &Vector| -> Result<Matrix> {
        let (x, lambda) = split(z);
        let j = c.jacobian(&x)?;
        // curvature term D(DF₂ᵀλ); zero for linear constraints
        let curvature = fd_jacobian(|p: &Vector| Ok(c.jacobian(p)?.transpose() * &lambda), &x, default_fd_step(&x))?;
        let mut k = Matrix::zeros(n + m, n + m);
        k.view_mut((0, 0), (n, n)).copy_from(&(Matrix::identity(n, n) + curvature));
        k.view_mut((0, n), (n, m)).copy_from(&j.transpose());
        k.view_mut((n, 0), (m, n)).copy_from(&j);
        Ok(k)
    };
    let mut z0 = Vector::zeros(n + m);
    z0.rows_mut(0, n).copy_from(x_minus);
    let out = newton_solve(kkt, kkt_jacobian, &z0, NewtonOptions::new(tol, max_iter))?;
    let (x_plus, lambda) = split(&out.x);
    s.system.domain.check(&x_plus)?;
    Ok(JumpResult {
        method: JumpMethod::NearestPoint,
        x_minus: to_vec(x_minus),
        x_plus: to_vec(&x_plus),
        constraint_residual: c.value(&x_plus)?.norm(),
        kernel_residual: None,
        iterations: out.iterations,
        error_estimate: None,
        other_roots: Vec::new(),
        diagnostics: vec![
            "minimal-norm consistent point (stand-in for a generic consistent-initialization search)".into(),
            format!("multiplier {:?}", lambda.as_slice()),
        ],
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct JumpSettings {
    pub tol: f64,
    pub max_iter: usize,
    pub eps_schedule: Vec<f64>,
    pub layer_tol: f64,
    pub integrator: IntegratorConfig,
    pub multistart: Option<Region>,
}

impl Default for JumpSettings {
    fn default() -> Self {
        Self {
            tol: 1e-12,
            max_iter: 50,
            eps_schedule: vec![1e-3, 1e-4],
            layer_tol: DEFAULT_LAYER_TOL,
            integrator: IntegratorConfig::default(),
            multistart: None,
        }
    }
}

pub fn run_method(s: &Scenario, method: JumpMethod, x_minus: &Vector, settings: &JumpSettings) -> Result<JumpResult> {
    match method {
        JumpMethod::ProjectorChart => project_consistent_chart(s, x_minus),
        JumpMethod::ProjectorFastflow => {
            project_consistent_fastflow(s, x_minus, &settings.eps_schedule, settings.layer_tol, &settings.integrator)
        }
        JumpMethod::KernelRule => jump_kernel_rule(
            s,
            x_minus,
            &KernelRuleOptions {
                tol: settings.tol,
                max_iter: settings.max_iter,
                multistart: settings.multistart.clone(),
            },
        ),
        JumpMethod::NearestPoint => jump_nearest(s, x_minus, settings.tol, settings.max_iter),
    }
}

pub const COMMUTATION_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoordinateFreeness {
    pub method: JumpMethod,
    pub x_minus: Vec<f64>,
    pub xi_minus: Vec<f64>,
    /// `ψ(jump_x(x⁻))`
    pub mapped_jump: Vec<f64>,
    /// `jump_ξ(ψ(x⁻))`
    pub jump_in_chart: Vec<f64>,
    pub defect: f64,
    pub tol: f64,
    pub commutes: bool,
}

/// Compares the jump computed in `x` and mapped by `ψ` with the jump
/// computed directly in chart coordinates.
pub fn coordinate_freeness_test(
    s: &Scenario,
    method: JumpMethod,
    x_minus: &Vector,
    settings: &JumpSettings,
) -> Result<CoordinateFreeness> {
    let chart = s.chart()?;
    let transformed = s.inwf_system()?;
    let in_x = run_method(s, method, x_minus, settings)?;
    let mapped = chart.psi(&in_x.x_plus())?;
    let xi_minus = chart.psi(x_minus)?;
    let in_xi = run_method(&transformed, method, &xi_minus, settings)?;
    let defect = (&mapped - in_xi.x_plus()).norm();
    // a numerical projector commutes up to its own error estimates
    let tol = match (in_x.error_estimate, in_xi.error_estimate) {
        (Some(ex), Some(exi)) => COMMUTATION_TOL + chart.dpsi(&in_x.x_plus())?.norm() * ex + exi,
        _ => COMMUTATION_TOL,
    };
    Ok(CoordinateFreeness {
        method,
        x_minus: to_vec(x_minus),
        xi_minus: to_vec(&xi_minus),
        mapped_jump: to_vec(&mapped),
        jump_in_chart: in_xi.x_plus,
        defect,
        tol,
        commutes: defect <= tol,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MethodOutcome {
    pub method: JumpMethod,
    pub result: Option<JumpResult>,
    pub error: Option<String>,
    pub coordinate_freeness: Option<CoordinateFreeness>,
    pub coordinate_freeness_error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpComparison {
    pub scenario: String,
    pub x_minus: Vec<f64>,
    pub outcomes: Vec<MethodOutcome>,
}

impl JumpComparison {
    /// Plain-text table, one line per method.
    pub fn table(&self) -> String {
        let mut out = format!("scenario {}, x- = {:?}\n", self.scenario, self.x_minus);
        out += &format!("{:<20} {:<44} {:>12} {:>12}\n", "method", "x+", "|F2(x+)|", "defect");
        for o in &self.outcomes {
            let point = match (&o.result, &o.error) {
                (Some(r), _) => format!("{:?}", r.x_plus.iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>())
                    .replace('"', ""),
                (None, Some(e)) => format!("error: {e}"),
                _ => "-".into(),
            };
            let res = o.result.as_ref().map_or("-".into(), |r| format!("{:.2e}", r.constraint_residual));
            let defect = o
                .coordinate_freeness
                .as_ref()
                .map_or("-".into(), |c| format!("{:.3e}{}", c.defect, if c.commutes { "" } else { " *" }));
            out += &format!("{:<20} {:<44} {:>12} {:>12}\n", o.method.name(), point, res, defect);
        }
        out += "(* = does not commute with the chart: defect above 1e-6, or above the error estimate for fast flow)\n";
        for o in &self.outcomes {
            if let Some(r) = &o.result {
                for d in &r.diagnostics {
                    out += &format!("  [{}] {d}\n", o.method.name());
                }
            }
        }
        out
    }
}

/// Runs every method and, where a chart exists, its coordinate-freeness
/// test. Per-method failures are recorded rather than returned.
pub fn compare_methods(s: &Scenario, x_minus: &Vector, settings: &JumpSettings) -> Result<JumpComparison> {
    if x_minus.len() != s.dim() {
        return Err(Error::InvalidInput(format!(
            "initial point has {} components, scenario dimension is {}",
            x_minus.len(),
            s.dim()
        )));
    }
    let mut outcomes = Vec::new();
    for method in JumpMethod::ALL {
        let (result, error) = match run_method(s, method, x_minus, settings) {
            Ok(r) => (Some(r), None),
            Err(e) => (None, Some(e.to_string())),
        };
        let (cf, cf_error) = if s.chart.is_some() && result.is_some() {
            match coordinate_freeness_test(s, method, x_minus, settings) {
                Ok(c) => (Some(c), None),
                Err(e) => (None, Some(e.to_string())),
            }
        } else {
            (None, None)
        };
        outcomes.push(MethodOutcome {
            method,
            result,
            error,
            coordinate_freeness: cf,
            coordinate_freeness_error: cf_error,
        });
    }
    Ok(JumpComparison {
        scenario: s.name.clone(),
        x_minus: to_vec(x_minus),
        outcomes,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, scenario_circuit, scenario_cubic};
    use crate::numkit::newton::bisect;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    fn kernel_rule_oracle() -> f64 {
        bisect(|s| (s - 0.7) * (3.0 * s * s - 1.0) - 1.0, 1.0, 1.2, 1e-15).unwrap()
    }

    #[test]
    fn projector_examples() {
        let r = project_consistent_chart(&scenario_cubic(), &v(&[1.0, 0.7])).unwrap();
        assert_eq!(r.x_plus[0], 0.0);
        assert!((r.x_plus[1] - 1.2335).abs() < 1e-3);
        let r = project_consistent_chart(&scenario_circuit(), &v(&[0.0, 0.0, 0.1])).unwrap();
        let y = -1.0 + 0.8f64.sqrt();
        assert!((r.x_plus() - v(&[-0.2, y, -y])).amax() < 1e-14);
        assert!(r.constraint_residual < 1e-14);
    }

    #[test]
    fn projector_is_idempotent_and_keeps_xi1() {
        for (s, x) in [(scenario_cubic(), v(&[0.4, 0.9])), (scenario_circuit(), v(&[0.2, -0.3, 0.25]))] {
            let once = project_consistent_chart(&s, &x).unwrap().x_plus();
            let twice = project_consistent_chart(&s, &once).unwrap().x_plus();
            assert!((&once - &twice).amax() < 1e-9);
            let c = s.chart().unwrap();
            assert!((c.xi1(&once).unwrap() - c.xi1(&x).unwrap()).amax() < 1e-8);
        }
    }

    #[test]
    fn projector_reports_chart_range_errors() {
        // ξ₁ = −1 lies below the fold value of s³ − s on the branch
        let e = project_consistent_chart(&scenario_cubic(), &v(&[-2.0, 1.0])).unwrap_err();
        assert!(matches!(e, Error::ChartRange { .. }), "{e:?}");
        let e = project_consistent_chart(&builtin("contact").unwrap(), &v(&[0.0, 0.0, 0.1])).unwrap_err();
        assert!(matches!(e, Error::Capability(_)));
    }

    #[test]
    fn kernel_rule_cubic_matches_bisection() {
        let r = jump_kernel_rule(&scenario_cubic(), &v(&[1.0, 0.7]), &KernelRuleOptions::default()).unwrap();
        assert!(r.x_plus[0].abs() < 1e-12);
        assert!((r.x_plus[1] - kernel_rule_oracle()).abs() < 1e-8);
        assert!(r.kernel_residual.unwrap() < 1e-10);
        assert!(r.diagnostics.iter().any(|d| d.contains("0.109")), "{:?}", r.diagnostics);
    }

    #[test]
    fn kernel_rule_in_chart_coordinates() {
        let s = builtin("cubic-inwf").unwrap();
        let r = jump_kernel_rule(&s, &v(&[0.643, 1.0]), &KernelRuleOptions::default()).unwrap();
        assert!((r.x_plus() - v(&[0.643, 0.0])).amax() < 1e-12);
    }

    #[test]
    fn kernel_rule_fixes_consistent_points() {
        let x = v(&[0.0, 1.1]);
        let r = jump_kernel_rule(&scenario_cubic(), &x, &KernelRuleOptions::default()).unwrap();
        assert_eq!(r.x_plus(), x);
        assert_eq!(r.iterations, 0);
    }

    #[test]
    fn kernel_rule_membership_certificate() {
        let s = scenario_circuit();
        let x_minus = v(&[0.05, 0.1, 0.1]);
        let r = jump_kernel_rule(&s, &x_minus, &KernelRuleOptions::default()).unwrap();
        let d = r.x_plus() - &x_minus;
        let k = kernel_matrix(&s.system.eval_e(&r.x_plus()).unwrap(), DEFAULT_RANK_TOL).unwrap();
        assert!(distance_to_span(&d, &k) <= 1e-7 * d.norm());
    }

    #[test]
    fn kernel_rule_multistart_reports_roots() {
        let opts = KernelRuleOptions {
            multistart: Some(Region::new(&[-0.5, 0.0], &[0.5, 2.0]).unwrap().with_count(30)),
            ..Default::default()
        };
        let r = jump_kernel_rule(&scenario_cubic(), &v(&[1.0, 0.7]), &opts).unwrap();
        // the cubic in x₂ has a single real root
        assert!(r.other_roots.is_empty(), "{:?}", r.other_roots);
        assert!(r.diagnostics.iter().any(|d| d.contains("multistart")));
    }

    #[test]
    fn nearest_point_examples() {
        let r = jump_nearest(&scenario_cubic(), &v(&[1.0, 0.7]), 1e-12, 50).unwrap();
        assert_eq!(r.x_plus, vec![0.0, 0.7]);
        let r = jump_nearest(&builtin("cubic-inwf").unwrap(), &v(&[0.643, 1.0]), 1e-12, 50).unwrap();
        assert!((r.x_plus() - v(&[0.643, 0.0])).amax() < 1e-15);
        let x = v(&[0.0, 1.1]);
        assert_eq!(jump_nearest(&scenario_cubic(), &x, 1e-12, 50).unwrap().x_plus(), x);
    }

    #[test]
    fn nearest_point_on_a_curved_constraint_is_a_kkt_point() {
        let s = scenario_circuit();
        let x_minus = v(&[0.0, 0.0, 0.1]);
        let r = jump_nearest(&s, &x_minus, 1e-12, 50).unwrap();
        assert!(r.constraint_residual < 1e-12);
        // x⁺ − x⁻ is normal to the constraint set
        let j = s.system.constraint_near(&x_minus).unwrap().jacobian(&r.x_plus()).unwrap();
        let tangent = kernel_matrix(&j, 1e-12).unwrap();
        assert!((tangent.transpose() * (r.x_plus() - &x_minus)).amax() < 1e-10);
    }

    #[test]
    fn fastflow_agrees_with_chart_projection() {
        let s = scenario_circuit();
        let x = v(&[0.0, 0.0, 0.1]);
        let chart = project_consistent_chart(&s, &x).unwrap().x_plus();
        let ff = project_consistent_fastflow(&s, &x, &[1e-2, 1e-3], 1e-6, &IntegratorConfig::default()).unwrap();
        let err = (ff.x_plus() - &chart).norm();
        assert!(err < 1e-3, "{err}");
        assert!(err <= ff.error_estimate.unwrap());
    }

    #[test]
    fn fastflow_on_the_normal_form() {
        let s = builtin("linear").unwrap();
        let ff = project_consistent_fastflow(&s, &v(&[0.1, 0.1]), &[1e-2, 1e-3], 1e-8, &IntegratorConfig::default()).unwrap();
        assert!((ff.x_plus[0] - 0.1).abs() < 1e-3);
        assert!(ff.x_plus[1].abs() <= 1e-8);
    }

    #[test]
    fn fastflow_needs_two_values() {
        let s = scenario_circuit();
        let e = project_consistent_fastflow(&s, &v(&[0.0, 0.0, 0.1]), &[1e-2], 1e-8, &IntegratorConfig::default());
        assert!(matches!(e, Err(Error::Config(_))));
    }

    #[test]
    fn coordinate_freeness_on_the_cubic() {
        let s = scenario_cubic();
        let x = v(&[1.0, 0.7]);
        let settings = JumpSettings::default();
        let p = coordinate_freeness_test(&s, JumpMethod::ProjectorChart, &x, &settings).unwrap();
        assert!(p.commutes && p.defect <= 1e-6, "{p:?}");
        let k = coordinate_freeness_test(&s, JumpMethod::KernelRule, &x, &settings).unwrap();
        let root = kernel_rule_oracle();
        let expected = (root.powi(3) - root - 0.643).abs();
        assert!((k.defect - expected).abs() < 1e-8);
        assert!(k.defect >= 0.1);
        let n = coordinate_freeness_test(&s, JumpMethod::NearestPoint, &x, &settings).unwrap();
        assert!((n.defect - 1.0).abs() < 1e-12);
    }

    #[test]
    fn identity_chart_commutes_for_every_method() {
        let s = builtin("linear").unwrap();
        let x = v(&[0.3, -0.2]);
        for m in JumpMethod::ALL {
            let c = coordinate_freeness_test(&s, m, &x, &JumpSettings::default()).unwrap();
            assert!(c.commutes, "{m}: {}", c.defect);
        }
    }

    #[test]
    fn every_method_satisfies_the_constraint_with_default_settings() {
        for (s, x) in [(scenario_cubic(), v(&[1.0, 0.7])), (scenario_circuit(), v(&[0.0, 0.0, 0.1]))] {
            let chart = project_consistent_chart(&s, &x).unwrap().x_plus();
            for m in JumpMethod::ALL {
                let r = run_method(&s, m, &x, &JumpSettings::default()).unwrap();
                assert!(r.constraint_residual <= 1e-8, "{} {m}: {:e}", s.name, r.constraint_residual);
                if m == JumpMethod::ProjectorFastflow {
                    assert!((r.x_plus() - &chart).amax() <= r.error_estimate.unwrap());
                }
            }
        }
    }

    #[test]
    fn comparison_table_lists_every_method() {
        let s = builtin("contact").unwrap();
        let c = compare_methods(&s, &v(&[0.0, 0.0, 0.1]), &JumpSettings::default()).unwrap();
        assert_eq!(c.outcomes.len(), 4);
        assert!(c.outcomes[0].error.as_ref().unwrap().contains("chart"));
        assert!(c.outcomes[3].result.is_some());
        let t = c.table();
        assert!(t.contains("nearest_point"));
    }
}
