//! Singular perturbation of an index-1 DAE: the regularized ODE
//! `ẋ = E_ε(x)⁻¹F(x)` with `E_ε = E + Q⁻¹·diag(0, −εI)·Dψ`, the reduced flow
//! on the consistency manifold and convergence studies as `ε → 0`.
//!
//! In chart coordinates the perturbed field is exactly
//! `ξ̇₁ = F*(ξ₁)`, `ξ̇₂ = −ξ₂/ε`, so `ξ₂(t) = e^{−t/ε}ξ₂(0)` along every
//! trajectory. The convergence study uses that as its layer oracle.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::analysis::on_manifold;
use crate::error::{Error, Result};
use crate::model::Scenario;
use crate::numkit::linalg::condition_number;
use crate::numkit::ode::{integrate_ode_partial, PartialTrajectory};
use crate::numkit::{integrate_ode, IntegratorConfig, Matrix, StepperKind, TimeGrid, Trajectory, Vector};

/// Tolerance factor for the reduced reference solution in convergence studies.
pub const REFERENCE_TOL_FACTOR: f64 = 1e-2;

/// Largest condition number of `E_ε` accepted at an evaluation point.
pub const MAX_CONDITION: f64 = 1e13;

/// `x ↦ E_ε(x)⁻¹F(x)` for a fixed `ε`.
#[derive(Debug, Clone, Copy)]
pub struct PerturbedField<'a> {
    scenario: &'a Scenario,
    epsilon: f64,
}

impl<'a> PerturbedField<'a> {
    pub fn new(scenario: &'a Scenario, epsilon: f64) -> Result<Self> {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return Err(Error::InvalidInput(format!("epsilon must be positive, got {epsilon}")));
        }
        scenario.chart()?;
        scenario.inwf()?;
        Ok(Self { scenario, epsilon })
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn scenario(&self) -> &'a Scenario {
        self.scenario
    }

    pub fn matrix(&self, x: &Vector) -> Result<Matrix> {
        let s = self.scenario;
        let chart = s.chart()?;
        let e = s.system.eval_e(x)?;
        let dpsi = chart.dpsi(x)?;
        let q = (s.inwf()?.q_equiv)(x);
        if !q.iter().all(|v| v.is_finite()) {
            return Err(Error::Evaluation {
                location: x.iter().copied().collect(),
                message: "left transformation Q(x) is not defined here".into(),
            });
        }
        let q_inv = q.try_inverse().ok_or_else(|| Error::SingularEvaluation {
            state: x.iter().copied().collect(),
            condition: f64::INFINITY,
        })?;
        let n = s.dim();
        let r = chart.r;
        let mut d = Matrix::zeros(n, n);
        for i in r..n {
            d[(i, i)] = -self.epsilon;
        }
        Ok(e + q_inv * d * dpsi)
    }

    pub fn eval(&self, x: &Vector) -> Result<Vector> {
        let m = self.matrix(x)?;
        let f = self.scenario.system.eval_f(x)?;
        let cond = condition_number(&m);
        let singular = || Error::SingularEvaluation {
            state: x.iter().copied().collect(),
            condition: cond,
        };
        if !(cond < MAX_CONDITION) {
            return Err(singular());
        }
        let v = m.lu().solve(&f).ok_or_else(singular)?;
        if !v.iter().all(|c| c.is_finite()) {
            return Err(singular());
        }
        Ok(v)
    }
}

/// Integrates the perturbed system. Without an explicit stiffness hint in
/// `config`, `ε` is declared as the hint so auto mode can pick the stepper.
pub fn integrate_perturbed(pf: &PerturbedField<'_>, x0: &Vector, grid: &TimeGrid, config: &IntegratorConfig) -> Result<Trajectory> {
    let partial = integrate_perturbed_partial(pf, x0, grid, config)?;
    match partial.failure {
        None => Ok(partial.trajectory),
        Some(e) => Err(e),
    }
}

/// Like [`integrate_perturbed`] but keeps the states reached before a failure.
pub fn integrate_perturbed_partial(
    pf: &PerturbedField<'_>,
    x0: &Vector,
    grid: &TimeGrid,
    config: &IntegratorConfig,
) -> Result<PartialTrajectory> {
    pf.scenario.chart()?.domain.check(x0)?;
    let mut config = config.clone();
    if config.stiffness_hint.is_none() {
        config.stiffness_hint = Some(pf.epsilon);
    }
    integrate_ode_partial(|_, x| pf.eval(x), x0, grid, &config)
}

fn manifold_tol(x: &Vector) -> f64 {
    1e-8 * (1.0 + x.amax())
}

/// The smooth solution on the manifold: `ξ̇₁ = F*(ξ₁)` from `ξ₁(x0_plus)`
/// with `ξ₂ = 0`, mapped back through `ψ⁻¹`.
pub fn integrate_reduced(s: &Scenario, x0_plus: &Vector, grid: &TimeGrid, config: &IntegratorConfig) -> Result<Trajectory> {
    let chart = s.chart()?;
    let inwf = s.inwf()?;
    if !on_manifold(s, x0_plus, manifold_tol(x0_plus)) {
        return Err(Error::Precondition(format!(
            "initial point {:?} is not on the consistency manifold",
            x0_plus.as_slice()
        )));
    }
    let xi1_0 = chart.xi1(x0_plus)?;
    let n2 = s.dim() - chart.r;
    let zeros = Vector::zeros(n2);
    let field = |_: f64, xi1: &Vector| -> Result<Vector> {
        // keep the flow inside ψ(V)
        chart.compose_inv(xi1, &zeros)?;
        Ok((inwf.f_star)(xi1))
    };
    let mut traj = integrate_ode(field, &xi1_0, grid, config)?;
    let mut states = Vec::with_capacity(traj.len());
    for s1 in &traj.states {
        let x = chart.compose_inv(&Vector::from_column_slice(s1), &zeros)?;
        states.push(x.iter().copied().collect());
    }
    traj.states = states;
    Ok(traj)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyOptions {
    pub integrator: IntegratorConfig,
    /// Defaults to `1e-2·(T − t1)` when absent.
    pub stiffness_threshold: Option<f64>,
    /// uniform output intervals over `[0, T]`
    pub intervals: usize,
    /// factor `C` in the pass bound
    pub bound_factor: f64,
}

impl Default for StudyOptions {
    fn default() -> Self {
        Self {
            integrator: IntegratorConfig::default(),
            stiffness_threshold: None,
            intervals: 200,
            bound_factor: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpsilonRun {
    pub epsilon: f64,
    pub stepper: Option<StepperKind>,
    /// `sup ‖x̄(t, ε) − x(t)‖₂` over output times in `[t1, T]`
    pub sup_error: f64,
    /// `max |ξ₂(x̄(t, ε)) − e^{−t/ε}ξ₂(x⁻)|` over all output times
    pub layer_error: f64,
    pub integration_tol: f64,
    pub layer_ok: bool,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    pub scenario: String,
    pub x_minus: Vec<f64>,
    pub x_plus: Vec<f64>,
    pub eps_list: Vec<f64>,
    pub t1: f64,
    pub t_end: f64,
    pub runs: Vec<EpsilonRun>,
    pub sup_errors: Vec<f64>,
    pub layer_errors: Vec<f64>,
    pub decreasing: bool,
    /// `max(10·integration tol, C·e^{−t1/ε_min}·‖ξ₂(x⁻)‖)`
    pub bound: f64,
    pub layer_pass: bool,
    pub pass: bool,
    pub times: Vec<f64>,
    pub reduced: Vec<Vec<f64>>,
    /// per ε, `‖x̄(t, ε) − x(t)‖₂` at each output time (NaN after a failure)
    pub errors: Vec<Vec<f64>>,
}

impl ConvergenceReport {
    /// One row per output time: `t`, the reduced state, then the error for
    /// each ε.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let n = self.reduced.first().map_or(0, Vec::len);
        let mut header = vec!["t".to_string()];
        header.extend((1..=n).map(|i| format!("x{i}")));
        header.extend(self.eps_list.iter().map(|e| format!("err_eps{}", format_eps(*e))));
        out.write_record(&header)?;
        for (k, t) in self.times.iter().enumerate() {
            let mut row = vec![fmt_f64(*t)];
            row.extend(self.reduced[k].iter().map(|v| fmt_f64(*v)));
            row.extend(self.errors.iter().map(|e| fmt_f64(e[k])));
            out.write_record(&row)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// 17 significant digits, enough for an exact round trip.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Compact label for file names, e.g. `0.001` → `1e-3`.
pub fn format_eps(eps: f64) -> String {
    let s = format!("{eps:e}");
    s.replace('+', "")
}

/// Writes `t, x1, …, xn` rows.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    let mut header = vec!["t".to_string()];
    header.extend((1..=traj.dim()).map(|i| format!("x{i}")));
    out.write_record(&header)?;
    for (t, s) in traj.times.iter().zip(&traj.states) {
        let mut row = vec![fmt_f64(*t)];
        row.extend(s.iter().map(|v| fmt_f64(*v)));
        out.write_record(&row)?;
    }
    out.flush()?;
    Ok(())
}

fn validate_study(eps_list: &[f64], t1: f64, t_end: f64) -> Result<()> {
    if eps_list.len() < 3 {
        return Err(Error::Config(format!(
            "convergence study needs at least 3 epsilon values, got {}",
            eps_list.len()
        )));
    }
    if !eps_list.iter().all(|e| *e > 0.0 && e.is_finite()) {
        return Err(Error::Config("epsilon values must be positive".into()));
    }
    if !eps_list.windows(2).all(|w| w[0] > w[1]) {
        return Err(Error::Config("epsilon values must be strictly decreasing".into()));
    }
    if !(t1 > 0.0 && t1 < t_end && t_end.is_finite()) {
        return Err(Error::Config(format!("need 0 < t1 < T, got t1 = {t1}, T = {t_end}")));
    }
    Ok(())
}

/// Output grid: uniform on `[0, T]`, plus `t1` and points resolving each
/// boundary layer.
pub fn study_grid(eps_list: &[f64], t1: f64, t_end: f64, intervals: usize) -> Result<TimeGrid> {
    let mut extra = vec![t1];
    for eps in eps_list {
        extra.extend((1..=40).map(|k| 0.25 * eps * k as f64));
    }
    Ok(TimeGrid::uniform(0.0, t_end, intervals)?.with_points(&extra))
}

/// Compares perturbed trajectories from `x_minus` with the reduced solution
/// from `Ω(x_minus)` for each ε.
pub fn convergence_study(
    s: &Scenario,
    x_minus: &Vector,
    eps_list: &[f64],
    t1: f64,
    t_end: f64,
    options: &StudyOptions,
) -> Result<ConvergenceReport> {
    validate_study(eps_list, t1, t_end)?;
    let chart = s.chart()?;
    let x_plus = crate::jumps::project_consistent_chart(s, x_minus)?.x_plus;
    let x_plus = Vector::from_vec(x_plus);
    let xi2_minus = chart.xi2(x_minus)?;
    let grid = study_grid(eps_list, t1, t_end, options.intervals)?;
    // the reference is integrated well below the tolerance under test
    let mut reference_config = options.integrator.clone();
    reference_config.rel_tol *= REFERENCE_TOL_FACTOR;
    reference_config.abs_tol *= REFERENCE_TOL_FACTOR;
    let reduced = integrate_reduced(s, &x_plus, &grid, &reference_config)?;

    let mut config = options.integrator.clone();
    config.stiffness_threshold = options.stiffness_threshold.unwrap_or(1e-2 * (t_end - t1));
    config.stiffness_hint = None;

    let mut runs = Vec::with_capacity(eps_list.len());
    let mut errors = Vec::with_capacity(eps_list.len());
    for &eps in eps_list {
        let pf = PerturbedField::new(s, eps)?;
        let partial = integrate_perturbed_partial(&pf, x_minus, &grid, &config)?;
        let traj = &partial.trajectory;
        let mut err_t = vec![f64::NAN; grid.times().len()];
        let mut sup_error: f64 = 0.0;
        let mut layer_error: f64 = 0.0;
        for (k, (t, x)) in traj.iter().enumerate() {
            let e = (&x - reduced.state(k)).norm();
            err_t[k] = e;
            if t >= t1 - 1e-14 {
                sup_error = sup_error.max(e);
            }
            let expected = &xi2_minus * (-t / eps).exp();
            let xi2 = chart.xi2(&x)?;
            layer_error = layer_error.max((xi2 - expected).amax());
        }
        let integration_tol = config.tolerance_at(traj.max_state_norm());
        let failure = partial.failure.as_ref().map(|e| e.to_string());
        if failure.is_some() {
            sup_error = f64::NAN;
            layer_error = f64::NAN;
        }
        runs.push(EpsilonRun {
            epsilon: eps,
            stepper: Some(traj.stepper),
            sup_error,
            layer_error,
            integration_tol,
            layer_ok: layer_error <= 10.0 * integration_tol,
            failure,
        });
        errors.push(err_t);
    }

    let sup_errors: Vec<f64> = runs.iter().map(|r| r.sup_error).collect();
    let layer_errors: Vec<f64> = runs.iter().map(|r| r.layer_error).collect();
    let decreasing = sup_errors.iter().all(|e| e.is_finite()) && sup_errors.windows(2).all(|w| w[1] < w[0]);
    let eps_min = *eps_list.last().expect("validated length");
    let tol_min = runs.last().map_or(f64::NAN, |r| r.integration_tol);
    let bound = (10.0 * tol_min).max(options.bound_factor * (-t1 / eps_min).exp() * xi2_minus.norm());
    let smallest = *sup_errors.last().expect("validated length");
    let pass = decreasing && smallest <= bound;
    let layer_pass = runs.iter().all(|r| r.layer_ok);

    Ok(ConvergenceReport {
        scenario: s.name.clone(),
        x_minus: x_minus.iter().copied().collect(),
        x_plus: x_plus.iter().copied().collect(),
        eps_list: eps_list.to_vec(),
        t1,
        t_end,
        runs,
        sup_errors,
        layer_errors,
        decreasing,
        bound,
        layer_pass,
        pass,
        times: grid.times().to_vec(),
        reduced: reduced.states.clone(),
        errors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{builtin, scenario_circuit, scenario_cubic, scenario_linear, LinearDecoupling};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn v(xs: &[f64]) -> Vector {
        Vector::from_column_slice(xs)
    }

    #[test]
    fn circuit_field_matches_closed_forms_up_to_first_sign() {
        let s = scenario_circuit();
        let eps = 0.01;
        let pf = PerturbedField::new(&s, eps).unwrap();
        let (x, y, z) = (0.1, 0.2, 0.3);
        let got = pf.eval(&v(&[x, y, z])).unwrap();
        let f1 = -(-x + y * (2.0 + y) - 2.0 * eps * (y * y - 2.0 * z) - 2.0 * (y + z)) / eps;
        let f2 = -(y + eps * y * y - 2.0 * eps * z + z) / (eps + eps * y);
        let f3 = (eps * (y * y - 2.0 * z) - y * (y + z)) / (eps * (1.0 + y));
        assert!((got[1] - f2).abs() < 1e-10 * f2.abs());
        assert!((got[2] - f3).abs() < 1e-10 * f3.abs());
        // the construction yields the opposite sign in the first component
        assert!((got[0] + f1).abs() < 1e-10 * f1.abs());
        assert!((got[0] + 64.88).abs() < 1e-9);
    }

    #[test]
    fn linear_field_is_block_diagonal() {
        let a = -3.0;
        let e = Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let h = Matrix::from_row_slice(2, 2, &[a, 0.0, 0.0, 1.0]);
        let d = LinearDecoupling {
            q: Matrix::identity(2, 2),
            p: Matrix::identity(2, 2),
            a1: None,
        };
        let s = scenario_linear("lin", &e, &h, &d).unwrap();
        let pf = PerturbedField::new(&s, 0.1).unwrap();
        let got = pf.eval(&v(&[0.5, -0.2])).unwrap();
        assert!((got - v(&[a * 0.5, -10.0 * -0.2])).amax() < 1e-15);
    }

    #[test]
    fn linear_field_matches_closed_form_with_coupling() {
        // E = Q⁻¹·diag(1,0)·P, H = Q⁻¹·diag(a,1)·P
        let q = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 0.0, 1.0]);
        let p = Matrix::from_row_slice(2, 2, &[1.0, 0.0, -1.0, 1.0]);
        let q_inv = q.clone().try_inverse().unwrap();
        let e = &q_inv * Matrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]) * &p;
        let h = &q_inv * Matrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, 1.0]) * &p;
        let s = scenario_linear("coupled", &e, &h, &LinearDecoupling { q, p: p.clone(), a1: None }).unwrap();
        let eps = 0.05;
        let pf = PerturbedField::new(&s, eps).unwrap();
        let closed = p.clone().try_inverse().unwrap() * Matrix::from_row_slice(2, 2, &[-0.5, 0.0, 0.0, -1.0 / eps]) * &p;
        let x = v(&[0.3, 0.7]);
        assert!((pf.eval(&x).unwrap() - &closed * &x).amax() < 1e-13);
    }

    #[test]
    fn pushforward_identity() {
        // points whose projection ψ⁻¹(ξ₁, 0) exists, where F* is defined
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for (s, lo, hi) in [
            (scenario_cubic(), [-0.5, 0.7, 0.0], [0.5, 1.6, 0.0]),
            (scenario_circuit(), [-0.5, -0.5, -0.5], [0.5, 0.5, 0.5]),
        ] {
            let chart = s.chart().unwrap();
            let inwf = s.inwf().unwrap();
            let n = s.dim();
            for eps in [1e-1, 1e-2] {
                let pf = PerturbedField::new(&s, eps).unwrap();
                let mut used = 0;
                while used < 50 {
                    let x = Vector::from_iterator(n, (0..n).map(|i| rng.random_range(lo[i]..=hi[i])));
                    if crate::jumps::project_consistent_chart(&s, &x).is_err() {
                        continue;
                    }
                    used += 1;
                    let lhs = chart.dpsi(&x).unwrap() * pf.eval(&x).unwrap();
                    let xi = chart.psi(&x).unwrap();
                    let mut rhs = -&xi / eps;
                    rhs.rows_mut(0, chart.r).copy_from(&(inwf.f_star)(&xi.rows(0, chart.r).into_owned()));
                    assert!((&lhs - &rhs).norm() <= 1e-7 * rhs.norm().max(1.0), "{x}: {lhs} vs {rhs}");
                }
            }
        }
    }

    #[test]
    fn field_rejects_bad_input() {
        let s = scenario_circuit();
        assert!(PerturbedField::new(&s, 0.0).is_err());
        assert!(PerturbedField::new(&builtin("contact").unwrap(), 0.1).is_err());
        let pf = PerturbedField::new(&s, 0.1).unwrap();
        assert!(pf.eval(&v(&[0.0, -1.0, 0.0])).is_err());
    }

    #[test]
    fn reduced_circuit_is_exponential() {
        let s = scenario_circuit();
        let grid = TimeGrid::uniform(0.0, 1.0, 4).unwrap();
        let x_plus = crate::jumps::project_consistent_chart(&s, &v(&[0.0, 0.0, 0.1])).unwrap().x_plus;
        let traj = integrate_reduced(&s, &Vector::from_vec(x_plus), &grid, &IntegratorConfig::default()).unwrap();
        let chart = s.chart().unwrap();
        for (t, x) in traj.iter() {
            let xi1 = chart.xi1(&x).unwrap()[0];
            assert!((xi1 - 0.1 * (-2.0 * t).exp()).abs() < 1e-10, "{t}: {xi1}");
        }
        assert!(integrate_reduced(&s, &v(&[0.0, 0.0, 0.1]), &grid, &IntegratorConfig::default()).is_err());
    }

    #[test]
    fn reduced_cubic_matches_small_step_oracle() {
        // Richardson-extrapolated explicit Euler over one short step
        let s = scenario_cubic();
        let x0 = v(&[0.0, 1.233_416_477_594_625]);
        let h = 1e-3;
        let grid = TimeGrid::new(vec![0.0, h]).unwrap();
        let traj = integrate_reduced(&s, &x0, &grid, &IntegratorConfig::default()).unwrap();
        let chart = s.chart().unwrap();
        let g = |xi: f64| -crate::model::cubic_branch_root(xi).unwrap();
        let xi0 = 0.643;
        let euler1 = xi0 + h * g(xi0);
        let half = xi0 + 0.5 * h * g(xi0);
        let euler2 = half + 0.5 * h * g(half);
        let oracle = 2.0 * euler2 - euler1;
        let got = chart.xi1(&traj.last_state().unwrap()).unwrap()[0];
        assert!((got - oracle).abs() < 1e-8, "{got} vs {oracle}");
    }

    #[test]
    fn perturbed_layer_decays_exactly() {
        let s = scenario_circuit();
        let chart = s.chart().unwrap();
        let x0 = v(&[0.0, 0.0, 0.1]);
        let xi2_0 = chart.xi2(&x0).unwrap();
        for eps in [1e-1, 1e-3] {
            let pf = PerturbedField::new(&s, eps).unwrap();
            let grid = study_grid(&[eps], 0.05, 1.0, 100).unwrap();
            let cfg = IntegratorConfig::default();
            let traj = integrate_perturbed(&pf, &x0, &grid, &cfg).unwrap();
            let tol = cfg.tolerance_at(traj.max_state_norm());
            for (t, x) in traj.iter() {
                let d = (chart.xi2(&x).unwrap() - &xi2_0 * (-t / eps).exp()).amax();
                assert!(d <= 10.0 * tol, "eps {eps}, t {t}: {d:e} vs {tol:e}");
            }
        }
    }

    #[test]
    fn trajectories_started_on_the_manifold_stay_there() {
        let s = scenario_circuit();
        let chart = s.chart().unwrap();
        let y: f64 = -0.1;
        let x0 = v(&[y * y + 2.0 * y, y, -y]);
        let pf = PerturbedField::new(&s, 1e-3).unwrap();
        let cfg = IntegratorConfig::default();
        let traj = integrate_perturbed(&pf, &x0, &TimeGrid::uniform(0.0, 1.0, 50).unwrap(), &cfg).unwrap();
        for (_, x) in traj.iter() {
            assert!(chart.xi2(&x).unwrap().amax() <= 10.0 * cfg.tolerance_at(x.amax()));
        }
    }

    #[test]
    fn circuit_convergence_study() {
        let s = scenario_circuit();
        let r = convergence_study(&s, &v(&[0.0, 0.0, 0.1]), &[1e-1, 1e-2, 1e-3], 0.05, 1.0, &StudyOptions::default()).unwrap();
        assert!(r.decreasing, "{:?}", r.sup_errors);
        assert!(r.layer_pass, "{:?}", r.runs);
        assert!(r.pass);
        let mut buf = Vec::new();
        r.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert!(text.starts_with("t,x1,x2,x3,err_eps1e-1,err_eps1e-2,err_eps1e-3\n"));
    }

    #[test]
    fn study_validates_inputs() {
        let s = scenario_circuit();
        let x = v(&[0.0, 0.0, 0.1]);
        let o = StudyOptions::default();
        assert!(matches!(convergence_study(&s, &x, &[1e-1, 1e-2], 0.05, 1.0, &o), Err(Error::Config(_))));
        assert!(convergence_study(&s, &x, &[1e-2, 1e-1, 1e-3], 0.05, 1.0, &o).is_err());
        assert!(convergence_study(&s, &x, &[1e-1, 1e-2, 1e-3], 1.5, 1.0, &o).is_err());
    }

    #[test]
    fn eps_labels() {
        assert_eq!(format_eps(0.001), "1e-3");
        assert_eq!(format_eps(0.1), "1e-1");
        assert_eq!(format_eps(1.0), "1e0");
        assert_eq!(format_eps(2.5e-2), "2.5e-2");
        assert_eq!(fmt_f64(0.1), "1.0000000000000001e-1");
    }
}
