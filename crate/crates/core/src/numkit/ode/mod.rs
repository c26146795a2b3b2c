//! Adaptive ODE integration: an explicit Dormand–Prince 5(4) pair for
//! non-stiff flows and an L-stable SDIRK 4(3) scheme for stiff ones.
//!
//! Both steppers land exactly on every requested output time instead of
//! interpolating, so reported states carry the full local accuracy.

mod dopri;
mod sdirk;

use serde::{Deserialize, Serialize};

use super::linalg::Vector;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IntegratorMode {
    ExplicitAdaptive,
    ImplicitStiff,
    Auto,
}

/// The stepper actually used for a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepperKind {
    DormandPrince54,
    Sdirk43,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct IntegratorConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    /// `null` in JSON means unbounded
    #[serde(with = "unbounded")]
    pub max_step: f64,
    pub mode: IntegratorMode,
    /// In auto mode, a declared stiffness parameter below this value selects
    /// the implicit stepper.
    pub stiffness_threshold: f64,
    /// Caller-declared stiffness parameter (the perturbation ε).
    pub stiffness_hint: Option<f64>,
    pub max_steps: usize,
}

fn default_max_steps() -> usize {
    2_000_000
}

mod unbounded {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_some(v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::INFINITY))
    }
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self {
            rel_tol: 1e-9,
            abs_tol: 1e-11,
            max_step: f64::INFINITY,
            mode: IntegratorMode::Auto,
            stiffness_threshold: 1e-2,
            stiffness_hint: None,
            max_steps: default_max_steps(),
        }
    }
}

impl IntegratorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0 && self.abs_tol > 0.0) {
            return Err(Error::Config(format!(
                "tolerances must be positive (rel {}, abs {})",
                self.rel_tol, self.abs_tol
            )));
        }
        if !(self.max_step > 0.0) {
            return Err(Error::Config(format!("max_step {} must be positive", self.max_step)));
        }
        Ok(())
    }

    pub fn with_hint(mut self, eps: f64) -> Self {
        self.stiffness_hint = Some(eps);
        self
    }

    pub fn stepper(&self) -> StepperKind {
        match self.mode {
            IntegratorMode::ExplicitAdaptive => StepperKind::DormandPrince54,
            IntegratorMode::ImplicitStiff => StepperKind::Sdirk43,
            IntegratorMode::Auto => match self.stiffness_hint {
                Some(eps) if eps < self.stiffness_threshold => StepperKind::Sdirk43,
                _ => StepperKind::DormandPrince54,
            },
        }
    }

    /// Per-component error weight `abs_tol + rel_tol·|x|`, summarized with
    /// the supremum norm of the state.
    pub fn tolerance_at(&self, state_norm: f64) -> f64 {
        self.abs_tol + self.rel_tol * state_norm
    }
}

/// Strictly increasing output times; the first and last entries delimit the
/// integration interval.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeGrid {
    times: Vec<f64>,
}

impl TimeGrid {
    pub fn new(times: Vec<f64>) -> Result<Self> {
        if times.len() < 2 {
            return Err(Error::Config("time grid needs at least two points".into()));
        }
        if !times.iter().all(|t| t.is_finite()) || !times.windows(2).all(|w| w[0] < w[1]) {
            return Err(Error::Config("time grid must be finite and strictly increasing".into()));
        }
        Ok(Self { times })
    }

    pub fn uniform(t0: f64, t1: f64, intervals: usize) -> Result<Self> {
        if !(t1 > t0) || intervals == 0 {
            return Err(Error::Config(format!("empty time span [{t0}, {t1}]")));
        }
        let dt = (t1 - t0) / intervals as f64;
        let mut times: Vec<f64> = (0..intervals).map(|i| t0 + dt * i as f64).collect();
        times.push(t1);
        Self::new(times)
    }

    /// Adds extra output times inside the span.
    pub fn with_points(mut self, extra: &[f64]) -> Self {
        let (t0, t1) = self.span();
        self.times
            .extend(extra.iter().copied().filter(|&t| t > t0 && t < t1));
        self.times.sort_by(f64::total_cmp);
        self.times.dedup_by(|a, b| (*a - *b).abs() <= 1e-14 * (1.0 + b.abs()));
        self
    }

    pub fn span(&self) -> (f64, f64) {
        (self.times[0], *self.times.last().expect("non-empty grid"))
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct IntegratorStats {
    pub accepted_steps: usize,
    pub rejected_steps: usize,
    pub field_evaluations: usize,
    pub jacobian_evaluations: usize,
    pub lu_decompositions: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<Vec<f64>>,
    pub stepper: StepperKind,
    pub config: IntegratorConfig,
    pub stats: IntegratorStats,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.states.first().map_or(0, Vec::len)
    }

    pub fn state(&self, i: usize) -> Vector {
        Vector::from_column_slice(&self.states[i])
    }

    pub fn last_state(&self) -> Option<Vector> {
        self.states.last().map(|s| Vector::from_column_slice(s))
    }

    /// Index of an output time within `tol` of `t`.
    pub fn index_of(&self, t: f64, tol: f64) -> Option<usize> {
        self.times.iter().position(|&s| (s - t).abs() <= tol)
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, Vector)> + '_ {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| (t, Vector::from_column_slice(s)))
    }

    /// Largest supremum norm of any stored state.
    pub fn max_state_norm(&self) -> f64 {
        self.states
            .iter()
            .flat_map(|s| s.iter())
            .fold(0.0_f64, |m, v| m.max(v.abs()))
    }
}

/// Result of an integration that may have stopped early: the trajectory up
/// to the last reached output time plus the failure, if any.
#[derive(Debug, Clone)]
pub struct PartialTrajectory {
    pub trajectory: Trajectory,
    pub failure: Option<Error>,
}

/// Integrates `ẋ = field(t, x)` over the grid and returns states at every
/// grid time. Field errors are treated as domain exits.
pub fn integrate_ode<F>(field: F, x0: &Vector, grid: &TimeGrid, config: &IntegratorConfig) -> Result<Trajectory>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    let partial = integrate_ode_partial(field, x0, grid, config)?;
    match partial.failure {
        None => Ok(partial.trajectory),
        Some(e) => Err(e),
    }
}

/// Like [`integrate_ode`] but keeps the states computed before a failure.
/// Only configuration errors are returned as `Err`.
pub fn integrate_ode_partial<F>(
    field: F,
    x0: &Vector,
    grid: &TimeGrid,
    config: &IntegratorConfig,
) -> Result<PartialTrajectory>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    config.validate()?;
    if !x0.iter().all(|v| v.is_finite()) {
        return Err(Error::InvalidInput("initial state is not finite".into()));
    }
    let stepper = config.stepper();
    let mut run = Run {
        field: &field,
        config,
        stats: IntegratorStats::default(),
    };
    let mut out = Output {
        times: vec![grid.times()[0]],
        states: vec![x0.iter().copied().collect()],
    };
    let failure = match stepper {
        StepperKind::DormandPrince54 => dopri::integrate(&mut run, x0, grid, &mut out),
        StepperKind::Sdirk43 => sdirk::integrate(&mut run, x0, grid, &mut out),
    }
    .err();
    Ok(PartialTrajectory {
        trajectory: Trajectory {
            times: out.times,
            states: out.states,
            stepper,
            config: config.clone(),
            stats: run.stats,
        },
        failure,
    })
}

struct Run<'a, F> {
    field: &'a F,
    config: &'a IntegratorConfig,
    stats: IntegratorStats,
}

impl<F> Run<'_, F>
where
    F: Fn(f64, &Vector) -> Result<Vector>,
{
    fn eval(&mut self, t: f64, x: &Vector) -> Result<Vector> {
        self.stats.field_evaluations += 1;
        let v = (self.field)(t, x)?;
        if v.len() != x.len() || !v.iter().all(|c| c.is_finite()) {
            return Err(Error::Evaluation {
                location: x.iter().copied().collect(),
                message: format!("field value at t = {t} is not a finite {}-vector", x.len()),
            });
        }
        Ok(v)
    }

    /// Weighted RMS norm used by both step-size controllers.
    fn error_norm(&self, err: &Vector, y0: &Vector, y1: &Vector) -> f64 {
        let n = err.len().max(1) as f64;
        let sum: f64 = err
            .iter()
            .zip(y0.iter().zip(y1.iter()))
            .map(|(e, (a, b))| {
                let sc = self.config.abs_tol + self.config.rel_tol * a.abs().max(b.abs());
                (e / sc).powi(2)
            })
            .sum();
        (sum / n).sqrt()
    }

    /// Initial step guess (Hairer–Nørsett–Wanner heuristic).
    fn initial_step(&mut self, t: f64, y: &Vector, f0: &Vector, order: i32, span: f64) -> Result<f64> {
        let zero = Vector::zeros(y.len());
        let d0 = self.error_norm(y, &zero, y).max(1e-300);
        let d1 = self.error_norm(f0, y, y);
        let h0 = if d0 < 1e-5 || d1 < 1e-5 { 1e-6 } else { 0.01 * d0 / d1 };
        let h0 = h0.min(span).min(self.config.max_step);
        let y1 = y + f0 * h0;
        let f1 = match self.eval(t + h0, &y1) {
            Ok(f1) => f1,
            Err(_) => return Ok(h0 * 1e-3),
        };
        let d2 = self.error_norm(&(f1 - f0), y, y) / h0;
        let h1 = if d1.max(d2) <= 1e-15 {
            (h0 * 1e-3).max(1e-6)
        } else {
            (0.01 / d1.max(d2)).powf(1.0 / (order as f64 + 1.0))
        };
        Ok((100.0 * h0).min(h1).min(span).min(self.config.max_step))
    }
}

struct Output {
    times: Vec<f64>,
    states: Vec<Vec<f64>>,
}

impl Output {
    fn push(&mut self, t: f64, y: &Vector) {
        self.times.push(t);
        self.states.push(y.iter().copied().collect());
    }
}

fn min_step(t: f64, span: f64) -> f64 {
    1e-14 * t.abs().max(span)
}

fn domain_exit(t: f64, y: &Vector, cause: &Error) -> Error {
    Error::DomainExit {
        t,
        state: y.iter().copied().collect(),
        message: cause.to_string(),
    }
}

fn underflow(t: f64, h: f64, y: &Vector) -> Error {
    Error::StepSizeUnderflow {
        t,
        h,
        state: y.iter().copied().collect(),
    }
}
