//! `dae-jump` command line: structural analysis, jump comparison,
//! perturbed/reduced simulation and convergence studies, writing JSON and
//! CSV artifacts.
//!
//! Exit codes: 0 on success or pass, 1 on configuration or execution
//! errors, 2 when a structural check or convergence study fails.

use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use serde::{Deserialize, Serialize};

use crate::analysis::{analyze, Region, Tolerances, Verdict};
use crate::error::{Error, Result};
use crate::jumps::{compare_methods, project_consistent_chart, JumpSettings, DEFAULT_LAYER_TOL};
use crate::model::{builtin, builtin_names, Scenario, ScenarioDocument};
use crate::numkit::{IntegratorConfig, IntegratorMode, TimeGrid, Vector};
use crate::perturbation::{
    convergence_study, format_eps, integrate_perturbed_partial, integrate_reduced, write_trajectory_csv,
    PerturbedField, StudyOptions,
};

pub const OUT_ENV: &str = "DAE_JUMP_OUT";

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Command {
    Analyze,
    Jump,
    Simulate,
    Converge,
}

#[derive(Debug, Parser)]
#[command(name = "dae-jump", version, about = "Consistent initialization and singular perturbation of index-1 DAEs")]
pub struct Cli {
    pub command: Command,
    /// built-in scenario name or path to a scenario JSON document
    #[arg(long)]
    pub scenario: Option<String>,
    /// JSON run configuration; command-line options override its values
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// initial point, comma separated
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub x0: Option<Vec<f64>>,
    /// perturbation parameters, comma separated
    #[arg(long, value_delimiter = ',')]
    pub eps: Option<Vec<f64>>,
    #[arg(long, allow_hyphen_values = true)]
    pub t0: Option<f64>,
    #[arg(long, allow_hyphen_values = true)]
    pub t1: Option<f64>,
    /// output directory (overridden by DAE_JUMP_OUT)
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// number of quasi-random analysis samples
    #[arg(long)]
    pub samples: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub region_lower: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub region_upper: Option<Vec<f64>>,
    /// extra analysis point, comma separated; repeat the flag for more points
    #[arg(long, allow_hyphen_values = true)]
    pub probe: Vec<String>,
    /// simulate only the reduced solution
    #[arg(long)]
    pub reduced_only: bool,
    /// start of the error window of a convergence study
    #[arg(long)]
    pub window_start: Option<f64>,
    /// residual layer factor for the fast-flow projector
    #[arg(long)]
    pub layer_tol: Option<f64>,
    #[arg(long)]
    pub rel_tol: Option<f64>,
    #[arg(long)]
    pub abs_tol: Option<f64>,
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    /// uniform output intervals
    #[arg(long)]
    pub intervals: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Explicit,
    Implicit,
    Auto,
}

/// Run configuration as read from a JSON file. Every field is optional.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub scenario: Option<String>,
    pub initial_point: Option<Vec<f64>>,
    pub eps_list: Option<Vec<f64>>,
    pub t_span: Option<(f64, f64)>,
    pub integrator: Option<IntegratorConfig>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
    pub samples: Option<usize>,
    pub region_lower: Option<Vec<f64>>,
    pub region_upper: Option<Vec<f64>>,
    pub probes: Option<Vec<Vec<f64>>>,
    pub reduced_only: Option<bool>,
    pub window_start: Option<f64>,
    pub layer_tol: Option<f64>,
    pub intervals: Option<usize>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Command-line values take precedence over file values.
    fn merge(mut self, cli: &Cli) -> Result<Self> {
        fn set<T: Clone>(slot: &mut Option<T>, v: &Option<T>) {
            if v.is_some() {
                *slot = v.clone();
            }
        }
        set(&mut self.scenario, &cli.scenario);
        set(&mut self.initial_point, &cli.x0);
        set(&mut self.eps_list, &cli.eps);
        set(&mut self.output_dir, &cli.out);
        set(&mut self.seed, &cli.seed);
        set(&mut self.samples, &cli.samples);
        set(&mut self.region_lower, &cli.region_lower);
        set(&mut self.region_upper, &cli.region_upper);
        set(&mut self.window_start, &cli.window_start);
        set(&mut self.layer_tol, &cli.layer_tol);
        set(&mut self.intervals, &cli.intervals);
        if cli.reduced_only {
            self.reduced_only = Some(true);
        }
        if !cli.probe.is_empty() {
            self.probes = Some(parse_probes(&cli.probe)?);
        }
        if cli.t0.is_some() || cli.t1.is_some() {
            let (a, b) = self.t_span.unwrap_or((f64::NAN, f64::NAN));
            self.t_span = Some((cli.t0.unwrap_or(a), cli.t1.unwrap_or(b)));
        }
        let mut integrator = self.integrator.clone().unwrap_or_default();
        if let Some(r) = cli.rel_tol {
            integrator.rel_tol = r;
        }
        if let Some(a) = cli.abs_tol {
            integrator.abs_tol = a;
        }
        if let Some(m) = cli.mode {
            integrator.mode = match m {
                ModeArg::Explicit => IntegratorMode::ExplicitAdaptive,
                ModeArg::Implicit => IntegratorMode::ImplicitStiff,
                ModeArg::Auto => IntegratorMode::Auto,
            };
        }
        self.integrator = Some(integrator);
        Ok(self)
    }
}

/// One point per `--probe` occurrence.
fn parse_probes(raw: &[String]) -> Result<Vec<Vec<f64>>> {
    raw.iter()
        .map(|group| {
            group
                .split(',')
                .map(|v| v.trim().parse::<f64>().map_err(|e| Error::Config(format!("probe value '{v}': {e}"))))
                .collect()
        })
        .collect()
}

/// Built-in name, or a path to a scenario document.
pub fn resolve_scenario(spec: &str) -> Result<Scenario> {
    if let Some(s) = builtin(spec) {
        return Ok(s);
    }
    let path = Path::new(spec);
    if path.extension().is_some_and(|e| e == "json") || path.exists() {
        return ScenarioDocument::load(path).map_err(|e| Error::Config(format!("{spec}: {e}")));
    }
    Err(Error::Config(format!(
        "unknown scenario '{spec}' (built-in: {})",
        builtin_names().join(", ")
    )))
}

/// Outcome of a successful run, mapped to exit codes 0 and 2.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub passed: bool,
    pub text: String,
    pub files: Vec<PathBuf>,
}

struct Resolved {
    command: Command,
    scenario: Scenario,
    config: RunConfig,
    integrator: IntegratorConfig,
    out: PathBuf,
}

impl Resolved {
    fn x0(&self) -> Result<Vector> {
        let x = match &self.config.initial_point {
            Some(p) => Vector::from_column_slice(p),
            None => self.scenario.defaults.x_minus.clone(),
        };
        if x.len() != self.scenario.dim() {
            return Err(Error::Config(format!(
                "--x0 has {} components, scenario '{}' has dimension {}",
                x.len(),
                self.scenario.name,
                self.scenario.dim()
            )));
        }
        Ok(x)
    }

    fn t_span(&self) -> Result<(f64, f64)> {
        let (t0, t1) = self.config.t_span.unwrap_or((0.0, self.scenario.defaults.t_end));
        let t0 = if t0.is_nan() { 0.0 } else { t0 };
        let t1 = if t1.is_nan() { self.scenario.defaults.t_end } else { t1 };
        if !(t0 < t1 && t0.is_finite() && t1.is_finite()) {
            return Err(Error::Config(format!("need t0 < t1, got [{t0}, {t1}]")));
        }
        Ok((t0, t1))
    }

    fn eps_list(&self, default: &[f64]) -> Result<Vec<f64>> {
        let eps = self.config.eps_list.clone().unwrap_or_else(|| default.to_vec());
        if !eps.iter().all(|e| *e > 0.0 && e.is_finite()) {
            return Err(Error::Config("epsilon values must be positive".into()));
        }
        Ok(eps)
    }

    fn intervals(&self) -> usize {
        self.config.intervals.unwrap_or(200)
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn resolve(cli: &Cli) -> Result<Resolved> {
    let file = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    let config = file.merge(cli)?;
    let spec = config
        .scenario
        .clone()
        .ok_or_else(|| Error::Config("no scenario given (use --scenario)".into()))?;
    let scenario = resolve_scenario(&spec)?;
    let integrator = config.integrator.clone().unwrap_or_default();
    integrator.validate()?;
    let out = match std::env::var_os(OUT_ENV) {
        Some(v) if !v.is_empty() => PathBuf::from(v),
        _ => config.output_dir.clone().unwrap_or_else(|| PathBuf::from(".")),
    };
    fs::create_dir_all(&out).map_err(|e| Error::Io(format!("{}: {e}", out.display())))?;
    Ok(Resolved {
        command: cli.command,
        scenario,
        config,
        integrator,
        out,
    })
}

fn cmd_analyze(r: &Resolved) -> Result<Report> {
    let s = &r.scenario;
    let mut region = Region::for_scenario(s);
    if let (Some(lo), Some(hi)) = (&r.config.region_lower, &r.config.region_upper) {
        region = Region::new(lo, hi).map_err(|e| Error::Config(e.to_string()))?;
    } else if r.config.region_lower.is_some() || r.config.region_upper.is_some() {
        return Err(Error::Config("give both --region-lower and --region-upper".into()));
    }
    if let Some(n) = r.config.samples {
        region = region.with_count(n);
    }
    if let Some(seed) = r.config.seed {
        region = region.with_seed(seed);
    }
    for p in r.config.probes.iter().flatten() {
        if p.len() != s.dim() {
            return Err(Error::Config(format!("probe {p:?} has the wrong dimension")));
        }
        region = region.with_probe(p);
    }
    let report = analyze(s, &region, &Tolerances::default())?;
    let json = r.path("analysis.json");
    let txt = r.path("analysis_summary.txt");
    write_json(&json, &report)?;
    let text = report.summary();
    fs::write(&txt, &text)?;
    Ok(Report {
        passed: report.verdict == Verdict::NotRefuted,
        text,
        files: vec![json, txt],
    })
}

fn cmd_jump(r: &Resolved) -> Result<Report> {
    let x0 = r.x0()?;
    let mut settings = JumpSettings {
        integrator: r.integrator.clone(),
        ..JumpSettings::default()
    };
    if let Some(eps) = &r.config.eps_list {
        settings.eps_schedule = eps.clone();
    }
    if let Some(t) = r.config.layer_tol {
        settings.layer_tol = t;
    }
    let cmp = compare_methods(&r.scenario, &x0, &settings)?;
    let json = r.path("jump_report.json");
    write_json(&json, &cmp)?;
    Ok(Report {
        passed: true,
        text: cmp.table(),
        files: vec![json],
    })
}

#[derive(Debug, Serialize)]
struct SimulationRecord {
    scenario: String,
    x0: Vec<f64>,
    x0_plus: Option<Vec<f64>>,
    t_span: (f64, f64),
    files: Vec<String>,
    failures: Vec<String>,
}

fn file_name(p: &Path) -> String {
    p.file_name().map_or_else(String::new, |n| n.to_string_lossy().into_owned())
}

fn write_csv_file(path: &Path, traj: &crate::numkit::Trajectory) -> Result<()> {
    write_trajectory_csv(traj, BufWriter::new(File::create(path)?))
}

fn cmd_simulate(r: &Resolved) -> Result<Report> {
    let s = &r.scenario;
    let x0 = r.x0()?;
    let (t0, t1) = r.t_span()?;
    let reduced_only = r.config.reduced_only.unwrap_or(false);
    let eps_list = if reduced_only { Vec::new() } else { r.eps_list(&[1e-1, 1e-2, 1e-3])? };
    let grid = TimeGrid::uniform(t0, t1, r.intervals())?;
    let mut record = SimulationRecord {
        scenario: s.name.clone(),
        x0: x0.iter().copied().collect(),
        x0_plus: None,
        t_span: (t0, t1),
        files: Vec::new(),
        failures: Vec::new(),
    };
    let mut files = Vec::new();
    let mut text = String::new();

    for &eps in &eps_list {
        let pf = PerturbedField::new(s, eps)?;
        let extra: Vec<f64> = (1..=40).map(|k| t0 + 0.25 * eps * k as f64).collect();
        let partial = integrate_perturbed_partial(&pf, &x0, &grid.clone().with_points(&extra), &r.integrator)?;
        let path = r.path(&format!("traj_{}_eps{}.csv", s.name, format_eps(eps)));
        write_csv_file(&path, &partial.trajectory)?;
        text += &format!(
            "eps = {eps:e}: {} output times, {:?}, {} steps\n",
            partial.trajectory.len(),
            partial.trajectory.stepper,
            partial.trajectory.stats.accepted_steps
        );
        if let Some(e) = &partial.failure {
            let msg = format!("eps = {eps:e}: {e}");
            text += &format!("  stopped early: {e}\n");
            record.failures.push(msg);
        }
        record.files.push(file_name(&path));
        files.push(path);
    }

    // the reduced solution starts from the projection of x0
    match project_consistent_chart(s, &x0).and_then(|j| {
        let x_plus = j.x_plus();
        record.x0_plus = Some(j.x_plus.clone());
        integrate_reduced(s, &x_plus, &grid, &r.integrator)
    }) {
        Ok(traj) => {
            let path = r.path(&format!("traj_{}_reduced.csv", s.name));
            write_csv_file(&path, &traj)?;
            text += &format!("reduced solution: {} output times\n", traj.len());
            record.files.push(file_name(&path));
            files.push(path);
        }
        Err(e) => {
            text += &format!("reduced solution failed: {e}\n");
            record.failures.push(format!("reduced: {e}"));
        }
    }
    let json = r.path("simulation_report.json");
    write_json(&json, &record)?;
    files.push(json);
    if !record.failures.is_empty() {
        return Err(Error::Validation(format!(
            "simulation incomplete ({}); partial outputs were written",
            record.failures.join("; ")
        )));
    }
    Ok(Report {
        passed: true,
        text,
        files,
    })
}

/// Default start of the error window: `5·ε_max·ln(1/layer_tol)`, capped at
/// a twentieth of the span so the window is never empty.
pub fn default_window_start(eps_max: f64, layer_tol: f64, t0: f64, t1: f64) -> f64 {
    (5.0 * eps_max * (1.0 / layer_tol).ln()).min((t1 - t0) / 20.0)
}

fn cmd_converge(r: &Resolved) -> Result<Report> {
    let s = &r.scenario;
    let x0 = r.x0()?;
    let (t0, t_end) = r.t_span()?;
    if t0 != 0.0 {
        return Err(Error::Config("convergence studies start at t0 = 0".into()));
    }
    let eps = r.eps_list(&[1e-1, 1e-2, 1e-3])?;
    let layer_tol = r.config.layer_tol.unwrap_or(DEFAULT_LAYER_TOL);
    let eps_max = eps.iter().copied().fold(0.0, f64::max);
    let t1 = r
        .config
        .window_start
        .unwrap_or_else(|| default_window_start(eps_max, layer_tol, t0, t_end));
    let options = StudyOptions {
        integrator: r.integrator.clone(),
        intervals: r.intervals(),
        ..StudyOptions::default()
    };
    let report = convergence_study(s, &x0, &eps, t1, t_end, &options)?;
    let json = r.path("convergence_report.json");
    let csv = r.path("convergence_report.csv");
    write_json(&json, &report)?;
    report.write_csv(BufWriter::new(File::create(&csv)?))?;
    let mut text = format!("scenario {}, window [{t1}, {t_end}]\n", s.name);
    for run in &report.runs {
        text += &format!(
            "eps = {:e}: sup error {:.3e}, layer error {:.3e} (10x tol {:.3e}){}\n",
            run.epsilon,
            run.sup_error,
            run.layer_error,
            10.0 * run.integration_tol,
            run.failure.as_ref().map_or(String::new(), |f| format!(", failed: {f}"))
        );
    }
    text += &format!(
        "decreasing: {}, bound {:.3e}, layer check: {}, pass: {}\n",
        report.decreasing, report.bound, report.layer_pass, report.pass
    );
    Ok(Report {
        passed: report.pass,
        text,
        files: vec![json, csv],
    })
}

/// Runs a parsed command line.
pub fn run(cli: &Cli) -> Result<Report> {
    let r = resolve(cli)?;
    match r.command {
        Command::Analyze => cmd_analyze(&r),
        Command::Jump => cmd_jump(&r),
        Command::Simulate => cmd_simulate(&r),
        Command::Converge => cmd_converge(&r),
    }
}

/// Parses `args`, runs, prints the report and returns the exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(&cli) {
        Ok(report) => {
            // a closed pipe on stdout is not an error of the run
            let mut out = std::io::stdout().lock();
            let _ = write!(out, "{}", report.text);
            for f in &report.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
            if report.passed {
                0
            } else {
                2
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            1
        }
    }
}
