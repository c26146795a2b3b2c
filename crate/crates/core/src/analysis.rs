//! Structural checks on a region: constant-rank condition, index-1 test,
//! involutivity of `ker E` and membership in the consistency manifold.
//!
//! Region checks are sampling based. A pass means no sample refuted the
//! property, which is why verdicts read `not_refuted` rather than `pass`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{consistency_residual, Scenario};
use crate::numkit::linalg::{align_basis, distance_to_span, full_svd, condition_number};
use crate::numkit::{kernel_matrix, numeric_rank, row_compress, Matrix, Vector};

pub const DEFAULT_SAMPLE_COUNT: usize = 200;
pub const DEFAULT_SEED: u64 = 20_240_101;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NotRefuted,
    Fail,
    Inconclusive,
}

impl Verdict {
    pub fn is_pass(self) -> bool {
        self == Verdict::NotRefuted
    }

    fn combine(self, other: Verdict) -> Verdict {
        use Verdict::*;
        match (self, other) {
            (Fail, _) | (_, Fail) => Fail,
            (Inconclusive, _) | (_, Inconclusive) => Inconclusive,
            _ => NotRefuted,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Tolerances {
    /// relative singular-value cutoff for ranks of `E`, `DF₂` and `A`
    pub rank_rel: f64,
    /// absolute singular-value cutoff for `E·ker DF₂`
    pub rank_abs: f64,
    /// residual tolerance of the projection onto `F₂ = 0`
    pub projection: f64,
    /// distance of a Lie bracket to `ker E` for unit fields
    pub bracket: f64,
    pub fd_step: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            rank_rel: 1e-9,
            rank_abs: 1e-8,
            projection: 1e-12,
            bracket: 1e-6,
            fd_step: 1e-5,
        }
    }
}

/// Axis-aligned box sampled by a randomly shifted Halton sequence, plus
/// explicit probe points that are always checked first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub count: usize,
    pub seed: u64,
    #[serde(default)]
    pub probes: Vec<Vec<f64>>,
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

fn radical_inverse(mut i: u64, base: u64) -> f64 {
    let inv = 1.0 / base as f64;
    let mut out = 0.0;
    let mut scale = inv;
    while i > 0 {
        out += (i % base) as f64 * scale;
        i /= base;
        scale *= inv;
    }
    out
}

impl Region {
    pub fn new(lower: &[f64], upper: &[f64]) -> Result<Self> {
        if lower.len() != upper.len() || lower.is_empty() {
            return Err(Error::InvalidInput("region bounds must have equal, nonzero length".into()));
        }
        if lower.len() > PRIMES.len() {
            return Err(Error::InvalidInput(format!("regions of dimension > {} are not supported", PRIMES.len())));
        }
        if lower.iter().zip(upper).any(|(a, b)| !(a.is_finite() && b.is_finite() && a < b)) {
            return Err(Error::InvalidInput("region needs finite bounds with lower < upper".into()));
        }
        Ok(Self {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            count: DEFAULT_SAMPLE_COUNT,
            seed: DEFAULT_SEED,
            probes: Vec::new(),
        })
    }

    /// The scenario's default box.
    pub fn for_scenario(s: &Scenario) -> Self {
        let lo: Vec<f64> = s.defaults.region_lower.iter().copied().collect();
        let hi: Vec<f64> = s.defaults.region_upper.iter().copied().collect();
        Self::new(&lo, &hi).expect("scenario defaults are a valid box")
    }

    pub fn with_count(mut self, count: usize) -> Self {
        self.count = count;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_probe(mut self, p: &[f64]) -> Self {
        self.probes.push(p.to_vec());
        self
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Probes followed by `count` quasi-random points; deterministic in the seed.
    pub fn samples(&self) -> Vec<Vector> {
        let d = self.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let shift: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let mut out: Vec<Vector> = self.probes.iter().map(|p| Vector::from_column_slice(p)).collect();
        for i in 1..=self.count as u64 {
            out.push(Vector::from_iterator(
                d,
                (0..d).map(|k| {
                    let u = (radical_inverse(i, PRIMES[k]) + shift[k]).fract();
                    self.lower[k] + u * (self.upper[k] - self.lower[k])
                }),
            ));
        }
        out
    }
}

/// Minimum-norm Gauss–Newton projection onto `F₂ = 0`, starting from `x`.
pub fn project_to_constraints(s: &Scenario, x: &Vector, tol: f64, max_iter: usize) -> Result<Vector> {
    let c = s.system.constraint_near(x)?;
    let mut p = x.clone();
    let mut r = c.value(&p)?;
    for _ in 0..max_iter {
        if r.norm() <= tol {
            return Ok(p);
        }
        let j = c.jacobian(&p)?;
        let step = j
            .clone()
            .pseudo_inverse(1e-12 * j.amax().max(1e-300))
            .map_err(|e| Error::SingularSystem(e.to_string()))?
            * &r;
        let mut lambda = 1.0;
        loop {
            let trial = &p - &step * lambda;
            if let Ok(rt) = s.system.domain.check(&trial).and_then(|_| c.value(&trial)) {
                if rt.norm() < r.norm() || rt.norm() <= tol {
                    p = trial;
                    r = rt;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-8 {
                return Err(Error::NoConvergence {
                    iterations: max_iter,
                    residual_norm: r.norm(),
                    last_iterate: p.iter().copied().collect(),
                });
            }
        }
    }
    if r.norm() <= tol {
        Ok(p)
    } else {
        Err(Error::NoConvergence {
            iterations: max_iter,
            residual_norm: r.norm(),
            last_iterate: p.iter().copied().collect(),
        })
    }
}

fn projection_tol(tol: &Tolerances, x: &Vector) -> f64 {
    tol.projection * (1.0 + x.amax())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub quantity: String,
    pub point: Vec<f64>,
    pub value: usize,
    pub expected: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CrReport {
    pub verdict: Verdict,
    pub rank_e: Option<usize>,
    pub rank_df2: Option<usize>,
    pub rank_e_ker_df2: Option<usize>,
    pub counterexample: Option<Counterexample>,
    pub samples_used: usize,
    pub samples_skipped: usize,
    pub projection_failures: Vec<String>,
}

fn abs_rank(m: &Matrix, abs_tol: f64) -> usize {
    if m.is_empty() {
        return 0;
    }
    full_svd(m).sigma.iter().filter(|s| **s > abs_tol).count()
}

/// Most frequent value and the first entry that deviates from it.
fn constancy(values: &[(usize, &Vector)], quantity: &str) -> (Option<usize>, Option<Counterexample>) {
    let mut counts = std::collections::BTreeMap::new();
    for (v, _) in values {
        *counts.entry(*v).or_insert(0usize) += 1;
    }
    let Some((&mode, _)) = counts.iter().max_by_key(|(v, c)| (**c, std::cmp::Reverse(**v))) else {
        return (None, None);
    };
    let bad = values.iter().find(|(v, _)| *v != mode).map(|(v, p)| Counterexample {
        quantity: quantity.into(),
        point: p.iter().copied().collect(),
        value: *v,
        expected: mode,
    });
    (Some(mode), bad)
}

/// Points of the constraint set obtained from the samples, with the
/// diagnostics of projections that failed.
struct ConstraintSamples {
    points: Vec<Vector>,
    failures: Vec<String>,
}

fn constraint_samples(s: &Scenario, samples: &[Vector], tol: &Tolerances) -> ConstraintSamples {
    let mut points = Vec::new();
    let mut failures = Vec::new();
    for x in samples {
        match project_to_constraints(s, x, projection_tol(tol, x), 50) {
            Ok(p) => points.push(p),
            Err(e) => failures.push(format!("{:?}: {e}", x.as_slice())),
        }
    }
    ConstraintSamples { points, failures }
}

fn domain_samples(s: &Scenario, region: &Region) -> Result<(Vec<Vector>, usize)> {
    if region.dim() != s.dim() {
        return Err(Error::InvalidInput(format!(
            "region dimension {} does not match scenario dimension {}",
            region.dim(),
            s.dim()
        )));
    }
    let all = region.samples();
    let total = all.len();
    let inside: Vec<Vector> = all.into_iter().filter(|x| s.system.domain.contains(x)).collect();
    let skipped = total - inside.len();
    Ok((inside, skipped))
}

/// Sampled check of: rank `E` constant, and on the constraint set rank
/// `DF₂` and rank `E·ker DF₂` constant.
pub fn check_cr(s: &Scenario, region: &Region, tol: &Tolerances) -> Result<CrReport> {
    let (samples, skipped) = domain_samples(s, region)?;
    let cs = constraint_samples(s, &samples, tol);
    cr_from_samples(s, &samples, skipped, &cs, tol)
}

fn cr_from_samples(
    s: &Scenario,
    samples: &[Vector],
    skipped: usize,
    cs: &ConstraintSamples,
    tol: &Tolerances,
) -> Result<CrReport> {
    let mut rank_e = Vec::with_capacity(samples.len());
    for x in samples {
        rank_e.push((numeric_rank(&s.system.eval_e(x)?, tol.rank_rel)?.rank, x));
    }
    let mut rank_df2 = Vec::new();
    let mut rank_ek = Vec::new();
    for p in &cs.points {
        let c = s.system.constraint_near(p)?;
        let df2 = c.jacobian(p)?;
        rank_df2.push((numeric_rank(&df2, tol.rank_rel)?.rank, p));
        let k = kernel_matrix(&df2, tol.rank_rel)?;
        let ek = s.system.eval_e(p)? * k;
        rank_ek.push((abs_rank(&ek, tol.rank_abs), p));
    }
    let (re, bad_e) = constancy(&rank_e, "rank E");
    let (rd, bad_d) = constancy(&rank_df2, "rank DF2");
    let (rk, bad_k) = constancy(&rank_ek, "rank E*ker DF2");
    let counterexample = bad_e.or(bad_d).or(bad_k);
    let verdict = if counterexample.is_some() {
        Verdict::Fail
    } else if !cs.failures.is_empty() || samples.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::NotRefuted
    };
    Ok(CrReport {
        verdict,
        rank_e: re,
        rank_df2: rd,
        rank_e_ker_df2: rk,
        counterexample,
        samples_used: samples.len(),
        samples_skipped: skipped,
        projection_failures: cs.failures.clone(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index1Result {
    pub point: Vec<f64>,
    pub invertible: bool,
    pub rank: usize,
    pub determinant: f64,
    pub condition: f64,
}

/// `A(x) = [E₁(x); DF₂(x)]` at `x`, after projecting `x` onto `F₂ = 0`
/// when it is not already there.
pub fn index1_test(s: &Scenario, x: &Vector, tol: &Tolerances) -> Result<Index1Result> {
    let c = s.system.constraint_near(x)?;
    let x = if c.value(x)?.norm() > projection_tol(tol, x) {
        project_to_constraints(s, x, projection_tol(tol, x), 50)?
    } else {
        x.clone()
    };
    let a = stacked_matrix(s, &x, tol)?;
    let n = s.dim();
    let rank = numeric_rank(&a, tol.rank_rel)?.rank;
    let determinant = if a.is_square() { a.determinant() } else { f64::NAN };
    Ok(Index1Result {
        point: x.iter().copied().collect(),
        invertible: rank == n && a.nrows() == n,
        rank,
        determinant,
        condition: condition_number(&a),
    })
}

/// `[E₁; DF₂]` with `E₁` the leading rows of the row compression of `E`.
pub fn stacked_matrix(s: &Scenario, x: &Vector, tol: &Tolerances) -> Result<Matrix> {
    let e = s.system.eval_e(x)?;
    let rc = row_compress(&e, tol.rank_rel)?;
    let e1 = rc.leading_rows(&e);
    let df2 = s.system.constraint_near(x)?.jacobian(x)?;
    let n = s.dim();
    let mut a = Matrix::zeros(e1.nrows() + df2.nrows(), n);
    a.view_mut((0, 0), (e1.nrows(), n)).copy_from(&e1);
    a.view_mut((e1.nrows(), 0), (df2.nrows(), n)).copy_from(&df2);
    Ok(a)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvolutivityResult {
    pub point: Vec<f64>,
    pub verdict: Verdict,
    pub kernel_dim: usize,
    /// largest distance of a bracket of unit kernel fields to `ker E(x)`
    pub residual: f64,
    pub note: Option<String>,
}

/// Lie brackets of a smooth orthonormal frame of `ker E` near `x`, by central
/// differences. The frame at each probe is Procrustes-aligned to the frame
/// at `x` so that it varies smoothly.
pub fn involutivity_check(s: &Scenario, x: &Vector, fd_step: f64, tol: f64) -> Result<InvolutivityResult> {
    let rank_tol = Tolerances::default().rank_rel;
    let k0 = kernel_matrix(&s.system.eval_e(x)?, rank_tol)?;
    let k = k0.ncols();
    let point: Vec<f64> = x.iter().copied().collect();
    if k <= 1 {
        return Ok(InvolutivityResult {
            point,
            verdict: Verdict::NotRefuted,
            kernel_dim: k,
            residual: 0.0,
            note: Some("distribution of dimension <= 1".into()),
        });
    }
    let frame = |p: &Vector| -> Result<Option<Matrix>> {
        let kp = kernel_matrix(&s.system.eval_e(p)?, rank_tol)?;
        if kp.ncols() != k {
            return Ok(None);
        }
        Ok(Some(align_basis(&kp, &k0)))
    };
    // D g · v at x for all frame fields at once
    let directional = |v: &Vector| -> Result<Option<Matrix>> {
        let plus = frame(&(x + v * fd_step))?;
        let minus = frame(&(x - v * fd_step))?;
        Ok(match (plus, minus) {
            (Some(a), Some(b)) => Some((a - b) / (2.0 * fd_step)),
            _ => None,
        })
    };
    let mut derivs = Vec::with_capacity(k);
    for i in 0..k {
        match directional(&k0.column(i).into_owned())? {
            Some(d) => derivs.push(d),
            None => {
                return Ok(InvolutivityResult {
                    point,
                    verdict: Verdict::Inconclusive,
                    kernel_dim: k,
                    residual: f64::NAN,
                    note: Some("kernel dimension changes among probe points".into()),
                })
            }
        }
    }
    let mut residual: f64 = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            // [gᵢ, gⱼ] = Dgⱼ·gᵢ − Dgᵢ·gⱼ
            let bracket = derivs[i].column(j) - derivs[j].column(i);
            residual = residual.max(distance_to_span(&bracket, &k0));
        }
    }
    Ok(InvolutivityResult {
        point,
        verdict: if residual <= tol { Verdict::NotRefuted } else { Verdict::Fail },
        kernel_dim: k,
        residual,
        note: None,
    })
}

/// `x` is in the domain, satisfies `F₂(x) = 0` to `tol` and lies on the
/// scenario's branch of the manifold.
pub fn on_manifold(s: &Scenario, x: &Vector, tol: f64) -> bool {
    if !s.system.domain.contains(x) || !s.manifold_branch.contains(x) {
        return false;
    }
    consistency_residual(s, x).map(|r| r.norm() <= tol).unwrap_or(false)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Index1Summary {
    pub verdict: Verdict,
    pub min_abs_det: f64,
    pub max_condition: f64,
    pub failing_point: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvolutivitySummary {
    pub verdict: Verdict,
    pub worst_residual: f64,
    pub worst_point: Option<Vec<f64>>,
    pub kernel_dim: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisReport {
    pub scenario: String,
    pub seed: u64,
    pub samples_used: usize,
    pub region: Region,
    pub tolerances: Tolerances,
    pub cr: CrReport,
    pub index1: Index1Summary,
    pub involutive: InvolutivitySummary,
    pub verdict: Verdict,
    pub notes: Vec<String>,
}

impl AnalysisReport {
    pub fn summary(&self) -> String {
        let label = |v: Verdict| match v {
            Verdict::NotRefuted => "not refuted",
            Verdict::Fail => "FAIL",
            Verdict::Inconclusive => "inconclusive",
        };
        let mut out = format!(
            "scenario {}: {} samples (seed {})\n",
            self.scenario, self.samples_used, self.seed
        );
        out += &format!(
            "  (CR)        {:<13} rank E = {}\n",
            label(self.cr.verdict),
            self.cr.rank_e.map_or("-".into(), |r| r.to_string())
        );
        if let Some(c) = &self.cr.counterexample {
            out += &format!("              {} = {} (expected {}) at {:?}\n", c.quantity, c.value, c.expected, c.point);
        }
        out += &format!(
            "  index-1     {:<13} min |det A| = {:.6e}, max cond = {:.3e}\n",
            label(self.index1.verdict),
            self.index1.min_abs_det,
            self.index1.max_condition
        );
        if let Some(p) = &self.index1.failing_point {
            out += &format!("              A singular at {p:?}\n");
        }
        out += &format!(
            "  involutive  {:<13} worst bracket residual = {:.3e}\n",
            label(self.involutive.verdict),
            self.involutive.worst_residual
        );
        if let (Verdict::Fail, Some(p)) = (self.involutive.verdict, &self.involutive.worst_point) {
            out += &format!("              at {p:?}\n");
        }
        out += &format!("  overall     {}\n", label(self.verdict));
        out
    }
}

/// Runs every structural check over the region.
pub fn analyze(s: &Scenario, region: &Region, tol: &Tolerances) -> Result<AnalysisReport> {
    let (samples, skipped) = domain_samples(s, region)?;
    let cs = constraint_samples(s, &samples, tol);
    let cr = cr_from_samples(s, &samples, skipped, &cs, tol)?;

    let mut min_abs_det = f64::INFINITY;
    let mut max_condition: f64 = 0.0;
    let mut failing_point = None;
    for p in &cs.points {
        let r = index1_test(s, p, tol)?;
        min_abs_det = min_abs_det.min(r.determinant.abs());
        max_condition = max_condition.max(r.condition);
        if !r.invertible && failing_point.is_none() {
            failing_point = Some(r.point);
        }
    }
    let index1_verdict = if failing_point.is_some() {
        Verdict::Fail
    } else if cs.points.is_empty() || !cs.failures.is_empty() {
        Verdict::Inconclusive
    } else {
        Verdict::NotRefuted
    };

    let mut worst = InvolutivitySummary {
        verdict: if samples.is_empty() { Verdict::Inconclusive } else { Verdict::NotRefuted },
        worst_residual: 0.0,
        worst_point: None,
        kernel_dim: None,
    };
    for x in &samples {
        let r = involutivity_check(s, x, tol.fd_step, tol.bracket)?;
        worst.verdict = worst.verdict.combine(r.verdict);
        worst.kernel_dim.get_or_insert(r.kernel_dim);
        if r.residual > worst.worst_residual || (r.residual.is_nan() && worst.worst_point.is_none()) {
            worst.worst_residual = r.residual;
            worst.worst_point = Some(r.point);
        }
    }

    let verdict = cr.verdict.combine(index1_verdict).combine(worst.verdict);
    let mut notes = vec!["verdicts are sampling based: not_refuted means no sample contradicted the property".into()];
    notes.extend(s.notes.iter().cloned());
    Ok(AnalysisReport {
        scenario: s.name.clone(),
        seed: region.seed,
        samples_used: samples.len(),
        region: region.clone(),
        tolerances: *tol,
        cr,
        index1: Index1Summary {
            verdict: index1_verdict,
            min_abs_det,
            max_condition,
            failing_point,
        },
        involutive: worst,
        verdict,
        notes,
    })
}
