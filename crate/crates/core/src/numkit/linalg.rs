//! Rank decisions, null spaces and row compression built on a full SVD.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Default relative rank threshold.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

pub fn ensure_finite_matrix(m: &Matrix) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "{}x{} matrix has non-finite entries",
            m.nrows(),
            m.ncols()
        )))
    }
}

pub fn ensure_finite_vector(v: &Vector) -> Result<()> {
    if v.iter().all(|x| x.is_finite()) {
        Ok(())
    } else {
        Err(Error::InvalidInput("vector has non-finite entries".into()))
    }
}

/// Full singular value decomposition with singular values sorted
/// non-increasingly. `u` is m×m, `v` is n×n; `sigma` has min(m, n) entries.
/// For non-square input `u` and `v` come from separate factorizations, so
/// only their spans (not the pairing of individual columns) are meaningful.
#[derive(Debug, Clone)]
pub struct FullSvd {
    pub u: Matrix,
    pub sigma: Vec<f64>,
    pub v: Matrix,
}

fn sorted_svd(m: &Matrix) -> (Matrix, Vec<f64>, Matrix) {
    let svd = m.clone().svd(true, true);
    let u = svd.u.expect("u requested");
    let vt = svd.v_t.expect("v_t requested");
    let k = svd.singular_values.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let mut u_sorted = Matrix::zeros(u.nrows(), k);
    let mut v_sorted = Matrix::zeros(vt.ncols(), k);
    let mut sigma = Vec::with_capacity(k);
    for (dst, &src) in order.iter().enumerate() {
        u_sorted.set_column(dst, &u.column(src));
        v_sorted.set_column(dst, &vt.row(src).transpose());
        sigma.push(svd.singular_values[src]);
    }
    (u_sorted, sigma, v_sorted)
}

fn pad(m: &Matrix, rows: usize, cols: usize) -> Matrix {
    let mut padded = Matrix::zeros(rows, cols);
    padded.view_mut((0, 0), m.shape()).copy_from(m);
    padded
}

/// nalgebra returns thin factors only; zero-padding the short dimension
/// recovers the complete orthogonal factor on the other side.
pub fn full_svd(m: &Matrix) -> FullSvd {
    let (rows, cols) = m.shape();
    if rows == cols {
        let (u, sigma, v) = sorted_svd(m);
        return FullSvd { u, sigma, v };
    }
    let (_, sigma, v) = sorted_svd(&pad(m, rows.max(cols), cols));
    let (u, _, _) = sorted_svd(&pad(m, rows, rows.max(cols)));
    let mut sigma = sigma;
    sigma.truncate(rows.min(cols));
    FullSvd {
        u: u.columns(0, rows).into_owned(),
        sigma,
        v: v.columns(0, cols).into_owned(),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankDecision {
    pub rank: usize,
    pub singular_values: Vec<f64>,
    pub tolerance_used: f64,
}

/// Counts singular values strictly above `rel_tol · σ₁`.
pub fn numeric_rank(m: &Matrix, rel_tol: f64) -> Result<RankDecision> {
    ensure_finite_matrix(m)?;
    if !(rel_tol > 0.0 && rel_tol < 1.0) {
        return Err(Error::InvalidInput(format!(
            "rank tolerance {rel_tol} not in (0, 1)"
        )));
    }
    if m.is_empty() {
        return Ok(RankDecision {
            rank: 0,
            singular_values: Vec::new(),
            tolerance_used: 0.0,
        });
    }
    let svd = full_svd(m);
    Ok(decide(&svd.sigma, rel_tol))
}

fn decide(sigma: &[f64], rel_tol: f64) -> RankDecision {
    let s1 = sigma.first().copied().unwrap_or(0.0);
    let tol = rel_tol * s1;
    let rank = if s1 == 0.0 {
        0
    } else {
        sigma.iter().filter(|&&s| s > tol).count()
    };
    RankDecision {
        rank,
        singular_values: sigma.to_vec(),
        tolerance_used: tol,
    }
}

/// Orthonormal basis of the numerical null space of `m`, as the trailing
/// right singular vectors.
pub fn kernel_basis(m: &Matrix, rel_tol: f64) -> Result<Vec<Vector>> {
    let basis = kernel_matrix(m, rel_tol)?;
    Ok(basis.column_iter().map(|c| c.into_owned()).collect())
}

/// Same as [`kernel_basis`] with the vectors stacked as columns.
pub fn kernel_matrix(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let decision = numeric_rank(m, rel_tol)?;
    let cols = m.ncols();
    if cols == 0 {
        return Ok(Matrix::zeros(0, 0));
    }
    let svd = full_svd(m);
    Ok(svd
        .v
        .columns(decision.rank, cols - decision.rank)
        .into_owned())
}

/// Orthonormal basis (as columns) of the row space of `m`, i.e. the
/// orthogonal complement of its null space.
pub fn row_space_matrix(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let decision = numeric_rank(m, rel_tol)?;
    let svd = full_svd(m);
    Ok(svd.v.columns(0, decision.rank).into_owned())
}

/// Orthonormal basis (as columns) of the left null space of `m`.
pub fn left_kernel_matrix(m: &Matrix, rel_tol: f64) -> Result<Matrix> {
    let decision = numeric_rank(m, rel_tol)?;
    let svd = full_svd(m);
    let rows = m.nrows();
    Ok(svd.u.columns(decision.rank, rows - decision.rank).into_owned())
}

/// `Q·M = [M₁; 0]` with `M₁` of full row rank `rank`.
#[derive(Debug, Clone)]
pub struct RowCompression {
    pub q: Matrix,
    pub rank: usize,
    pub condition: f64,
}

impl RowCompression {
    /// The leading `rank` rows of `Q·m`.
    pub fn leading_rows(&self, m: &Matrix) -> Matrix {
        (&self.q * m).rows(0, self.rank).into_owned()
    }

    /// Splits `Q·f` into the differential part and the constraint part.
    pub fn split(&self, f: &Vector) -> (Vector, Vector) {
        let qf = &self.q * f;
        let n = qf.len();
        (
            qf.rows(0, self.rank).into_owned(),
            qf.rows(self.rank, n - self.rank).into_owned(),
        )
    }
}

/// Row compression from the left singular vectors. Each row of `Q` is
/// sign-normalized so its largest-magnitude entry is positive, which makes an
/// already compressed matrix come back with `Q = I`.
pub fn row_compress(m: &Matrix, rel_tol: f64) -> Result<RowCompression> {
    if m.nrows() != m.ncols() {
        return Err(Error::InvalidInput(format!(
            "row compression expects a square matrix, got {}x{}",
            m.nrows(),
            m.ncols()
        )));
    }
    let decision = numeric_rank(m, rel_tol)?;
    let svd = full_svd(m);
    let n = m.nrows();
    let mut u = svd.u;
    if decision.rank < n {
        let null = axis_aligned_basis(&u.columns(decision.rank, n - decision.rank).into_owned());
        u.columns_mut(decision.rank, n - decision.rank).copy_from(&null);
    }
    let mut q = u.transpose();
    for mut row in q.row_iter_mut() {
        let pivot = row
            .iter()
            .copied()
            .fold(0.0_f64, |acc, v| if v.abs() > acc.abs() { v } else { acc });
        if pivot < 0.0 {
            row.neg_mut();
        }
    }
    Ok(RowCompression {
        condition: condition_number(&q),
        q,
        rank: decision.rank,
    })
}

/// Re-expresses the orthonormal columns of `basis` by greedy Gram–Schmidt
/// on the projections of the coordinate axes, so that a span containing
/// coordinate axes is returned as those axes.
pub fn axis_aligned_basis(basis: &Matrix) -> Matrix {
    let (n, k) = basis.shape();
    let projector = basis * basis.transpose();
    let mut chosen: Vec<Vector> = Vec::with_capacity(k);
    let mut used = vec![false; n];
    for _ in 0..k {
        let mut best: Option<(usize, Vector, f64)> = None;
        for j in (0..n).filter(|&j| !used[j]) {
            let mut p = projector.column(j).into_owned();
            for c in &chosen {
                let d = c.dot(&p);
                p -= c * d;
            }
            let norm = p.norm();
            if best.as_ref().is_none_or(|b| norm > b.2 + 1e-12) {
                best = Some((j, p, norm));
            }
        }
        match best {
            Some((j, p, norm)) if norm > 1e-12 => {
                used[j] = true;
                chosen.push(p / norm);
            }
            _ => return basis.clone(),
        }
    }
    columns_to_matrix(n, &chosen)
}

/// 2-norm condition number; infinite for singular, empty or non-finite input.
pub fn condition_number(m: &Matrix) -> f64 {
    if m.is_empty() || !m.iter().all(|v| v.is_finite()) {
        return f64::INFINITY;
    }
    let svd = full_svd(m);
    let smax = svd.sigma.first().copied().unwrap_or(0.0);
    let smin = svd.sigma.last().copied().unwrap_or(0.0);
    if smin == 0.0 {
        f64::INFINITY
    } else {
        smax / smin
    }
}

/// Rotates the columns of `basis` (orthonormal, n×k) by the orthogonal k×k
/// matrix that best matches `reference` in Frobenius norm (orthogonal
/// Procrustes). Spans are unchanged.
pub fn align_basis(basis: &Matrix, reference: &Matrix) -> Matrix {
    if basis.ncols() == 0 || basis.ncols() != reference.ncols() {
        return basis.clone();
    }
    let cross = basis.transpose() * reference;
    let svd = full_svd(&cross);
    basis * (svd.u * svd.v.transpose())
}

/// Distance of `v` to the span of the orthonormal columns of `basis`.
pub fn distance_to_span(v: &Vector, basis: &Matrix) -> f64 {
    if basis.ncols() == 0 {
        return v.norm();
    }
    let proj = basis * (basis.transpose() * v);
    (v - proj).norm()
}

/// Column-stacks a list of vectors.
pub fn columns_to_matrix(n: usize, cols: &[Vector]) -> Matrix {
    let mut m = Matrix::zeros(n, cols.len());
    for (j, c) in cols.iter().enumerate() {
        m.set_column(j, c);
    }
    m
}
