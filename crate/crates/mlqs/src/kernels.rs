//! Small dense kernels shared by the sweeps: truncated rank-revealing
//! factorizations, stacking helpers and pivot condition guards.
//!
//! Singular value decompositions are computed by one-sided Jacobi rotations
//! (with a Householder QR preprocessing step for tall matrices) instead of
//! the bidiagonalization SVD, which loses up to ~1e-4 of the matrix on some
//! small nearly rank-deficient inputs. Jacobi converges slower but delivers
//! factors accurate to roundoff, which the order-reduction sweeps rely on.

use nalgebra::DMatrix;

use crate::metrics;

/// Which dense factorization backs low-rank truncation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum FactorKernel {
    /// Truncated singular value decomposition (default; tightest ranks).
    #[default]
    Svd,
    /// Rank-revealing column-pivoted QR/LQ (faster, slightly looser ranks).
    RankRevealingQr,
}

/// Rank decision rule applied inside each local factorization.
#[derive(Debug, Clone, Copy)]
pub struct TruncationRule {
    /// Keep singular values `sigma > rel_tol * sigma_max`. Zero selects the
    /// machine threshold `max(m, n) * ulp`.
    pub rel_tol: f64,
    /// Hard cap on the kept rank, applied after thresholding.
    pub max_rank: Option<usize>,
    /// Absolute threshold floor. Compression passes set this to roundoff
    /// level relative to the whole matrix so that cancellation debris
    /// collapses to width zero instead of surviving as a tiny local stack.
    pub abs_floor: f64,
}

impl TruncationRule {
    pub fn exact() -> Self {
        Self { rel_tol: 0.0, max_rank: None, abs_floor: 1e-300 }
    }

    pub fn tolerance(rel_tol: f64) -> Self {
        Self { rel_tol, max_rank: None, abs_floor: 1e-300 }
    }

    pub fn max_rank(r: usize) -> Self {
        Self { rel_tol: 0.0, max_rank: Some(r), abs_floor: 1e-300 }
    }

    pub fn with_floor(mut self, abs_floor: f64) -> Self {
        self.abs_floor = abs_floor.max(1e-300);
        self
    }

    fn kept_rank(&self, values: &[f64], m: usize, n: usize) -> usize {
        let sigma_max = values.first().copied().unwrap_or(0.0);
        let rel = if self.rel_tol == 0.0 {
            m.max(n) as f64 * f64::EPSILON
        } else {
            self.rel_tol
        };
        let thresh = (rel * sigma_max).max(self.abs_floor);
        let mut kept = values.iter().take_while(|&&s| s > thresh).count();
        if let Some(cap) = self.max_rank {
            kept = kept.min(cap);
        }
        kept
    }
}

/// Outcome of one truncated factorization `M ~ left * right`.
pub struct TruncatedFactors {
    pub left: DMatrix<f64>,
    pub right: DMatrix<f64>,
    /// Frobenius norm of the discarded part of `M`.
    pub discarded: f64,
    /// Max-abs deviation of the orthonormal factor's Gram matrix from the
    /// identity.
    pub ortho_defect: f64,
}

/// Thin SVD `M = U diag(sigma) V^T` with `sigma` sorted descending; `U` has
/// `min(m, n)` columns and `V^T` has `min(m, n)` rows, both orthonormal to
/// roundoff even in the presence of zero singular values.
pub struct SmallSvd {
    pub u: DMatrix<f64>,
    pub sigma: Vec<f64>,
    pub vt: DMatrix<f64>,
}

/// One-sided Jacobi SVD; tall inputs are reduced by a QR step first, wide
/// inputs via the transpose.
pub fn jacobi_svd(m: &DMatrix<f64>) -> SmallSvd {
    metrics::count_factorization(m.nrows(), m.ncols());
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        let k = rows.min(cols);
        return SmallSvd {
            u: DMatrix::zeros(rows, k),
            sigma: vec![],
            vt: DMatrix::zeros(k, cols),
        };
    }
    if rows < cols {
        let t = jacobi_svd_tall(&m.transpose());
        return SmallSvd { u: t.vt.transpose(), sigma: t.sigma, vt: t.u.transpose() };
    }
    jacobi_svd_tall(m)
}

fn jacobi_svd_tall(m: &DMatrix<f64>) -> SmallSvd {
    let (rows, cols) = m.shape();
    debug_assert!(rows >= cols);
    if rows > cols {
        let qr = m.clone().qr();
        let inner = jacobi_svd_square(&qr.r());
        return SmallSvd { u: qr.q() * inner.u, sigma: inner.sigma, vt: inner.vt };
    }
    jacobi_svd_square(m)
}

fn jacobi_svd_square(a: &DMatrix<f64>) -> SmallSvd {
    let n = a.ncols();
    let mut w = a.clone();
    let mut v = DMatrix::<f64>::identity(n, n);
    let tol = 4.0 * f64::EPSILON;
    for _sweep in 0..64 {
        let mut rotated = false;
        for i in 0..n.saturating_sub(1) {
            for j in (i + 1)..n {
                let alpha = w.column(i).dot(&w.column(i));
                let beta = w.column(j).dot(&w.column(j));
                let gamma = w.column(i).dot(&w.column(j));
                if gamma.abs() <= tol * (alpha * beta).sqrt() || gamma == 0.0 {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = if zeta == 0.0 {
                    1.0
                } else {
                    zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt())
                };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for r in 0..w.nrows() {
                    let (wi, wj) = (w[(r, i)], w[(r, j)]);
                    w[(r, i)] = c * wi - s * wj;
                    w[(r, j)] = s * wi + c * wj;
                }
                for r in 0..n {
                    let (vi, vj) = (v[(r, i)], v[(r, j)]);
                    v[(r, i)] = c * vi - s * vj;
                    v[(r, j)] = s * vi + c * vj;
                }
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    order.sort_by(|&i, &j| norms[j].partial_cmp(&norms[i]).unwrap());

    let mut u = DMatrix::zeros(w.nrows(), n);
    let mut vt = DMatrix::zeros(n, n);
    let mut sigma = Vec::with_capacity(n);
    let scale = norms[order[0]];
    for (pos, &idx) in order.iter().enumerate() {
        let s = norms[idx];
        sigma.push(s);
        if s > scale * 1e-306 && s > 0.0 {
            u.column_mut(pos).copy_from(&(w.column(idx) / s));
        }
        vt.row_mut(pos).copy_from(&v.column(idx).transpose());
    }
    SmallSvd { u, sigma, vt }
}

/// Factor `M ~ L * V` with `V` row-orthonormal (`V V^T = I`); the kept rank
/// follows `rule`. Used by ascending sweeps.
pub fn row_orthonormal_factor(
    m: &DMatrix<f64>,
    rule: &TruncationRule,
    kernel: FactorKernel,
) -> TruncatedFactors {
    if m.nrows() == 0 || m.ncols() == 0 {
        return TruncatedFactors {
            left: DMatrix::zeros(m.nrows(), 0),
            right: DMatrix::zeros(0, m.ncols()),
            discarded: 0.0,
            ortho_defect: 0.0,
        };
    }
    match kernel {
        FactorKernel::Svd => {
            let svd = jacobi_svd(m);
            let r = rule.kept_rank(&svd.sigma, m.nrows(), m.ncols());
            let discarded: f64 = svd.sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt();
            let mut left = svd.u.columns(0, r).into_owned();
            for (i, mut col) in left.column_iter_mut().enumerate() {
                col.scale_mut(svd.sigma[i]);
            }
            let right = svd.vt.rows(0, r).into_owned();
            let defect = gram_defect_rows(&right);
            TruncatedFactors { left, right, discarded, ortho_defect: defect }
        }
        FactorKernel::RankRevealingQr => {
            // LQ via column-pivoted QR of the transpose: M^T P = Q R implies
            // M = P R^T Q^T with Q^T row-orthonormal.
            metrics::count_factorization(m.nrows(), m.ncols());
            let qr = m.transpose().col_piv_qr();
            let (q, r, perm) = (qr.q(), qr.r(), qr.p());
            let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
            let rank = rule.kept_rank(&diag, m.nrows(), m.ncols());
            let discarded = if rank < r.nrows() {
                r.rows(rank, r.nrows() - rank).norm()
            } else {
                0.0
            };
            let mut left_t = r.rows(0, rank).into_owned(); // rank x ncols(R) = rank x nrows(M)
            perm.inv_permute_columns(&mut left_t);
            let left = left_t.transpose();
            let right = q.columns(0, rank).transpose();
            let defect = gram_defect_rows(&right);
            TruncatedFactors { left, right, discarded, ortho_defect: defect }
        }
    }
}

/// Factor `M ~ U * S` with `U` column-orthonormal (`U^T U = I`). Used by
/// descending sweeps.
pub fn col_orthonormal_factor(
    m: &DMatrix<f64>,
    rule: &TruncationRule,
    kernel: FactorKernel,
) -> TruncatedFactors {
    if m.nrows() == 0 || m.ncols() == 0 {
        return TruncatedFactors {
            left: DMatrix::zeros(m.nrows(), 0),
            right: DMatrix::zeros(0, m.ncols()),
            discarded: 0.0,
            ortho_defect: 0.0,
        };
    }
    match kernel {
        FactorKernel::Svd => {
            let svd = jacobi_svd(m);
            let r = rule.kept_rank(&svd.sigma, m.nrows(), m.ncols());
            let discarded: f64 = svd.sigma[r..].iter().map(|s| s * s).sum::<f64>().sqrt();
            let left = svd.u.columns(0, r).into_owned();
            let mut right = svd.vt.rows(0, r).into_owned();
            for (i, mut row) in right.row_iter_mut().enumerate() {
                row.scale_mut(svd.sigma[i]);
            }
            let defect = gram_defect_cols(&left);
            TruncatedFactors { left, right, discarded, ortho_defect: defect }
        }
        FactorKernel::RankRevealingQr => {
            metrics::count_factorization(m.nrows(), m.ncols());
            let qr = m.clone().col_piv_qr();
            let (q, r, perm) = (qr.q(), qr.r(), qr.p());
            let diag: Vec<f64> = (0..r.nrows().min(r.ncols())).map(|i| r[(i, i)].abs()).collect();
            let rank = rule.kept_rank(&diag, m.nrows(), m.ncols());
            let discarded = if rank < r.nrows() {
                r.rows(rank, r.nrows() - rank).norm()
            } else {
                0.0
            };
            let left = q.columns(0, rank).into_owned();
            let mut right = r.rows(0, rank).into_owned();
            perm.inv_permute_columns(&mut right);
            let defect = gram_defect_cols(&left);
            TruncatedFactors { left, right, discarded, ortho_defect: defect }
        }
    }
}

fn gram_defect_rows(v: &DMatrix<f64>) -> f64 {
    let gram = v * v.transpose();
    let r = gram.nrows();
    let mut defect = 0.0f64;
    for i in 0..r {
        for j in 0..r {
            let want = if i == j { 1.0 } else { 0.0 };
            defect = defect.max((gram[(i, j)] - want).abs());
        }
    }
    defect
}

fn gram_defect_cols(u: &DMatrix<f64>) -> f64 {
    gram_defect_rows(&u.transpose())
}

/// Singular values of a small dense matrix, sorted descending.
pub fn singular_values(m: &DMatrix<f64>) -> Vec<f64> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return vec![m[(0, 0)].abs()];
    }
    jacobi_svd(m).sigma
}

/// Reciprocal condition estimate `sigma_min / sigma_max` (1.0 for empty).
pub fn rcond(m: &DMatrix<f64>) -> f64 {
    if m.nrows() == 0 {
        return 1.0;
    }
    if m.nrows() == 1 && m.ncols() == 1 {
        return if m[(0, 0)] != 0.0 { 1.0 } else { 0.0 };
    }
    let sv = singular_values(m);
    let smax = sv.first().copied().unwrap_or(0.0);
    let smin = sv.last().copied().unwrap_or(0.0);
    if smax == 0.0 { 0.0 } else { smin / smax }
}

/// Largest singular value (0.0 for empty).
pub fn sigma_max(m: &DMatrix<f64>) -> f64 {
    singular_values(m).first().copied().unwrap_or(0.0)
}

/// Smallest singular value (infinity for empty, so empty pivots never trip
/// the regularity guard).
pub fn sigma_min(m: &DMatrix<f64>) -> f64 {
    singular_values(m).last().copied().unwrap_or(f64::INFINITY)
}

/// Horizontal concatenation, tolerating zero-width operands.
pub fn hstack(left: &DMatrix<f64>, right: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(left.nrows(), right.nrows());
    let mut out = DMatrix::zeros(left.nrows(), left.ncols() + right.ncols());
    out.view_mut((0, 0), left.shape()).copy_from(left);
    out.view_mut((0, left.ncols()), right.shape()).copy_from(right);
    metrics::count_block(out.nrows(), out.ncols());
    out
}

/// Vertical concatenation, tolerating zero-height operands.
pub fn vstack(top: &DMatrix<f64>, bottom: &DMatrix<f64>) -> DMatrix<f64> {
    debug_assert_eq!(top.ncols(), bottom.ncols());
    let mut out = DMatrix::zeros(top.nrows() + bottom.nrows(), top.ncols());
    out.view_mut((0, 0), top.shape()).copy_from(top);
    out.view_mut((top.nrows(), 0), bottom.shape()).copy_from(bottom);
    metrics::count_block(out.nrows(), out.ncols());
    out
}

/// Block diagonal of two blocks, tolerating zero dimensions.
pub fn block_diag(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(a.nrows() + b.nrows(), a.ncols() + b.ncols());
    out.view_mut((0, 0), a.shape()).copy_from(a);
    out.view_mut((a.nrows(), a.ncols()), b.shape()).copy_from(b);
    metrics::count_block(out.nrows(), out.ncols());
    out
}
