//! Quasiseparable order reduction.
//!
//! Arithmetic on generator representations adds widths; this module restores
//! minimal (or tolerance-truncated) widths with a forward sweep that
//! row-orthonormalizes the input side of each triangle followed by a
//! backward sweep that column-orthonormalizes the output side. In exact mode
//! the resulting widths equal the ranks of the off-diagonal submatrices at
//! every split.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::kernels::{self, FactorKernel, TruncationRule};
use crate::matrix::QsMatrix;

pub use crate::kernels::FactorKernel as CompressionKernel;

/// How aggressively widths are truncated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum CompressionMode {
    /// Keep every singular value above the machine threshold: widths become
    /// the exact numerical ranks.
    ExactRank,
    /// Exact thresholding followed by a hard cap on every width.
    FixedMaxOrder(usize),
    /// Keep singular values above `tau * sigma_max` per local factorization.
    RelativeTolerance(f64),
    /// Tight tolerance (1e-12) plus a hard cap; used for intermediates of
    /// capped factorizations, where the final cap governs quality and this
    /// bound only controls cost.
    IntermediateBound(usize),
}

/// Truncation mode plus factorization kernel.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CompressionPolicy {
    pub mode: CompressionMode,
    pub kernel: CompressionKernel,
}

impl CompressionPolicy {
    pub fn exact() -> Self {
        Self { mode: CompressionMode::ExactRank, kernel: CompressionKernel::Svd }
    }

    pub fn fixed_max_order(r: usize) -> Self {
        Self { mode: CompressionMode::FixedMaxOrder(r), kernel: CompressionKernel::Svd }
    }

    pub fn relative_tolerance(tau: f64) -> Self {
        Self { mode: CompressionMode::RelativeTolerance(tau), kernel: CompressionKernel::Svd }
    }

    pub fn with_kernel(mut self, kernel: CompressionKernel) -> Self {
        self.kernel = kernel;
        self
    }

    pub(crate) fn rule(&self) -> TruncationRule {
        match self.mode {
            CompressionMode::ExactRank => TruncationRule::exact(),
            CompressionMode::FixedMaxOrder(r) => TruncationRule::max_rank(r),
            CompressionMode::RelativeTolerance(tau) => TruncationRule::tolerance(tau),
            CompressionMode::IntermediateBound(r) => {
                let mut rule = TruncationRule::tolerance(1e-12);
                rule.max_rank = Some(r);
                rule
            }
        }
    }
}

/// Accumulated truncation data of one compression run.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompressionReport {
    /// Root-sum-square of the discarded singular values over all local
    /// factorizations; bounds the Frobenius deviation of the result.
    pub error_bound: f64,
    /// Largest deviation of any orthonormal sweep factor from exact
    /// orthonormality (`max |V V* - I|`).
    pub max_ortho_defect: f64,
}

impl CompressionReport {
    fn absorb(&mut self, discarded: f64, defect: f64) {
        self.error_bound = (self.error_bound * self.error_bound + discarded * discarded).sqrt();
        self.max_ortho_defect = self.max_ortho_defect.max(defect);
    }
}

/// Reduce the lower-triangle families `(q, a, p)` to minimal or truncated
/// widths. Families use the full-length convention of
/// [`crate::generators::QsGenerators`].
pub fn reduce_lower(
    q: &[DMatrix<f64>],
    a: &[DMatrix<f64>],
    p: &[DMatrix<f64>],
    policy: &CompressionPolicy,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>)> {
    reduce_lower_with_report(q, a, p, policy).map(|(q2, a2, p2, _)| (q2, a2, p2))
}

/// As [`reduce_lower`], also returning the truncation report.
pub fn reduce_lower_with_report(
    q: &[DMatrix<f64>],
    a: &[DMatrix<f64>],
    p: &[DMatrix<f64>],
    policy: &CompressionPolicy,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, CompressionReport)> {
    reduce_lower_impl(q, a, p, &policy.rule(), policy.kernel)
}

fn reduce_lower_impl(
    q: &[DMatrix<f64>],
    a: &[DMatrix<f64>],
    p: &[DMatrix<f64>],
    rule: &TruncationRule,
    kernel: FactorKernel,
) -> Result<(Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, CompressionReport)> {
    let n = q.len();
    if a.len() != n || p.len() != n {
        return Err(Error::InvalidConfig(format!(
            "family lengths differ: q {}, a {}, p {}",
            n,
            a.len(),
            p.len()
        )));
    }
    for k in 0..n {
        let rl_prev = if k == 0 { 0 } else { q[k - 1].nrows() };
        if a[k].shape() != (q[k].nrows(), rl_prev) {
            return Err(Error::GeneratorShape {
                family: "a",
                index: k,
                expected: (q[k].nrows(), rl_prev),
                found: a[k].shape(),
            });
        }
        if p[k].ncols() != rl_prev {
            return Err(Error::GeneratorShape {
                family: "p",
                index: k,
                expected: (p[k].nrows(), rl_prev),
                found: p[k].shape(),
            });
        }
    }

    let mut report = CompressionReport::default();
    if n < 2 {
        return Ok((q.to_vec(), a.to_vec(), p.to_vec(), report));
    }

    // Forward sweep: factor the transported input stacks with row-orthonormal
    // right factors.
    let mut qp = vec![DMatrix::zeros(0, 0); n];
    let mut ap = vec![DMatrix::zeros(0, 0); n];
    let mut pp = vec![DMatrix::zeros(0, 0); n];
    let mut l_prev;
    {
        let f = kernels::row_orthonormal_factor(&q[0], rule, kernel);
        report.absorb(f.discarded, f.ortho_defect);
        qp[0] = f.right;
        l_prev = f.left;
    }
    for k in 1..n {
        pp[k] = &p[k] * &l_prev;
        if k == n - 1 {
            break;
        }
        let stack = kernels::hstack(&(&a[k] * &l_prev), &q[k]);
        let f = kernels::row_orthonormal_factor(&stack, rule, kernel);
        report.absorb(f.discarded, f.ortho_defect);
        let r_prev = l_prev.ncols();
        ap[k] = f.right.columns(0, r_prev).into_owned();
        qp[k] = f.right.columns(r_prev, q[k].ncols()).into_owned();
        l_prev = f.left;
    }

    // Backward sweep: factor the output stacks with column-orthonormal left
    // factors.
    let mut q2 = vec![DMatrix::zeros(0, 0); n];
    let mut a2 = vec![DMatrix::zeros(0, 0); n];
    let mut p2 = vec![DMatrix::zeros(0, 0); n];
    let mut s;
    {
        let f = kernels::col_orthonormal_factor(&pp[n - 1], rule, kernel);
        report.absorb(f.discarded, f.ortho_defect);
        p2[n - 1] = f.left;
        s = f.right;
    }
    for k in (1..n - 1).rev() {
        let stack = kernels::vstack(&pp[k], &(&s * &ap[k]));
        let f = kernels::col_orthonormal_factor(&stack, rule, kernel);
        report.absorb(f.discarded, f.ortho_defect);
        q2[k] = &s * &qp[k];
        let nk = pp[k].nrows();
        p2[k] = f.left.rows(0, nk).into_owned();
        a2[k] = f.left.rows(nk, f.left.nrows() - nk).into_owned();
        s = f.right;
    }
    q2[0] = &s * &qp[0];

    // Boundary conventions: first block consumes no state, last produces none.
    p2[0] = DMatrix::zeros(p[0].nrows(), 0);
    a2[0] = DMatrix::zeros(q2[0].nrows(), 0);
    q2[n - 1] = DMatrix::zeros(0, q[n - 1].ncols());
    a2[n - 1] = DMatrix::zeros(0, p2[n - 1].ncols());

    Ok((q2, a2, p2, report))
}

/// Compress both triangles of a quasiseparable matrix; the diagonal is
/// untouched. Returns the compressed matrix together with the accumulated
/// truncation bound.
pub fn compress(a: &QsMatrix, policy: &CompressionPolicy) -> (QsMatrix, CompressionReport) {
    let n = a.num_blocks();
    if n < 2 {
        return (a.clone(), CompressionReport::default());
    }
    let g = a.generators();
    let mut report = CompressionReport::default();

    // Cancellation debris below roundoff of the whole matrix collapses to
    // width zero, so the truncation floor tracks the matrix scale.
    let rule = policy.rule().with_floor(64.0 * f64::EPSILON * a.frobenius_norm());

    let (q2, a2, p2, rep_lower) =
        reduce_lower_impl(&g.q, &g.a, &g.p, &rule, policy.kernel).expect("validated generators");
    report.absorb(rep_lower.error_bound, rep_lower.max_ortho_defect);

    // Upper triangle through the transposed roles (p <-> h, q <-> g, a <-> b).
    let qt: Vec<_> = g.g.iter().map(|m| m.transpose()).collect();
    let at: Vec<_> = g.b.iter().map(|m| m.transpose()).collect();
    let pt: Vec<_> = g.h.iter().map(|m| m.transpose()).collect();
    let (g2t, b2t, h2t, rep_upper) =
        reduce_lower_impl(&qt, &at, &pt, &rule, policy.kernel).expect("validated generators");
    report.absorb(rep_upper.error_bound, rep_upper.max_ortho_defect);

    let mut gen = crate::generators::QsGenerators::zero(a.partition());
    gen.d = g.d.clone();
    gen.q = q2;
    gen.a = a2;
    gen.p = p2;
    for k in 0..n {
        gen.g[k] = g2t[k].transpose();
        gen.b[k] = b2t[k].transpose();
        gen.h[k] = h2t[k].transpose();
    }
    (QsMatrix::from_parts_unchecked(a.partition().clone(), gen), report)
}
