//! Numerical rank profiles of the off-diagonal submatrices.

use nalgebra::DMatrix;

use crate::matrix::QsMatrix;
use crate::metrics;
use crate::partition::BlockPartition;

/// Epsilon-ranks of the two off-diagonal submatrices at one block split.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RankProfileEntry {
    /// Split offset `K`: the submatrices are `A[K.., ..K]` and `A[..K, K..]`.
    pub split: usize,
    /// Number of singular values of the lower submatrix greater than eps.
    pub lower: usize,
    /// Number of singular values of the upper submatrix greater than eps.
    pub upper: usize,
}

/// Largest lower/upper rank over a profile.
pub fn max_ranks(profile: &[RankProfileEntry]) -> (usize, usize) {
    profile.iter().fold((0, 0), |(lo, up), e| (lo.max(e.lower), up.max(e.upper)))
}

/// Rank profile of a dense matrix at the splits of `partition`, by direct
/// SVD of every off-diagonal submatrix. O(N^3) per split; oracle and
/// diagnostic use.
pub fn offdiag_rank_profile_dense(
    dense: &DMatrix<f64>,
    partition: &BlockPartition,
    eps: f64,
) -> Vec<RankProfileEntry> {
    let n_total = dense.nrows();
    partition
        .splits()
        .iter()
        .map(|&split| {
            let lower = dense.view((split, 0), (n_total - split, split)).into_owned();
            let upper = dense.view((0, split), (split, n_total - split)).into_owned();
            RankProfileEntry {
                split,
                lower: count_above(&lower.singular_values().as_slice().to_vec(), eps),
                upper: count_above(&upper.singular_values().as_slice().to_vec(), eps),
            }
        })
        .collect()
}

fn count_above(svals: &[f64], eps: f64) -> usize {
    svals.iter().filter(|&&s| s > eps).count()
}

/// Rank profile of a quasiseparable matrix without densification.
///
/// The singular values of `A[K.., ..K] = P Q` are recovered from the two
/// small Gram matrices `Q Q^T` (ascending recurrence) and `P^T P`
/// (descending recurrence): the nonzero eigenvalues of `(P Q)(P Q)^T` equal
/// those of the r-by-r product of the Grams. Cost O(N r^2 + n r^3).
pub fn offdiag_rank_profile(a: &QsMatrix, eps: f64) -> Vec<RankProfileEntry> {
    let n = a.num_blocks();
    if n < 2 {
        return Vec::new();
    }
    let g = a.generators();
    let splits = a.partition().splits().to_vec();

    // Ascending Grams of the lower inputs Q_k and upper outputs G_k.
    let mut q_gram = Vec::with_capacity(n - 1);
    let mut g_gram = Vec::with_capacity(n - 1);
    let mut gq = DMatrix::<f64>::zeros(0, 0);
    let mut gg = DMatrix::<f64>::zeros(0, 0);
    for k in 0..n - 1 {
        gq = &g.a[k] * &gq * g.a[k].transpose() + &g.q[k] * g.q[k].transpose();
        gg = g.b[k].transpose() * &gg * &g.b[k] + g.g[k].transpose() * &g.g[k];
        metrics::count_gemm(gq.nrows(), gq.ncols(), gq.ncols());
        q_gram.push(gq.clone());
        g_gram.push(gg.clone());
    }

    // Descending Grams of the lower outputs P_{k+1} and upper inputs H_{k+1}.
    let mut p_gram = vec![DMatrix::<f64>::zeros(0, 0); n - 1];
    let mut h_gram = vec![DMatrix::<f64>::zeros(0, 0); n - 1];
    let mut gp = g.p[n - 1].transpose() * &g.p[n - 1];
    let mut gh = &g.h[n - 1] * g.h[n - 1].transpose();
    p_gram[n - 2] = gp.clone();
    h_gram[n - 2] = gh.clone();
    for k in (0..n.saturating_sub(2)).rev() {
        gp = g.p[k + 1].transpose() * &g.p[k + 1] + g.a[k + 1].transpose() * &gp * &g.a[k + 1];
        gh = &g.h[k + 1] * g.h[k + 1].transpose() + &g.b[k + 1] * &gh * g.b[k + 1].transpose();
        metrics::count_gemm(gp.nrows(), gp.ncols(), gp.ncols());
        p_gram[k] = gp.clone();
        h_gram[k] = gh.clone();
    }

    (0..n - 1)
        .map(|k| RankProfileEntry {
            split: splits[k],
            lower: count_above(&product_singular_values(&q_gram[k], &p_gram[k]), eps),
            upper: count_above(&product_singular_values(&h_gram[k], &g_gram[k]), eps),
        })
        .collect()
}

/// Singular values of a product `X Y` given the Grams `Y Y^T` and `X^T X`
/// (both r x r symmetric PSD): they are the square roots of the eigenvalues
/// of `C^T (X^T X) C` with `C C^T = Y Y^T`.
fn product_singular_values(y_gram: &DMatrix<f64>, x_gram: &DMatrix<f64>) -> Vec<f64> {
    let r = y_gram.nrows();
    if r == 0 || x_gram.nrows() == 0 {
        return Vec::new();
    }
    debug_assert_eq!(x_gram.nrows(), r);
    metrics::count_factorization(r, r);
    let eig = y_gram.clone().symmetric_eigen();
    // PSD square-root factor C = V diag(sqrt(lambda)).
    let mut c = eig.eigenvectors;
    for (i, mut col) in c.column_iter_mut().enumerate() {
        col.scale_mut(eig.eigenvalues[i].max(0.0).sqrt());
    }
    let core = c.transpose() * x_gram * &c;
    let mut svals: Vec<f64> = core
        .symmetric_eigen()
        .eigenvalues
        .iter()
        .map(|&l| l.max(0.0).sqrt())
        .collect();
    svals.sort_by(|a, b| b.partial_cmp(a).unwrap());
    svals
}
