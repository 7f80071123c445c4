//! Construction of quasiseparable representations from dense input, and
//! re-partitioning by block aggregation.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::generators::QsGenerators;
use crate::kernels::{self, FactorKernel, TruncationRule};
use crate::matrix::QsMatrix;
use crate::partition::BlockPartition;

/// Report returned by [`from_dense_with_report`].
#[derive(Debug, Clone, Default)]
pub struct ConstructionReport {
    /// Frobenius-norm bound on `|reconstruct - input|` accumulated from the
    /// discarded singular value mass of every local factorization.
    pub error_bound: f64,
}

/// Exact embedding of a banded matrix. `lower_bw` / `upper_bw` are scalar
/// bandwidths; entries outside the band are rejected. The result is built by
/// copies only (reconstruction is exact) and every generator width is at most
/// the corresponding bandwidth.
pub fn from_band(
    dense: &DMatrix<f64>,
    lower_bw: usize,
    upper_bw: usize,
    partition: &BlockPartition,
) -> Result<QsMatrix> {
    let n = dense.nrows();
    if dense.ncols() != n || partition.total() != n {
        return Err(Error::DimensionMismatch { expected: partition.total(), found: n });
    }
    for i in 0..n {
        for j in 0..n {
            let inside = (j <= i && i - j <= lower_bw) || (j > i && j - i <= upper_bw);
            if !inside && dense[(i, j)] != 0.0 {
                return Err(Error::OutsideBand { row: i, col: j, value: dense[(i, j)] });
            }
        }
    }

    // Shift-register generators on the scalar partition: the lower state
    // carries the last `lower_bw` columns, `a` shifts it down one slot, and
    // `p` reads the band entries of the current row.
    let scalar = BlockPartition::scalar(n);
    let mut gen = QsGenerators::zero(&scalar);
    let shift = |w: usize| {
        DMatrix::from_fn(w, w, |i, j| if i == j + 1 { 1.0 } else { 0.0 })
    };
    for k in 0..n {
        gen.d[k] = DMatrix::from_element(1, 1, dense[(k, k)]);
        if lower_bw > 0 {
            if k + 1 < n {
                let mut q = DMatrix::zeros(lower_bw, 1);
                q[(0, 0)] = 1.0;
                gen.q[k] = q;
            }
            let a_rows = if k + 1 < n { lower_bw } else { 0 };
            let a_cols = if k > 0 { lower_bw } else { 0 };
            gen.a[k] = if a_rows > 0 && a_cols > 0 { shift(lower_bw) } else { DMatrix::zeros(a_rows, a_cols) };
            if k > 0 {
                gen.p[k] = DMatrix::from_fn(1, lower_bw, |_, m| {
                    if k > m { dense[(k, k - m - 1)] } else { 0.0 }
                });
            }
        }
        if upper_bw > 0 {
            if k + 1 < n {
                gen.g[k] = DMatrix::from_fn(1, upper_bw, |_, m| {
                    if k + m + 1 < n { dense[(k, k + m + 1)] } else { 0.0 }
                });
            }
            let b_rows = if k > 0 { upper_bw } else { 0 };
            let b_cols = if k + 1 < n { upper_bw } else { 0 };
            gen.b[k] = if b_rows > 0 && b_cols > 0 { shift(upper_bw) } else { DMatrix::zeros(b_rows, b_cols) };
            if k > 0 {
                let mut h = DMatrix::zeros(upper_bw, 1);
                h[(0, 0)] = 1.0;
                gen.h[k] = h;
            }
        }
    }
    let scalar_qs = QsMatrix::from_parts(scalar, gen)?;
    if partition.is_scalar() {
        Ok(scalar_qs)
    } else {
        aggregate(&scalar_qs, partition)
    }
}

/// Construct generators from a dense matrix. With `tau = 0` the widths are
/// minimal (they equal the ranks of the off-diagonal submatrices at every
/// split); with `tau > 0` each local factorization keeps singular values
/// above `tau * sigma_max`.
pub fn from_dense(dense: &DMatrix<f64>, partition: &BlockPartition, tau: f64) -> Result<QsMatrix> {
    from_dense_with_report(dense, partition, tau).map(|(m, _)| m)
}

/// As [`from_dense`], also returning the accumulated truncation bound.
pub fn from_dense_with_report(
    dense: &DMatrix<f64>,
    partition: &BlockPartition,
    tau: f64,
) -> Result<(QsMatrix, ConstructionReport)> {
    let n_total = dense.nrows();
    if dense.ncols() != n_total || partition.total() != n_total {
        return Err(Error::DimensionMismatch { expected: partition.total(), found: n_total });
    }
    let rule = if tau > 0.0 { TruncationRule::tolerance(tau) } else { TruncationRule::exact() };

    let mut gen = QsGenerators::zero(partition);
    for k in 0..partition.num_blocks() {
        gen.d[k] = dense
            .view((partition.offset(k), partition.offset(k)), (partition.size(k), partition.size(k)))
            .into_owned();
    }
    let mut report = ConstructionReport::default();
    let (q, a, p) = lower_from_dense(dense, partition, &rule, &mut report.error_bound);
    gen.q = q;
    gen.a = a;
    gen.p = p;
    let t = dense.transpose();
    let (qt, at, pt) = lower_from_dense(&t, partition, &rule, &mut report.error_bound);
    for k in 0..partition.num_blocks() {
        gen.g[k] = qt[k].transpose();
        gen.b[k] = at[k].transpose();
        gen.h[k] = pt[k].transpose();
    }
    Ok((QsMatrix::from_parts(partition.clone(), gen)?, report))
}

/// Ascending low-rank sweep over the strictly lower part of `dense`.
///
/// At split `k` the pending tall factor `w` spans all rows below the split;
/// stacking it with the new block column and refactoring keeps the
/// representation minimal because the right factors have orthonormal rows.
fn lower_from_dense(
    dense: &DMatrix<f64>,
    partition: &BlockPartition,
    rule: &TruncationRule,
    error_acc: &mut f64,
) -> (Vec<DMatrix<f64>>, Vec<DMatrix<f64>>, Vec<DMatrix<f64>>) {
    let n = partition.num_blocks();
    let total = partition.total();
    let mut q = vec![DMatrix::zeros(0, 0); n];
    let mut a = vec![DMatrix::zeros(0, 0); n];
    let mut p = vec![DMatrix::zeros(0, 0); n];

    // Pending tall factor; for k >= 1 its rows span blocks k..n-1.
    let mut w = DMatrix::<f64>::zeros(0, 0);
    let mut rl_prev = 0usize;
    for k in 0..n {
        let nk = partition.size(k);
        let below = total - partition.offset(k) - nk;
        // Peel this block's rows off the pending factor.
        p[k] = if k == 0 { DMatrix::zeros(nk, 0) } else { w.rows(0, nk).into_owned() };
        if k == n - 1 {
            q[k] = DMatrix::zeros(0, nk);
            a[k] = DMatrix::zeros(0, rl_prev);
            break;
        }
        let w_rest = if k == 0 {
            DMatrix::zeros(below, 0)
        } else {
            w.rows(nk, below).into_owned()
        };
        let col = dense
            .view((partition.offset(k) + nk, partition.offset(k)), (below, nk))
            .into_owned();
        let stack = kernels::hstack(&w_rest, &col);
        let f = kernels::row_orthonormal_factor(&stack, rule, FactorKernel::Svd);
        *error_acc += f.discarded;
        let rk = f.right.nrows();
        a[k] = f.right.columns(0, rl_prev).into_owned();
        q[k] = f.right.columns(rl_prev, nk).into_owned();
        w = f.left;
        rl_prev = rk;
    }
    (q, a, p)
}

/// Re-partition into coarser blocks obtained by merging consecutive blocks.
/// The represented matrix is unchanged; generator widths at the surviving
/// splits are untouched.
pub fn aggregate(a: &QsMatrix, coarse: &BlockPartition) -> Result<QsMatrix> {
    let fine = a.partition();
    let groups = fine.grouping_into(coarse)?;
    let g = a.generators();
    let mut out = QsGenerators::zero(coarse);

    for (gi, range) in groups.iter().enumerate() {
        let (s, e) = (range.start, range.end);
        let size: usize = (s..e).map(|t| fine.size(t)).sum();
        let base = fine.offset(s);

        // Dense diagonal block of the group, including intra-group couplings.
        let mut d = DMatrix::zeros(size, size);
        for t in s..e {
            let off = fine.offset(t) - base;
            d.view_mut((off, off), (fine.size(t), fine.size(t))).copy_from(&g.d[t]);
        }
        for j in s..e.saturating_sub(1) {
            let mut t = g.q[j].clone();
            for i in (j + 1)..e {
                let block = &g.p[i] * &t;
                d.view_mut((fine.offset(i) - base, fine.offset(j) - base), block.shape())
                    .copy_from(&block);
                if i + 1 < e {
                    t = &g.a[i] * t;
                }
            }
        }
        for i in s..e.saturating_sub(1) {
            let mut t = g.g[i].clone();
            for j in (i + 1)..e {
                let block = &t * &g.h[j];
                d.view_mut((fine.offset(i) - base, fine.offset(j) - base), block.shape())
                    .copy_from(&block);
                if j + 1 < e {
                    t = t * &g.b[j];
                }
            }
        }
        out.d[gi] = d;

        // Lower families. q: transported inputs of all members; a: transition
        // across the whole group; p: member outputs fed by the incoming state.
        if gi + 1 < groups.len() {
            let mut cols = vec![DMatrix::zeros(0, 0); e - s];
            let mut trans = DMatrix::<f64>::identity(g.q[e - 1].nrows(), g.q[e - 1].nrows());
            for t in (s..e).rev() {
                cols[t - s] = &trans * &g.q[t];
                if t > s {
                    trans = trans * &g.a[t];
                }
            }
            let mut qg = DMatrix::zeros(g.q[e - 1].nrows(), 0);
            for c in &cols {
                qg = kernels::hstack(&qg, c);
            }
            out.q[gi] = qg;
        } else {
            out.q[gi] = DMatrix::zeros(0, size);
        }
        let rl_in = if s == 0 { 0 } else { g.q[s - 1].nrows() };
        {
            let rl_out = out.q[gi].nrows();
            let mut trans = DMatrix::<f64>::identity(rl_in, rl_in);
            let mut pg = DMatrix::zeros(0, rl_in);
            for t in s..e {
                pg = kernels::vstack(&pg, &(&g.p[t] * &trans));
                trans = &g.a[t] * trans;
            }
            out.p[gi] = pg;
            // Transition across the group: product of all member transitions.
            out.a[gi] = if gi + 1 < groups.len() {
                trans
            } else {
                DMatrix::zeros(rl_out, rl_in)
            };
        }

        // Upper families, mirrored.
        if gi + 1 < groups.len() {
            let ru_out = g.g[e - 1].ncols();
            let mut rows = vec![DMatrix::zeros(0, 0); e - s];
            let mut trans = DMatrix::<f64>::identity(ru_out, ru_out);
            for t in (s..e).rev() {
                rows[t - s] = &g.g[t] * &trans;
                if t > s {
                    trans = &g.b[t] * trans;
                }
            }
            let mut gg = DMatrix::zeros(0, ru_out);
            for r in &rows {
                gg = kernels::vstack(&gg, r);
            }
            out.g[gi] = gg;
        } else {
            out.g[gi] = DMatrix::zeros(size, 0);
        }
        let ru_in = if s == 0 { 0 } else { g.g[s - 1].ncols() };
        {
            let ru_out = out.g[gi].ncols();
            let mut trans = DMatrix::<f64>::identity(ru_in, ru_in);
            let mut hg = DMatrix::zeros(ru_in, 0);
            for t in s..e {
                hg = kernels::hstack(&hg, &(&trans * &g.h[t]));
                trans = trans * &g.b[t];
            }
            out.h[gi] = hg;
            out.b[gi] = if gi + 1 < groups.len() {
                trans
            } else {
                DMatrix::zeros(ru_in, ru_out)
            };
        }
    }
    QsMatrix::from_parts(coarse.clone(), out)
}
