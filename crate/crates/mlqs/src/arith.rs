//! Linear-time arithmetic on quasiseparable matrices: addition,
//! multiplication, pivot-free block LU, triangular solves and inversion.
//!
//! Addition and multiplication build exact generators whose widths are the
//! sums of the operand widths; no compression happens here. Restoring
//! minimal widths is an explicit follow-up step (see [`crate::compress`]).

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generators::QsGenerators;
use crate::kernels;
use crate::matrix::QsMatrix;
use crate::metrics;

/// Guard for the strong-regularity requirement of the pivot-free LU: a pivot
/// counts as singular when its smallest singular value drops below
/// `N * 1e-10` times the largest pivot scale seen so far.
fn pivot_threshold(total_dim: usize) -> f64 {
    total_dim as f64 * 1e-10
}

/// Scale by `alpha`: multiplies the `d`, `q` and `h` families (one family per
/// triangle carries the factor). Widths are unchanged.
pub fn scale(a: &QsMatrix, alpha: f64) -> QsMatrix {
    let mut gen = a.generators().clone();
    for blk in gen.d.iter_mut().chain(gen.q.iter_mut()).chain(gen.h.iter_mut()) {
        metrics::count_block(blk.nrows(), blk.ncols());
        *blk *= alpha;
    }
    QsMatrix::from_parts_unchecked(a.partition().clone(), gen)
}

/// Sum with block-concatenated generators; widths add per split.
pub fn add(a: &QsMatrix, b: &QsMatrix) -> Result<QsMatrix> {
    a.partition().ensure_same(b.partition())?;
    let (ga, gb) = (a.generators(), b.generators());
    let n = a.num_blocks();
    let mut gen = QsGenerators::zero(a.partition());
    for k in 0..n {
        gen.d[k] = &ga.d[k] + &gb.d[k];
        metrics::count_block(gen.d[k].nrows(), gen.d[k].ncols());
        gen.q[k] = kernels::vstack(&ga.q[k], &gb.q[k]);
        gen.a[k] = kernels::block_diag(&ga.a[k], &gb.a[k]);
        gen.p[k] = kernels::hstack(&ga.p[k], &gb.p[k]);
        gen.g[k] = kernels::hstack(&ga.g[k], &gb.g[k]);
        gen.b[k] = kernels::block_diag(&ga.b[k], &gb.b[k]);
        gen.h[k] = kernels::vstack(&ga.h[k], &gb.h[k]);
    }
    Ok(QsMatrix::from_parts_unchecked(a.partition().clone(), gen))
}

/// Difference `a - b`.
pub fn sub(a: &QsMatrix, b: &QsMatrix) -> Result<QsMatrix> {
    add(a, &scale(b, -1.0))
}

fn block_2x2(
    tl: &DMatrix<f64>,
    tr: &DMatrix<f64>,
    bl: &DMatrix<f64>,
    br: &DMatrix<f64>,
) -> DMatrix<f64> {
    let rows = tl.nrows() + bl.nrows();
    let cols = tl.ncols() + tr.ncols();
    debug_assert_eq!(tl.nrows(), tr.nrows());
    debug_assert_eq!(bl.nrows(), br.nrows());
    debug_assert_eq!(tl.ncols(), bl.ncols());
    debug_assert_eq!(tr.ncols(), br.ncols());
    let mut out = DMatrix::zeros(rows, cols);
    out.view_mut((0, 0), tl.shape()).copy_from(tl);
    out.view_mut((0, tl.ncols()), tr.shape()).copy_from(tr);
    out.view_mut((tl.nrows(), 0), bl.shape()).copy_from(bl);
    out.view_mut((tl.nrows(), tl.ncols()), br.shape()).copy_from(br);
    metrics::count_block(rows, cols);
    out
}

/// Product in generator form via one ascending and one descending sweep.
///
/// The ascending sweep carries the cross Gram `w_k` coupling the left
/// operand's lower inputs to the right operand's upper outputs over blocks
/// `< k`; the descending sweep carries the dual state `v_k` over blocks
/// `> k`. Output widths are the sums of the operand widths. Cost O(N r^3).
pub fn mul(a: &QsMatrix, b: &QsMatrix) -> Result<QsMatrix> {
    a.partition().ensure_same(b.partition())?;
    let (ga, gb) = (a.generators(), b.generators());
    let n = a.num_blocks();
    let mut gen = QsGenerators::zero(a.partition());

    // Ascending: w = sum over m < k of (A's lower transport to m) q_m g_m
    // (B's upper transport from m).
    let mut w = DMatrix::<f64>::zeros(0, 0);
    let mut w_at = Vec::with_capacity(n);
    for k in 0..n {
        w_at.push(w.clone());
        let awh = &ga.a[k] * &w * &gb.h[k];
        metrics::count_gemm(ga.a[k].nrows(), w.ncols().max(1), gb.h[k].ncols());
        gen.q[k] = kernels::vstack(&(awh + &ga.q[k] * &gb.d[k]), &gb.q[k]);
        metrics::count_gemm(ga.q[k].nrows(), ga.q[k].ncols(), gb.d[k].ncols());
        let coupling = &ga.q[k] * &gb.p[k];
        metrics::count_gemm(ga.q[k].nrows(), ga.q[k].ncols(), gb.p[k].ncols());
        gen.a[k] = block_2x2(
            &ga.a[k],
            &coupling,
            &DMatrix::zeros(gb.a[k].nrows(), ga.a[k].ncols()),
            &gb.a[k],
        );
        let pwb = &ga.p[k] * &w * &gb.b[k];
        metrics::count_gemm(ga.p[k].nrows(), w.ncols().max(1), gb.b[k].ncols());
        gen.g[k] = kernels::hstack(&(pwb + &ga.d[k] * &gb.g[k]), &ga.g[k]);
        metrics::count_gemm(ga.d[k].nrows(), ga.d[k].ncols(), gb.g[k].ncols());
        w = &ga.a[k] * w * &gb.b[k] + &ga.q[k] * &gb.g[k];
        metrics::count_gemm(ga.q[k].nrows(), ga.q[k].ncols(), gb.g[k].ncols());
    }

    // Descending: v = sum over m > k of (A's upper transport to m) h_m p_m
    // (B's lower transport from m).
    let mut v = DMatrix::<f64>::zeros(0, 0);
    for k in (0..n).rev() {
        let gva = &ga.g[k] * &v * &gb.a[k];
        metrics::count_gemm(ga.g[k].nrows(), v.ncols().max(1), gb.a[k].ncols());
        gen.p[k] = kernels::hstack(&ga.p[k], &(&ga.d[k] * &gb.p[k] + gva));
        metrics::count_gemm(ga.d[k].nrows(), ga.d[k].ncols(), gb.p[k].ncols());
        let bvq = &ga.b[k] * &v * &gb.q[k];
        metrics::count_gemm(ga.b[k].nrows(), v.ncols().max(1), gb.q[k].ncols());
        gen.h[k] = kernels::vstack(&gb.h[k], &(&ga.h[k] * &gb.d[k] + bvq));
        metrics::count_gemm(ga.h[k].nrows(), ga.h[k].ncols(), gb.d[k].ncols());
        let coupling = &ga.h[k] * &gb.g[k];
        metrics::count_gemm(ga.h[k].nrows(), ga.h[k].ncols(), gb.g[k].ncols());
        gen.b[k] = block_2x2(
            &gb.b[k],
            &DMatrix::zeros(gb.b[k].nrows(), ga.b[k].ncols()),
            &coupling,
            &ga.b[k],
        );
        gen.d[k] = &ga.d[k] * &gb.d[k]
            + &ga.p[k] * &w_at[k] * &gb.h[k]
            + &ga.g[k] * &v * &gb.q[k];
        metrics::count_gemm(ga.d[k].nrows(), ga.d[k].ncols(), gb.d[k].ncols());
        v = &ga.b[k] * v * &gb.a[k] + &ga.h[k] * &gb.p[k];
        metrics::count_gemm(ga.h[k].nrows(), ga.h[k].ncols(), gb.p[k].ncols());
    }
    Ok(QsMatrix::from_parts_unchecked(a.partition().clone(), gen))
}

/// LU factorization of a strongly regular quasiseparable matrix.
#[derive(Debug, Clone)]
pub struct QsLuFactors {
    /// Unit-block-diagonal lower factor; its upper generator widths are zero
    /// and its lower widths equal those of the input exactly.
    pub l: QsMatrix,
    /// Upper factor carrying the pivot blocks on its diagonal; its lower
    /// widths are zero and its upper widths equal those of the input.
    pub u: QsMatrix,
    /// Auxiliary running products (transformed lower inputs times transformed
    /// upper outputs) at each interior split, retained for diagnostics.
    pub aux: Vec<DMatrix<f64>>,
}

impl QsLuFactors {
    /// Solve `A x = y` through both factors.
    pub fn solve(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        solve_upper(&self.u, &solve_lower(&self.l, y)?)
    }
}

/// Pivot-free block LU in a single ascending sweep.
///
/// Valid for strongly regular matrices; a pivot block failing the
/// invertibility guard raises [`Error::SingularPivot`]. The factor widths
/// match the input widths structurally (no compression is involved).
pub fn lu(a: &QsMatrix) -> Result<QsLuFactors> {
    let g = a.generators();
    let n = a.num_blocks();
    let threshold = pivot_threshold(a.dim());
    let mut lgen = QsGenerators::zero(a.partition());
    let mut ugen = QsGenerators::zero(a.partition());
    let mut aux = Vec::with_capacity(n.saturating_sub(1));

    let mut f = DMatrix::<f64>::zeros(0, 0);
    let mut scale_ref = 0.0f64;
    for k in 0..n {
        let nk = g.d[k].nrows();
        let dt = &g.d[k] - &g.p[k] * &f * &g.h[k];
        metrics::count_gemm(g.p[k].nrows(), g.p[k].ncols().max(1), g.h[k].ncols());

        let smax = kernels::sigma_max(&dt);
        let smin = kernels::sigma_min(&dt);
        scale_ref = scale_ref.max(smax);
        if !smin.is_finite() || scale_ref == 0.0 || smin <= scale_ref * threshold {
            let rcond = if scale_ref > 0.0 { smin / scale_ref } else { 0.0 };
            return Err(Error::SingularPivot { block: k, rcond });
        }

        // q~ = (q - a f h) d~^{-1}, applied through a small dense LU.
        let rhs = &g.q[k] - &g.a[k] * &f * &g.h[k];
        metrics::count_gemm(g.a[k].nrows(), g.a[k].ncols().max(1), g.h[k].ncols());
        let dt_t_lu = dt.transpose().lu();
        metrics::count_factorization(nk, nk);
        let qt = match dt_t_lu.solve(&rhs.transpose()) {
            Some(sol) => sol.transpose(),
            None => return Err(Error::SingularPivot { block: k, rcond: 0.0 }),
        };
        let gt = &g.g[k] - &g.p[k] * &f * &g.b[k];
        metrics::count_gemm(g.p[k].nrows(), g.p[k].ncols().max(1), g.b[k].ncols());

        f = &g.a[k] * f * &g.b[k] + &qt * &gt;
        metrics::count_gemm(qt.nrows(), qt.ncols(), gt.ncols());
        if k + 1 < n {
            aux.push(f.clone());
        }

        lgen.d[k] = DMatrix::identity(nk, nk);
        lgen.q[k] = qt;
        lgen.a[k] = g.a[k].clone();
        lgen.p[k] = g.p[k].clone();
        ugen.d[k] = dt;
        ugen.g[k] = gt;
        ugen.b[k] = g.b[k].clone();
        ugen.h[k] = g.h[k].clone();
    }

    Ok(QsLuFactors {
        l: QsMatrix::from_parts_unchecked(a.partition().clone(), lgen),
        u: QsMatrix::from_parts_unchecked(a.partition().clone(), ugen),
        aux,
    })
}

/// Forward substitution `L x = y` for a (block) lower triangular matrix in
/// generator form; one ascending sweep, O(N r).
pub fn solve_lower(l: &QsMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != l.dim() {
        return Err(Error::DimensionMismatch { expected: l.dim(), found: y.len() });
    }
    let g = l.generators();
    let part = l.partition();
    let n = l.num_blocks();
    let mut x = DVector::zeros(l.dim());
    let mut s = DVector::<f64>::zeros(0);
    for k in 0..n {
        let rhs = y.rows(part.offset(k), part.size(k)) - &g.p[k] * &s;
        metrics::count_gemm(g.p[k].nrows(), g.p[k].ncols(), 1);
        let lu = g.d[k].clone().lu();
        metrics::count_factorization(part.size(k), part.size(k));
        let xk = lu.solve(&rhs).ok_or(Error::SingularPivot {
            block: k,
            rcond: kernels::rcond(&g.d[k]),
        })?;
        s = &g.a[k] * &s + &g.q[k] * &xk;
        metrics::count_gemm(g.q[k].nrows(), g.q[k].ncols(), 1);
        x.rows_mut(part.offset(k), part.size(k)).copy_from(&xk);
    }
    Ok(x)
}

/// Backward substitution `U x = y` for a (block) upper triangular matrix in
/// generator form; one descending sweep, O(N r).
pub fn solve_upper(u: &QsMatrix, y: &DVector<f64>) -> Result<DVector<f64>> {
    if y.len() != u.dim() {
        return Err(Error::DimensionMismatch { expected: u.dim(), found: y.len() });
    }
    let g = u.generators();
    let part = u.partition();
    let n = u.num_blocks();
    let mut x = DVector::zeros(u.dim());
    let mut t = DVector::<f64>::zeros(0);
    for k in (0..n).rev() {
        let rhs = y.rows(part.offset(k), part.size(k)) - &g.g[k] * &t;
        metrics::count_gemm(g.g[k].nrows(), g.g[k].ncols(), 1);
        let lu = g.d[k].clone().lu();
        metrics::count_factorization(part.size(k), part.size(k));
        let xk = lu.solve(&rhs).ok_or(Error::SingularPivot {
            block: k,
            rcond: kernels::rcond(&g.d[k]),
        })?;
        t = &g.b[k] * &t + &g.h[k] * &xk;
        metrics::count_gemm(g.h[k].nrows(), g.h[k].ncols(), 1);
        x.rows_mut(part.offset(k), part.size(k)).copy_from(&xk);
    }
    Ok(x)
}

/// Inverse of a block lower triangular matrix in generator form. The inverse
/// has the same generator widths; closed-form update of the transition
/// family.
pub fn invert_lower_triangular(l: &QsMatrix) -> Result<QsMatrix> {
    if l.upper_order() != 0 {
        return Err(Error::InvalidConfig(
            "invert_lower_triangular requires zero upper generator widths".into(),
        ));
    }
    let g = l.generators();
    let n = l.num_blocks();
    let mut out = QsGenerators::zero(l.partition());
    for k in 0..n {
        let nk = g.d[k].nrows();
        let lu = g.d[k].clone().lu();
        metrics::count_factorization(nk, nk);
        let dinv = lu
            .try_inverse()
            .ok_or(Error::SingularPivot { block: k, rcond: kernels::rcond(&g.d[k]) })?;
        let q_dinv = &g.q[k] * &dinv;
        metrics::count_gemm(g.q[k].nrows(), nk, nk);
        let dinv_p = &dinv * &g.p[k];
        metrics::count_gemm(nk, nk, g.p[k].ncols());
        out.a[k] = &g.a[k] - &q_dinv * &g.p[k];
        metrics::count_gemm(q_dinv.nrows(), q_dinv.ncols(), g.p[k].ncols());
        out.q[k] = q_dinv;
        out.p[k] = -dinv_p;
        out.d[k] = dinv;
    }
    Ok(QsMatrix::from_parts_unchecked(l.partition().clone(), out))
}

/// Inverse of a block upper triangular matrix in generator form.
pub fn invert_upper_triangular(u: &QsMatrix) -> Result<QsMatrix> {
    if u.lower_order() != 0 {
        return Err(Error::InvalidConfig(
            "invert_upper_triangular requires zero lower generator widths".into(),
        ));
    }
    let g = u.generators();
    let n = u.num_blocks();
    let mut out = QsGenerators::zero(u.partition());
    for k in 0..n {
        let nk = g.d[k].nrows();
        let lu = g.d[k].clone().lu();
        metrics::count_factorization(nk, nk);
        let dinv = lu
            .try_inverse()
            .ok_or(Error::SingularPivot { block: k, rcond: kernels::rcond(&g.d[k]) })?;
        let dinv_g = &dinv * &g.g[k];
        metrics::count_gemm(nk, nk, g.g[k].ncols());
        let h_dinv = &g.h[k] * &dinv;
        metrics::count_gemm(g.h[k].nrows(), nk, nk);
        out.b[k] = &g.b[k] - &h_dinv * &g.g[k];
        metrics::count_gemm(h_dinv.nrows(), h_dinv.ncols(), g.g[k].ncols());
        out.g[k] = -dinv_g;
        out.h[k] = h_dinv;
        out.d[k] = dinv;
    }
    Ok(QsMatrix::from_parts_unchecked(u.partition().clone(), out))
}

/// Inverse of a strongly regular quasiseparable matrix: LU, closed-form
/// triangular inverses, then a generator product. The structural widths of
/// the result equal those of the input; compression restores minimal widths
/// numerically.
pub fn inverse(a: &QsMatrix) -> Result<QsMatrix> {
    inverse_from_factors(&lu(a)?)
}

/// Inverse assembled from an existing factorization.
pub fn inverse_from_factors(f: &QsLuFactors) -> Result<QsMatrix> {
    let li = invert_lower_triangular(&f.l)?;
    let ui = invert_upper_triangular(&f.u)?;
    mul(&ui, &li)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::partition::BlockPartition;

    fn two_by_two(values: [f64; 4]) -> QsMatrix {
        let dense = DMatrix::from_row_slice(2, 2, &values);
        crate::construct::from_dense(&dense, &BlockPartition::scalar(2), 0.0).unwrap()
    }

    #[test]
    fn lu_of_diagonal_is_trivial() {
        let a = QsMatrix::from_diagonal(&[3.0, -2.0, 5.0]).unwrap();
        let f = lu(&a).unwrap();
        assert_eq!(f.l.reconstruct_dense(), DMatrix::identity(3, 3));
        assert_eq!(f.u.reconstruct_dense(), a.reconstruct_dense());
        assert!(f.aux.iter().all(|m| m.len() == 0));
    }

    #[test]
    fn lu_matches_hand_factorization() {
        let a = two_by_two([2.0, 1.0, 1.0, 2.0]);
        let f = lu(&a).unwrap();
        let l = f.l.reconstruct_dense();
        let u = f.u.reconstruct_dense();
        assert!((l - DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.5, 1.0])).norm() < 1e-14);
        assert!((u - DMatrix::from_row_slice(2, 2, &[2.0, 1.0, 0.0, 1.5])).norm() < 1e-14);
    }

    #[test]
    fn singular_pivot_is_reported() {
        let a = two_by_two([1.0, 1.0, 1.0, 1.0]);
        match lu(&a) {
            Err(Error::SingularPivot { block: 1, .. }) => {}
            other => panic!("expected singular pivot at block 1, got {other:?}"),
        }
    }

    #[test]
    fn solve_lower_unit_bidiagonal_alternates() {
        // Unit diagonal, subdiagonal of ones; y = e1 gives x = (1, -1, 1, -1).
        let dense = DMatrix::from_fn(4, 4, |i, j| {
            if i == j {
                1.0
            } else if i == j + 1 {
                1.0
            } else {
                0.0
            }
        });
        let l = crate::construct::from_band(&dense, 1, 0, &BlockPartition::scalar(4)).unwrap();
        let mut y = DVector::zeros(4);
        y[0] = 1.0;
        let x = solve_lower(&l, &y).unwrap();
        for (i, want) in [1.0, -1.0, 1.0, -1.0].into_iter().enumerate() {
            assert!((x[i] - want).abs() < 1e-14);
        }
    }

    #[test]
    fn mul_by_identity_is_identity_map() {
        let a = two_by_two([2.0, 1.0, -1.0, 0.5]);
        let id = QsMatrix::identity(BlockPartition::scalar(2));
        let prod = mul(&a, &id).unwrap();
        assert!((prod.reconstruct_dense() - a.reconstruct_dense()).norm() < 1e-14);
    }

    #[test]
    fn add_with_negation_reconstructs_zero_but_widths_double() {
        let a = two_by_two([2.0, 1.0, -1.0, 0.5]);
        let s = add(&a, &scale(&a, -1.0)).unwrap();
        assert!(s.reconstruct_dense().norm() < 1e-14);
        assert_eq!(s.generators().lower_width(0), 2 * a.generators().lower_width(0));
    }

    #[test]
    fn scale_by_zero_and_one() {
        let a = two_by_two([2.0, 1.0, -1.0, 0.5]);
        assert!((scale(&a, 1.0).reconstruct_dense() - a.reconstruct_dense()).norm() == 0.0);
        assert_eq!(scale(&a, 0.0).reconstruct_dense().norm(), 0.0);
    }

    #[test]
    fn inverse_of_identity() {
        let id = QsMatrix::identity(BlockPartition::new(vec![2, 1, 3]).unwrap());
        let inv = inverse(&id).unwrap();
        assert!((inv.reconstruct_dense() - DMatrix::identity(6, 6)).norm() < 1e-13);
    }
}
