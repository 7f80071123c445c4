//! Two-level quasiseparable matrices: the outer structure has the same seven
//! generator families, but every entry is itself a [`QsMatrix`] over a shared
//! inner partition. Block discretizations of 2D elliptic operators (one
//! outer block per grid column) and Kronecker products fit this shape, and
//! the one-level algorithms lift verbatim by replacing scalar arithmetic
//! with inner matrix arithmetic plus order reduction after every operation.

use nalgebra::{DMatrix, DVector};

use crate::arith::{self, QsLuFactors};
use crate::compress::{compress, CompressionPolicy};
use crate::error::{Error, Result};
use crate::matrix::QsMatrix;
use crate::partition::BlockPartition;

/// Accumulated truncation effort of a sequence of inner operations.
#[derive(Debug, Clone, Copy, Default)]
pub struct CompressionStats {
    /// Root-sum-square of the inner compression error bounds.
    pub error_bound: f64,
    /// Largest inner generator order seen after compression.
    pub max_order: usize,
}

impl CompressionStats {
    fn absorb(&mut self, error: f64, order: usize) {
        self.error_bound = (self.error_bound * self.error_bound + error * error).sqrt();
        self.max_order = self.max_order.max(order);
    }
}

fn inner_order(m: &QsMatrix) -> usize {
    m.lower_order().max(m.upper_order())
}

/// A rows-by-cols array of square quasiseparable matrices over one shared
/// inner partition. This is the entry type of the outer generator families.
#[derive(Debug, Clone)]
pub struct BlockMatrix {
    rows: usize,
    cols: usize,
    inner: BlockPartition,
    entries: Vec<QsMatrix>,
}

impl BlockMatrix {
    pub fn zeros(rows: usize, cols: usize, inner: BlockPartition) -> Self {
        let entries = (0..rows * cols).map(|_| QsMatrix::zero(inner.clone())).collect();
        Self { rows, cols, inner, entries }
    }

    pub fn identity(size: usize, inner: BlockPartition) -> Self {
        let mut out = Self::zeros(size, size, inner.clone());
        for i in 0..size {
            *out.get_mut(i, i) = QsMatrix::identity(inner.clone());
        }
        out
    }

    pub fn from_entries(
        rows: usize,
        cols: usize,
        inner: BlockPartition,
        entries: Vec<QsMatrix>,
    ) -> Result<Self> {
        if entries.len() != rows * cols {
            return Err(Error::InvalidConfig(format!(
                "block array needs {} entries, got {}",
                rows * cols,
                entries.len()
            )));
        }
        for e in &entries {
            e.partition().ensure_same(&inner)?;
        }
        Ok(Self { rows, cols, inner, entries })
    }

    pub fn single(entry: QsMatrix) -> Self {
        let inner = entry.partition().clone();
        Self { rows: 1, cols: 1, inner, entries: vec![entry] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn inner(&self) -> &BlockPartition {
        &self.inner
    }

    pub fn get(&self, i: usize, j: usize) -> &QsMatrix {
        &self.entries[i * self.cols + j]
    }

    fn get_mut(&mut self, i: usize, j: usize) -> &mut QsMatrix {
        let c = self.cols;
        &mut self.entries[i * c + j]
    }

    pub fn entries(&self) -> &[QsMatrix] {
        &self.entries
    }

    pub fn max_inner_order(&self) -> usize {
        self.entries.iter().map(inner_order).max().unwrap_or(0)
    }

    pub fn memory_estimate(&self) -> usize {
        self.entries.iter().map(|e| e.memory_estimate()).sum()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let n = self.inner.total();
        let mut out = DMatrix::zeros(self.rows * n, self.cols * n);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out.view_mut((i * n, j * n), (n, n)).copy_from(&self.get(i, j).reconstruct_dense());
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.cols, self.rows, self.inner.clone());
        for i in 0..self.rows {
            for j in 0..self.cols {
                *out.get_mut(j, i) = self.get(i, j).transpose();
            }
        }
        out
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let entries = self.entries.iter().map(|e| arith::scale(e, alpha)).collect();
        Self { rows: self.rows, cols: self.cols, inner: self.inner.clone(), entries }
    }

    /// Entrywise sum; every entry is compressed under `policy`.
    pub fn add(
        &self,
        other: &Self,
        policy: &CompressionPolicy,
        stats: &mut CompressionStats,
    ) -> Result<Self> {
        debug_assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = Self::zeros(self.rows, self.cols, self.inner.clone());
        for i in 0..self.rows {
            for j in 0..self.cols {
                let raw = arith::add(self.get(i, j), other.get(i, j))?;
                let (c, rep) = compress(&raw, policy);
                stats.absorb(rep.error_bound, inner_order(&c));
                *out.get_mut(i, j) = c;
            }
        }
        Ok(out)
    }

    pub fn sub(
        &self,
        other: &Self,
        policy: &CompressionPolicy,
        stats: &mut CompressionStats,
    ) -> Result<Self> {
        self.add(&other.scale(-1.0), policy, stats)
    }

    /// Array product with inner quasiseparable products; every partial result
    /// is compressed under `policy`.
    pub fn mul(
        &self,
        other: &Self,
        policy: &CompressionPolicy,
        stats: &mut CompressionStats,
    ) -> Result<Self> {
        debug_assert_eq!(self.cols, other.rows);
        let mut out = Self::zeros(self.rows, other.cols, self.inner.clone());
        for i in 0..self.rows {
            for j in 0..other.cols {
                let mut acc = QsMatrix::zero(self.inner.clone());
                for k in 0..self.cols {
                    let term = arith::mul(self.get(i, k), other.get(k, j))?;
                    let (term_c, rep1) = compress(&term, policy);
                    stats.absorb(rep1.error_bound, inner_order(&term_c));
                    let sum = arith::add(&acc, &term_c)?;
                    let (sum_c, rep2) = compress(&sum, policy);
                    stats.absorb(rep2.error_bound, inner_order(&sum_c));
                    acc = sum_c;
                }
                *out.get_mut(i, j) = acc;
            }
        }
        Ok(out)
    }

    /// Block matrix-vector product using inner sweeps only.
    pub fn matvec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.inner.total();
        if x.len() != self.cols * n {
            return Err(Error::DimensionMismatch { expected: self.cols * n, found: x.len() });
        }
        let mut y = DVector::zeros(self.rows * n);
        for j in 0..self.cols {
            let xj = x.rows(j * n, n).into_owned();
            for i in 0..self.rows {
                let contrib = self.get(i, j).matvec(&xj)?;
                y.rows_mut(i * n, n).axpy(1.0, &contrib, 1.0);
            }
        }
        Ok(y)
    }

    fn hstack(left: &Self, right: &Self) -> Self {
        debug_assert_eq!(left.rows, right.rows);
        let mut out = Self::zeros(left.rows, left.cols + right.cols, left.inner.clone());
        for i in 0..left.rows {
            for j in 0..left.cols {
                *out.get_mut(i, j) = left.get(i, j).clone();
            }
            for j in 0..right.cols {
                *out.get_mut(i, left.cols + j) = right.get(i, j).clone();
            }
        }
        out
    }

    fn vstack(top: &Self, bottom: &Self) -> Self {
        debug_assert_eq!(top.cols, bottom.cols);
        let mut out = Self::zeros(top.rows + bottom.rows, top.cols, top.inner.clone());
        for i in 0..top.rows {
            for j in 0..top.cols {
                *out.get_mut(i, j) = top.get(i, j).clone();
            }
        }
        for i in 0..bottom.rows {
            for j in 0..bottom.cols {
                *out.get_mut(top.rows + i, j) = bottom.get(i, j).clone();
            }
        }
        out
    }

    fn block_diag(a: &Self, b: &Self) -> Self {
        let mut out = Self::zeros(a.rows + b.rows, a.cols + b.cols, a.inner.clone());
        for i in 0..a.rows {
            for j in 0..a.cols {
                *out.get_mut(i, j) = a.get(i, j).clone();
            }
        }
        for i in 0..b.rows {
            for j in 0..b.cols {
                *out.get_mut(a.rows + i, a.cols + j) = b.get(i, j).clone();
            }
        }
        out
    }

    fn block_2x2(tl: &Self, tr: &Self, bl: &Self, br: &Self) -> Self {
        Self::vstack(&Self::hstack(tl, tr), &Self::hstack(bl, br))
    }
}

/// The seven outer generator families with [`BlockMatrix`] entries; same
/// full-length storage conventions as the one-level
/// [`crate::generators::QsGenerators`].
#[derive(Debug, Clone)]
pub struct L2Generators {
    pub d: Vec<BlockMatrix>,
    pub q: Vec<BlockMatrix>,
    pub a: Vec<BlockMatrix>,
    pub p: Vec<BlockMatrix>,
    pub g: Vec<BlockMatrix>,
    pub b: Vec<BlockMatrix>,
    pub h: Vec<BlockMatrix>,
}

impl L2Generators {
    fn zero(outer: &BlockPartition, inner: &BlockPartition) -> Self {
        let n = outer.num_blocks();
        let mk = |r, c| BlockMatrix::zeros(r, c, inner.clone());
        let mut out = Self {
            d: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            g: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
        };
        for k in 0..n {
            let m = outer.size(k);
            out.d.push(mk(m, m));
            out.q.push(mk(0, m));
            out.a.push(mk(0, 0));
            out.p.push(mk(m, 0));
            out.g.push(mk(m, 0));
            out.b.push(mk(0, 0));
            out.h.push(mk(0, m));
        }
        out
    }

    fn validate(&self, outer: &BlockPartition, inner: &BlockPartition) -> Result<()> {
        let n = outer.num_blocks();
        let fail = |family, index, expected, found| {
            Err(Error::GeneratorShape { family, index, expected, found })
        };
        for k in 0..n {
            let m = outer.size(k);
            let rl_prev = if k == 0 { 0 } else { self.q[k - 1].rows() };
            let ru_prev = if k == 0 { 0 } else { self.g[k - 1].cols() };
            let rl_k = self.q[k].rows();
            let ru_k = self.g[k].cols();
            for (name, fam) in [
                ("d", &self.d[k]),
                ("q", &self.q[k]),
                ("a", &self.a[k]),
                ("p", &self.p[k]),
                ("g", &self.g[k]),
                ("b", &self.b[k]),
                ("h", &self.h[k]),
            ] {
                if fam.inner() != inner {
                    return Err(Error::InvalidConfig(format!(
                        "family `{name}` at outer block {k} uses a different inner partition"
                    )));
                }
            }
            if (self.d[k].rows(), self.d[k].cols()) != (m, m) {
                return fail("d", k, (m, m), (self.d[k].rows(), self.d[k].cols()));
            }
            if self.q[k].cols() != m || (k == n - 1 && rl_k != 0) {
                return fail("q", k, (0, m), (rl_k, self.q[k].cols()));
            }
            if (self.a[k].rows(), self.a[k].cols()) != (rl_k, rl_prev) {
                return fail("a", k, (rl_k, rl_prev), (self.a[k].rows(), self.a[k].cols()));
            }
            if (self.p[k].rows(), self.p[k].cols()) != (m, rl_prev) {
                return fail("p", k, (m, rl_prev), (self.p[k].rows(), self.p[k].cols()));
            }
            if self.g[k].rows() != m || (k == n - 1 && ru_k != 0) {
                return fail("g", k, (m, 0), (self.g[k].rows(), ru_k));
            }
            if (self.b[k].rows(), self.b[k].cols()) != (ru_prev, ru_k) {
                return fail("b", k, (ru_prev, ru_k), (self.b[k].rows(), self.b[k].cols()));
            }
            if (self.h[k].rows(), self.h[k].cols()) != (ru_prev, m) {
                return fail("h", k, (ru_prev, m), (self.h[k].rows(), self.h[k].cols()));
            }
        }
        Ok(())
    }
}

/// A two-level quasiseparable matrix with an attached compression policy
/// governing the inner order reduction performed after every entry
/// operation.
#[derive(Debug, Clone)]
pub struct L2QsMatrix {
    outer: BlockPartition,
    inner: BlockPartition,
    gen: L2Generators,
    policy: CompressionPolicy,
}

impl L2QsMatrix {
    pub fn from_parts(
        outer: BlockPartition,
        inner: BlockPartition,
        gen: L2Generators,
        policy: CompressionPolicy,
    ) -> Result<Self> {
        gen.validate(&outer, &inner)?;
        Ok(Self { outer, inner, gen, policy })
    }

    fn from_parts_unchecked(
        outer: BlockPartition,
        inner: BlockPartition,
        gen: L2Generators,
        policy: CompressionPolicy,
    ) -> Self {
        debug_assert!(gen.validate(&outer, &inner).is_ok());
        Self { outer, inner, gen, policy }
    }

    pub fn zero(outer: BlockPartition, inner: BlockPartition, policy: CompressionPolicy) -> Self {
        let gen = L2Generators::zero(&outer, &inner);
        Self { outer, inner, gen, policy }
    }

    pub fn identity(
        outer: BlockPartition,
        inner: BlockPartition,
        policy: CompressionPolicy,
    ) -> Self {
        let mut gen = L2Generators::zero(&outer, &inner);
        for k in 0..outer.num_blocks() {
            gen.d[k] = BlockMatrix::identity(outer.size(k), inner.clone());
        }
        Self { outer, inner, gen, policy }
    }

    /// Block tridiagonal matrix: `diag` has one entry per outer block,
    /// `sup`/`sub` couple consecutive blocks. Exactly zero coupling blocks
    /// collapse their outer widths to zero at construction.
    pub fn block_tridiagonal(
        diag: &[QsMatrix],
        sup: &[QsMatrix],
        sub: &[QsMatrix],
        policy: CompressionPolicy,
    ) -> Result<Self> {
        let m = diag.len();
        if m == 0 {
            return Err(Error::InvalidConfig("need at least one diagonal block".into()));
        }
        if sup.len() + 1 != m || sub.len() + 1 != m {
            return Err(Error::InvalidConfig(format!(
                "block tridiagonal with {m} diagonal blocks needs {} couplings, got {} sup / {} sub",
                m - 1,
                sup.len(),
                sub.len()
            )));
        }
        let inner = diag[0].partition().clone();
        for blk in diag.iter().chain(sup).chain(sub) {
            blk.partition().ensure_same(&inner)?;
        }
        let outer = BlockPartition::scalar(m);
        let mut gen = L2Generators::zero(&outer, &inner);
        let wl: Vec<usize> = (0..m)
            .map(|k| if k + 1 < m && sub[k].frobenius_norm() != 0.0 { 1 } else { 0 })
            .collect();
        let wu: Vec<usize> = (0..m)
            .map(|k| if k + 1 < m && sup[k].frobenius_norm() != 0.0 { 1 } else { 0 })
            .collect();
        for k in 0..m {
            gen.d[k] = BlockMatrix::single(diag[k].clone());
            let wl_prev = if k == 0 { 0 } else { wl[k - 1] };
            let wu_prev = if k == 0 { 0 } else { wu[k - 1] };
            if wl[k] == 1 {
                gen.q[k] = BlockMatrix::single(QsMatrix::identity(inner.clone()));
            }
            gen.a[k] = BlockMatrix::zeros(wl[k], wl_prev, inner.clone());
            if wl_prev == 1 {
                gen.p[k] = BlockMatrix::single(sub[k - 1].clone());
            }
            if wu[k] == 1 {
                gen.g[k] = BlockMatrix::single(sup[k].clone());
            }
            gen.b[k] = BlockMatrix::zeros(wu_prev, wu[k], inner.clone());
            if wu_prev == 1 {
                gen.h[k] = BlockMatrix::single(QsMatrix::identity(inner.clone()));
            }
        }
        Self::from_parts(outer, inner, gen, policy)
    }

    /// Kronecker product `a (x) b` as a two-level matrix: the outer families
    /// mirror `a`'s generators, with the diagonal and the chain-terminating
    /// families carrying scalar multiples of `b` and the transport families
    /// scalar multiples of the inner identity, so every outer chain picks up
    /// exactly one factor of `b`. Outer widths equal `a`'s widths.
    pub fn tensor(a: &QsMatrix, b: &QsMatrix, policy: CompressionPolicy) -> Self {
        let outer = a.partition().clone();
        let inner = b.partition().clone();
        let ga = a.generators();
        let mut gen = L2Generators::zero(&outer, &inner);
        let id = QsMatrix::identity(inner.clone());
        let lift = |src: &DMatrix<f64>, base: &QsMatrix| {
            let entries = (0..src.nrows() * src.ncols())
                .map(|idx| arith::scale(base, src[(idx / src.ncols(), idx % src.ncols())]))
                .collect();
            BlockMatrix::from_entries(src.nrows(), src.ncols(), inner.clone(), entries)
                .expect("shapes by construction")
        };
        for k in 0..outer.num_blocks() {
            gen.d[k] = lift(&ga.d[k], b);
            gen.q[k] = lift(&ga.q[k], b);
            gen.a[k] = lift(&ga.a[k], &id);
            gen.p[k] = lift(&ga.p[k], &id);
            gen.g[k] = lift(&ga.g[k], &id);
            gen.b[k] = lift(&ga.b[k], &id);
            gen.h[k] = lift(&ga.h[k], b);
        }
        Self::from_parts_unchecked(outer, inner, gen, policy)
    }

    pub fn outer_partition(&self) -> &BlockPartition {
        &self.outer
    }

    pub fn inner_partition(&self) -> &BlockPartition {
        &self.inner
    }

    pub fn generators(&self) -> &L2Generators {
        &self.gen
    }

    pub fn policy(&self) -> &CompressionPolicy {
        &self.policy
    }

    pub fn with_policy(mut self, policy: CompressionPolicy) -> Self {
        self.policy = policy;
        self
    }

    /// Total scalar dimension.
    pub fn dim(&self) -> usize {
        self.outer.total() * self.inner.total()
    }

    pub fn num_outer_blocks(&self) -> usize {
        self.outer.num_blocks()
    }

    pub fn outer_lower_order(&self) -> usize {
        (0..self.outer.num_blocks().saturating_sub(1))
            .map(|k| self.gen.q[k].rows())
            .max()
            .unwrap_or(0)
    }

    pub fn outer_upper_order(&self) -> usize {
        (0..self.outer.num_blocks().saturating_sub(1))
            .map(|k| self.gen.g[k].cols())
            .max()
            .unwrap_or(0)
    }

    /// Largest inner generator order over all outer generator entries.
    pub fn max_inner_order(&self) -> usize {
        let g = &self.gen;
        [&g.d, &g.q, &g.a, &g.p, &g.g, &g.b, &g.h]
            .iter()
            .flat_map(|fam| fam.iter())
            .map(BlockMatrix::max_inner_order)
            .max()
            .unwrap_or(0)
    }

    pub fn memory_estimate(&self) -> usize {
        let g = &self.gen;
        [&g.d, &g.q, &g.a, &g.p, &g.g, &g.b, &g.h]
            .iter()
            .flat_map(|fam| fam.iter())
            .map(BlockMatrix::memory_estimate)
            .sum()
    }

    /// Expand to a dense matrix; O(N^2), tests and diagnostics only.
    pub fn reconstruct_dense(&self) -> DMatrix<f64> {
        let n = self.outer.num_blocks();
        let g = &self.gen;
        let inner_n = self.inner.total();
        let offset = |k: usize| self.outer.offset(k) * inner_n;
        let size = |k: usize| self.outer.size(k) * inner_n;
        let mut out = DMatrix::zeros(self.dim(), self.dim());
        for k in 0..n {
            out.view_mut((offset(k), offset(k)), (size(k), size(k)))
                .copy_from(&g.d[k].to_dense());
        }
        for j in 0..n.saturating_sub(1) {
            let mut t = g.q[j].to_dense();
            for i in (j + 1)..n {
                let block = g.p[i].to_dense() * &t;
                out.view_mut((offset(i), offset(j)), block.shape()).copy_from(&block);
                if i + 1 < n {
                    t = g.a[i].to_dense() * t;
                }
            }
        }
        for i in 0..n.saturating_sub(1) {
            let mut t = g.g[i].to_dense();
            for j in (i + 1)..n {
                let block = &t * g.h[j].to_dense();
                out.view_mut((offset(i), offset(j)), block.shape()).copy_from(&block);
                if j + 1 < n {
                    t = t * g.b[j].to_dense();
                }
            }
        }
        out
    }

    /// Matrix-vector product through inner sweeps; O(N r^2).
    pub fn matvec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let n = self.outer.num_blocks();
        let g = &self.gen;
        let inner_n = self.inner.total();
        let offset = |k: usize| self.outer.offset(k) * inner_n;
        let size = |k: usize| self.outer.size(k) * inner_n;
        let mut y = DVector::zeros(self.dim());

        let mut s = DVector::<f64>::zeros(0);
        for k in 0..n {
            let xk = x.rows(offset(k), size(k)).into_owned();
            let mut yk = g.d[k].matvec(&xk)?;
            if g.p[k].cols() > 0 {
                yk += g.p[k].matvec(&s)?;
            }
            s = {
                let mut new_s = g.q[k].matvec(&xk)?;
                if g.a[k].cols() > 0 && g.a[k].rows() > 0 {
                    new_s += g.a[k].matvec(&s)?;
                }
                new_s
            };
            y.rows_mut(offset(k), size(k)).copy_from(&yk);
        }

        let mut t = DVector::<f64>::zeros(0);
        for k in (0..n).rev() {
            let xk = x.rows(offset(k), size(k)).into_owned();
            if g.g[k].cols() > 0 {
                let contrib = g.g[k].matvec(&t)?;
                y.rows_mut(offset(k), size(k)).axpy(1.0, &contrib, 1.0);
            }
            t = {
                let mut new_t = g.h[k].matvec(&xk)?;
                if g.b[k].cols() > 0 && g.b[k].rows() > 0 {
                    new_t += g.b[k].matvec(&t)?;
                }
                new_t
            };
        }
        Ok(y)
    }

    fn ensure_compatible(&self, other: &Self) -> Result<()> {
        self.outer.ensure_same(&other.outer)?;
        self.inner.ensure_same(&other.inner)
    }

    /// Sum with outer-concatenated generators; diagonal entries are added
    /// and compressed under the attached policy. Outer widths add.
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.ensure_compatible(other)?;
        let mut stats = CompressionStats::default();
        let (ga, gb) = (&self.gen, &other.gen);
        let n = self.outer.num_blocks();
        let mut gen = L2Generators::zero(&self.outer, &self.inner);
        for k in 0..n {
            gen.d[k] = ga.d[k].add(&gb.d[k], &self.policy, &mut stats)?;
            gen.q[k] = BlockMatrix::vstack(&ga.q[k], &gb.q[k]);
            gen.a[k] = BlockMatrix::block_diag(&ga.a[k], &gb.a[k]);
            gen.p[k] = BlockMatrix::hstack(&ga.p[k], &gb.p[k]);
            gen.g[k] = BlockMatrix::hstack(&ga.g[k], &gb.g[k]);
            gen.b[k] = BlockMatrix::block_diag(&ga.b[k], &gb.b[k]);
            gen.h[k] = BlockMatrix::vstack(&ga.h[k], &gb.h[k]);
        }
        Ok(Self::from_parts_unchecked(
            self.outer.clone(),
            self.inner.clone(),
            gen,
            self.policy,
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let mut gen = self.gen.clone();
        for fam in gen.d.iter_mut().chain(gen.q.iter_mut()).chain(gen.h.iter_mut()) {
            *fam = fam.scale(alpha);
        }
        Self::from_parts_unchecked(self.outer.clone(), self.inner.clone(), gen, self.policy)
    }

    pub fn transpose(&self) -> Self {
        let n = self.outer.num_blocks();
        let g = &self.gen;
        let mut gen = L2Generators::zero(&self.outer, &self.inner);
        for k in 0..n {
            gen.d[k] = g.d[k].transpose();
            gen.q[k] = g.g[k].transpose();
            gen.a[k] = g.b[k].transpose();
            gen.p[k] = g.h[k].transpose();
            gen.g[k] = g.q[k].transpose();
            gen.b[k] = g.a[k].transpose();
            gen.h[k] = g.p[k].transpose();
        }
        Self::from_parts_unchecked(self.outer.clone(), self.inner.clone(), gen, self.policy)
    }

    /// Product via the same ascending/descending cross-state sweeps as the
    /// one-level multiplication, with inner compression after every entry
    /// operation. Outer widths add.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.ensure_compatible(other)?;
        let pol = &self.policy;
        let mut st = CompressionStats::default();
        let (ga, gb) = (&self.gen, &other.gen);
        let n = self.outer.num_blocks();
        let mut gen = L2Generators::zero(&self.outer, &self.inner);

        let mut w = BlockMatrix::zeros(0, 0, self.inner.clone());
        let mut w_at = Vec::with_capacity(n);
        for k in 0..n {
            w_at.push(w.clone());
            let awh = ga.a[k].mul(&w, pol, &mut st)?.mul(&gb.h[k], pol, &mut st)?;
            let qd = ga.q[k].mul(&gb.d[k], pol, &mut st)?;
            gen.q[k] = BlockMatrix::vstack(&awh.add(&qd, pol, &mut st)?, &gb.q[k]);
            let coupling = ga.q[k].mul(&gb.p[k], pol, &mut st)?;
            gen.a[k] = BlockMatrix::block_2x2(
                &ga.a[k],
                &coupling,
                &BlockMatrix::zeros(gb.a[k].rows(), ga.a[k].cols(), self.inner.clone()),
                &gb.a[k],
            );
            let pwb = ga.p[k].mul(&w, pol, &mut st)?.mul(&gb.b[k], pol, &mut st)?;
            let dg = ga.d[k].mul(&gb.g[k], pol, &mut st)?;
            gen.g[k] = BlockMatrix::hstack(&pwb.add(&dg, pol, &mut st)?, &ga.g[k]);
            w = ga.a[k]
                .mul(&w, pol, &mut st)?
                .mul(&gb.b[k], pol, &mut st)?
                .add(&ga.q[k].mul(&gb.g[k], pol, &mut st)?, pol, &mut st)?;
        }

        let mut v = BlockMatrix::zeros(0, 0, self.inner.clone());
        for k in (0..n).rev() {
            let gva = ga.g[k].mul(&v, pol, &mut st)?.mul(&gb.a[k], pol, &mut st)?;
            let dp = ga.d[k].mul(&gb.p[k], pol, &mut st)?;
            gen.p[k] = BlockMatrix::hstack(&ga.p[k], &dp.add(&gva, pol, &mut st)?);
            let bvq = ga.b[k].mul(&v, pol, &mut st)?.mul(&gb.q[k], pol, &mut st)?;
            let hd = ga.h[k].mul(&gb.d[k], pol, &mut st)?;
            gen.h[k] = BlockMatrix::vstack(&gb.h[k], &hd.add(&bvq, pol, &mut st)?);
            let coupling = ga.h[k].mul(&gb.g[k], pol, &mut st)?;
            gen.b[k] = BlockMatrix::block_2x2(
                &gb.b[k],
                &BlockMatrix::zeros(gb.b[k].rows(), ga.b[k].cols(), self.inner.clone()),
                &coupling,
                &ga.b[k],
            );
            let dd = ga.d[k].mul(&gb.d[k], pol, &mut st)?;
            let pwh = ga.p[k].mul(&w_at[k], pol, &mut st)?.mul(&gb.h[k], pol, &mut st)?;
            let gvq = ga.g[k].mul(&v, pol, &mut st)?.mul(&gb.q[k], pol, &mut st)?;
            gen.d[k] = dd.add(&pwh, pol, &mut st)?.add(&gvq, pol, &mut st)?;
            v = ga.b[k]
                .mul(&v, pol, &mut st)?
                .mul(&gb.a[k], pol, &mut st)?
                .add(&ga.h[k].mul(&gb.p[k], pol, &mut st)?, pol, &mut st)?;
        }
        Ok(Self::from_parts_unchecked(
            self.outer.clone(),
            self.inner.clone(),
            gen,
            self.policy,
        ))
    }

    /// Block LU (the pivot blocks stay inside the upper factor), lifted
    /// verbatim with inner matrix arithmetic and order reduction at every
    /// step. For block tridiagonal input this is exactly the Schur
    /// complement sweep over grid columns.
    ///
    /// Intermediate products are compressed at a tight tolerance; the order
    /// cap of `config.policy` is applied to each step's results (the pivot,
    /// the factor generators and the running cross state), which is what
    /// bounds the factorization cost without destroying the Schur
    /// complements mid-formula.
    pub fn lu(&self, config: &LduConfig) -> Result<L2LuFactors> {
        let cap = &config.policy;
        // Intermediates keep a tight tolerance so the step formulas stay
        // accurate; under a hard order cap they are additionally bounded by
        // a generous multiple of the cap, which controls the sweep cost.
        // The rank-revealing QR kernel is enough for them (the final cap
        // governs quality), and it is considerably faster.
        let tight = CompressionPolicy {
            mode: match cap.mode {
                crate::compress::CompressionMode::RelativeTolerance(t) => {
                    crate::compress::CompressionMode::RelativeTolerance(t)
                }
                crate::compress::CompressionMode::FixedMaxOrder(r) => {
                    crate::compress::CompressionMode::IntermediateBound(4 * r + 8)
                }
                crate::compress::CompressionMode::ExactRank => {
                    crate::compress::CompressionMode::RelativeTolerance(1e-13)
                }
                other @ crate::compress::CompressionMode::IntermediateBound(_) => other,
            },
            kernel: crate::compress::CompressionKernel::RankRevealingQr,
        };
        let pol = &tight;
        let reduce = |bm: &BlockMatrix, st: &mut CompressionStats| -> BlockMatrix {
            let mut out = bm.clone();
            for i in 0..bm.rows() {
                for j in 0..bm.cols() {
                    let (c, rep) = compress(bm.get(i, j), cap);
                    st.absorb(rep.error_bound, inner_order(&c));
                    *out.get_mut(i, j) = c;
                }
            }
            out
        };
        let g = &self.gen;
        let n = self.outer.num_blocks();
        let mut lgen = L2Generators::zero(&self.outer, &self.inner);
        let mut ugen = L2Generators::zero(&self.outer, &self.inner);
        let mut pivots = Vec::with_capacity(n);
        let mut steps = Vec::with_capacity(n);
        let mut order_warnings = Vec::new();

        let mut f = BlockMatrix::zeros(0, 0, self.inner.clone());
        for k in 0..n {
            let mut st = CompressionStats::default();
            let pfh = g.p[k].mul(&f, pol, &mut st)?.mul(&g.h[k], pol, &mut st)?;
            let dt = reduce(&g.d[k].sub(&pfh, pol, &mut st)?, &mut st);
            if dt.rows() != 1 || dt.cols() != 1 {
                return Err(Error::UnsupportedOuterPivot {
                    block: k,
                    rows: dt.rows(),
                    cols: dt.cols(),
                });
            }
            let pivot = dt.get(0, 0).clone();
            let pivot_factors = arith::lu(&pivot).map_err(|e| match e {
                Error::SingularPivot { rcond, .. } => Error::SingularPivot { block: k, rcond },
                other => other,
            })?;
            let pivot_inv = {
                let raw = arith::inverse_from_factors(&pivot_factors)?;
                let (c, rep) = compress(&raw, cap);
                st.absorb(rep.error_bound, inner_order(&c));
                BlockMatrix::single(c)
            };

            let afh = g.a[k].mul(&f, pol, &mut st)?.mul(&g.h[k], pol, &mut st)?;
            let qt = reduce(&g.q[k].sub(&afh, pol, &mut st)?.mul(&pivot_inv, pol, &mut st)?, &mut st);
            let pfb = g.p[k].mul(&f, pol, &mut st)?.mul(&g.b[k], pol, &mut st)?;
            let gt = reduce(&g.g[k].sub(&pfb, pol, &mut st)?, &mut st);
            f = reduce(
                &g.a[k]
                    .mul(&f, pol, &mut st)?
                    .mul(&g.b[k], pol, &mut st)?
                    .add(&qt.mul(&gt, pol, &mut st)?, pol, &mut st)?,
                &mut st,
            );

            lgen.d[k] = BlockMatrix::identity(self.outer.size(k), self.inner.clone());
            lgen.q[k] = qt;
            lgen.a[k] = g.a[k].clone();
            lgen.p[k] = g.p[k].clone();
            ugen.d[k] = dt;
            ugen.g[k] = gt;
            ugen.b[k] = g.b[k].clone();
            ugen.h[k] = g.h[k].clone();
            pivots.push(pivot_factors);

            // Orders of what this step keeps: the pivot, both factor
            // generator rows and the running cross state (intermediates are
            // transient and may legitimately exceed the cap).
            let step_order = ugen.d[k]
                .max_inner_order()
                .max(lgen.q[k].max_inner_order())
                .max(ugen.g[k].max_inner_order())
                .max(f.max_inner_order());
            if let Some(ceiling) = config.order_ceiling {
                if step_order > ceiling {
                    order_warnings.push(k);
                }
            }
            steps.push(StepDiagnostics {
                max_inner_order: step_order,
                compression_error: st.error_bound,
            });
        }

        Ok(L2LuFactors {
            l: Self::from_parts_unchecked(
                self.outer.clone(),
                self.inner.clone(),
                lgen,
                config.policy,
            ),
            u: Self::from_parts_unchecked(
                self.outer.clone(),
                self.inner.clone(),
                ugen,
                config.policy,
            ),
            pivots,
            diagnostics: LduDiagnostics { per_step: steps, order_warnings },
        })
    }

    /// Inverse through the lifted LU and closed-form triangular inverses.
    /// Outer widths of the result equal the input widths.
    pub fn inverse(&self, config: &LduConfig) -> Result<Self> {
        let pol = &config.policy;
        let factors = self.lu(config)?;
        let mut st = CompressionStats::default();
        let n = self.outer.num_blocks();

        // Unit-lower inverse: d stays the identity, q' = q, a' = a - q p,
        // p' = -p (specialized from the general triangular formulas).
        let lg = &factors.l.gen;
        let mut li = L2Generators::zero(&self.outer, &self.inner);
        for k in 0..n {
            li.d[k] = lg.d[k].clone();
            li.q[k] = lg.q[k].clone();
            li.a[k] = lg.a[k].sub(&lg.q[k].mul(&lg.p[k], pol, &mut st)?, pol, &mut st)?;
            li.p[k] = lg.p[k].scale(-1.0);
        }
        let li = Self::from_parts_unchecked(
            self.outer.clone(),
            self.inner.clone(),
            li,
            config.policy,
        );

        // Upper inverse: d' = d^{-1}, g' = -d^{-1} g, b' = b - h d^{-1} g,
        // h' = h d^{-1}, with the pivot inverses taken from the cached
        // factorizations.
        let ug = &factors.u.gen;
        let mut ui = L2Generators::zero(&self.outer, &self.inner);
        for k in 0..n {
            let raw = arith::inverse_from_factors(&factors.pivots[k])?;
            let (dinv_qs, rep) = compress(&raw, pol);
            st.absorb(rep.error_bound, inner_order(&dinv_qs));
            let dinv = BlockMatrix::single(dinv_qs);
            let dinv_g = dinv.mul(&ug.g[k], pol, &mut st)?;
            let h_dinv = ug.h[k].mul(&dinv, pol, &mut st)?;
            ui.b[k] = ug.b[k].sub(&h_dinv.mul(&ug.g[k], pol, &mut st)?, pol, &mut st)?;
            ui.g[k] = dinv_g.scale(-1.0);
            ui.h[k] = h_dinv;
            ui.d[k] = dinv;
        }
        let ui = Self::from_parts_unchecked(
            self.outer.clone(),
            self.inner.clone(),
            ui,
            config.policy,
        );
        ui.mul(&li)
    }
}

/// Options for the two-level factorization.
#[derive(Debug, Clone, Copy)]
pub struct LduConfig {
    /// Compression applied after every inner operation of the sweep; an
    /// order cap here is what turns the factorization into a cheap
    /// preconditioner.
    pub policy: CompressionPolicy,
    /// Emit a diagnostic warning when a step's inner order exceeds this.
    pub order_ceiling: Option<usize>,
}

impl LduConfig {
    pub fn new(policy: CompressionPolicy) -> Self {
        Self { policy, order_ceiling: None }
    }

    pub fn with_order_ceiling(mut self, ceiling: usize) -> Self {
        self.order_ceiling = Some(ceiling);
        self
    }
}

/// Per-step factorization diagnostics.
#[derive(Debug, Clone, Copy)]
pub struct StepDiagnostics {
    pub max_inner_order: usize,
    pub compression_error: f64,
}

#[derive(Debug, Clone, Default)]
pub struct LduDiagnostics {
    pub per_step: Vec<StepDiagnostics>,
    /// Outer steps whose inner order exceeded the configured ceiling.
    pub order_warnings: Vec<usize>,
}

/// Two-level factorization: unit-lower and upper factors plus cached inner
/// factorizations of every pivot block for fast repeated solves.
#[derive(Debug, Clone)]
pub struct L2LuFactors {
    pub l: L2QsMatrix,
    pub u: L2QsMatrix,
    pub pivots: Vec<QsLuFactors>,
    pub diagnostics: LduDiagnostics,
}

impl L2LuFactors {
    /// Solve `A x = y` by outer forward/backward substitution with inner
    /// solves against the cached pivot factorizations. O(N r^2) per call.
    pub fn solve(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let l = &self.l;
        let n = l.outer.num_blocks();
        let inner_n = l.inner.total();
        if y.len() != l.dim() {
            return Err(Error::DimensionMismatch { expected: l.dim(), found: y.len() });
        }
        let offset = |k: usize| l.outer.offset(k) * inner_n;
        let size = |k: usize| l.outer.size(k) * inner_n;

        // Forward: L z = y with unit diagonal.
        let mut z = DVector::zeros(l.dim());
        let mut s = DVector::<f64>::zeros(0);
        let lg = &l.gen;
        for k in 0..n {
            let mut zk = y.rows(offset(k), size(k)).into_owned();
            if lg.p[k].cols() > 0 {
                zk -= lg.p[k].matvec(&s)?;
            }
            s = {
                let mut new_s = lg.q[k].matvec(&zk)?;
                if lg.a[k].cols() > 0 && lg.a[k].rows() > 0 {
                    new_s += lg.a[k].matvec(&s)?;
                }
                new_s
            };
            z.rows_mut(offset(k), size(k)).copy_from(&zk);
        }

        // Backward: U x = z with cached pivot solves.
        let u = &self.u;
        let ug = &u.gen;
        let mut x = DVector::zeros(l.dim());
        let mut t = DVector::<f64>::zeros(0);
        for k in (0..n).rev() {
            let mut rhs = z.rows(offset(k), size(k)).into_owned();
            if ug.g[k].cols() > 0 {
                rhs -= ug.g[k].matvec(&t)?;
            }
            let xk = self.pivots[k].solve(&rhs)?;
            t = {
                let mut new_t = ug.h[k].matvec(&xk)?;
                if ug.b[k].cols() > 0 && ug.b[k].rows() > 0 {
                    new_t += ug.b[k].matvec(&t)?;
                }
                new_t
            };
            x.rows_mut(offset(k), size(k)).copy_from(&xk);
        }
        Ok(x)
    }
}
