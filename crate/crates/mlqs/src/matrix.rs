//! Block quasiseparable matrices in generator form.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::generators::QsGenerators;
use crate::metrics;
use crate::partition::BlockPartition;

/// A block quasiseparable matrix: a block partition plus generator families.
///
/// The dense matrix it represents is never materialized by the arithmetic;
/// [`QsMatrix::reconstruct_dense`] exists for tests, oracles and small
/// diagnostics only.
#[derive(Debug, Clone, PartialEq)]
pub struct QsMatrix {
    partition: BlockPartition,
    gen: QsGenerators,
}

impl QsMatrix {
    /// Wrap validated generators.
    pub fn from_parts(partition: BlockPartition, gen: QsGenerators) -> Result<Self> {
        gen.validate(&partition)?;
        Ok(Self { partition, gen })
    }

    /// Internal constructor for generators produced by sweeps that maintain
    /// the shape invariants themselves.
    pub(crate) fn from_parts_unchecked(partition: BlockPartition, gen: QsGenerators) -> Self {
        debug_assert!(gen.validate(&partition).is_ok());
        Self { partition, gen }
    }

    /// The zero matrix over `partition` (all generator widths zero).
    pub fn zero(partition: BlockPartition) -> Self {
        let gen = QsGenerators::zero(&partition);
        Self { partition, gen }
    }

    /// The identity matrix over `partition`.
    pub fn identity(partition: BlockPartition) -> Self {
        let mut gen = QsGenerators::zero(&partition);
        for k in 0..partition.num_blocks() {
            gen.d[k] = DMatrix::identity(partition.size(k), partition.size(k));
        }
        Self { partition, gen }
    }

    /// Block diagonal matrix; the partition is taken from the block sizes.
    pub fn block_diagonal(blocks: Vec<DMatrix<f64>>) -> Result<Self> {
        for (k, blk) in blocks.iter().enumerate() {
            if blk.nrows() != blk.ncols() {
                return Err(Error::GeneratorShape {
                    family: "d",
                    index: k,
                    expected: (blk.nrows(), blk.nrows()),
                    found: blk.shape(),
                });
            }
        }
        let partition = BlockPartition::new(blocks.iter().map(|b| b.nrows()).collect())?;
        let mut gen = QsGenerators::zero(&partition);
        gen.d = blocks;
        Ok(Self { partition, gen })
    }

    /// Diagonal matrix with scalar blocks.
    pub fn from_diagonal(entries: &[f64]) -> Result<Self> {
        Self::block_diagonal(entries.iter().map(|&e| DMatrix::from_element(1, 1, e)).collect())
    }

    pub fn partition(&self) -> &BlockPartition {
        &self.partition
    }

    pub fn generators(&self) -> &QsGenerators {
        &self.gen
    }

    pub fn into_parts(self) -> (BlockPartition, QsGenerators) {
        (self.partition, self.gen)
    }

    /// Total dimension `N`.
    pub fn dim(&self) -> usize {
        self.partition.total()
    }

    /// Number of diagonal blocks.
    pub fn num_blocks(&self) -> usize {
        self.partition.num_blocks()
    }

    /// Lower quasiseparable order of the stored representation.
    pub fn lower_order(&self) -> usize {
        self.gen.lower_order()
    }

    /// Upper quasiseparable order of the stored representation.
    pub fn upper_order(&self) -> usize {
        self.gen.upper_order()
    }

    /// Stored generator element count times the scalar width, in bytes.
    pub fn memory_estimate(&self) -> usize {
        let g = &self.gen;
        [&g.d, &g.q, &g.a, &g.p, &g.g, &g.b, &g.h]
            .iter()
            .flat_map(|fam| fam.iter())
            .map(|m| m.len())
            .sum::<usize>()
            * std::mem::size_of::<f64>()
    }

    /// Expand to a dense matrix. Costs O(N^2); intended for tests and small
    /// diagnostics.
    pub fn reconstruct_dense(&self) -> DMatrix<f64> {
        let n = self.num_blocks();
        let p = &self.partition;
        let g = &self.gen;
        let mut out = DMatrix::zeros(self.dim(), self.dim());

        for k in 0..n {
            out.view_mut((p.offset(k), p.offset(k)), (p.size(k), p.size(k)))
                .copy_from(&g.d[k]);
        }
        // Lower triangle: walk each block column downwards.
        for j in 0..n.saturating_sub(1) {
            let mut t = g.q[j].clone();
            for i in (j + 1)..n {
                let block = &g.p[i] * &t;
                out.view_mut((p.offset(i), p.offset(j)), block.shape())
                    .copy_from(&block);
                if i + 1 < n {
                    t = &g.a[i] * t;
                }
            }
        }
        // Upper triangle: walk each block row rightwards.
        for i in 0..n.saturating_sub(1) {
            let mut t = g.g[i].clone();
            for j in (i + 1)..n {
                let block = &t * &g.h[j];
                out.view_mut((p.offset(i), p.offset(j)), block.shape())
                    .copy_from(&block);
                if j + 1 < n {
                    t = t * &g.b[j];
                }
            }
        }
        out
    }

    /// Matrix-vector product in O(N (rl + ru)) time via one ascending and one
    /// descending sweep; the dense matrix is never formed.
    pub fn matvec(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: x.len() });
        }
        let n = self.num_blocks();
        let p = &self.partition;
        let g = &self.gen;
        let mut y = DVector::zeros(self.dim());

        // Ascending: diagonal plus lower part.
        let mut s = DVector::<f64>::zeros(0);
        for k in 0..n {
            let xk = x.rows(p.offset(k), p.size(k));
            let mut yk = &g.d[k] * xk;
            metrics::count_gemm(p.size(k), p.size(k), 1);
            if g.p[k].ncols() > 0 {
                yk += &g.p[k] * &s;
                metrics::count_gemm(g.p[k].nrows(), g.p[k].ncols(), 1);
            }
            s = &g.a[k] * &s + &g.q[k] * xk;
            metrics::count_gemm(g.q[k].nrows(), g.q[k].ncols(), 1);
            y.rows_mut(p.offset(k), p.size(k)).copy_from(&yk);
        }

        // Descending: upper part.
        let mut t = DVector::<f64>::zeros(0);
        for k in (0..n).rev() {
            let xk = x.rows(p.offset(k), p.size(k));
            if g.g[k].ncols() > 0 {
                y.rows_mut(p.offset(k), p.size(k)).axpy(1.0, &(&g.g[k] * &t), 1.0);
                metrics::count_gemm(g.g[k].nrows(), g.g[k].ncols(), 1);
            }
            t = &g.b[k] * &t + &g.h[k] * xk;
            metrics::count_gemm(g.h[k].nrows(), g.h[k].ncols(), 1);
        }
        Ok(y)
    }

    /// Frobenius norm in O(N (rl + ru)^2) time by accumulating Gram states of
    /// the lower and upper transports.
    pub fn frobenius_norm(&self) -> f64 {
        let n = self.num_blocks();
        let g = &self.gen;
        let mut total = 0.0;
        for k in 0..n {
            total += g.d[k].norm_squared();
            metrics::count_block(g.d[k].nrows(), g.d[k].ncols());
        }

        // Lower: gamma tracks Q_k Q_k^T at the current split.
        let mut gamma = DMatrix::<f64>::zeros(0, 0);
        for k in 0..n {
            if g.p[k].ncols() > 0 {
                let pg = &g.p[k] * &gamma;
                total += pg.component_mul(&g.p[k]).sum().max(0.0);
                metrics::count_gemm(g.p[k].nrows(), g.p[k].ncols(), gamma.ncols());
            }
            gamma = &g.a[k] * &gamma * g.a[k].transpose() + &g.q[k] * g.q[k].transpose();
            metrics::count_gemm(g.q[k].nrows(), g.q[k].ncols(), g.q[k].nrows());
        }

        // Upper: phi tracks H_k H_k^T.
        let mut phi = DMatrix::<f64>::zeros(0, 0);
        for k in (0..n).rev() {
            if g.g[k].ncols() > 0 {
                let gp = &g.g[k] * &phi;
                total += gp.component_mul(&g.g[k]).sum().max(0.0);
                metrics::count_gemm(g.g[k].nrows(), g.g[k].ncols(), phi.ncols());
            }
            phi = &g.b[k] * &phi * g.b[k].transpose() + &g.h[k] * g.h[k].transpose();
            metrics::count_gemm(g.h[k].nrows(), g.h[k].ncols(), g.h[k].nrows());
        }
        total.sqrt()
    }

    /// Transpose. Exchanges the roles of the lower and upper families and
    /// transposes every block; cost O(N r).
    pub fn transpose(&self) -> QsMatrix {
        let n = self.num_blocks();
        let g = &self.gen;
        let mut out = QsGenerators::zero(&self.partition);
        for k in 0..n {
            out.d[k] = g.d[k].transpose();
            out.q[k] = g.g[k].transpose();
            out.a[k] = g.b[k].transpose();
            out.p[k] = g.h[k].transpose();
            out.g[k] = g.q[k].transpose();
            out.b[k] = g.a[k].transpose();
            out.h[k] = g.p[k].transpose();
        }
        QsMatrix { partition: self.partition.clone(), gen: out }
    }
}
