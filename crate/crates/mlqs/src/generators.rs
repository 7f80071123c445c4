//! Generator families of a block quasiseparable matrix.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::partition::BlockPartition;

/// The seven generator families `{d, q, a, p, g, b, h}` of a block
/// quasiseparable matrix.
///
/// With `n` diagonal blocks, every family is stored with exactly `n` entries
/// and boundary entries carry a zero dimension, so that all sweeps run
/// uniformly without special cases:
///
/// ```text
/// d[k] : n_k x n_k                      diagonal blocks
/// q[k] : rl[k]   x n_k    (rl[n-1] = 0) lower input maps
/// a[k] : rl[k]   x rl[k-1] (rl[-1] = 0) lower state transitions
/// p[k] : n_k     x rl[k-1]              lower output maps
/// g[k] : n_k     x ru[k]   (ru[n-1] = 0) upper output maps
/// b[k] : ru[k-1] x ru[k]                upper state transitions
/// h[k] : ru[k-1] x n_k                  upper input maps
/// ```
///
/// The block at position `(i, j)` of the represented matrix is
/// `p[i] a[i-1] ... a[j+1] q[j]` below the diagonal, `d[i]` on it, and
/// `g[i] b[i+1] ... b[j-1] h[j]` above it. The per-split widths `rl[k]`
/// (rows of `q[k]`) and `ru[k]` (columns of `g[k]`) are the quasiseparable
/// generator orders.
#[derive(Debug, Clone, PartialEq)]
pub struct QsGenerators {
    pub d: Vec<DMatrix<f64>>,
    pub q: Vec<DMatrix<f64>>,
    pub a: Vec<DMatrix<f64>>,
    pub p: Vec<DMatrix<f64>>,
    pub g: Vec<DMatrix<f64>>,
    pub b: Vec<DMatrix<f64>>,
    pub h: Vec<DMatrix<f64>>,
}

impl QsGenerators {
    /// Generators of the zero matrix over `partition` (all widths zero).
    pub fn zero(partition: &BlockPartition) -> Self {
        let n = partition.num_blocks();
        let mut gens = Self {
            d: Vec::with_capacity(n),
            q: Vec::with_capacity(n),
            a: Vec::with_capacity(n),
            p: Vec::with_capacity(n),
            g: Vec::with_capacity(n),
            b: Vec::with_capacity(n),
            h: Vec::with_capacity(n),
        };
        for k in 0..n {
            let nk = partition.size(k);
            gens.d.push(DMatrix::zeros(nk, nk));
            gens.q.push(DMatrix::zeros(0, nk));
            gens.a.push(DMatrix::zeros(0, 0));
            gens.p.push(DMatrix::zeros(nk, 0));
            gens.g.push(DMatrix::zeros(nk, 0));
            gens.b.push(DMatrix::zeros(0, 0));
            gens.h.push(DMatrix::zeros(0, nk));
        }
        gens
    }

    /// Lower generator width at split `k` (after block `k`).
    pub fn lower_width(&self, k: usize) -> usize {
        self.q[k].nrows()
    }

    /// Upper generator width at split `k`.
    pub fn upper_width(&self, k: usize) -> usize {
        self.g[k].ncols()
    }

    /// All lower widths `rl[0..n-1]` (the last block carries width zero and
    /// is omitted).
    pub fn lower_widths(&self) -> Vec<usize> {
        let n = self.d.len();
        (0..n.saturating_sub(1)).map(|k| self.lower_width(k)).collect()
    }

    /// All upper widths `ru[0..n-1]`.
    pub fn upper_widths(&self) -> Vec<usize> {
        let n = self.d.len();
        (0..n.saturating_sub(1)).map(|k| self.upper_width(k)).collect()
    }

    /// Maximum lower width (the lower quasiseparable order of this
    /// representation).
    pub fn lower_order(&self) -> usize {
        self.lower_widths().into_iter().max().unwrap_or(0)
    }

    /// Maximum upper width.
    pub fn upper_order(&self) -> usize {
        self.upper_widths().into_iter().max().unwrap_or(0)
    }

    /// Validate every adjacent shape constraint, reporting the family and
    /// block index of the first violation.
    pub fn validate(&self, partition: &BlockPartition) -> Result<()> {
        let n = partition.num_blocks();
        for (name, family) in [
            ("d", &self.d),
            ("q", &self.q),
            ("a", &self.a),
            ("p", &self.p),
            ("g", &self.g),
            ("b", &self.b),
            ("h", &self.h),
        ] {
            if family.len() != n {
                return Err(Error::InvalidConfig(format!(
                    "family `{name}` has {} entries, expected {n}",
                    family.len()
                )));
            }
        }

        let fail = |family, index, expected, found| {
            Err(Error::GeneratorShape { family, index, expected, found })
        };

        for k in 0..n {
            let nk = partition.size(k);
            let rl_prev = if k == 0 { 0 } else { self.q[k - 1].nrows() };
            let ru_prev = if k == 0 { 0 } else { self.g[k - 1].ncols() };
            let rl_k = self.q[k].nrows();
            let ru_k = self.g[k].ncols();

            if self.d[k].shape() != (nk, nk) {
                return fail("d", k, (nk, nk), self.d[k].shape());
            }
            if self.q[k].ncols() != nk || (k == n - 1 && rl_k != 0) {
                let want_rows = if k == n - 1 { 0 } else { rl_k };
                return fail("q", k, (want_rows, nk), self.q[k].shape());
            }
            if self.a[k].shape() != (rl_k, rl_prev) {
                return fail("a", k, (rl_k, rl_prev), self.a[k].shape());
            }
            if self.p[k].shape() != (nk, rl_prev) {
                return fail("p", k, (nk, rl_prev), self.p[k].shape());
            }
            if self.g[k].nrows() != nk || (k == n - 1 && ru_k != 0) {
                let want_cols = if k == n - 1 { 0 } else { ru_k };
                return fail("g", k, (nk, want_cols), self.g[k].shape());
            }
            if self.b[k].shape() != (ru_prev, ru_k) {
                return fail("b", k, (ru_prev, ru_k), self.b[k].shape());
            }
            if self.h[k].shape() != (ru_prev, nk) {
                return fail("h", k, (ru_prev, nk), self.h[k].shape());
            }
        }
        Ok(())
    }
}
