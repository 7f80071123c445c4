//! Block partitions of the index range `0..N`.

use crate::error::{Error, Result};

/// A partition of `0..N` into `n` consecutive blocks of positive sizes.
///
/// Every structured matrix in this crate carries one of these; two matrices
/// can be combined only when their partitions agree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockPartition {
    sizes: Vec<usize>,
    /// Cumulative offsets, `offsets[k]` = start of block `k`; has `n + 1`
    /// entries with `offsets[n] == N`.
    offsets: Vec<usize>,
}

impl BlockPartition {
    /// Build a partition from explicit block sizes.
    pub fn new(sizes: Vec<usize>) -> Result<Self> {
        if sizes.is_empty() {
            return Err(Error::InvalidConfig("partition needs at least one block".into()));
        }
        if let Some(k) = sizes.iter().position(|&s| s == 0) {
            return Err(Error::InvalidConfig(format!("block {k} has size zero")));
        }
        let mut offsets = Vec::with_capacity(sizes.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for &s in &sizes {
            acc += s;
            offsets.push(acc);
        }
        Ok(Self { sizes, offsets })
    }

    /// Partition of `n` scalar (size-1) blocks.
    pub fn scalar(n: usize) -> Self {
        Self::new(vec![1; n]).expect("n >= 1")
    }

    /// Partition of `n` equal blocks of size `block`.
    pub fn uniform(n: usize, block: usize) -> Result<Self> {
        Self::new(vec![block; n])
    }

    /// Number of blocks.
    pub fn num_blocks(&self) -> usize {
        self.sizes.len()
    }

    /// Total dimension `N`.
    pub fn total(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    /// Size of block `k`.
    pub fn size(&self, k: usize) -> usize {
        self.sizes[k]
    }

    /// Start offset of block `k`.
    pub fn offset(&self, k: usize) -> usize {
        self.offsets[k]
    }

    /// All block sizes.
    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// True when every block has size one.
    pub fn is_scalar(&self) -> bool {
        self.sizes.iter().all(|&s| s == 1)
    }

    /// Split offsets `K = n_1 + ... + n_k` for `k = 1..n-1`, i.e. the interior
    /// block boundaries at which off-diagonal submatrices are taken.
    pub fn splits(&self) -> &[usize] {
        &self.offsets[1..self.offsets.len() - 1]
    }

    /// Check that `coarse` is obtained by merging consecutive blocks of
    /// `self`; returns, for each coarse block, the range of fine blocks it
    /// covers.
    pub fn grouping_into(&self, coarse: &BlockPartition) -> Result<Vec<std::ops::Range<usize>>> {
        if coarse.total() != self.total() {
            return Err(Error::DimensionMismatch {
                expected: self.total(),
                found: coarse.total(),
            });
        }
        let mut groups = Vec::with_capacity(coarse.num_blocks());
        let mut fine = 0;
        for g in 0..coarse.num_blocks() {
            let start = fine;
            let mut acc = 0;
            while acc < coarse.size(g) {
                if fine >= self.num_blocks() {
                    return Err(Error::InvalidConfig(
                        "coarse partition does not align with fine block boundaries".into(),
                    ));
                }
                acc += self.size(fine);
                fine += 1;
            }
            if acc != coarse.size(g) {
                return Err(Error::InvalidConfig(format!(
                    "coarse block {g} does not align with fine block boundaries"
                )));
            }
            groups.push(start..fine);
        }
        Ok(groups)
    }

    /// Error helper: partitions of two operands must be identical.
    pub(crate) fn ensure_same(&self, other: &BlockPartition) -> Result<()> {
        if self != other {
            return Err(Error::PartitionMismatch {
                left: self.num_blocks(),
                left_dim: self.total(),
                right: other.num_blocks(),
                right_dim: other.total(),
            });
        }
        Ok(())
    }
}
