//! Lightweight per-thread operation counters.
//!
//! The sweeps record one "kernel call" per block-level operation (a small
//! matrix product, factorization or copy) together with a flop estimate.
//! Complexity smoke tests read these counters to verify linear scaling
//! without relying on wall-clock time.

use std::cell::Cell;

thread_local! {
    static KERNEL_CALLS: Cell<u64> = const { Cell::new(0) };
    static FLOPS: Cell<u64> = const { Cell::new(0) };
}

/// Snapshot of the per-thread counters.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OpCounts {
    pub kernel_calls: u64,
    pub flops: u64,
}

/// Reset both counters for the current thread.
pub fn reset() {
    KERNEL_CALLS.with(|c| c.set(0));
    FLOPS.with(|c| c.set(0));
}

/// Read the current counters.
pub fn snapshot() -> OpCounts {
    OpCounts {
        kernel_calls: KERNEL_CALLS.with(Cell::get),
        flops: FLOPS.with(Cell::get),
    }
}

/// Record a dense product of an (m x k) by a (k x n) block.
#[inline]
pub(crate) fn count_gemm(m: usize, k: usize, n: usize) {
    KERNEL_CALLS.with(|c| c.set(c.get() + 1));
    FLOPS.with(|c| c.set(c.get() + (2 * m * k * n) as u64));
}

/// Record a block copy / addition of an (m x n) block.
#[inline]
pub(crate) fn count_block(m: usize, n: usize) {
    KERNEL_CALLS.with(|c| c.set(c.get() + 1));
    FLOPS.with(|c| c.set(c.get() + (m * n) as u64));
}

/// Record a small dense factorization (SVD, QR, LU) of an (m x n) block.
#[inline]
pub(crate) fn count_factorization(m: usize, n: usize) {
    KERNEL_CALLS.with(|c| c.set(c.get() + 1));
    let (lo, hi) = if m < n { (m, n) } else { (n, m) };
    FLOPS.with(|c| c.set(c.get() + (8 * lo * lo * hi) as u64));
}
