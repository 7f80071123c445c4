//! Two-level structure: Kronecker products are two-level quasiseparable,
//! and inversion preserves the structure — the inverse of a Kronecker
//! square is the Kronecker square of the inverse.

use mlqs::compress::CompressionPolicy;
use mlqs::construct::from_band;
use mlqs::level2::{L2QsMatrix, LduConfig};
use mlqs::BlockPartition;
use nalgebra::DMatrix;

fn main() {
    let n = 12;
    let dense_t = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            4.0 / 6.0
        } else if i.abs_diff(j) == 1 {
            1.0 / 6.0
        } else {
            0.0
        }
    });
    let t = from_band(&dense_t, 1, 1, &BlockPartition::scalar(n)).unwrap();

    // Tensor square: the n^2 x n^2 mass matrix stored with O(n^2) numbers.
    let m = L2QsMatrix::tensor(&t, &t, CompressionPolicy::exact());
    println!(
        "M = T (x) T: {} unknowns, outer orders ({}, {}), inner order {}",
        m.dim(),
        m.outer_lower_order(),
        m.outer_upper_order(),
        m.max_inner_order()
    );
    println!("structured storage: {} bytes (dense would need {})", m.memory_estimate(), m.dim() * m.dim() * 8);

    // Invert in structured arithmetic.
    let inv = m.inverse(&LduConfig::new(CompressionPolicy::relative_tolerance(1e-13))).unwrap();
    println!(
        "M^-1: outer orders ({}, {}), inner order {}",
        inv.outer_lower_order(),
        inv.outer_upper_order(),
        inv.max_inner_order()
    );

    // Check the tensor identity against dense arithmetic.
    let tinv = dense_t.try_inverse().unwrap();
    let want = {
        let (r, c) = (tinv.nrows(), tinv.ncols());
        DMatrix::from_fn(r * r, c * c, |i, j| tinv[(i / r, j / c)] * tinv[(i % r, j % c)])
    };
    let err = (inv.reconstruct_dense() - &want).norm() / want.norm();
    println!("|M^-1 - T^-1 (x) T^-1| / |T^-1 (x) T^-1| = {err:.2e}");
}
