//! Build a quasiseparable matrix, multiply, factor and invert it — all in
//! time linear in the dimension — and compare against dense arithmetic.

use mlqs::compress::{compress, CompressionPolicy};
use mlqs::construct::{from_band, from_dense};
use mlqs::{arith, BlockPartition};
use nalgebra::{DMatrix, DVector};

fn main() {
    let n = 64;

    // A tridiagonal stencil is quasiseparable of order one: the banded
    // embedding is exact and stores O(n) numbers.
    let dense = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            4.0 / 6.0
        } else if i.abs_diff(j) == 1 {
            1.0 / 6.0
        } else {
            0.0
        }
    });
    let t = from_band(&dense, 1, 1, &BlockPartition::scalar(n)).unwrap();
    println!("tridiagonal embedding: orders ({}, {})", t.lower_order(), t.upper_order());

    // Matrix-vector products run as two sweeps without forming the matrix.
    let x = DVector::from_fn(n, |i, _| (i as f64 * 0.2).sin());
    let y = t.matvec(&x).unwrap();
    println!("matvec residual vs dense: {:.2e}", (&y - &dense * &x).norm() / y.norm());

    // The inverse of a banded matrix is dense, but it is still
    // quasiseparable of the same order: structure survives inversion.
    let inv = arith::inverse(&t).unwrap();
    let (inv_min, report) = compress(&inv, &CompressionPolicy::exact());
    println!(
        "inverse: orders ({}, {}) after compression (bound {:.1e})",
        inv_min.lower_order(),
        inv_min.upper_order(),
        report.error_bound
    );
    let id_err = (inv_min.reconstruct_dense() * &dense - DMatrix::identity(n, n)).norm();
    println!("|inv(T) T - I| = {:.2e}", id_err);

    // Pivot-free block LU; the factor widths equal the input widths.
    let f = arith::lu(&t).unwrap();
    let solved = f.solve(&y).unwrap();
    println!("LU solve error vs input: {:.2e}", (&solved - &x).norm() / x.norm());

    // Generators can also be recovered from any dense matrix with minimal
    // widths: here the dense inverse comes back as an order-one matrix.
    let recovered = from_dense(&inv_min.reconstruct_dense(), &BlockPartition::scalar(n), 0.0).unwrap();
    println!(
        "from_dense of the dense inverse: orders ({}, {})",
        recovered.lower_order(),
        recovered.upper_order()
    );
}
