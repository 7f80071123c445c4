//! Generator widths add under arithmetic; order reduction restores the
//! minimal widths or trades accuracy for a hard cap.

use mlqs::compress::{compress, CompressionPolicy};
use mlqs::construct::{from_band, from_dense};
use mlqs::{arith, BlockPartition};
use nalgebra::DMatrix;

fn main() {
    let n = 96;
    let part = BlockPartition::scalar(n);
    let band = DMatrix::from_fn(n, n, |i, j| {
        if i.abs_diff(j) <= 2 {
            1.0 / (1.0 + i.abs_diff(j) as f64) + if i == j { 4.0 } else { 0.0 }
        } else {
            0.0
        }
    });
    let a = from_band(&band, 2, 2, &part).unwrap();

    // A sum carries the concatenated generators of both operands even when
    // the result is as simple as 2A...
    let doubled = arith::add(&a, &a).unwrap();
    println!("A has orders ({}, {})", a.lower_order(), a.upper_order());
    println!("A + A carries orders ({}, {}) uncompressed", doubled.lower_order(), doubled.upper_order());

    // ...and exact-rank reduction brings them back to the true ranks.
    let (min, report) = compress(&doubled, &CompressionPolicy::exact());
    println!(
        "after exact reduction: orders ({}, {}), orthonormality defect {:.1e}",
        min.lower_order(),
        min.upper_order(),
        report.max_ortho_defect
    );

    // For matrices with decaying off-diagonal spectra, a tolerance trades
    // accuracy for width; the report bounds the damage.
    let kernel = DMatrix::from_fn(n, n, |i, j| {
        let d = i.abs_diff(j) as f64;
        1.0 / (1.0 + d * d) + if i == j { 2.0 } else { 0.0 }
    });
    let smooth = from_dense(&kernel, &part, 1e-14).unwrap();
    println!(
        "\nsmooth kernel matrix, orders ({}, {}) at machine accuracy:",
        smooth.lower_order(),
        smooth.upper_order()
    );
    println!("{:>10}  {:>6}  {:>12}  {:>12}", "tau", "order", "bound", "actual");
    for tau in [1e-10, 1e-7, 1e-4, 1e-2] {
        let (c, rep) = compress(&smooth, &CompressionPolicy::relative_tolerance(tau));
        let actual = (c.reconstruct_dense() - &kernel).norm() / kernel.norm();
        println!(
            "{:>10.0e}  {:>6}  {:>12.2e}  {:>12.2e}",
            tau,
            c.lower_order().max(c.upper_order()),
            rep.error_bound,
            actual
        );
    }

    // A hard cap pins the width no matter what.
    let (capped, _) = compress(&smooth, &CompressionPolicy::fixed_max_order(2));
    println!("\nfixed cap 2: orders ({}, {})", capped.lower_order(), capped.upper_order());
}
