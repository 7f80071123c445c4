//! Dense-oracle checks for the two-level structure: constructors, lifted
//! arithmetic, the column-sweep factorization and the Kronecker identities.

mod common;

use common::*;
use mlqs::compress::CompressionPolicy;
use mlqs::construct::from_band;
use mlqs::level2::{L2QsMatrix, LduConfig};
use mlqs::{BlockPartition, QsMatrix};
use nalgebra::{DMatrix, DVector};

fn mass_t(n: usize) -> QsMatrix {
    let t = tridiag(n, 1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0);
    from_band(&t, 1, 1, &BlockPartition::scalar(n)).unwrap()
}

fn laplace_blocks(n: usize) -> (Vec<QsMatrix>, Vec<QsMatrix>) {
    let a = tridiag(n, 1.0 / 3.0, -8.0 / 3.0, 1.0 / 3.0);
    let b = tridiag(n, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
    let part = BlockPartition::scalar(n);
    let aq = from_band(&a, 1, 1, &part).unwrap();
    let bq = from_band(&b, 1, 1, &part).unwrap();
    (vec![aq; n], vec![bq; n - 1])
}

fn laplace_l2(n: usize) -> L2QsMatrix {
    let (diag, coupling) = laplace_blocks(n);
    L2QsMatrix::block_tridiagonal(&diag, &coupling, &coupling, CompressionPolicy::exact()).unwrap()
}

#[test]
fn block_tridiagonal_matches_direct_stencil_assembly() {
    let n = 4;
    let k = laplace_l2(n);
    assert_eq!(k.outer_lower_order(), 1);
    assert_eq!(k.outer_upper_order(), 1);
    assert!(rel_err(&k.reconstruct_dense(), &laplacian_q1_dense(n)) <= 1e-14);
}

#[test]
fn single_block_wrapper_is_trivial() {
    let t = mass_t(5);
    let l2 = L2QsMatrix::block_tridiagonal(&[t.clone()], &[], &[], CompressionPolicy::exact())
        .unwrap();
    assert_eq!(l2.num_outer_blocks(), 1);
    assert!(rel_err(&l2.reconstruct_dense(), &t.reconstruct_dense()) == 0.0);
}

#[test]
fn zero_couplings_collapse_outer_widths() {
    let t = mass_t(3);
    let z = QsMatrix::zero(t.partition().clone());
    let l2 = L2QsMatrix::block_tridiagonal(
        &[t.clone(), t.clone(), t.clone()],
        &[z.clone(), z.clone()],
        &[z.clone(), z.clone()],
        CompressionPolicy::exact(),
    )
    .unwrap();
    assert_eq!(l2.outer_lower_order(), 0);
    assert_eq!(l2.outer_upper_order(), 0);
}

#[test]
fn tensor_reconstructs_kronecker_product() {
    // The 2D mass matrix is the Kronecker square of the 1D stencil.
    let n = 6;
    let t = mass_t(n);
    let m = L2QsMatrix::tensor(&t, &t, CompressionPolicy::exact());
    let want = kron(&t.reconstruct_dense(), &t.reconstruct_dense());
    assert!(rel_err(&m.reconstruct_dense(), &want) <= 1e-14);
    assert_eq!(m.outer_lower_order(), t.lower_order());
    assert_eq!(m.max_inner_order(), 1);
}

#[test]
fn tensor_with_identity_is_block_diagonal() {
    let n = 4;
    let id = QsMatrix::identity(BlockPartition::scalar(n));
    let b = mass_t(n);
    let m = L2QsMatrix::tensor(&id, &b, CompressionPolicy::exact());
    let want = kron(&DMatrix::identity(n, n), &b.reconstruct_dense());
    assert!(rel_err(&m.reconstruct_dense(), &want) == 0.0);
    assert_eq!(m.outer_lower_order(), 0);
}

#[test]
fn tensor_matvec_matches_dense_kronecker() {
    let mut rng = rng(21);
    let pa = BlockPartition::scalar(8);
    let a = random_qs(&pa, 2, 1, 0.0, &mut rng);
    let b = random_qs(&pa, 1, 2, 0.0, &mut rng);
    let m = L2QsMatrix::tensor(&a, &b, CompressionPolicy::exact());
    let x = DVector::from_fn(64, |i, _| (0.11 * i as f64).sin());
    let got = m.matvec(&x).unwrap();
    let want = kron(&a.reconstruct_dense(), &b.reconstruct_dense()) * &x;
    assert!((got - &want).norm() <= 1e-12 * want.norm());
}

#[test]
fn mixed_product_identity_for_tensors() {
    // (A (x) B)(C (x) D) = (AC) (x) (BD), 4x4 inner blocks.
    let mut rng = rng(22);
    let part = BlockPartition::scalar(4);
    let a = random_qs(&part, 1, 1, 2.0, &mut rng);
    let b = random_qs(&part, 1, 1, 2.0, &mut rng);
    let c = random_qs(&part, 1, 1, 2.0, &mut rng);
    let d = random_qs(&part, 1, 1, 2.0, &mut rng);
    let left = L2QsMatrix::tensor(&a, &b, CompressionPolicy::exact());
    let right = L2QsMatrix::tensor(&c, &d, CompressionPolicy::exact());
    let prod = left.mul(&right).unwrap();
    let want = kron(
        &(a.reconstruct_dense() * c.reconstruct_dense()),
        &(b.reconstruct_dense() * d.reconstruct_dense()),
    );
    assert!(rel_err(&prod.reconstruct_dense(), &want) <= 1e-12);
}

#[test]
fn l2_add_and_scale_match_dense() {
    let n = 8;
    let k = laplace_l2(n);
    let m = L2QsMatrix::tensor(&mass_t(n), &mass_t(n), CompressionPolicy::exact());
    let beta = 0.01;
    let sum = k.add(&m.scale(1.0 / (2.0 * beta))).unwrap();
    let want = laplacian_q1_dense(n) + mass_q1_dense(n) / (2.0 * beta);
    assert!(rel_err(&sum.reconstruct_dense(), &want) <= 1e-12);
}

#[test]
fn l2_matvec_matches_stencil_oracle() {
    let n = 8;
    let k = laplace_l2(n);
    let x = DVector::from_element(n * n, 1.0);
    let got = k.matvec(&x).unwrap();
    let want = laplacian_q1_dense(n) * &x;
    assert!((got - &want).norm() <= 1e-12 * want.norm());
}

#[test]
fn l2_transpose_matches_dense() {
    let n = 6;
    let k = laplace_l2(n);
    assert!(rel_err(&k.transpose().reconstruct_dense(), &k.reconstruct_dense().transpose()) == 0.0);
}

#[test]
fn block_diagonal_factorization_is_trivial() {
    let t = mass_t(4);
    let z = QsMatrix::zero(t.partition().clone());
    let l2 = L2QsMatrix::block_tridiagonal(
        &[t.clone(), t.clone()],
        &[z.clone()],
        &[z],
        CompressionPolicy::exact(),
    )
    .unwrap();
    let f = l2.lu(&LduConfig::new(CompressionPolicy::exact())).unwrap();
    let dim = l2.dim();
    assert!(rel_err(&f.l.reconstruct_dense(), &DMatrix::identity(dim, dim)) == 0.0);
    assert!(rel_err(&f.u.reconstruct_dense(), &l2.reconstruct_dense()) <= 1e-14);
}

#[test]
fn laplacian_factorization_matches_dense_block_elimination() {
    let n = 8;
    let k = laplace_l2(n);
    let config = LduConfig::new(CompressionPolicy::relative_tolerance(1e-13));
    let f = k.lu(&config).unwrap();
    let dense = laplacian_q1_dense(n);
    let prod = f.l.reconstruct_dense() * f.u.reconstruct_dense();
    assert!(rel_err(&prod, &dense) <= 1e-10, "L*U reconstructs the Laplacian");

    // Pivot blocks match the dense Schur complement sweep.
    let part = BlockPartition::uniform(n, n).unwrap();
    let (_, u_oracle) = dense_block_lu(&dense, &part).unwrap();
    for k_outer in 0..n {
        let pivot = f.u.generators().d[k_outer].get(0, 0).reconstruct_dense();
        let want = u_oracle.view((k_outer * n, k_outer * n), (n, n)).into_owned();
        assert!(rel_err(&pivot, &want) <= 1e-9, "pivot {k_outer}");
    }
}

#[test]
fn factorization_solve_matches_dense_solve() {
    let n = 8;
    let k = laplace_l2(n);
    let f = k.lu(&LduConfig::new(CompressionPolicy::relative_tolerance(1e-13))).unwrap();
    let rhs = DVector::from_fn(n * n, |i, _| ((i % 7) as f64 - 3.0) * 0.25);
    let x = f.solve(&rhs).unwrap();
    let want = laplacian_q1_dense(n).lu().solve(&rhs).unwrap();
    assert!((x - &want).norm() <= 1e-8 * want.norm());
}

#[test]
fn kronecker_inverse_identity() {
    // The inverse of a Kronecker square equals the Kronecker square of the
    // inverse; after exact compression all orders are one.
    let n = 8;
    let t = mass_t(n);
    let m = L2QsMatrix::tensor(&t, &t, CompressionPolicy::exact());
    let inv = m.inverse(&LduConfig::new(CompressionPolicy::relative_tolerance(1e-13))).unwrap();

    let tinv = t.reconstruct_dense().try_inverse().unwrap();
    let want = kron(&tinv, &tinv);
    assert!(rel_err(&inv.reconstruct_dense(), &want) <= 1e-8);
    assert_eq!(inv.outer_lower_order(), 1);
    assert_eq!(inv.outer_upper_order(), 1);
    assert!(inv.max_inner_order() <= 1, "inner orders collapse to one");
}

#[test]
fn order_ceiling_warning_fires() {
    let n = 8;
    let k = laplace_l2(n);
    let config = LduConfig::new(CompressionPolicy::relative_tolerance(1e-13)).with_order_ceiling(1);
    let f = k.lu(&config).unwrap();
    assert!(!f.diagnostics.order_warnings.is_empty(), "fill-in exceeds order one");
}

#[test]
fn capped_factorization_keeps_orders_at_cap() {
    let n = 16;
    let k = laplace_l2(n);
    let config = LduConfig::new(CompressionPolicy::fixed_max_order(2));
    let f = k.lu(&config).unwrap();
    for step in &f.diagnostics.per_step {
        assert!(step.max_inner_order <= 2);
    }
    // Truncated factors still solve the system approximately.
    let rhs = DVector::from_element(n * n, 1.0);
    let x = f.solve(&rhs).unwrap();
    let r = laplacian_q1_dense(n) * &x - &rhs;
    assert!(r.norm() / rhs.norm() < 0.5, "approximate factorization is close");
}
