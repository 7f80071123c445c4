//! Shared oracles for the integration suites. Everything here is written
//! independently of the library's sweep implementations: entrywise chain
//! evaluation, dense block elimination, dense Kronecker products and
//! first-principles finite element assembly.
#![allow(dead_code)]

use mlqs::{BlockPartition, QsGenerators, QsMatrix};
use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn rel_err(got: &DMatrix<f64>, want: &DMatrix<f64>) -> f64 {
    let denom = want.norm();
    if denom == 0.0 {
        (got - want).norm()
    } else {
        (got - want).norm() / denom
    }
}

pub fn rand_mat(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| rng.random::<f64>() * 2.0 - 1.0)
}

/// Entry `(row, col)` of the matrix represented by `m`, evaluated with
/// explicit scalar chain products. This is a second, loop-based evaluator of
/// the generator representation, kept independent of the library's
/// reconstruction path.
pub fn entrywise_eval(m: &QsMatrix, row: usize, col: usize) -> f64 {
    let part = m.partition();
    let locate = |x: usize| {
        let mut k = 0;
        while part.offset(k + 1) <= x {
            k += 1;
        }
        k
    };
    let (bi, bj) = (locate(row), locate(col));
    let (ri, cj) = (row - part.offset(bi), col - part.offset(bj));
    let g = m.generators();
    if bi == bj {
        return g.d[bi][(ri, cj)];
    }
    if bi > bj {
        let mut v: Vec<f64> = (0..g.q[bj].nrows()).map(|r| g.q[bj][(r, cj)]).collect();
        for k in (bj + 1)..bi {
            let a = &g.a[k];
            let mut w = vec![0.0; a.nrows()];
            for r in 0..a.nrows() {
                for c in 0..a.ncols() {
                    w[r] += a[(r, c)] * v[c];
                }
            }
            v = w;
        }
        (0..g.p[bi].ncols()).map(|c| g.p[bi][(ri, c)] * v[c]).sum()
    } else {
        let mut v: Vec<f64> = (0..g.h[bj].nrows()).map(|r| g.h[bj][(r, cj)]).collect();
        for k in ((bi + 1)..bj).rev() {
            let b = &g.b[k];
            let mut w = vec![0.0; b.nrows()];
            for r in 0..b.nrows() {
                for c in 0..b.ncols() {
                    w[r] += b[(r, c)] * v[c];
                }
            }
            v = w;
        }
        (0..g.g[bi].ncols()).map(|c| g.g[bi][(ri, c)] * v[c]).sum()
    }
}

/// Random generators with uniform widths `(rl, ru)` over `partition`.
/// Transitions are damped so chains stay bounded; `diag_shift` is added to
/// the diagonal blocks (pick it large enough for strong regularity).
pub fn random_qs(
    partition: &BlockPartition,
    rl: usize,
    ru: usize,
    diag_shift: f64,
    rng: &mut ChaCha8Rng,
) -> QsMatrix {
    let n = partition.num_blocks();
    let mut gen = QsGenerators::zero(partition);
    let mut rl_prev = 0;
    let mut ru_prev = 0;
    for k in 0..n {
        let nk = partition.size(k);
        let rl_k = if k == n - 1 { 0 } else { rl };
        let ru_k = if k == n - 1 { 0 } else { ru };
        gen.d[k] = rand_mat(nk, nk, rng);
        for i in 0..nk {
            gen.d[k][(i, i)] += diag_shift;
        }
        gen.q[k] = rand_mat(rl_k, nk, rng);
        gen.a[k] = rand_mat(rl_k, rl_prev, rng) * 0.5;
        gen.p[k] = rand_mat(nk, rl_prev, rng);
        gen.g[k] = rand_mat(nk, ru_k, rng);
        gen.b[k] = rand_mat(ru_prev, ru_k, rng) * 0.5;
        gen.h[k] = rand_mat(ru_prev, nk, rng);
        rl_prev = rl_k;
        ru_prev = ru_k;
    }
    QsMatrix::from_parts(partition.clone(), gen).unwrap()
}

/// Random partition with blocks of size 1..=max_block totalling exactly `total`.
pub fn random_partition(total: usize, max_block: usize, rng: &mut ChaCha8Rng) -> BlockPartition {
    let mut sizes = Vec::new();
    let mut left = total;
    while left > 0 {
        let s = rng.random_range(1..=max_block.min(left));
        sizes.push(s);
        left -= s;
    }
    BlockPartition::new(sizes).unwrap()
}

/// Dense block LU without pivoting: returns (L, U) with unit block diagonal
/// in L, or None when a pivot block is singular.
pub fn dense_block_lu(
    a: &DMatrix<f64>,
    partition: &BlockPartition,
) -> Option<(DMatrix<f64>, DMatrix<f64>)> {
    let n_total = a.nrows();
    let n = partition.num_blocks();
    let mut u = a.clone();
    let mut l = DMatrix::<f64>::identity(n_total, n_total);
    for k in 0..n {
        let (off, sz) = (partition.offset(k), partition.size(k));
        let pivot = u.view((off, off), (sz, sz)).into_owned();
        let pinv = pivot.try_inverse()?;
        for i in (k + 1)..n {
            let (oi, si) = (partition.offset(i), partition.size(i));
            let lik = u.view((oi, off), (si, sz)) * &pinv;
            l.view_mut((oi, off), (si, sz)).copy_from(&lik);
            let cols = n_total - off;
            let update = &lik * u.view((off, off), (sz, cols)).into_owned();
            let mut target = u.view_mut((oi, off), (si, cols));
            target -= update;
        }
    }
    // Clear the eliminated sub-block-diagonal noise.
    for k in 0..n {
        let off_end = partition.offset(k) + partition.size(k);
        for r in off_end..n_total {
            for c in partition.offset(k)..off_end {
                u[(r, c)] = 0.0;
            }
        }
    }
    Some((l, u))
}

/// Dense Kronecker product.
pub fn kron(a: &DMatrix<f64>, b: &DMatrix<f64>) -> DMatrix<f64> {
    let (ar, ac) = a.shape();
    let (br, bc) = b.shape();
    DMatrix::from_fn(ar * br, ac * bc, |i, j| a[(i / br, j / bc)] * b[(i % br, j % bc)])
}

/// Scalar tridiagonal matrix with constant bands.
pub fn tridiag(n: usize, lo: f64, di: f64, up: f64) -> DMatrix<f64> {
    DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            di
        } else if i == j + 1 {
            lo
        } else if j == i + 1 {
            up
        } else {
            0.0
        }
    })
}

/// Dense 2D Q1 Laplacian stencil on an n x n interior grid in the sign
/// convention used throughout the solvers (diagonal -8/3, all eight
/// neighbours 1/3), column-major node ordering (index = ix * n + iy).
pub fn laplacian_q1_dense(n: usize) -> DMatrix<f64> {
    let dim = n * n;
    DMatrix::from_fn(dim, dim, |r, c| {
        let (ix, iy) = (r / n, r % n);
        let (jx, jy) = (c / n, c % n);
        let (dx, dy) = (ix.abs_diff(jx), iy.abs_diff(jy));
        if dx == 0 && dy == 0 {
            -8.0 / 3.0
        } else if dx <= 1 && dy <= 1 {
            1.0 / 3.0
        } else {
            0.0
        }
    })
}

/// Dense 2D Q1 mass matrix without the h^2 area factor: `T (x) T` with
/// `T = (1/6) tridiag(1, 4, 1)`.
pub fn mass_q1_dense(n: usize) -> DMatrix<f64> {
    let t = tridiag(n, 1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0);
    kron(&t, &t)
}

/// First-principles Q1 element assembly of the interior stiffness matrix on
/// the unit square with `n` interior nodes per side (positive-definite
/// convention). Element loops over all (n+1)^2 cells; boundary rows/columns
/// dropped.
pub fn assemble_q1_stiffness_elementwise(n: usize) -> DMatrix<f64> {
    // Local stiffness of the bilinear element on a square, h-independent.
    // Node order: (0,0), (1,0), (1,1), (0,1).
    let ke = [
        [4.0, -1.0, -2.0, -1.0],
        [-1.0, 4.0, -1.0, -2.0],
        [-2.0, -1.0, 4.0, -1.0],
        [-1.0, -2.0, -1.0, 4.0],
    ];
    let cells = n + 1;
    let mut k_full = DMatrix::<f64>::zeros((n + 2) * (n + 2), (n + 2) * (n + 2));
    let idx = |ix: usize, iy: usize| ix * (n + 2) + iy;
    for cx in 0..cells {
        for cy in 0..cells {
            let nodes = [
                idx(cx, cy),
                idx(cx + 1, cy),
                idx(cx + 1, cy + 1),
                idx(cx, cy + 1),
            ];
            for (a, &na) in nodes.iter().enumerate() {
                for (b, &nb) in nodes.iter().enumerate() {
                    k_full[(na, nb)] += ke[a][b] / 6.0;
                }
            }
        }
    }
    // Keep interior nodes only (grid coordinates 1..=n in both directions).
    let mut k = DMatrix::<f64>::zeros(n * n, n * n);
    for ix in 1..=n {
        for iy in 1..=n {
            for jx in 1..=n {
                for jy in 1..=n {
                    k[((ix - 1) * n + iy - 1, (jx - 1) * n + jy - 1)] =
                        k_full[(idx(ix, iy), idx(jx, jy))];
                }
            }
        }
    }
    k
}

/// First-principles Q1 element assembly of the interior mass matrix,
/// including the h^2 area factor.
pub fn assemble_q1_mass_elementwise(n: usize) -> DMatrix<f64> {
    let me = [
        [4.0, 2.0, 1.0, 2.0],
        [2.0, 4.0, 2.0, 1.0],
        [1.0, 2.0, 4.0, 2.0],
        [2.0, 1.0, 2.0, 4.0],
    ];
    let h = 1.0 / (n as f64 + 1.0);
    let scale = h * h / 36.0;
    let cells = n + 1;
    let mut m_full = DMatrix::<f64>::zeros((n + 2) * (n + 2), (n + 2) * (n + 2));
    let idx = |ix: usize, iy: usize| ix * (n + 2) + iy;
    for cx in 0..cells {
        for cy in 0..cells {
            let nodes = [
                idx(cx, cy),
                idx(cx + 1, cy),
                idx(cx + 1, cy + 1),
                idx(cx, cy + 1),
            ];
            for (a, &na) in nodes.iter().enumerate() {
                for (b, &nb) in nodes.iter().enumerate() {
                    m_full[(na, nb)] += me[a][b] * scale;
                }
            }
        }
    }
    let mut m = DMatrix::<f64>::zeros(n * n, n * n);
    for ix in 1..=n {
        for iy in 1..=n {
            for jx in 1..=n {
                for jy in 1..=n {
                    m[((ix - 1) * n + iy - 1, (jx - 1) * n + jy - 1)] =
                        m_full[(idx(ix, iy), idx(jx, jy))];
                }
            }
        }
    }
    m
}

/// Dense assembly of the full 3x3 block optimality system
/// `[[2 beta M, 0, -M], [0, M, K^T], [-M, K, 0]]` in the same conventions as
/// the structured pipeline (printed stiffness sign, no area factor in M).
pub fn dense_saddle_matrix(n: usize, beta: f64) -> DMatrix<f64> {
    let dim = n * n;
    let k = laplacian_q1_dense(n);
    let m = mass_q1_dense(n);
    let mut s = DMatrix::<f64>::zeros(3 * dim, 3 * dim);
    s.view_mut((0, 0), (dim, dim)).copy_from(&(&m * (2.0 * beta)));
    s.view_mut((0, 2 * dim), (dim, dim)).copy_from(&(-&m));
    s.view_mut((dim, dim), (dim, dim)).copy_from(&m);
    s.view_mut((dim, 2 * dim), (dim, dim)).copy_from(&k.transpose());
    s.view_mut((2 * dim, 0), (dim, dim)).copy_from(&(-&m));
    s.view_mut((2 * dim, dim), (dim, dim)).copy_from(&k);
    s
}

/// Solve the dense optimality system for (control, state, multiplier).
pub fn dense_saddle_solve(
    n: usize,
    beta: f64,
    b: &nalgebra::DVector<f64>,
    d: &nalgebra::DVector<f64>,
) -> (nalgebra::DVector<f64>, nalgebra::DVector<f64>, nalgebra::DVector<f64>) {
    let dim = n * n;
    let sys = dense_saddle_matrix(n, beta);
    let mut rhs = nalgebra::DVector::zeros(3 * dim);
    rhs.rows_mut(dim, dim).copy_from(b);
    rhs.rows_mut(2 * dim, dim).copy_from(d);
    let sol = sys.lu().solve(&rhs).expect("saddle system solvable");
    (
        sol.rows(0, dim).into_owned(),
        sol.rows(dim, dim).into_owned(),
        sol.rows(2 * dim, dim).into_owned(),
    )
}
