//! Q1 finite element model problems on the uniform unit-square grid:
//! stiffness and mass matrices in two-level form, Dirichlet boundary lifts
//! and cost-functional data for the distributed control problem.
//!
//! Unknowns are the interior nodes, ordered column by column: the node at
//! grid coordinates `(ix, iy)` (both in `0..n`, position `((ix+1) h, (iy+1) h)`)
//! has index `ix * n + iy`. One outer block per grid column.

use nalgebra::{DMatrix, DVector};

use crate::compress::CompressionPolicy;
use crate::construct::from_band;
use crate::error::{Error, Result};
use crate::level2::L2QsMatrix;
use crate::matrix::QsMatrix;
use crate::partition::BlockPartition;

/// Uniform grid with `n` interior points per side, mesh size `h = 1/(n+1)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GridSpec {
    n: usize,
}

impl GridSpec {
    pub fn new(n: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::InvalidConfig(format!("grid needs n >= 2 interior points, got {n}")));
        }
        Ok(Self { n })
    }

    /// Interior points per side.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        1.0 / (self.n as f64 + 1.0)
    }

    /// Total number of unknowns `n^2`.
    pub fn unknowns(&self) -> usize {
        self.n * self.n
    }

    /// Position of interior node `(ix, iy)`.
    pub fn node_pos(&self, ix: usize, iy: usize) -> (f64, f64) {
        ((ix as f64 + 1.0) * self.h(), (iy as f64 + 1.0) * self.h())
    }
}

/// Scalar tridiagonal matrix in generator form.
fn tridiag_qs(n: usize, lo: f64, di: f64, up: f64) -> QsMatrix {
    let dense = DMatrix::from_fn(n, n, |i, j| {
        if i == j {
            di
        } else if i == j + 1 {
            lo
        } else if j == i + 1 {
            up
        } else {
            0.0
        }
    });
    from_band(&dense, 1, 1, &BlockPartition::scalar(n)).expect("tridiagonal band")
}

/// 1D interior mass stencil `T = (1/6) tridiag(1, 4, 1)` (area factor of the
/// 2D product form left out, matching the solver's mass matrix convention).
pub fn mass_1d(grid: &GridSpec) -> QsMatrix {
    tridiag_qs(grid.n, 1.0 / 6.0, 4.0 / 6.0, 1.0 / 6.0)
}

/// Q1 stiffness matrix on the interior grid, block tridiagonal over grid
/// columns with diagonal blocks `(1/3) tridiag(1, -8, 1)` and coupling
/// blocks `(1/3) tridiag(1, 1, 1)`.
///
/// The sign convention keeps the diagonal negative (the matrix is the
/// negative of the element-assembled stiffness form); the solver pipelines
/// flip signs where positive definiteness is required, and the assembly
/// tests pin the relation to the element oracle.
pub fn assemble_stiffness(grid: &GridSpec) -> L2QsMatrix {
    let n = grid.n;
    let diag = tridiag_qs(n, 1.0 / 3.0, -8.0 / 3.0, 1.0 / 3.0);
    let coupling = tridiag_qs(n, 1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0);
    L2QsMatrix::block_tridiagonal(
        &vec![diag; n],
        &vec![coupling.clone(); n - 1],
        &vec![coupling; n - 1],
        CompressionPolicy::exact(),
    )
    .expect("uniform blocks")
}

/// Q1 mass matrix as the Kronecker square of the 1D stencil (no `h^2`
/// factor, matching [`mass_1d`]).
pub fn assemble_mass(grid: &GridSpec) -> L2QsMatrix {
    let t = mass_1d(grid);
    L2QsMatrix::tensor(&t, &t, CompressionPolicy::exact())
}

/// All eight stencil neighbours couple with `1/3` in the printed convention.
const NEIGHBOUR_COUPLING: f64 = 1.0 / 3.0;

/// Boundary lift for the harmonic problem with `sin(2 pi y)` data on the
/// `x = 0` edge, `-sin(2 pi y)` on `x = 1` and zero elsewhere: for every
/// interior node, minus the stencil coupling times the boundary value,
/// accumulated over its boundary neighbours.
pub fn dirichlet_data_laplace(grid: &GridSpec) -> DVector<f64> {
    let boundary = |x: f64, y: f64| -> f64 {
        if x == 0.0 {
            (2.0 * std::f64::consts::PI * y).sin()
        } else if x == 1.0 {
            -(2.0 * std::f64::consts::PI * y).sin()
        } else {
            0.0
        }
    };
    boundary_lift(grid, &boundary)
}

fn boundary_lift(grid: &GridSpec, boundary_value: &dyn Fn(f64, f64) -> f64) -> DVector<f64> {
    let n = grid.n;
    let h = grid.h();
    let last = (n + 1) as i64; // far boundary line of the full grid
    let mut d = DVector::zeros(grid.unknowns());
    for ix in 0..n {
        for iy in 0..n {
            // Full-grid coordinates of this interior node.
            let (fx, fy) = ((ix + 1) as i64, (iy + 1) as i64);
            let mut acc = 0.0;
            for dx in -1i64..=1 {
                for dy in -1i64..=1 {
                    if dx == 0 && dy == 0 {
                        continue;
                    }
                    let nx = fx + dx;
                    let ny = fy + dy;
                    if nx == 0 || ny == 0 || nx == last || ny == last {
                        acc += boundary_value(nx as f64 * h, ny as f64 * h);
                    }
                }
            }
            d[ix * n + iy] = -NEIGHBOUR_COUPLING * acc;
        }
    }
    d
}

/// Desired state of the distributed control problem:
/// `(2x-1)^2 (2y-1)^2` on `[0, 1/2]^2`, zero elsewhere.
pub fn desired_state(x: f64, y: f64) -> f64 {
    if x <= 0.5 && y <= 0.5 {
        let (a, b) = (2.0 * x - 1.0, 2.0 * y - 1.0);
        a * a * b * b
    } else {
        0.0
    }
}

/// Assembled data of the distributed control problem.
#[derive(Debug, Clone)]
pub struct ControlProblemData {
    pub grid: GridSpec,
    /// Stiffness matrix (printed sign convention).
    pub stiffness: L2QsMatrix,
    /// Mass matrix `T (x) T`.
    pub mass: L2QsMatrix,
    /// Load vector of the desired state: `b_j = integral(phi_j * u_hat)`.
    pub b: DVector<f64>,
    /// Half the squared norm of the desired state.
    pub c: f64,
    /// Boundary lift of the desired state's trace.
    pub d: DVector<f64>,
    /// Regularization weight.
    pub beta: f64,
}

/// Assemble all control-problem data; `b` and `c` use 2x2 Gauss quadrature
/// per element, and the boundary lift evaluates the desired state literally
/// on the boundary.
pub fn control_problem_data(grid: &GridSpec, beta: f64) -> Result<ControlProblemData> {
    if beta <= 0.0 {
        return Err(Error::InvalidConfig(format!("beta must be positive, got {beta}")));
    }
    let n = grid.n;
    let h = grid.h();
    let cells = n + 1;
    let gauss = {
        let off = 0.5 / 3.0f64.sqrt();
        [0.5 - off, 0.5 + off]
    };
    let weight = h * h / 4.0;

    let mut b = DVector::zeros(grid.unknowns());
    let mut u_hat_sq = 0.0;
    for cx in 0..cells {
        for cy in 0..cells {
            for &gx in &gauss {
                for &gy in &gauss {
                    let x = (cx as f64 + gx) * h;
                    let y = (cy as f64 + gy) * h;
                    let val = desired_state(x, y);
                    u_hat_sq += weight * val * val;
                    if val == 0.0 {
                        continue;
                    }
                    // Bilinear shape functions of the four cell corners.
                    let corners = [
                        (cx, cy, (1.0 - gx) * (1.0 - gy)),
                        (cx + 1, cy, gx * (1.0 - gy)),
                        (cx + 1, cy + 1, gx * gy),
                        (cx, cy + 1, (1.0 - gx) * gy),
                    ];
                    for (nx, ny, shape) in corners {
                        // Interior nodes live at full-grid coords 1..=n.
                        if (1..=n).contains(&nx) && (1..=n).contains(&ny) {
                            b[(nx - 1) * n + (ny - 1)] += weight * shape * val;
                        }
                    }
                }
            }
        }
    }

    let d = boundary_lift(grid, &desired_state);
    Ok(ControlProblemData {
        grid: *grid,
        stiffness: assemble_stiffness(grid),
        mass: assemble_mass(grid),
        b,
        c: 0.5 * u_hat_sq,
        d,
        beta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stiffness_blocks_match_the_printed_stencil() {
        let grid = GridSpec::new(3).unwrap();
        let k = assemble_stiffness(&grid);
        let diag = k.generators().d[0].get(0, 0).reconstruct_dense();
        let want_a =
            DMatrix::from_row_slice(3, 3, &[-8.0, 1.0, 0.0, 1.0, -8.0, 1.0, 0.0, 1.0, -8.0]) / 3.0;
        assert!((diag - want_a).norm() < 1e-15);
        let coupling = k.generators().g[0].get(0, 0).reconstruct_dense();
        let want_b =
            DMatrix::from_row_slice(3, 3, &[1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0]) / 3.0;
        assert!((coupling - want_b).norm() < 1e-15);
    }

    #[test]
    fn interior_row_sums_vanish() {
        // Away from the boundary the stencil sums to (-8 + 8)/3 = 0.
        let grid = GridSpec::new(5).unwrap();
        let k = assemble_stiffness(&grid);
        let dense = k.reconstruct_dense();
        let mid = 2 * 5 + 2;
        let row_sum: f64 = dense.row(mid).iter().sum();
        assert!(row_sum.abs() < 1e-14);
    }

    #[test]
    fn mass_row_sums_are_one_in_the_interior() {
        let grid = GridSpec::new(4).unwrap();
        let m = assemble_mass(&grid);
        let dense = m.reconstruct_dense();
        let mid = 4 + 2;
        let row_sum: f64 = dense.row(mid).iter().sum();
        assert!((row_sum - 1.0).abs() < 1e-14);
        // (1,1) entry of the 2-point-per-side mass matrix is (4/6)^2.
        let g2 = GridSpec::new(2).unwrap();
        let m2 = assemble_mass(&g2).reconstruct_dense();
        assert!((m2[(0, 0)] - 16.0 / 36.0).abs() < 1e-15);
    }

    #[test]
    fn desired_state_values() {
        assert!((desired_state(0.0, 0.0) - 1.0).abs() < 1e-15);
        assert_eq!(desired_state(0.5, 0.5), 0.0);
        assert_eq!(desired_state(0.75, 0.75), 0.0);
    }

    #[test]
    fn laplace_lift_tracks_the_sine_data() {
        let grid = GridSpec::new(7).unwrap();
        let d = dirichlet_data_laplace(&grid);
        let n = grid.n();
        // Node adjacent to x = 0 at height y_j: contribution proportional to
        // the sine of the nearby boundary heights.
        let j = 3;
        let h = grid.h();
        let expect = -(1.0 / 3.0)
            * ((2.0 * std::f64::consts::PI * (j as f64) * h).sin()
                + (2.0 * std::f64::consts::PI * (j as f64 + 1.0) * h).sin()
                + (2.0 * std::f64::consts::PI * (j as f64 + 2.0) * h).sin());
        assert!((d[j] - expect).abs() < 1e-14);
        // Nodes without boundary neighbours carry nothing.
        assert_eq!(d[n + 3], 0.0);
        // Mirror antisymmetry across x = 1/2.
        for iy in 0..n {
            let left = d[iy];
            let right = d[(n - 1) * n + iy];
            assert!((left + right).abs() < 1e-14);
        }
    }

    #[test]
    fn control_data_quadrature_converges_to_the_exact_integral() {
        // The squared norm of the desired state integrates to 1/100, so c
        // tends to 1/200.
        let mut errs = Vec::new();
        for n in [6, 12, 24] {
            let grid = GridSpec::new(n).unwrap();
            let data = control_problem_data(&grid, 0.01).unwrap();
            errs.push((data.c - 1.0 / 200.0).abs());
        }
        assert!(errs[0] > errs[1] && errs[1] > errs[2], "quadrature converges: {errs:?}");
        assert!(errs[2] < 1e-4);
    }

    #[test]
    fn load_vector_vanishes_away_from_the_support() {
        let grid = GridSpec::new(8).unwrap();
        let data = control_problem_data(&grid, 0.1).unwrap();
        let n = grid.n();
        for ix in 0..n {
            for iy in 0..n {
                let (x, y) = grid.node_pos(ix, iy);
                // Basis functions supported strictly beyond the support of
                // the desired state integrate to zero.
                if x > 0.5 + grid.h() || y > 0.5 + grid.h() {
                    assert_eq!(data.b[ix * n + iy], 0.0, "node ({ix},{iy})");
                }
            }
        }
        assert!(data.b.iter().any(|&v| v != 0.0));
    }
}
