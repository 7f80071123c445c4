//! End-to-end checks of the control pipeline and the harmonic solvers
//! against dense and exact-arithmetic oracles.

mod common;

use common::*;
use mlqs::compress::CompressionPolicy;
use mlqs::fem::{self, GridSpec};
use mlqs::saddle::{self, build_normal_equation, ldu_precondition, pcg, recover_controls};
use nalgebra::DVector;
use num::BigRational;
use num::FromPrimitive;

#[test]
fn normal_equation_matches_dense_oracle() {
    let n = 4;
    let grid = GridSpec::new(n).unwrap();
    let beta = 0.01;
    let data = fem::control_problem_data(&grid, beta).unwrap();
    let ne = build_normal_equation(&data).unwrap();

    let k = laplacian_q1_dense(n);
    let m = mass_q1_dense(n);
    let minv = m.clone().try_inverse().unwrap();
    let want = &m / (2.0 * beta) + &k * &minv * k.transpose();
    assert!(rel_err(&ne.s.reconstruct_dense(), &want) <= 1e-8);

    // Large beta: the mass term becomes negligible.
    let data_inf = fem::control_problem_data(&grid, 1e8).unwrap();
    let ne_inf = build_normal_equation(&data_inf).unwrap();
    let want_inf = &k * &minv * k.transpose();
    assert!(rel_err(&ne_inf.s.reconstruct_dense(), &want_inf) <= 1e-6);
}

#[test]
fn pipeline_agrees_with_dense_saddle_solve() {
    let n = 4;
    let grid = GridSpec::new(n).unwrap();
    let beta = 0.01;
    let data = fem::control_problem_data(&grid, beta).unwrap();
    let outcome = saddle::solve_control_with_data(&data, 4, 1e-12, 200).unwrap();
    assert!(outcome.pcg.converged);

    let (f_star, u_star, l_star) = dense_saddle_solve(n, beta, &data.b, &data.d);
    assert!((outcome.control - &f_star).norm() <= 1e-6 * f_star.norm().max(1.0));
    assert!((outcome.state - &u_star).norm() <= 1e-6 * u_star.norm().max(1.0));
    assert!((outcome.lambda - &l_star).norm() <= 1e-6 * l_star.norm().max(1.0));
    assert!(outcome.kkt_residual <= 1e-8, "kkt residual {}", outcome.kkt_residual);
}

#[test]
fn preconditioner_is_symmetric_under_exact_compression() {
    let n = 8;
    let grid = GridSpec::new(n).unwrap();
    let data = fem::control_problem_data(&grid, 0.01).unwrap();
    let ne = build_normal_equation(&data).unwrap();
    let precond = ldu_precondition(&ne.s, CompressionPolicy::relative_tolerance(1e-12)).unwrap();

    let dim = grid.unknowns();
    let probes = [(0usize, 17usize), (5, 40), (12, 63), (33, 34)];
    for (i, j) in probes {
        let mut ei = DVector::zeros(dim);
        ei[i] = 1.0;
        let mut ej = DVector::zeros(dim);
        ej[j] = 1.0;
        let mi = precond.solve(&ei).unwrap();
        let mj = precond.solve(&ej).unwrap();
        let scale = mi[j].abs().max(mj[i].abs()).max(1e-300);
        assert!(
            (mi[j] - mj[i]).abs() / scale <= 1e-8,
            "entry ({i},{j}): {} vs {}",
            mi[j],
            mj[i]
        );
    }
}

#[test]
fn exact_preconditioner_converges_in_one_iteration() {
    let n = 6;
    let grid = GridSpec::new(n).unwrap();
    let data = fem::control_problem_data(&grid, 0.01).unwrap();
    let ne = build_normal_equation(&data).unwrap();
    let precond = ldu_precondition(&ne.s, CompressionPolicy::relative_tolerance(1e-13)).unwrap();
    let (_, report) =
        pcg(|v| ne.s.matvec(v), |v| precond.solve(v), &ne.y, 1e-8, 50).unwrap();
    assert!(report.converged);
    assert_eq!(report.iterations, 1, "history {:?}", report.residual_history);
}

#[test]
fn beta_robustness_with_low_order_preconditioner() {
    let grid = GridSpec::new(16).unwrap();
    for beta in [1e-5, 1e-2, 1e2] {
        let outcome = saddle::solve_control(&grid, beta, 2, 1e-8, 60).unwrap();
        assert!(outcome.pcg.converged, "beta {beta} did not converge");
        assert!(outcome.pcg.iterations <= 25, "beta {beta}: {} its", outcome.pcg.iterations);
    }
}

#[test]
fn laplace_direct_residual_improves_with_order() {
    let grid = GridSpec::new(16).unwrap();
    let mut residuals = Vec::new();
    for r in [2, 4, 8] {
        let (_, report) = saddle::solve_laplace_direct(&grid, r).unwrap();
        residuals.push(report.rel_residual);
    }
    assert!(residuals[0] >= residuals[1] && residuals[1] >= residuals[2], "{residuals:?}");
    assert!(residuals[2] < 1e-6);
}

#[test]
fn laplace_direct_matches_dense_solve() {
    let n = 8;
    let grid = GridSpec::new(n).unwrap();
    let (u, report) = saddle::solve_laplace_direct(&grid, 8).unwrap();
    assert!(report.rel_residual < 1e-9);
    let k = laplacian_q1_dense(n);
    let d = fem::dirichlet_data_laplace(&grid);
    let want = k.lu().solve(&d).unwrap();
    assert!((u - &want).norm() <= 1e-8 * want.norm());
}

/// The harmonic problem has the separable solution
/// `(sinh(2 pi (1-x)) - sinh(2 pi x)) sin(2 pi y) / sinh(2 pi)`; the
/// discrete solutions converge to it as the mesh is refined.
#[test]
fn laplace_solution_converges_to_the_analytic_reference() {
    let analytic = |x: f64, y: f64| {
        let tp = 2.0 * std::f64::consts::PI;
        ((tp * (1.0 - x)).sinh() - (tp * x).sinh()) * (tp * y).sin() / tp.sinh()
    };
    let mut errs = Vec::new();
    for n in [8, 16, 32] {
        let grid = GridSpec::new(n).unwrap();
        let (u, _) = saddle::solve_laplace_direct(&grid, 12).unwrap();
        let h = grid.h();
        let mut exact = DVector::zeros(grid.unknowns());
        for ix in 0..n {
            for iy in 0..n {
                exact[ix * n + iy] = analytic((ix as f64 + 1.0) * h, (iy as f64 + 1.0) * h);
            }
        }
        errs.push((u - &exact).norm() / exact.norm());
    }
    assert!(errs[0] > errs[1] && errs[1] > errs[2], "monotone convergence: {errs:?}");
}

/// Unpreconditioned CG in f64 against the same recursion carried out in
/// exact rational arithmetic; the first iterates must agree to roundoff
/// levels.
#[test]
fn cg_matches_exact_arithmetic_shadow() {
    let n = 4;
    let k = laplacian_q1_dense(n).map(|v| -v); // positive definite side
    let dim = n * n;
    let mut rhs = DVector::zeros(dim);
    rhs[0] = 1.0;
    rhs[dim - 1] = 2.0;

    // Rational copies. All stencil entries are thirds, exactly representable.
    let to_rat = |v: f64| BigRational::from_f64(v).unwrap();
    let k_rat: Vec<Vec<BigRational>> =
        (0..dim).map(|i| (0..dim).map(|j| to_rat(k[(i, j)])).collect()).collect();
    let rhs_rat: Vec<BigRational> = (0..dim).map(|i| to_rat(rhs[i])).collect();

    let matvec_rat = |x: &[BigRational]| -> Vec<BigRational> {
        (0..dim)
            .map(|i| (0..dim).map(|j| &k_rat[i][j] * &x[j]).sum::<BigRational>())
            .collect()
    };
    let dot_rat = |a: &[BigRational], b: &[BigRational]| -> BigRational {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    };

    // Exact CG recursion.
    let zero = BigRational::from_integer(0.into());
    let mut x_rat = vec![zero.clone(); dim];
    let mut r_rat = rhs_rat.clone();
    let mut p_rat = r_rat.clone();
    let mut rr = dot_rat(&r_rat, &r_rat);
    let mut exact_iterates: Vec<Vec<f64>> = Vec::new();
    for _ in 0..5 {
        let ap = matvec_rat(&p_rat);
        let alpha = &rr / &dot_rat(&p_rat, &ap);
        for i in 0..dim {
            x_rat[i] = &x_rat[i] + &alpha * &p_rat[i];
            r_rat[i] = &r_rat[i] - &alpha * &ap[i];
        }
        let rr_new = dot_rat(&r_rat, &r_rat);
        let beta = &rr_new / &rr;
        rr = rr_new;
        for i in 0..dim {
            p_rat[i] = &r_rat[i] + &beta * &p_rat[i];
        }
        exact_iterates.push(
            x_rat
                .iter()
                .map(|v| {
                    use num::ToPrimitive;
                    v.to_f64().unwrap()
                })
                .collect(),
        );
    }

    // f64 CG through the library (identity preconditioner), one iterate at a
    // time by capping maxit.
    for (it, exact) in exact_iterates.iter().enumerate() {
        let (x, _) = pcg(
            |v: &DVector<f64>| Ok(&k * v),
            |v: &DVector<f64>| Ok(v.clone()),
            &rhs,
            1e-30,
            it + 1,
        )
        .unwrap();
        let exact_v = DVector::from_vec(exact.clone());
        assert!(
            (x - &exact_v).norm() <= 1e-10 * exact_v.norm().max(1.0),
            "iterate {it} deviates from the exact recursion"
        );
    }
}

#[test]
fn recovered_triple_satisfies_each_block_row() {
    let n = 8;
    let grid = GridSpec::new(n).unwrap();
    let beta = 1e-2;
    let data = fem::control_problem_data(&grid, beta).unwrap();
    let outcome = saddle::solve_control_with_data(&data, 3, 1e-10, 100).unwrap();
    assert!(outcome.pcg.converged);

    let m = mass_q1_dense(n);
    let k = laplacian_q1_dense(n);
    let r1 = &m * &outcome.control * (2.0 * beta) - &m * &outcome.lambda;
    let r2 = &m * &outcome.state + k.transpose() * &outcome.lambda - &data.b;
    let r3 = &k * &outcome.state - &m * &outcome.control - &data.d;
    let scale = data.b.norm() + data.d.norm();
    assert!(r1.norm() / scale < 1e-8);
    assert!(r2.norm() / scale < 1e-8);
    assert!(r3.norm() / scale < 1e-8);
    assert!(outcome.recovery_residual < 1e-8);
}

#[test]
fn recover_controls_reports_consistency() {
    let grid = GridSpec::new(4).unwrap();
    let data = fem::control_problem_data(&grid, 0.01).unwrap();
    let (_, _, l_star) = dense_saddle_solve(4, 0.01, &data.b, &data.d);
    let (_, _, res) = recover_controls(&l_star, &data).unwrap();
    assert!(res < 1e-9, "constraint row residual {res}");
}

/// The preconditioner is mesh independent: at fixed (order cap, beta, tol)
/// the iteration count varies by at most two across grid refinements.
#[test]
fn mesh_independent_iteration_counts() {
    let mut counts = Vec::new();
    for side in [16usize, 32, 64] {
        let grid = GridSpec::new(side).unwrap();
        let outcome = saddle::solve_control(&grid, 1e-2, 1, 1e-8, 60).unwrap();
        assert!(outcome.pcg.converged, "side {side}");
        assert_eq!(outcome.order_used, 1);
        counts.push(outcome.pcg.iterations);
    }
    let (min, max) = (counts.iter().min().unwrap(), counts.iter().max().unwrap());
    assert!(max - min <= 2, "iteration counts {counts:?} vary by more than 2");
}
