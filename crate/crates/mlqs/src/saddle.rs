//! Saddle-point solver pipeline for the distributed control problem and a
//! structured direct/preconditioned solver for the harmonic problem.
//!
//! The discrete optimality system couples the control `f`, the state `u` and
//! the multipliers `lambda` through the symmetric 3x3 block system
//!
//! ```text
//! [ 2 beta M   0    -M  ] [ f ]   [ 0 ]
//! [   0        M    K^T ] [ u ] = [ b ]
//! [  -M        K     0  ] [ l ]   [ d ]
//! ```
//!
//! Eliminating `f = lambda / (2 beta)` and `u = M^{-1} (b - K^T lambda)`
//! reduces it to the positive definite normal equation
//! `S lambda = K M^{-1} b - d` with `S = (1/(2 beta)) M + K M^{-1} K^T`,
//! which is assembled in two-level quasiseparable arithmetic and solved by
//! conjugate gradients preconditioned with a truncated-order factorization
//! of `S`.

use std::time::{Duration, Instant};

use nalgebra::DVector;

use crate::compress::{compress, CompressionPolicy};
use crate::error::{Error, Result};
use crate::fem::{self, ControlProblemData, GridSpec};
use crate::level2::{L2LuFactors, L2QsMatrix, LduConfig};

/// Iteration record of one preconditioned conjugate gradient run.
#[derive(Debug, Clone)]
pub struct PcgReport {
    pub iterations: usize,
    /// Relative 2-norm residual after each iteration.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub wall_time: Duration,
    /// Filled by the drivers that build a preconditioner.
    pub precond_build_time: Duration,
}

/// Preconditioned conjugate gradients with operator access through the two
/// apply callbacks only. The true residual is recomputed every ten
/// iterations to guard against recursion drift.
pub fn pcg<A, M>(
    apply_a: A,
    apply_m_inv: M,
    rhs: &DVector<f64>,
    tol: f64,
    maxit: usize,
) -> Result<(DVector<f64>, PcgReport)>
where
    A: Fn(&DVector<f64>) -> Result<DVector<f64>>,
    M: Fn(&DVector<f64>) -> Result<DVector<f64>>,
{
    if tol <= 0.0 {
        return Err(Error::InvalidConfig(format!("pcg tolerance must be positive, got {tol}")));
    }
    let start = Instant::now();
    let rhs_norm = rhs.norm();
    let mut report = PcgReport {
        iterations: 0,
        residual_history: Vec::new(),
        converged: false,
        wall_time: Duration::ZERO,
        precond_build_time: Duration::ZERO,
    };
    let mut x = DVector::zeros(rhs.len());
    if rhs_norm == 0.0 {
        report.converged = true;
        report.wall_time = start.elapsed();
        return Ok((x, report));
    }

    let mut r = rhs.clone();
    let mut z = apply_m_inv(&r)?;
    let mut p = z.clone();
    let mut rz = r.dot(&z);
    for it in 1..=maxit {
        let ap = apply_a(&p)?;
        let pap = p.dot(&ap);
        if pap <= 0.0 {
            return Err(Error::IndefiniteOperator { iteration: it, curvature: pap });
        }
        let alpha = rz / pap;
        x.axpy(alpha, &p, 1.0);
        r.axpy(-alpha, &ap, 1.0);
        if it % 10 == 0 {
            r = rhs - apply_a(&x)?;
        }
        let rel = r.norm() / rhs_norm;
        report.iterations = it;
        report.residual_history.push(rel);
        if rel <= tol {
            report.converged = true;
            break;
        }
        z = apply_m_inv(&r)?;
        let rz_new = r.dot(&z);
        let beta = rz_new / rz;
        rz = rz_new;
        p = &z + &p * beta;
    }
    report.wall_time = start.elapsed();
    Ok((x, report))
}

/// The reduced positive definite system for the multipliers.
#[derive(Debug, Clone)]
pub struct NormalEquation {
    /// `S = (1/(2 beta)) M + K M^{-1} K^T` in two-level form.
    pub s: L2QsMatrix,
    /// Reduced right-hand side `K M^{-1} b - d`.
    pub y: DVector<f64>,
    pub beta: f64,
}

/// Compression policy used while assembling the normal equation; tight
/// enough that the operator itself is accurate to far below the solver
/// tolerances, while keeping inner orders at their numerical ranks.
fn assembly_policy() -> CompressionPolicy {
    CompressionPolicy::relative_tolerance(1e-12)
}

/// Assemble the normal equation in structured arithmetic. The mass inverse
/// uses the Kronecker identity: invert the 1D stencil (order one) and take
/// the tensor square.
pub fn build_normal_equation(data: &ControlProblemData) -> Result<NormalEquation> {
    let policy = assembly_policy();
    let t = fem::mass_1d(&data.grid);
    let tinv_raw = crate::arith::inverse(&t)?;
    let (tinv, _) = compress(&tinv_raw, &CompressionPolicy::exact());
    let m_inv = L2QsMatrix::tensor(&tinv, &tinv, policy);

    let k = data.stiffness.clone().with_policy(policy);
    let k_minv = k.mul(&m_inv)?;
    let k_minv_kt = k_minv.mul(&k.transpose())?;
    let s = data.mass.clone().with_policy(policy).scale(1.0 / (2.0 * data.beta)).add(&k_minv_kt)?;

    let y = k_minv.matvec(&data.b)? - &data.d;
    Ok(NormalEquation { s, y, beta: data.beta })
}

/// Truncated-order factorization of the normal equation operator, used as
/// the PCG preconditioner through [`L2LuFactors::solve`].
pub fn ldu_precondition(s: &L2QsMatrix, policy: CompressionPolicy) -> Result<L2LuFactors> {
    s.lu(&LduConfig::new(policy))
}

/// Recover the control and state from the multipliers; returns the relative
/// residual of the constraint block row as a consistency diagnostic.
pub fn recover_controls(
    lambda: &DVector<f64>,
    data: &ControlProblemData,
) -> Result<(DVector<f64>, DVector<f64>, f64)> {
    let policy = assembly_policy();
    let t = fem::mass_1d(&data.grid);
    let (tinv, _) = compress(&crate::arith::inverse(&t)?, &CompressionPolicy::exact());
    let m_inv = L2QsMatrix::tensor(&tinv, &tinv, policy);

    let f = lambda / (2.0 * data.beta);
    let u = m_inv.matvec(&(&data.b - data.stiffness.transpose().matvec(lambda)?))?;

    // Constraint row: -M f + K u = d.
    let res = data.stiffness.matvec(&u)? - data.mass.matvec(&f)? - &data.d;
    let denom = data.d.norm().max(data.b.norm());
    Ok((f, u, res.norm() / denom.max(1e-300)))
}

/// Report of one structured direct solve.
#[derive(Debug, Clone)]
pub struct DirectSolveReport {
    pub factor_time: Duration,
    pub solve_time: Duration,
    /// Relative residual of the original (unflipped) system.
    pub rel_residual: f64,
    /// Generator storage of both factors.
    pub memory_bytes: usize,
    pub max_inner_order: usize,
}

/// Direct solve of the harmonic problem: factor the (sign-flipped, positive
/// definite) stiffness matrix at a capped order and substitute.
pub fn solve_laplace_direct(grid: &GridSpec, r: usize) -> Result<(DVector<f64>, DirectSolveReport)> {
    let k = fem::assemble_stiffness(grid);
    let d = fem::dirichlet_data_laplace(grid);
    // The printed stencil is negative definite; factor its negation.
    let k_pos = k.scale(-1.0);
    let rhs = -&d;

    let t0 = Instant::now();
    let factors = k_pos.lu(&LduConfig::new(CompressionPolicy::fixed_max_order(r)))?;
    let factor_time = t0.elapsed();

    let t1 = Instant::now();
    let u = factors.solve(&rhs)?;
    let solve_time = t1.elapsed();

    let res = k.matvec(&u)? - &d;
    let report = DirectSolveReport {
        factor_time,
        solve_time,
        rel_residual: res.norm() / d.norm(),
        memory_bytes: factors.l.memory_estimate()
            + factors.u.memory_estimate()
            + factors
                .pivots
                .iter()
                .map(|p| p.l.memory_estimate() + p.u.memory_estimate())
                .sum::<usize>(),
        max_inner_order: factors
            .diagnostics
            .per_step
            .iter()
            .map(|s| s.max_inner_order)
            .max()
            .unwrap_or(0),
    };
    Ok((u, report))
}

/// PCG solve of the harmonic problem with a truncated-order factorization as
/// preconditioner.
pub fn solve_laplace_pcg(
    grid: &GridSpec,
    r: usize,
    tol: f64,
    maxit: usize,
) -> Result<(DVector<f64>, PcgReport)> {
    let k = fem::assemble_stiffness(grid);
    let d = fem::dirichlet_data_laplace(grid);
    let k_pos = k.scale(-1.0);
    let rhs = -&d;

    let t0 = Instant::now();
    let precond = k_pos.lu(&LduConfig::new(CompressionPolicy::fixed_max_order(r)))?;
    let precond_time = t0.elapsed();

    let (u, mut report) = pcg(|v| k_pos.matvec(v), |v| precond.solve(v), &rhs, tol, maxit)?;
    report.precond_build_time = precond_time;
    Ok((u, report))
}

/// Everything produced by one control-problem pipeline run.
#[derive(Debug, Clone)]
pub struct ControlSolveOutcome {
    pub lambda: DVector<f64>,
    pub control: DVector<f64>,
    pub state: DVector<f64>,
    pub pcg: PcgReport,
    pub normal_eq_time: Duration,
    /// Relative residual of the full 3x3 block optimality system.
    pub kkt_residual: f64,
    /// Constraint-row consistency diagnostic from the recovery step.
    pub recovery_residual: f64,
    /// Order cap of the preconditioner that actually converged (equals the
    /// requested cap unless an over-truncated factorization forced a retry).
    pub order_used: usize,
}

/// Full pipeline: assemble the problem data, build the normal equation,
/// factor it at order cap `r` as a preconditioner, run PCG and recover the
/// control and state.
pub fn solve_control(
    grid: &GridSpec,
    beta: f64,
    r: usize,
    tol: f64,
    maxit: usize,
) -> Result<ControlSolveOutcome> {
    let data = fem::control_problem_data(grid, beta)?;
    solve_control_with_data(&data, r, tol, maxit)
}

/// As [`solve_control`], reusing already assembled problem data.
///
/// An over-truncated factorization can come out indefinite (a singular
/// pivot, a breakdown inside PCG, or a stalled iteration); in that case the
/// driver retries with the order cap doubled, up to three escalations.
pub fn solve_control_with_data(
    data: &ControlProblemData,
    r: usize,
    tol: f64,
    maxit: usize,
) -> Result<ControlSolveOutcome> {
    let t0 = Instant::now();
    let ne = build_normal_equation(data)?;
    let normal_eq_time = t0.elapsed();

    let mut order = r.max(1);
    let mut last_err = None;
    for _attempt in 0..4 {
        let t1 = Instant::now();
        let precond = match ldu_precondition(&ne.s, CompressionPolicy::fixed_max_order(order)) {
            Ok(p) => p,
            Err(e @ (Error::SingularPivot { .. } | Error::IndefiniteOperator { .. })) => {
                last_err = Some(e);
                order *= 2;
                continue;
            }
            Err(other) => return Err(other),
        };
        let precond_time = t1.elapsed();

        match pcg(|v| ne.s.matvec(v), |v| precond.solve(v), &ne.y, tol, maxit) {
            Ok((lambda, mut pcg_report)) if pcg_report.converged => {
                pcg_report.precond_build_time = precond_time;
                let (control, state, recovery_residual) = recover_controls(&lambda, data)?;
                let kkt_residual = kkt_residual(data, &control, &state, &lambda)?;
                return Ok(ControlSolveOutcome {
                    lambda,
                    control,
                    state,
                    pcg: pcg_report,
                    normal_eq_time,
                    kkt_residual,
                    recovery_residual,
                    order_used: order,
                });
            }
            Ok((_, report)) => {
                last_err = Some(Error::InvalidConfig(format!(
                    "PCG stalled at order cap {order} after {} iterations",
                    report.iterations
                )));
                order *= 2;
            }
            Err(e @ (Error::SingularPivot { .. } | Error::IndefiniteOperator { .. })) => {
                last_err = Some(e);
                order *= 2;
            }
            Err(other) => return Err(other),
        }
    }
    Err(last_err.unwrap_or_else(|| Error::InvalidConfig("control solve failed".into())))
}

/// Relative residual of the full block optimality system for a candidate
/// triple, evaluated in structured arithmetic.
pub fn kkt_residual(
    data: &ControlProblemData,
    control: &DVector<f64>,
    state: &DVector<f64>,
    lambda: &DVector<f64>,
) -> Result<f64> {
    let m_f = data.mass.matvec(control)?;
    let m_u = data.mass.matvec(state)?;
    let m_l = data.mass.matvec(lambda)?;
    let k_u = data.stiffness.matvec(state)?;
    let kt_l = data.stiffness.transpose().matvec(lambda)?;

    let r1 = &m_f * (2.0 * data.beta) - &m_l;
    let r2 = &m_u + &kt_l - &data.b;
    let r3 = &k_u - &m_f - &data.d;
    let num = (r1.norm_squared() + r2.norm_squared() + r3.norm_squared()).sqrt();
    let denom = (data.b.norm_squared() + data.d.norm_squared()).sqrt();
    Ok(num / denom.max(1e-300))
}
