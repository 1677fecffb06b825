//! Constrained control-increment step: minimize the linearized tracking
//! cost plus the weighted increment norm subject to box, rate and output
//! bounds.
//!
//! The dense QP `min 0.5 x'Ex + f'x  s.t.  Mx <= g` is solved from the
//! closed-form unconstrained optimum; when constraints are violated the
//! dual is raised by coordinate ascent (Gauss-Seidel sweeps) over the
//! violated rows only, adding rows until the primal is feasible. Output
//! bounds that make the hard problem infeasible (or leave its dual
//! ill-conditioned) are moved into the objective as a large quadratic
//! penalty on the violated rows, keeping the box and rate rows hard.

use super::{MpcError, MpcProblem, TrajectoryLinearization};
use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

const FEAS_TOL: f64 = 1e-8;
const DUAL_TOL: f64 = 1e-13;
const MAX_SWEEPS: usize = 2_000;
const SCREEN_ROUNDS: usize = 12;
const SOFT_PENALTY: f64 = 1e6;
const HESSIAN_REG: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct QpOutcome {
    pub x: DVector<f64>,
    pub feasible: bool,
    pub max_violation: f64,
}

fn cholesky_with_fallback(e: &DMatrix<f64>) -> Result<Cholesky<f64, Dyn>, MpcError> {
    if let Some(chol) = Cholesky::new(e.clone()) {
        return Ok(chol);
    }
    log::warn!("singular Hessian; regularizing with {HESSIAN_REG:e} * I");
    let n = e.nrows();
    let regularized = e + DMatrix::identity(n, n) * HESSIAN_REG;
    Cholesky::new(regularized)
        .ok_or_else(|| MpcError::QpFailed("Hessian not positive definite after regularization".into()))
}

/// `min 0.5 x'Ex + f'x  s.t.  Mx <= g` for strictly convex `E`.
pub fn solve_inequality_qp(
    e: &DMatrix<f64>,
    f: &DVector<f64>,
    m: &DMatrix<f64>,
    g: &DVector<f64>,
) -> Result<QpOutcome, MpcError> {
    let chol = cholesky_with_fallback(e)?;
    let x_unc = -chol.solve(f);
    let rows = m.nrows();
    if rows == 0 {
        return Ok(QpOutcome { x: x_unc, feasible: true, max_violation: 0.0 });
    }

    // A zero row with a negative bound can never be satisfied.
    for i in 0..rows {
        let row_norm = m.row(i).iter().map(|v| v.abs()).fold(0.0_f64, f64::max);
        if row_norm < 1e-14 && g[i] < -FEAS_TOL {
            return Ok(QpOutcome { x: x_unc, feasible: false, max_violation: -g[i] });
        }
    }

    let mut x = x_unc.clone();
    let mut active: Vec<usize> = Vec::new();
    let mut lambda: Vec<f64> = Vec::new();
    for _round in 0..SCREEN_ROUNDS {
        let residual = m * &x - g;
        let worst = residual.iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
        let mut grew = false;
        for i in 0..rows {
            if residual[i] > FEAS_TOL && !active.contains(&i) {
                active.push(i);
                lambda.push(0.0);
                grew = true;
            }
        }
        if !grew {
            return Ok(QpOutcome { x, feasible: worst <= FEAS_TOL, max_violation: worst.max(0.0) });
        }

        let na = active.len();
        let m_sub = DMatrix::from_fn(na, m.ncols(), |r, c| m[(active[r], c)]);
        let g_sub = DVector::from_fn(na, |r, _| g[active[r]]);
        // d = E^-1 M_sub'
        let d = chol.solve(&m_sub.transpose());
        let h = &m_sub * &d;
        let k = &g_sub - &m_sub * &x_unc;

        let mut settled = false;
        for _sweep in 0..MAX_SWEEPS {
            let mut max_delta = 0.0_f64;
            let mut max_lambda = 0.0_f64;
            for i in 0..na {
                let hii = h[(i, i)];
                if hii <= 1e-14 {
                    continue;
                }
                let mut coupled = 0.0;
                for j in 0..na {
                    if j != i {
                        coupled += h[(i, j)] * lambda[j];
                    }
                }
                let updated = ((-k[i] - coupled) / hii).max(0.0);
                max_delta = max_delta.max((updated - lambda[i]).abs());
                lambda[i] = updated;
                max_lambda = max_lambda.max(updated);
            }
            if max_delta <= DUAL_TOL * (1.0 + max_lambda) {
                settled = true;
                break;
            }
            // A runaway dual is the textbook infeasibility signature.
            if max_lambda > 1e12 {
                break;
            }
        }
        x = &x_unc - &d * DVector::from_vec(lambda.clone());
        if !settled {
            let residual = m * &x - g;
            let worst = residual.iter().fold(0.0_f64, |a, &v| a.max(v));
            return Ok(QpOutcome { x, feasible: worst <= FEAS_TOL, max_violation: worst });
        }
    }

    let residual = m * &x - g;
    let worst = residual.iter().fold(0.0_f64, |a, &v| a.max(v));
    Ok(QpOutcome { x, feasible: worst <= FEAS_TOL, max_violation: worst })
}

/// Arrays defining the increment QP for one linearization.
struct IncrementProgram {
    /// `a = H J`: effect of each increment on each predicted output.
    a: DMatrix<f64>,
    /// Predicted outputs when the control stays at `u_prev`.
    y_free: DVector<f64>,
    /// Tracking residual `y_sp - y_free`.
    residual: DVector<f64>,
}

fn build_program(
    lin: &TrajectoryLinearization,
    y_sp: &[f64],
    problem: &MpcProblem,
    u_prev: f64,
) -> IncrementProgram {
    let n = problem.prediction_horizon;
    let nu = problem.control_horizon;
    // (H J)[p][q] = sum of sensitivities from column q on (the increment at
    // q shifts every later control in the sequence).
    let a = DMatrix::from_fn(n, nu, |p, q| lin.sensitivity[p][q..nu].iter().sum::<f64>());
    let y_free = DVector::from_fn(n, |p, _| {
        lin.y_pred[p]
            + lin.sensitivity[p]
                .iter()
                .zip(&lin.u_traj)
                .map(|(h, u)| h * (u_prev - u))
                .sum::<f64>()
    });
    let residual = DVector::from_fn(n, |p, _| y_sp[p] - y_free[p]);
    IncrementProgram { a, y_free, residual }
}

/// Tracking-plus-increment objective for a candidate increment vector,
/// evaluated on the linearized prediction.
pub fn increment_objective(
    lin: &TrajectoryLinearization,
    y_sp: &[f64],
    problem: &MpcProblem,
    u_prev: f64,
    du: &[f64],
) -> f64 {
    let program = build_program(lin, y_sp, problem, u_prev);
    let du_vec = DVector::from_row_slice(du);
    let tracked = &program.residual - &program.a * &du_vec;
    tracked.norm_squared() + problem.lambda * du_vec.norm_squared()
}

/// Box and rate rows (always hard): `m x <= g`.
fn hard_rows(problem: &MpcProblem, u_prev: f64) -> (DMatrix<f64>, DVector<f64>) {
    let nu = problem.control_horizon;
    let mut m = DMatrix::zeros(4 * nu, nu);
    let mut g = DVector::zeros(4 * nu);
    let mut row = 0;
    for q in 0..nu {
        for j in 0..=q {
            m[(row, j)] = 1.0;
            m[(row + 1, j)] = -1.0;
        }
        g[row] = problem.u_max - u_prev;
        g[row + 1] = u_prev - problem.u_min;
        row += 2;
    }
    for q in 0..nu {
        m[(row, q)] = 1.0;
        g[row] = problem.du_max;
        m[(row + 1, q)] = -1.0;
        g[row + 1] = problem.du_max;
        row += 2;
    }
    (m, g)
}

/// Solve for the control increments over the control horizon.
///
/// Hard constraints: control box, increment box and output box on the
/// linearized prediction. If the output rows make the hard problem
/// unsolvable they are replaced by a quadratic penalty (weight 1e6) on the
/// violated rows, iterating the violated set to a fixed point.
pub fn solve_qp(
    lin: &TrajectoryLinearization,
    y_sp: &[f64],
    problem: &MpcProblem,
    u_prev: f64,
) -> Result<Vec<f64>, MpcError> {
    problem.validate()?;
    let n = problem.prediction_horizon;
    let nu = problem.control_horizon;
    lin.check_shapes(n, nu)?;
    if y_sp.len() != n {
        return Err(MpcError::InvalidProblem(format!(
            "setpoint trajectory has length {}, expected {n}",
            y_sp.len()
        )));
    }

    let program = build_program(lin, y_sp, problem, u_prev);
    let e = 2.0 * (program.a.transpose() * &program.a + DMatrix::identity(nu, nu) * problem.lambda);
    let f = -2.0 * program.a.transpose() * &program.residual;
    let (m_hard, g_hard) = hard_rows(problem, u_prev);

    // Signed output rows: a_p x <= y_max - y_free[p] and -a_p x <= y_free[p] - y_min.
    let mut m_full = DMatrix::zeros(4 * nu + 2 * n, nu);
    let mut g_full = DVector::zeros(4 * nu + 2 * n);
    m_full.view_mut((0, 0), (4 * nu, nu)).copy_from(&m_hard);
    g_full.rows_mut(0, 4 * nu).copy_from(&g_hard);
    for p in 0..n {
        let row = 4 * nu + 2 * p;
        for q in 0..nu {
            m_full[(row, q)] = program.a[(p, q)];
            m_full[(row + 1, q)] = -program.a[(p, q)];
        }
        g_full[row] = problem.y_max - program.y_free[p];
        g_full[row + 1] = program.y_free[p] - problem.y_min;
    }

    let hard = solve_inequality_qp(&e, &f, &m_full, &g_full)?;
    if hard.feasible {
        return Ok(hard.x.iter().copied().collect());
    }

    log::debug!(
        "output constraints unsolvable as hard rows (violation {:.3e}); applying penalty",
        hard.max_violation
    );
    // Penalize violated output rows: rho (a_p x - c_p)^2 added per row while
    // it stays violated, with only box/rate rows in the dual.
    let mut penalized: Vec<usize> = Vec::new();
    let mut x = DVector::zeros(nu);
    for _round in 0..8 {
        let mut e_pen = e.clone();
        let mut f_pen = f.clone();
        for &row in &penalized {
            let a_row = m_full.row(4 * nu + row).transpose();
            let c = g_full[4 * nu + row];
            e_pen += 2.0 * SOFT_PENALTY * &a_row * a_row.transpose();
            f_pen -= 2.0 * SOFT_PENALTY * c * &a_row;
        }
        let soft = solve_inequality_qp(&e_pen, &f_pen, &m_hard, &g_hard)?;
        x = soft.x;
        // Violated output rows at the new point.
        let mut changed = false;
        for p in 0..2 * n {
            let value = m_full.row(4 * nu + p) * &x;
            let violated = value[(0, 0)] > g_full[4 * nu + p] + FEAS_TOL;
            let listed = penalized.contains(&p);
            if violated && !listed {
                penalized.push(p);
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    Ok(x.iter().copied().collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_problem(lambda: f64) -> MpcProblem {
        MpcProblem {
            prediction_horizon: 1,
            control_horizon: 1,
            lambda,
            u_min: -10.0,
            u_max: 10.0,
            du_max: 10.0,
            y_min: -100.0,
            y_max: 100.0,
            max_internal_iters: 10,
            du_tol: 1e-7,
            err_tol: 1e-15,
        }
    }

    fn scalar_lin(h: f64, y0: f64, u_prev: f64) -> TrajectoryLinearization {
        TrajectoryLinearization {
            y_pred: vec![y0],
            sensitivity: vec![vec![h]],
            u_traj: vec![u_prev],
        }
    }

    #[test]
    fn huge_lambda_suppresses_the_increment() {
        let problem = scalar_problem(1e12);
        let lin = scalar_lin(1.0, 0.0, 0.0);
        let du = solve_qp(&lin, &[1.0], &problem, 0.0).unwrap();
        assert!(du[0].abs() < 1e-9);
    }

    #[test]
    fn unconstrained_scalar_matches_the_closed_form() {
        let problem = scalar_problem(0.7);
        let (h, y0, y_sp) = (1.3, 0.2, 0.9);
        let lin = scalar_lin(h, y0, 0.0);
        let du = solve_qp(&lin, &[y_sp], &problem, 0.0).unwrap();
        let expected = h * (y_sp - y0) / (h * h + 0.7);
        assert!((du[0] - expected).abs() < 1e-12);
    }

    #[test]
    fn rate_bound_clips_the_scalar_optimum() {
        let mut problem = scalar_problem(0.0);
        problem.du_max = 0.3;
        // Unconstrained optimum is 0.5.
        let lin = scalar_lin(1.0, 0.0, 0.0);
        let du = solve_qp(&lin, &[0.5], &problem, 0.0).unwrap();
        assert!((du[0] - 0.3).abs() < 1e-9);
    }

    #[test]
    fn zero_lambda_rank_deficient_is_regularized_not_fatal() {
        let problem = MpcProblem { lambda: 0.0, ..scalar_problem(0.0) };
        // Zero sensitivity makes A'A singular.
        let lin = scalar_lin(0.0, 0.0, 0.0);
        let du = solve_qp(&lin, &[1.0], &problem, 0.0).unwrap();
        assert!(du[0].abs() < 1e-6);
    }

    #[test]
    fn infeasible_output_bound_falls_back_to_the_penalty() {
        let mut problem = scalar_problem(1.0);
        problem.y_min = -0.1;
        problem.y_max = 0.1;
        problem.du_max = 0.05;
        // Free response sits far outside the output box; no admissible
        // increment can pull it back.
        let lin = scalar_lin(0.2, 2.0, 0.0);
        let du = solve_qp(&lin, &[0.0], &problem, 0.0).unwrap();
        // The penalty fallback still honors the hard increment bound, and
        // pushes toward the bound as hard as that allows.
        assert!(du[0] <= -0.05 + 1e-8 && du[0] >= -0.05 - 1e-8);
    }

    #[test]
    fn two_dimensional_solution_beats_its_neighbors() {
        let problem = MpcProblem {
            prediction_horizon: 3,
            control_horizon: 2,
            lambda: 0.5,
            u_min: -1.0,
            u_max: 1.0,
            du_max: 0.4,
            y_min: -2.0,
            y_max: 2.0,
            max_internal_iters: 10,
            du_tol: 1e-7,
            err_tol: 1e-15,
        };
        let lin = TrajectoryLinearization {
            y_pred: vec![0.1, 0.3, 0.4],
            sensitivity: vec![vec![0.8, 0.0], vec![0.5, 0.8], vec![0.3, 0.5]],
            u_traj: vec![0.2, 0.2],
        };
        let y_sp = [1.0, 1.0, 1.0];
        let du = solve_qp(&lin, &y_sp, &problem, 0.2).unwrap();
        let best = increment_objective(&lin, &y_sp, &problem, 0.2, &du);
        // Feasible perturbations cannot do better.
        for d0 in [-0.05, 0.0, 0.05] {
            for d1 in [-0.05, 0.0, 0.05] {
                let cand = [du[0] + d0, du[1] + d1];
                if cand.iter().any(|v| v.abs() > problem.du_max) {
                    continue;
                }
                let u0 = 0.2 + cand[0];
                let u1 = u0 + cand[1];
                if !(problem.u_min..=problem.u_max).contains(&u0)
                    || !(problem.u_min..=problem.u_max).contains(&u1)
                {
                    continue;
                }
                let obj = increment_objective(&lin, &y_sp, &problem, 0.2, &cand);
                assert!(obj + 1e-9 >= best, "neighbor beat the solver: {obj} < {best}");
            }
        }
    }
}
