//! Receding-horizon control step: adapt the model with the fresh
//! measurement, then iterate predict / linearize / solve until the
//! candidate control sequence settles, and apply its first element.

use super::armijo::ArmijoParams;
use super::model::{AdaptOutcome, ProcessModel};
use super::qp::solve_qp;
use super::{MpcError, MpcProblem, TrajectoryLinearization};

/// Per-run counters the harness reports after a scenario.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NplptDiagnostics {
    /// Internal iterations used by the most recent step.
    pub last_iterations: usize,
    /// Largest sequence change at the final internal iteration.
    pub last_sequence_change: f64,
    /// Steps where an error forced the previous control to be held.
    pub held_steps: u64,
    /// Adaptation steps skipped on non-finite gradients.
    pub skipped_adaptations: u64,
}

#[derive(Debug, Clone)]
pub struct NplptController<M: ProcessModel> {
    pub problem: MpcProblem,
    pub model: M,
    pub armijo: ArmijoParams,
    /// Online adaptation switch; prediction-only when false.
    pub adapt_online: bool,
    u_prev: f64,
    last_model_output: f64,
    pub diagnostics: NplptDiagnostics,
    pub last_adapt: Option<AdaptOutcome>,
}

impl<M: ProcessModel> NplptController<M> {
    pub fn new(problem: MpcProblem, model: M, armijo: ArmijoParams) -> Result<Self, MpcError> {
        problem.validate()?;
        armijo.validate().map_err(MpcError::InvalidProblem)?;
        Ok(NplptController {
            problem,
            model,
            armijo,
            adapt_online: true,
            u_prev: 0.0,
            last_model_output: 0.0,
            diagnostics: NplptDiagnostics::default(),
            last_adapt: None,
        })
    }

    pub fn last_control(&self) -> f64 {
        self.u_prev
    }

    /// One closed-loop step. Any internal error holds the previous control
    /// so the loop stays alive.
    pub fn control_step(&mut self, setpoint: f64, measured: f64) -> f64 {
        let outcome = if self.adapt_online {
            self.model.adapt(self.u_prev, measured, &self.armijo)
        } else {
            let model_output = self.model.advance(self.u_prev);
            AdaptOutcome {
                model_output,
                error: measured - model_output,
                step_size: 0.0,
                sufficient_decrease: true,
                skipped: false,
            }
        };
        if outcome.skipped {
            self.diagnostics.skipped_adaptations += 1;
        }
        self.last_model_output = outcome.model_output;
        self.last_adapt = Some(outcome);

        match self.solve_horizon(setpoint, measured) {
            Ok(u) => {
                self.u_prev = u;
                u
            }
            Err(e) => {
                log::warn!("holding previous control: {e}");
                self.diagnostics.held_steps += 1;
                self.u_prev
            }
        }
    }

    /// The internal-iteration loop. The first candidate sequence holds the
    /// previously applied control over the whole horizon.
    fn solve_horizon(&mut self, setpoint: f64, measured: f64) -> Result<f64, MpcError> {
        let n = self.problem.prediction_horizon;
        let nu = self.problem.control_horizon;
        // Constant output-offset correction: the model's current deviation
        // from the measurement is assumed to persist over the horizon.
        let disturbance = measured - self.last_model_output;
        let y_sp = vec![setpoint; n];

        let mut u_traj = vec![self.u_prev; nu];
        let mut iterations = 0;
        let mut change = f64::INFINITY;
        for iteration in 1..=self.problem.max_internal_iters {
            iterations = iteration;
            let mut y_pred = self.model.predict(&u_traj, n);
            for y in y_pred.iter_mut() {
                *y += disturbance;
            }
            if y_pred.iter().any(|y| !y.is_finite()) {
                return Err(MpcError::NonFinitePrediction { iteration });
            }
            let sensitivity = self.model.sensitivity(&u_traj, n);
            if sensitivity.iter().flatten().any(|h| !h.is_finite()) {
                return Err(MpcError::NonFiniteSensitivity { iteration });
            }
            let lin = TrajectoryLinearization { y_pred, sensitivity, u_traj: u_traj.clone() };
            let du = solve_qp(&lin, &y_sp, &self.problem, self.u_prev)?;

            let mut u_new = vec![0.0; nu];
            let mut acc = self.u_prev;
            for (u, d) in u_new.iter_mut().zip(&du) {
                acc += d;
                *u = acc;
            }
            change = u_new
                .iter()
                .zip(&u_traj)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0_f64, f64::max);

            // Mean squared setpoint error of the linearized prediction.
            let tracking_error = (0..n)
                .map(|p| {
                    let correction: f64 = lin.sensitivity[p]
                        .iter()
                        .zip(u_new.iter().zip(&u_traj))
                        .map(|(h, (un, uo))| h * (un - uo))
                        .sum();
                    let e = y_sp[p] - (lin.y_pred[p] + correction);
                    e * e
                })
                .sum::<f64>()
                / n as f64;

            u_traj = u_new;
            if change < self.problem.du_tol || tracking_error < self.problem.err_tol {
                break;
            }
        }
        self.diagnostics.last_iterations = iterations;
        self.diagnostics.last_sequence_change = change;
        Ok(apply_limits(self.u_prev, u_traj[0], &self.problem))
    }
}

/// Clamp a candidate control so the applied value satisfies the box and the
/// rate bound exactly in floating point, as later trace checks recompute
/// them.
pub fn apply_limits(u_prev: f64, candidate: f64, problem: &MpcProblem) -> f64 {
    let mut u = candidate.clamp(problem.u_min, problem.u_max);
    if u - u_prev > problem.du_max {
        u = u_prev + problem.du_max;
    } else if u - u_prev < -problem.du_max {
        u = u_prev - problem.du_max;
    }
    u = u.clamp(problem.u_min, problem.u_max);
    // Rounding in the additions above can leave the recomputed rate one ulp
    // over the bound; walk back toward u_prev until it holds.
    while (u - u_prev).abs() > problem.du_max {
        u = step_toward(u, u_prev);
    }
    u
}

/// Next representable f64 from `from` toward `to`.
fn step_toward(from: f64, to: f64) -> f64 {
    if from == to || from.is_nan() {
        return from;
    }
    let bits = from.to_bits();
    let next = if (from < to) == (from >= 0.0) { bits + 1 } else { bits - 1 };
    // Crossing zero needs the sign flip handled explicitly.
    if from == 0.0 {
        return if to > 0.0 { f64::from_bits(1) } else { -f64::from_bits(1) };
    }
    f64::from_bits(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ampc::model::LinearSisoModel;
    use nalgebra::{DMatrix, DVector};

    fn wide_problem() -> MpcProblem {
        MpcProblem {
            prediction_horizon: 8,
            control_horizon: 3,
            lambda: 0.6,
            u_min: -100.0,
            u_max: 100.0,
            du_max: 100.0,
            y_min: -100.0,
            y_max: 100.0,
            max_internal_iters: 10,
            du_tol: 1e-7,
            err_tol: 1e-15,
        }
    }

    /// Unconstrained receding-horizon law for a linear model, computed the
    /// textbook way from the step-response matrix.
    fn analytic_first_control(
        model: &LinearSisoModel,
        problem: &MpcProblem,
        setpoint: f64,
        u_prev: f64,
    ) -> f64 {
        let n = problem.prediction_horizon;
        let nu = problem.control_horizon;
        // Step-response coefficients of y(k+p) to a unit increment at k+q.
        let h = model.sensitivity(&vec![u_prev; nu], n);
        let g = DMatrix::from_fn(n, nu, |p, q| h[p][q..nu].iter().sum::<f64>());
        let free = model.predict(&vec![u_prev; nu], n);
        let resid = DVector::from_fn(n, |p, _| setpoint - free[p]);
        let gram = g.transpose() * &g + DMatrix::identity(nu, nu) * problem.lambda;
        let du = gram.cholesky().unwrap().solve(&(g.transpose() * resid));
        u_prev + du[0]
    }

    #[test]
    fn linear_model_converges_in_one_productive_iteration() {
        let model = LinearSisoModel::new(0.9, 0.5, 0);
        let problem = wide_problem();
        let mut controller = NplptController::new(problem.clone(), model.clone(), ArmijoParams::default()).unwrap();
        controller.adapt_online = false;
        let u = controller.control_step(1.0, 0.0);
        // Second pass over an exactly linear model reproduces the first.
        assert!(controller.diagnostics.last_iterations <= 2);
        assert!(controller.diagnostics.last_sequence_change < 1e-9);
        let expected = analytic_first_control(&model, &problem, 1.0, 0.0);
        assert!((u - expected).abs() < 1e-8, "u = {u}, analytic = {expected}");
    }

    #[test]
    fn linear_model_with_delay_matches_the_analytic_law() {
        let model = LinearSisoModel::new(0.8, 0.7, 2);
        let problem = MpcProblem { prediction_horizon: 12, ..wide_problem() };
        let mut controller = NplptController::new(problem.clone(), model.clone(), ArmijoParams::default()).unwrap();
        controller.adapt_online = false;
        let u = controller.control_step(0.5, 0.0);
        let expected = analytic_first_control(&model, &problem, 0.5, 0.0);
        assert!((u - expected).abs() < 1e-8);
    }

    #[test]
    fn applied_control_respects_box_and_rate_exactly() {
        let problem = MpcProblem {
            u_min: -1.5,
            u_max: 1.5,
            du_max: 0.3,
            ..wide_problem()
        };
        let mut u_prev = 0.0;
        for candidate in [5.0, -5.0, 0.31, 1.7, -0.1, f64::MAX, 1.499999, 2.0] {
            let u = apply_limits(u_prev, candidate, &problem);
            assert!(u >= problem.u_min && u <= problem.u_max);
            assert!((u - u_prev).abs() <= problem.du_max);
            u_prev = u;
        }
    }

    #[test]
    fn errors_hold_the_previous_control() {
        #[derive(Clone)]
        struct BrokenModel;
        impl ProcessModel for BrokenModel {
            fn advance(&mut self, _u: f64) -> f64 {
                0.0
            }
            fn predict(&self, _controls: &[f64], n: usize) -> Vec<f64> {
                vec![f64::NAN; n]
            }
            fn sensitivity(&self, controls: &[f64], n: usize) -> Vec<Vec<f64>> {
                vec![vec![0.0; controls.len()]; n]
            }
        }
        let mut controller =
            NplptController::new(wide_problem(), BrokenModel, ArmijoParams::default()).unwrap();
        controller.adapt_online = false;
        let u = controller.control_step(1.0, 0.0);
        assert_eq!(u, 0.0);
        assert_eq!(controller.diagnostics.held_steps, 1);
    }

    #[test]
    fn step_toward_crosses_gaps_one_ulp_at_a_time() {
        let a = 1.5000000000000002;
        let b = step_toward(a, 0.0);
        assert!(b < a);
        assert!((a - b) < 1e-15);
        assert_eq!(step_toward(2.0, 2.0), 2.0);
    }
}
