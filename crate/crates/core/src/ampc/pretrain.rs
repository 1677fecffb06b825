//! Open-loop pretraining of the process model: excite the plant with
//! full-period sinusoids of stepped amplitude, then fit the model to the
//! recorded input/output sequence. Each pass computes the batch residual
//! Jacobian by forward sensitivity propagation, takes a Levenberg-Marquardt
//! (damped Gauss-Newton) direction and accepts the largest Armijo step;
//! when the damped direction stalls the pass falls back to the plain
//! gradient. Accepted steps always satisfy the sufficient-decrease
//! inequality, so the recorded error history is monotone non-increasing.

use super::armijo::{armijo_search, ArmijoParams};
use crate::ann::ElmanModel;
use crate::plant::{self, ControlInjection, DelayLine, PlantError, PlantParams, PlantState};
use nalgebra::{Cholesky, DMatrix, DVector};
use serde::{Deserialize, Serialize};

/// Excitation and stop criteria for pretraining.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSpec {
    /// One full-period segment per amplitude, in order.
    pub amplitudes: Vec<f64>,
    /// rad/s
    pub angular_frequency: f64,
    /// Length of each amplitude segment.
    pub segment_seconds: f64,
    /// Training stops once the mean squared error falls below this.
    pub mse_target: f64,
    pub max_passes: usize,
}

impl PretrainSpec {
    pub fn validate(&self) -> Result<(), String> {
        if self.amplitudes.is_empty() {
            return Err("at least one excitation amplitude is required".into());
        }
        if !(self.angular_frequency > 0.0) || !(self.segment_seconds > 0.0) {
            return Err("excitation frequency and segment length must be positive".into());
        }
        if !(self.mse_target > 0.0) || self.max_passes == 0 {
            return Err("mse target and pass budget must be positive".into());
        }
        Ok(())
    }
}

/// Result of a pretraining run. `mse_history[0]` is the error of the
/// untrained model; one entry follows per completed pass.
#[derive(Debug, Clone, PartialEq)]
pub struct PretrainOutcome {
    pub mse_history: Vec<f64>,
    pub passes: usize,
    pub reached_target: bool,
    pub final_mse: f64,
    /// Accepted steps that failed the sufficient-decrease inequality
    /// (always 0; recorded so callers can assert it).
    pub armijo_violations: usize,
}

/// Sampled excitation: each amplitude drives one segment of
/// `segment_seconds`, phase restarting at the segment boundary.
pub fn excitation_signal(spec: &PretrainSpec, ts: f64) -> Vec<f64> {
    let per_segment = (spec.segment_seconds / ts).round() as usize;
    let mut signal = Vec::with_capacity(per_segment * spec.amplitudes.len());
    for &amplitude in &spec.amplitudes {
        for i in 0..per_segment {
            signal.push(amplitude * (spec.angular_frequency * i as f64 * ts).sin());
        }
    }
    signal
}

/// Drive the plant open loop with `inputs`, returning the (optionally
/// delayed) measured outputs. `targets[i]` is the measurement one step after
/// `inputs[i]` was applied, matching the cadence the model sees online.
pub fn plant_response(
    params: &PlantParams,
    injection: ControlInjection,
    delay_steps: usize,
    inputs: &[f64],
) -> Result<Vec<f64>, PlantError> {
    let mut state = PlantState::default();
    let mut line = DelayLine::new(delay_steps);
    let mut measured = Vec::with_capacity(inputs.len());
    for &u in inputs {
        let (next, y) = plant::step(&state, params, u, injection)?;
        state = next;
        measured.push(line.push(y));
    }
    Ok(measured)
}

/// Mean squared one-step prediction error over the sequence, rolled from
/// the model's initial state.
pub fn rollout_mse(model: &ElmanModel, inputs: &[f64], targets: &[f64]) -> f64 {
    let mut copy = model.clone();
    copy.reset();
    let mut sum = 0.0;
    for (&u, &y) in inputs.iter().zip(targets) {
        let e = y - copy.forward(u);
        sum += e * e;
    }
    sum / inputs.len() as f64
}

/// Flat parameter layout: input weights, context weights row-major, output
/// weights.
fn parameter_count(model: &ElmanModel) -> usize {
    let n = model.hidden_size();
    n + n * n + n
}

fn model_with_step(model: &ElmanModel, direction: &DVector<f64>, eta: f64) -> ElmanModel {
    let n = model.hidden_size();
    let mut stepped = model.clone();
    let mut idx = 0;
    for w in stepped.input_weights.iter_mut() {
        *w += eta * direction[idx];
        idx += 1;
    }
    for row in stepped.context_weights.iter_mut() {
        for w in row.iter_mut() {
            *w += eta * direction[idx];
            idx += 1;
        }
    }
    for w in stepped.output_weights.iter_mut() {
        *w += eta * direction[idx];
        idx += 1;
    }
    debug_assert_eq!(idx, parameter_count(model));
    let _ = n;
    stepped
}

/// Batch MSE, its gradient and the Gauss-Newton normal matrix, accumulated
/// by forward sensitivity propagation from the model's initial state.
struct BatchQuadratic {
    mse: f64,
    /// d(MSE)/d(theta)
    gradient: DVector<f64>,
    /// (2/T) J'J of the residuals
    normal: DMatrix<f64>,
}

fn batch_quadratic(model: &ElmanModel, inputs: &[f64], targets: &[f64]) -> BatchQuadratic {
    let n = model.hidden_size();
    let p = parameter_count(model);
    let steps = inputs.len();
    let mut copy = model.clone();
    copy.reset();

    // sens[j][q] = d h[j] / d theta_q for the recurrent parameters
    // (output weights do not influence the hidden state).
    let recurrent_params = n + n * n;
    let mut sens = vec![vec![0.0; recurrent_params]; n];
    let mut gradient = DVector::zeros(p);
    let mut normal = DMatrix::zeros(p, p);
    let mut row = DVector::zeros(p);
    let mut sum_sq = 0.0;

    for (&u, &y) in inputs.iter().zip(targets) {
        let prev_context = copy.context.clone();
        let step = copy.forward_detailed(u);
        let hidden = copy.context.clone();
        let residual = step.output - y;
        sum_sq += residual * residual;

        let mut next = vec![vec![0.0; recurrent_params]; n];
        for j in 0..n {
            let slope = 1.0 - hidden[j] * hidden[j];
            for q in 0..recurrent_params {
                let mut dz = 0.0;
                // Direct dependence of z[j] on theta_q.
                if q < n {
                    if q == j {
                        dz += step.delayed_input;
                    }
                } else {
                    let ctx_index = q - n;
                    let (i, jj) = (ctx_index / n, ctx_index % n);
                    if jj == j {
                        dz += prev_context[i];
                    }
                }
                for i in 0..n {
                    dz += copy.context_weights[i][j] * sens[i][q];
                }
                next[j][q] = slope * dz;
            }
        }
        // Output Jacobian row.
        for q in 0..recurrent_params {
            row[q] = (0..n).map(|j| copy.output_weights[j] * next[j][q]).sum();
        }
        for j in 0..n {
            row[recurrent_params + j] = hidden[j];
        }
        gradient.axpy(2.0 * residual / steps as f64, &row, 1.0);
        // normal += (2/T) row row'
        normal.syger(2.0 / steps as f64, &row, &row, 1.0);
        sens = next;
    }
    // syger fills the lower triangle; mirror it.
    for r in 0..p {
        for c in (r + 1)..p {
            normal[(r, c)] = normal[(c, r)];
        }
    }
    BatchQuadratic { mse: sum_sq / steps as f64, gradient, normal }
}

/// Batch-train `model` on the `(inputs, targets)` sequence.
pub fn pretrain_elman(
    model: &mut ElmanModel,
    inputs: &[f64],
    targets: &[f64],
    armijo: &ArmijoParams,
    mse_target: f64,
    max_passes: usize,
) -> PretrainOutcome {
    assert_eq!(inputs.len(), targets.len(), "inputs and targets must pair up");
    assert!(!inputs.is_empty(), "training sequence is empty");

    let mut mse = rollout_mse(model, inputs, targets);
    let mut history = vec![mse];
    let mut violations = 0;
    let mut passes = 0;
    let mut damping = 1e-4;

    while passes < max_passes && mse > mse_target {
        let quad = batch_quadratic(model, inputs, targets);
        debug_assert!((quad.mse - mse).abs() <= 1e-12 * (1.0 + mse));
        let grad_norm_sq = quad.gradient.norm_squared();
        if grad_norm_sq == 0.0 || !grad_norm_sq.is_finite() {
            break;
        }

        // Damped Gauss-Newton direction, re-damped until it descends and
        // passes the line search; plain gradient as the last resort.
        let p = quad.gradient.len();
        let mut accepted: Option<(ElmanModel, f64, f64)> = None;
        for _attempt in 0..6 {
            let damped = &quad.normal + DMatrix::identity(p, p) * damping;
            let direction = match Cholesky::new(damped) {
                Some(chol) => -chol.solve(&quad.gradient),
                None => {
                    damping *= 10.0;
                    continue;
                }
            };
            let slope = -quad.gradient.dot(&direction);
            if !(slope > 0.0) {
                damping *= 10.0;
                continue;
            }
            let loss = |eta: f64| {
                if eta == 0.0 {
                    mse
                } else {
                    rollout_mse(&model_with_step(model, &direction, eta), inputs, targets)
                }
            };
            let eta = armijo_search(loss, slope, armijo);
            if eta > 0.0 {
                let stepped = model_with_step(model, &direction, eta);
                let new_mse = rollout_mse(&stepped, inputs, targets);
                if !(new_mse <= mse - armijo.c * eta * slope) {
                    violations += 1;
                }
                if eta >= armijo.eta0 {
                    damping = (damping / 3.0).max(1e-12);
                } else {
                    damping = (damping * 2.0).min(1e8);
                }
                accepted = Some((stepped, new_mse, eta));
                break;
            }
            damping = (damping * 10.0).min(1e8);
        }
        if accepted.is_none() {
            // Gradient direction with the same acceptance rule.
            let direction = -&quad.gradient;
            let loss = |eta: f64| {
                if eta == 0.0 {
                    mse
                } else {
                    rollout_mse(&model_with_step(model, &direction, eta), inputs, targets)
                }
            };
            let eta = armijo_search(loss, grad_norm_sq, armijo);
            if eta > 0.0 {
                let stepped = model_with_step(model, &direction, eta);
                let new_mse = rollout_mse(&stepped, inputs, targets);
                if !(new_mse <= mse - armijo.c * eta * grad_norm_sq) {
                    violations += 1;
                }
                accepted = Some((stepped, new_mse, eta));
            }
        }

        match accepted {
            Some((stepped, new_mse, _eta)) => {
                *model = stepped;
                mse = new_mse;
                passes += 1;
                history.push(mse);
            }
            // No direction made progress; repeating the pass would change
            // nothing.
            None => break,
        }
    }

    model.reset();
    PretrainOutcome {
        final_mse: mse,
        reached_target: mse <= mse_target,
        passes,
        mse_history: history,
        armijo_violations: violations,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::PI;

    fn spec() -> PretrainSpec {
        PretrainSpec {
            amplitudes: vec![0.8, 0.6, 0.5],
            angular_frequency: PI / 4.0,
            segment_seconds: 8.0,
            mse_target: 1e-15,
            max_passes: 200,
        }
    }

    fn training_pair(ts: f64) -> (Vec<f64>, Vec<f64>) {
        let inputs = excitation_signal(&spec(), ts);
        let targets = plant_response(
            &PlantParams::new(0.2, 0.8, 1.1),
            ControlInjection::AdditiveX1,
            0,
            &inputs,
        )
        .unwrap();
        (inputs, targets)
    }

    #[test]
    fn excitation_cycles_amplitudes_every_full_period() {
        let signal = excitation_signal(&spec(), 0.05);
        let per_segment = (8.0 / 0.05) as usize;
        assert_eq!(signal.len(), 3 * per_segment);
        // Peak of each segment reaches its amplitude (quarter period).
        assert!((signal[per_segment / 4] - 0.8).abs() < 1e-9);
        assert!((signal[per_segment + per_segment / 4] - 0.6).abs() < 1e-9);
        assert!((signal[2 * per_segment + per_segment / 4] - 0.5).abs() < 1e-9);
        // Segment boundaries land on sin(2 pi) = 0.
        assert!(signal[per_segment - 1].abs() < 0.1);
    }

    #[test]
    fn plant_response_is_delayed_by_the_line() {
        let params = PlantParams::new(0.2, 0.8, 1.1);
        let inputs = vec![0.5; 20];
        let direct = plant_response(&params, ControlInjection::AdditiveX1, 0, &inputs).unwrap();
        let delayed = plant_response(&params, ControlInjection::AdditiveX1, 3, &inputs).unwrap();
        assert!(delayed[..3].iter().all(|&y| y == 0.0));
        assert_eq!(&delayed[3..], &direct[..17]);
    }

    #[test]
    fn forward_sensitivity_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        let model = ElmanModel::random(3, 1, &mut rng);
        let inputs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.31).sin() * 0.7).collect();
        let targets: Vec<f64> = (0..40).map(|i| (i as f64 * 0.29).cos() * 0.3).collect();
        let quad = batch_quadratic(&model, &inputs, &targets);
        let p = quad.gradient.len();
        let eps = 1e-7;
        for q in 0..p {
            let mut direction = DVector::zeros(p);
            direction[q] = 1.0;
            let plus = rollout_mse(&model_with_step(&model, &direction, eps), &inputs, &targets);
            let minus = rollout_mse(&model_with_step(&model, &direction, -eps), &inputs, &targets);
            let numeric = (plus - minus) / (2.0 * eps);
            let scale = numeric.abs().max(quad.gradient[q].abs());
            // Central differences of the rollout carry ~1e-10 noise.
            assert!(
                (quad.gradient[q] - numeric).abs() < 1e-9 + 1e-5 * scale,
                "param {q}: analytic {} vs numeric {numeric}",
                quad.gradient[q]
            );
        }
    }

    #[test]
    fn pretraining_error_history_is_monotone_non_increasing() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let mut model = ElmanModel::random(5, 0, &mut rng);
        let (inputs, targets) = training_pair(0.05);
        let outcome =
            pretrain_elman(&mut model, &inputs, &targets, &ArmijoParams::default(), 1e-10, 150);
        assert_eq!(outcome.armijo_violations, 0);
        for pair in outcome.mse_history.windows(2) {
            assert!(pair[1] <= pair[0] + 1e-18, "history must not increase: {pair:?}");
        }
        assert!(outcome.final_mse < outcome.mse_history[0] / 1e3);
    }

    #[test]
    fn pretraining_reaches_a_tight_fit_quickly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut model = ElmanModel::random(5, 0, &mut rng);
        let (inputs, targets) = training_pair(0.05);
        let outcome =
            pretrain_elman(&mut model, &inputs, &targets, &ArmijoParams::default(), 1e-8, 500);
        assert!(
            outcome.reached_target,
            "expected mse <= 1e-8, got {:.3e} after {} passes",
            outcome.final_mse, outcome.passes
        );
    }

    #[test]
    fn trained_model_predicts_better_than_untrained() {
        let mut rng = ChaCha8Rng::seed_from_u64(43);
        let mut model = ElmanModel::random(5, 0, &mut rng);
        let untrained = model.clone();
        let (inputs, targets) = training_pair(0.05);
        pretrain_elman(&mut model, &inputs, &targets, &ArmijoParams::default(), 1e-12, 100);
        let before = rollout_mse(&untrained, &inputs, &targets);
        let after = rollout_mse(&model, &inputs, &targets);
        assert!(after < before);
    }
}
