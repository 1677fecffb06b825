//! Gradient-adaptive controller: one feedforward stack (error features ->
//! two tanh hidden layers -> linear scalar output) trained by two
//! mechanisms every step. The unsupervised pass moves the first two weight
//! matrices winner-takes-most toward their layer inputs and applies
//! Hebbian correlation with forgetting to the output matrix; the
//! supervised pass then takes a gradient step on every weight with a
//! stability-derived adaptive learning rate. A diagonally recurrent model
//! runs alongside the loop and supplies the process-gain estimate the
//! supervised pass needs.
//!
//! Per control step the order is fixed: the recurrent model learns from the
//! newly measured output, the unsupervised updates run, the control value
//! is computed, and only then does the supervised pass take its step.

use crate::ann::{AnnError, DrnnModel, HebbianLayer, SomLayer, SomSchedule};
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum HdlnncError {
    /// The control value left the finite range; the run must abort.
    NonFiniteOutput { step: u64 },
    Ann(AnnError),
}

impl fmt::Display for HdlnncError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            HdlnncError::NonFiniteOutput { step } => {
                write!(f, "controller output became non-finite at step {step}")
            }
            HdlnncError::Ann(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for HdlnncError {}

impl From<AnnError> for HdlnncError {
    fn from(e: AnnError) -> Self {
        HdlnncError::Ann(e)
    }
}

/// Learning rate that keeps the squared control error non-increasing in the
/// linearized weight update: `alpha / (phi * (1 + (beta/phi) * g^2))`, where
/// `g` is the gradient of the control error with respect to the weight.
pub fn adaptive_rate(alpha: f64, beta: f64, phi: f64, error_gradient: f64) -> f64 {
    alpha / (phi * (1.0 + (beta / phi) * error_gradient * error_gradient))
}

/// Sizing and coefficients for [`HdlnncController`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdlnncConfig {
    /// Widths of the two hidden layers.
    pub hidden: (usize, usize),
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub som_l0: f64,
    pub som_xi0: f64,
    pub som_xi_f: f64,
    /// Learning-sample budget of the neighborhood schedule; callers usually
    /// set this to the scenario step count.
    pub som_max_samples: u64,
    pub hebbian_gamma: f64,
    pub hebbian_delta: f64,
    /// Hidden size of the recurrent process model.
    pub drnn_hidden: usize,
    /// Optional saturation of the control value.
    pub cv_limits: Option<(f64, f64)>,
}

impl HdlnncConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.hidden.0 == 0 || self.hidden.1 == 0 || self.drnn_hidden == 0 {
            return Err("layer widths must be positive".into());
        }
        for (name, v) in [("alpha", self.alpha), ("beta", self.beta), ("phi", self.phi)] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(format!("{name} must lie in (0, 1]"));
            }
        }
        if !(self.hebbian_gamma > 0.0 && self.hebbian_gamma < 1.0) {
            return Err("hebbian gamma must lie in (0, 1)".into());
        }
        if !(self.hebbian_delta > 0.0 && self.hebbian_delta < 1.0) {
            return Err("hebbian delta must lie in (0, 1)".into());
        }
        if let Some((lo, hi)) = self.cv_limits {
            if !(lo < hi) {
                return Err("cv limits must satisfy lo < hi".into());
            }
        }
        SomSchedule {
            l0: self.som_l0,
            xi0: self.som_xi0,
            xi_f: self.som_xi_f,
            max_samples: self.som_max_samples,
        }
        .validate()
    }
}

/// Recurrent process model adapted online; feeds the controller the
/// `d(output)/d(control)` estimate.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DrnnOnlineModel {
    pub net: DrnnModel,
    prev_pv: f64,
    pub jacobian: f64,
    pub prediction: f64,
    pub skipped_updates: u64,
    /// Running sum of |prediction error|, a model-mismatch diagnostic.
    pub total_abs_error: f64,
}

impl DrnnOnlineModel {
    /// The network's inputs are the applied control and the previous
    /// measured output.
    pub fn new<R: Rng>(hidden: usize, rng: &mut R) -> Self {
        DrnnOnlineModel {
            net: DrnnModel::random(2, hidden, rng),
            prev_pv: 0.0,
            jacobian: 0.0,
            prediction: 0.0,
            skipped_updates: 0,
            total_abs_error: 0.0,
        }
    }

    /// Per-layer learning rates `(output, diagonal, input)` derived from the
    /// current weights: `2/N`, `2/(N m_o^2)` and `2/(N m_o^2 m_i^2)`, where
    /// `m_o`, `m_i` are the largest absolute output/input weights (taken as 1
    /// when a layer is all zero).
    pub fn rates(&self) -> (f64, f64, f64) {
        let n = self.net.hidden_size() as f64;
        let max_abs = |values: &mut dyn Iterator<Item = f64>| -> f64 {
            let m = values.fold(0.0_f64, |acc, v| acc.max(v.abs()));
            if m == 0.0 {
                1.0
            } else {
                m
            }
        };
        let m_out = max_abs(&mut self.net.output_weights.iter().copied());
        let m_in = max_abs(&mut self.net.input_weights.iter().flatten().copied());
        let eta_o = 2.0 / n;
        let eta_d = 2.0 / (n * m_out * m_out);
        let eta_i = 2.0 / (n * m_out * m_out * m_in * m_in);
        (eta_o, eta_d, eta_i)
    }

    /// One prediction + gradient step on half the squared prediction error,
    /// then return the fresh `d(prediction)/d(control)` estimate.
    ///
    /// Non-finite gradients skip the weight update (counted, loop stays
    /// alive); the state still advances.
    pub fn update(&mut self, cv: f64, pv: f64) -> Result<f64, HdlnncError> {
        let input = [cv, self.prev_pv];
        let fwd = self.net.forward_detailed(&input)?;
        self.prediction = fwd.output;
        let error = pv - fwd.output;
        self.total_abs_error += error.abs();

        let (eta_o, eta_d, eta_i) = self.rates();
        let n = self.net.hidden_size();
        let mut grad_out = vec![0.0; n];
        let mut grad_diag = vec![0.0; n];
        let mut grad_in = vec![[0.0; 2]; n];
        for j in 0..n {
            let slope = 1.0 - fwd.new_hidden[j] * fwd.new_hidden[j];
            grad_out[j] = fwd.new_hidden[j];
            grad_diag[j] = self.net.output_weights[j] * slope * fwd.previous_hidden[j];
            grad_in[j][0] = self.net.output_weights[j] * slope * input[0];
            grad_in[j][1] = self.net.output_weights[j] * slope * input[1];
        }
        let finite = error.is_finite()
            && grad_out.iter().all(|g| g.is_finite())
            && grad_diag.iter().all(|g| g.is_finite())
            && grad_in.iter().flatten().all(|g| g.is_finite());
        if finite {
            for j in 0..n {
                self.net.output_weights[j] += eta_o * error * grad_out[j];
                self.net.recurrent_weights[j] += eta_d * error * grad_diag[j];
                self.net.input_weights[0][j] += eta_i * error * grad_in[j][0];
                self.net.input_weights[1][j] += eta_i * error * grad_in[j][1];
            }
        } else {
            self.skipped_updates += 1;
            log::warn!("skipping recurrent-model update: non-finite gradient");
        }

        // Gain estimate at the post-update weights and the fresh state.
        let jacobian: f64 = (0..n)
            .map(|j| {
                let slope = 1.0 - fwd.new_hidden[j] * fwd.new_hidden[j];
                self.net.output_weights[j] * slope * self.net.input_weights[0][j]
            })
            .sum();
        self.jacobian = if jacobian.is_finite() { jacobian } else { 0.0 };
        self.prev_pv = pv;
        Ok(self.jacobian)
    }
}

/// Activations of one forward pass through the stack.
struct StackForward {
    /// `[features, hidden1, hidden2, [cv]]`
    values: [Vec<f64>; 4],
}

impl StackForward {
    fn cv(&self) -> f64 {
        self.values[3][0]
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HdlnncController {
    /// First hidden layer, winner-takes-most updated. Weights `[out][in]`.
    pub layer1: SomLayer,
    /// Second hidden layer, winner-takes-most updated. Weights `[out][in]`.
    pub layer2: SomLayer,
    /// Linear output layer, Hebbian updated. Weights `[in][1]`.
    pub layer3: HebbianLayer,
    alpha: f64,
    beta: f64,
    phi: f64,
    cv_limits: Option<(f64, f64)>,
    pub model: DrnnOnlineModel,
    e_prev: f64,
    e_prev2: f64,
    cv_prev: f64,
    /// Raw (unsaturated) previous output, the `Y` of the Hebbian rule.
    cv_prev_raw: f64,
    /// Weight gradients of the previous step's output. The supervised pass
    /// pairs them with the current error: the control the gradients belong
    /// to is the one that produced this error.
    prev_grads: Option<(Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>)>,
    sample: u64,
    pub skipped_updates: u64,
}

impl HdlnncController {
    pub fn new<R: Rng>(config: &HdlnncConfig, rng: &mut R) -> Result<Self, String> {
        config.validate()?;
        let schedule = SomSchedule {
            l0: config.som_l0,
            xi0: config.som_xi0,
            xi_f: config.som_xi_f,
            max_samples: config.som_max_samples,
        };
        let (h1, h2) = config.hidden;
        let layer1 = SomLayer::random(3, h1, schedule, rng);
        let layer2 = SomLayer::random(h1, h2, schedule, rng);
        let layer3 =
            HebbianLayer::random(h2, 1, config.hebbian_gamma, config.hebbian_delta, rng);
        let model = DrnnOnlineModel::new(config.drnn_hidden, rng);
        Ok(HdlnncController {
            layer1,
            layer2,
            layer3,
            alpha: config.alpha,
            beta: config.beta,
            phi: config.phi,
            cv_limits: config.cv_limits,
            model,
            e_prev: 0.0,
            e_prev2: 0.0,
            cv_prev: 0.0,
            cv_prev_raw: 0.0,
            prev_grads: None,
            sample: 0,
            skipped_updates: 0,
        })
    }

    pub fn last_control(&self) -> f64 {
        self.cv_prev
    }

    /// tanh, tanh, linear through the three weight matrices.
    fn forward(&self, features: &[f64]) -> Result<StackForward, AnnError> {
        let hidden1 = self.layer1.forward(features)?;
        let hidden2 = self.layer2.forward(&hidden1)?;
        let out = self.layer3.forward(&hidden2)?;
        Ok(StackForward { values: [features.to_vec(), hidden1, hidden2, out] })
    }

    /// Unsupervised pass: both hidden layers move winner-takes-most toward
    /// their current inputs; the output layer correlates its input with the
    /// previous controller output.
    pub fn learn_unsupervised(&mut self, features: &[f64]) -> Result<(), AnnError> {
        self.layer1.update(features, self.sample)?;
        let hidden1 = self.layer1.forward(features)?;
        self.layer2.update(&hidden1, self.sample)?;
        let hidden2 = self.layer2.forward(&hidden1)?;
        let y_prev = [self.cv_prev_raw];
        self.layer3.update(&hidden2, &y_prev)?;
        Ok(())
    }

    /// `d(cv)/d(weight)` for all three matrices, by backpropagation.
    /// Returned in the layers' own storage orientations.
    fn weight_gradients(&self, fwd: &StackForward) -> (Vec<Vec<f64>>, Vec<Vec<f64>>, Vec<f64>) {
        let [features, hidden1, hidden2, _] = &fwd.values;
        // Output layer is linear: d(cv)/d(W3[i][0]) = hidden2[i].
        let grad3: Vec<f64> = hidden2.clone();
        // g2[j] = d(cv)/d(z2[j]) through the tanh of layer 2.
        let g2: Vec<f64> = hidden2
            .iter()
            .enumerate()
            .map(|(j, &h)| (1.0 - h * h) * self.layer3.weights[j][0])
            .collect();
        let grad2: Vec<Vec<f64>> = g2
            .iter()
            .map(|gj| hidden1.iter().map(|&a| gj * a).collect())
            .collect();
        let g1: Vec<f64> = hidden1
            .iter()
            .enumerate()
            .map(|(l, &h)| {
                let upstream: f64 =
                    self.layer2.weights.iter().zip(&g2).map(|(row, g)| row[l] * g).sum();
                (1.0 - h * h) * upstream
            })
            .collect();
        let grad1: Vec<Vec<f64>> = g1
            .iter()
            .map(|gj| features.iter().map(|&a| gj * a).collect())
            .collect();
        (grad1, grad2, grad3)
    }

    /// Supervised pass: gradient step on every weight with the adaptive
    /// rate, pairing the current error with the previous step's gradients
    /// (the control those gradients shaped is the one the plant has now
    /// responded to). Non-finite gradients skip the update and are counted.
    fn learn_supervised(&mut self, error: f64, plant_gain: f64) {
        let Some((grad1, grad2, grad3)) = self.prev_grads.take() else {
            return;
        };
        let finite = plant_gain.is_finite()
            && error.is_finite()
            && grad1.iter().flatten().all(|g| g.is_finite())
            && grad2.iter().flatten().all(|g| g.is_finite())
            && grad3.iter().all(|g| g.is_finite());
        if !finite {
            self.skipped_updates += 1;
            log::warn!("skipping supervised update: non-finite gradient");
            return;
        }
        let (alpha, beta, phi) = (self.alpha, self.beta, self.phi);
        let mut apply = |w: &mut f64, dcv_dw: f64| {
            let de_dw = -plant_gain * dcv_dw;
            let eta = adaptive_rate(alpha, beta, phi, de_dw);
            *w += eta * error * plant_gain * dcv_dw;
        };
        for (row, grads) in self.layer1.weights.iter_mut().zip(&grad1) {
            for (w, &g) in row.iter_mut().zip(grads) {
                apply(w, g);
            }
        }
        for (row, grads) in self.layer2.weights.iter_mut().zip(&grad2) {
            for (w, &g) in row.iter_mut().zip(grads) {
                apply(w, g);
            }
        }
        for (row, &g) in self.layer3.weights.iter_mut().zip(&grad3) {
            apply(&mut row[0], g);
        }
    }

    /// One closed-loop step: consume the measured output, return the control
    /// value to apply until the next sample.
    pub fn control_step(&mut self, setpoint: f64, measured: f64) -> Result<f64, HdlnncError> {
        let plant_gain = self.model.update(self.cv_prev, measured)?;

        let e = setpoint - measured;
        let de = e - self.e_prev;
        let d2e = e - 2.0 * self.e_prev + self.e_prev2;
        let features = [e, de, d2e];

        self.learn_unsupervised(&features)?;

        self.learn_supervised(e, plant_gain);

        let fwd = self.forward(&features)?;
        let cv_raw = fwd.cv();
        if !cv_raw.is_finite() {
            return Err(HdlnncError::NonFiniteOutput { step: self.sample });
        }
        self.prev_grads = Some(self.weight_gradients(&fwd));

        let cv = match self.cv_limits {
            Some((lo, hi)) => cv_raw.clamp(lo, hi),
            None => cv_raw,
        };
        self.e_prev2 = self.e_prev;
        self.e_prev = e;
        self.cv_prev_raw = cv_raw;
        self.cv_prev = cv;
        self.sample += 1;
        Ok(cv)
    }
}
