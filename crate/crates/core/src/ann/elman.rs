//! Context-recurrent cell with a scalar control input and scalar output.
//! The previous hidden vector is fed back as a context input; an optional
//! delay line on the input models processes whose output lags the control.

use super::{uniform_matrix, uniform_vec, Activation, INIT_RANGE};
use crate::plant::DelayLine;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Values produced by one [`ElmanModel::forward_detailed`] step.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElmanStep {
    pub delayed_input: f64,
    pub output: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElmanModel {
    /// Input-to-hidden weights, one per hidden neuron (scalar input).
    pub input_weights: Vec<f64>,
    /// `[from][to]` hidden-to-hidden (context) weights.
    pub context_weights: Vec<Vec<f64>>,
    /// Hidden-to-output weights; the output is scalar.
    pub output_weights: Vec<f64>,
    pub context: Vec<f64>,
    initial_context: Vec<f64>,
    /// Steps the input is delayed before entering the net.
    input_line: DelayLine,
}

impl ElmanModel {
    /// Build from explicit weights; `context` doubles as the reset state.
    pub fn from_parts(
        input_weights: Vec<f64>,
        context_weights: Vec<Vec<f64>>,
        output_weights: Vec<f64>,
        context: Vec<f64>,
        input_delay: usize,
    ) -> Self {
        ElmanModel {
            input_weights,
            context_weights,
            output_weights,
            initial_context: context.clone(),
            context,
            input_line: DelayLine::new(input_delay),
        }
    }

    pub fn random<R: Rng>(n_hidden: usize, input_delay: usize, rng: &mut R) -> Self {
        let input_weights = uniform_vec(rng, n_hidden, INIT_RANGE);
        let context_weights = uniform_matrix(rng, n_hidden, n_hidden, INIT_RANGE);
        let output_weights = uniform_vec(rng, n_hidden, INIT_RANGE);
        let context = uniform_vec(rng, n_hidden, INIT_RANGE);
        ElmanModel {
            input_weights,
            context_weights,
            output_weights,
            initial_context: context.clone(),
            context,
            input_line: DelayLine::new(input_delay),
        }
    }

    pub fn hidden_size(&self) -> usize {
        self.input_weights.len()
    }

    pub fn input_delay(&self) -> usize {
        self.input_line.len()
    }

    /// Restore the context the model was created with and clear the delay line.
    pub fn reset(&mut self) {
        self.context = self.initial_context.clone();
        self.input_line.reset();
    }

    /// Hidden vector produced from an (already delayed) input and a given
    /// context; does not touch the model state.
    pub fn hidden_from(&self, context: &[f64], delayed_input: f64) -> Vec<f64> {
        let n = self.hidden_size();
        let mut hidden = vec![0.0; n];
        for (j, h) in hidden.iter_mut().enumerate() {
            let mut z = self.input_weights[j] * delayed_input;
            for (c, row) in context.iter().zip(&self.context_weights) {
                z += c * row[j];
            }
            *h = Activation::Tanh.apply(z);
        }
        hidden
    }

    pub fn readout(&self, hidden: &[f64]) -> f64 {
        self.output_weights.iter().zip(hidden).map(|(o, h)| o * h).sum()
    }

    /// Advance one step with control `u` and return the model output.
    pub fn forward(&mut self, u: f64) -> f64 {
        self.forward_detailed(u).output
    }

    /// Advance one step, also exposing the delayed input that actually fed
    /// the net (the sensitivity rollout needs it).
    pub fn forward_detailed(&mut self, u: f64) -> ElmanStep {
        let delayed = self.input_line.push(u);
        let hidden = self.hidden_from(&self.context.clone(), delayed);
        let output = self.readout(&hidden);
        self.context = hidden;
        ElmanStep { delayed_input: delayed, output }
    }

    /// The delayed input the next `forward` call would see for control `u`,
    /// without advancing anything.
    pub fn peek_delayed(&self, u: f64) -> f64 {
        let mut line = self.input_line.clone();
        line.push(u)
    }

    /// Advance only the delay line and context, given an externally computed
    /// hidden vector (used when a weight update re-derives the hidden state).
    pub(crate) fn commit_step(&mut self, u: f64, hidden: Vec<f64>) {
        let _ = self.input_line.push(u);
        self.context = hidden;
    }
}
