//! Diagonally recurrent network: one tanh hidden layer whose only recurrence
//! is a self-loop per neuron, followed by a linear readout.

use super::{uniform_matrix, uniform_vec, AnnError, INIT_RANGE};
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DrnnModel {
    /// `[input][hidden]`
    pub input_weights: Vec<Vec<f64>>,
    /// One self-loop weight per hidden neuron.
    pub recurrent_weights: Vec<f64>,
    /// Hidden-to-output weights; the output is scalar.
    pub output_weights: Vec<f64>,
    pub hidden: Vec<f64>,
    initial_hidden: Vec<f64>,
}

/// Forward-pass values needed by the learning rules.
#[derive(Debug, Clone)]
pub struct DrnnForward {
    pub output: f64,
    pub previous_hidden: Vec<f64>,
    pub new_hidden: Vec<f64>,
}

impl DrnnModel {
    /// Build from explicit weights; `hidden` doubles as the reset state.
    pub fn from_parts(
        input_weights: Vec<Vec<f64>>,
        recurrent_weights: Vec<f64>,
        output_weights: Vec<f64>,
        hidden: Vec<f64>,
    ) -> Self {
        DrnnModel {
            input_weights,
            recurrent_weights,
            output_weights,
            initial_hidden: hidden.clone(),
            hidden,
        }
    }

    pub fn random<R: Rng>(n_in: usize, n_hidden: usize, rng: &mut R) -> Self {
        let input_weights = uniform_matrix(rng, n_in, n_hidden, INIT_RANGE);
        let recurrent_weights = uniform_vec(rng, n_hidden, INIT_RANGE);
        let output_weights = uniform_vec(rng, n_hidden, INIT_RANGE);
        let hidden = uniform_vec(rng, n_hidden, INIT_RANGE);
        DrnnModel {
            input_weights,
            recurrent_weights,
            output_weights,
            initial_hidden: hidden.clone(),
            hidden,
        }
    }

    pub fn input_width(&self) -> usize {
        self.input_weights.len()
    }

    pub fn hidden_size(&self) -> usize {
        self.recurrent_weights.len()
    }

    /// Restore the hidden state the model was created with.
    pub fn reset(&mut self) {
        self.hidden = self.initial_hidden.clone();
    }

    /// Advance one step: `h_j' = tanh(sum_i I[i][j] u[i] + d_j h_j)`,
    /// `y = sum_j o_j h_j'`.
    pub fn forward(&mut self, input: &[f64]) -> Result<f64, AnnError> {
        Ok(self.forward_detailed(input)?.output)
    }

    /// Like [`forward`](Self::forward) but keeps the pre-step hidden state,
    /// which the gradient rules need.
    pub fn forward_detailed(&mut self, input: &[f64]) -> Result<DrnnForward, AnnError> {
        if input.len() != self.input_width() {
            return Err(AnnError::DimensionMismatch { expected: self.input_width(), got: input.len() });
        }
        let previous_hidden = self.hidden.clone();
        let mut new_hidden = vec![0.0; self.hidden_size()];
        for (j, h) in new_hidden.iter_mut().enumerate() {
            let mut z = self.recurrent_weights[j] * previous_hidden[j];
            for (u, row) in input.iter().zip(&self.input_weights) {
                z += u * row[j];
            }
            *h = z.tanh();
        }
        let output = self.output_weights.iter().zip(&new_hidden).map(|(o, h)| o * h).sum();
        self.hidden = new_hidden.clone();
        Ok(DrnnForward { output, previous_hidden, new_hidden })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn zero_model(n_in: usize, n_hidden: usize) -> DrnnModel {
        DrnnModel {
            input_weights: vec![vec![0.0; n_hidden]; n_in],
            recurrent_weights: vec![0.0; n_hidden],
            output_weights: vec![0.0; n_hidden],
            hidden: vec![0.0; n_hidden],
            initial_hidden: vec![0.0; n_hidden],
        }
    }

    #[test]
    fn all_zero_weights_give_zero_output_and_state() {
        let mut model = zero_model(2, 4);
        for u in [[1.0, -2.0], [0.5, 3.0]] {
            assert_eq!(model.forward(&u).unwrap(), 0.0);
            assert!(model.hidden.iter().all(|&h| h == 0.0));
        }
    }

    #[test]
    fn single_neuron_matches_scalar_evaluation() {
        let mut model = zero_model(1, 1);
        model.input_weights[0][0] = 1.0;
        model.output_weights[0] = 1.0;
        let y = model.forward(&[0.5]).unwrap();
        assert!((y - 0.5f64.tanh()).abs() < 1e-15);
        assert!((y - 0.462117).abs() < 1e-6);
    }

    #[test]
    fn without_recurrence_it_reduces_to_a_feedforward_pass() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut model = DrnnModel::random(2, 3, &mut rng);
        for d in model.recurrent_weights.iter_mut() {
            *d = 0.0;
        }
        let input = [0.3, -0.8];
        let first = model.forward(&input).unwrap();
        // Same input again: with no recurrence the state cannot matter.
        let second = model.forward(&input).unwrap();
        assert_eq!(first, second);
        // And the value is the plain two-layer composition.
        let by_hand: f64 = (0..3)
            .map(|j| {
                let z = input[0] * model.input_weights[0][j] + input[1] * model.input_weights[1][j];
                model.output_weights[j] * z.tanh()
            })
            .sum();
        assert!((first - by_hand).abs() < 1e-15);
    }

    #[test]
    fn reset_and_replay_reproduces_outputs_bit_identically() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut model = DrnnModel::random(1, 5, &mut rng);
        let inputs: Vec<f64> = (0..40).map(|i| (i as f64 * 0.37).sin()).collect();
        let first: Vec<f64> = inputs.iter().map(|&u| model.forward(&[u]).unwrap()).collect();
        model.reset();
        let second: Vec<f64> = inputs.iter().map(|&u| model.forward(&[u]).unwrap()).collect();
        assert_eq!(first, second);
    }

    #[test]
    fn output_is_bounded_by_readout_norm() {
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut model = DrnnModel::random(1, 6, &mut rng);
        let bound: f64 = model.output_weights.iter().map(|o| o.abs()).sum();
        for i in 0..200 {
            let u = 100.0 * ((i as f64) * 1.3).cos();
            let y = model.forward(&[u]).unwrap();
            assert!(y.abs() <= bound + 1e-12);
        }
    }
}
