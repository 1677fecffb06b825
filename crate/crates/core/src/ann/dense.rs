//! Fully connected layer without bias terms.

use super::{uniform_matrix, Activation, AnnError, INIT_RANGE};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Weights are stored `[input][output]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseLayer {
    pub weights: Vec<Vec<f64>>,
    pub activation: Activation,
}

impl DenseLayer {
    pub fn new(weights: Vec<Vec<f64>>, activation: Activation) -> Self {
        DenseLayer { weights, activation }
    }

    pub fn random<R: Rng>(n_in: usize, n_out: usize, activation: Activation, rng: &mut R) -> Self {
        DenseLayer { weights: uniform_matrix(rng, n_in, n_out, INIT_RANGE), activation }
    }

    pub fn input_width(&self) -> usize {
        self.weights.len()
    }

    pub fn output_width(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// `activation(x . W)` elementwise.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, AnnError> {
        if x.len() != self.input_width() {
            return Err(AnnError::DimensionMismatch { expected: self.input_width(), got: x.len() });
        }
        let mut out = vec![0.0; self.output_width()];
        for (xi, row) in x.iter().zip(&self.weights) {
            for (o, w) in out.iter_mut().zip(row) {
                *o += xi * w;
            }
        }
        for o in out.iter_mut() {
            *o = self.activation.apply(*o);
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tanh_layer_maps_zero_to_zero() {
        let layer = DenseLayer::new(vec![vec![0.3, -0.7], vec![1.2, 0.4]], Activation::Tanh);
        assert_eq!(layer.forward(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn linear_identity_passes_input_through() {
        let layer =
            DenseLayer::new(vec![vec![1.0, 0.0], vec![0.0, 1.0]], Activation::Linear);
        assert_eq!(layer.forward(&[2.5, -3.0]).unwrap(), vec![2.5, -3.0]);
    }

    #[test]
    fn scalar_tanh_layer_matches_hand_value() {
        let layer = DenseLayer::new(vec![vec![0.5]], Activation::Tanh);
        let out = layer.forward(&[1.0]).unwrap();
        assert!((out[0] - 0.5f64.tanh()).abs() < 1e-15);
        assert!((out[0] - 0.462117).abs() < 1e-6);
    }

    #[test]
    fn width_mismatch_is_rejected() {
        let layer = DenseLayer::new(vec![vec![1.0]], Activation::Linear);
        assert!(matches!(
            layer.forward(&[1.0, 2.0]),
            Err(AnnError::DimensionMismatch { expected: 1, got: 2 })
        ));
    }
}
