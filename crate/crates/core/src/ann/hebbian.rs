//! Linear layer trained by Hebbian correlation with a forgetting term.

use super::{uniform_matrix, AnnError, INIT_RANGE};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Weights are stored `[input][output]`. `gamma` scales the correlation
/// term, `delta` the decay that forgets learned patterns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HebbianLayer {
    pub weights: Vec<Vec<f64>>,
    pub gamma: f64,
    pub delta: f64,
}

impl HebbianLayer {
    pub fn random<R: Rng>(n_in: usize, n_out: usize, gamma: f64, delta: f64, rng: &mut R) -> Self {
        HebbianLayer { weights: uniform_matrix(rng, n_in, n_out, INIT_RANGE), gamma, delta }
    }

    pub fn input_width(&self) -> usize {
        self.weights.len()
    }

    pub fn output_width(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    /// Linear forward pass `x . W`.
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
        Ok(out)
    }

    /// `W += gamma * y_prev (x) x - delta * y_prev (*) W`, where `y_prev` is
    /// the layer's previous output vector.
    pub fn update(&mut self, x: &[f64], y_prev: &[f64]) -> Result<(), AnnError> {
        if x.len() != self.input_width() {
            return Err(AnnError::DimensionMismatch { expected: self.input_width(), got: x.len() });
        }
        if y_prev.len() != self.output_width() {
            return Err(AnnError::DimensionMismatch {
                expected: self.output_width(),
                got: y_prev.len(),
            });
        }
        for (xi, row) in x.iter().zip(self.weights.iter_mut()) {
            for (w, y) in row.iter_mut().zip(y_prev) {
                *w += self.gamma * y * xi - self.delta * y * *w;
            }
        }
        Ok(())
    }
}
