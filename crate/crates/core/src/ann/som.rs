//! Self-organizing layer on a 1-D neuron line, updated winner-takes-most:
//! every neuron moves toward the input, scaled by a neighborhood factor that
//! decays both with grid distance from the winner and with the sample count.

use super::{uniform_matrix, AnnError, INIT_RANGE};
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Neighborhood decay schedule over at most `max_samples` learning steps.
///
/// The learning factor is `l(k) = l0 * exp(-k / K)` and the neighborhood
/// radius follows the geometric anneal `xi(k) = xi0 * (xi_f/xi0)^(k/K)`,
/// so `xi(0) = xi0` and `xi(K) = xi_f`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SomSchedule {
    pub l0: f64,
    pub xi0: f64,
    pub xi_f: f64,
    pub max_samples: u64,
}

impl SomSchedule {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.l0 > 0.0 && self.l0 <= 1.0) {
            return Err("l0 must lie in (0, 1]".into());
        }
        if !(self.xi_f > 0.0 && self.xi0 >= self.xi_f && self.xi0 <= 1.0) {
            return Err("radius schedule requires 0 < xi_f <= xi0 <= 1".into());
        }
        if self.max_samples == 0 {
            return Err("max_samples must be positive".into());
        }
        Ok(())
    }

    pub fn learning_factor(&self, k: u64) -> f64 {
        self.l0 * (-(k as f64) / self.max_samples as f64).exp()
    }

    pub fn radius(&self, k: u64) -> f64 {
        let fraction = k as f64 / self.max_samples as f64;
        self.xi0 * (self.xi_f / self.xi0).powf(fraction)
    }

    /// Neighborhood strength at sample `k` for a neuron `grid_distance`
    /// positions from the winner.
    pub fn neighborhood(&self, k: u64, grid_distance: usize) -> f64 {
        // The winner's distance factor is exactly 1, even when the radius
        // has underflowed to zero far past the schedule.
        if grid_distance == 0 {
            return self.learning_factor(k);
        }
        let r = grid_distance as f64;
        let xi = self.radius(k);
        self.learning_factor(k) * (-(r * r) / (2.0 * xi * xi)).exp()
    }
}

/// Weights are stored `[neuron][input]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SomLayer {
    pub weights: Vec<Vec<f64>>,
    pub schedule: SomSchedule,
}

impl SomLayer {
    pub fn random<R: Rng>(n_in: usize, n_neurons: usize, schedule: SomSchedule, rng: &mut R) -> Self {
        SomLayer { weights: uniform_matrix(rng, n_neurons, n_in, INIT_RANGE), schedule }
    }

    pub fn input_width(&self) -> usize {
        self.weights.first().map_or(0, Vec::len)
    }

    pub fn neuron_count(&self) -> usize {
        self.weights.len()
    }

    /// `tanh(x . W_j)` per neuron, the layer's role in the forward pass.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, AnnError> {
        if x.len() != self.input_width() {
            return Err(AnnError::DimensionMismatch { expected: self.input_width(), got: x.len() });
        }
        Ok(self
            .weights
            .iter()
            .map(|row| row.iter().zip(x).map(|(w, xi)| w * xi).sum::<f64>().tanh())
            .collect())
    }

    /// Index of the neuron whose weight vector is Euclidean-closest to `x`;
    /// ties go to the lowest index.
    pub fn winner(&self, x: &[f64]) -> usize {
        let mut best = 0;
        let mut best_dist = f64::INFINITY;
        for (j, row) in self.weights.iter().enumerate() {
            let dist: f64 = row.iter().zip(x).map(|(w, xi)| (xi - w) * (xi - w)).sum();
            if dist < best_dist {
                best = j;
                best_dist = dist;
            }
        }
        best
    }

    /// Winner-takes-most update at sample `k`: every neuron moves toward `x`
    /// by its neighborhood factor. Returns the winner index.
    pub fn update(&mut self, x: &[f64], k: u64) -> Result<usize, AnnError> {
        if x.len() != self.input_width() {
            return Err(AnnError::DimensionMismatch { expected: self.input_width(), got: x.len() });
        }
        let winner = self.winner(x);
        for (j, row) in self.weights.iter_mut().enumerate() {
            let h = self.schedule.neighborhood(k, j.abs_diff(winner));
            for (w, xi) in row.iter_mut().zip(x) {
                *w += h * (xi - *w);
            }
        }
        Ok(winner)
    }
}
