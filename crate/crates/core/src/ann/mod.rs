//! Neural-network primitives shared by both controllers: dense layers, a
//! self-organizing layer with a decaying neighborhood, a Hebbian layer, a
//! diagonally recurrent cell, a context-recurrent (Elman) cell and a
//! finite-difference Jacobian helper.

use rand::Rng;
use serde::{Deserialize, Serialize};
use std::fmt;

pub mod dense;
pub mod drnn;
pub mod elman;
pub mod findiff;
pub mod hebbian;
pub mod snapshot;
pub mod som;

pub use dense::DenseLayer;
pub use drnn::DrnnModel;
pub use elman::ElmanModel;
pub use findiff::finite_diff_jacobian;
pub use hebbian::HebbianLayer;
pub use som::{SomLayer, SomSchedule};

/// Weight initialization range used by every model in this crate.
pub const INIT_RANGE: (f64, f64) = (-0.1, 0.1);

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum AnnError {
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for AnnError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            AnnError::DimensionMismatch { expected, got } => {
                write!(f, "input width {got} does not match layer width {expected}")
            }
        }
    }
}

impl std::error::Error for AnnError {}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    Tanh,
    Linear,
}

impl Activation {
    #[inline]
    pub fn apply(self, z: f64) -> f64 {
        match self {
            Activation::Tanh => z.tanh(),
            Activation::Linear => z,
        }
    }

    /// Derivative expressed through the activation output.
    #[inline]
    pub fn derivative_from_output(self, y: f64) -> f64 {
        match self {
            Activation::Tanh => 1.0 - y * y,
            Activation::Linear => 1.0,
        }
    }
}

pub(crate) fn uniform_vec<R: Rng>(rng: &mut R, len: usize, range: (f64, f64)) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(range.0..range.1)).collect()
}

pub(crate) fn uniform_matrix<R: Rng>(
    rng: &mut R,
    rows: usize,
    cols: usize,
    range: (f64, f64),
) -> Vec<Vec<f64>> {
    (0..rows).map(|_| uniform_vec(rng, cols, range)).collect()
}
