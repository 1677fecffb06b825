//! Receding-horizon controller with nonlinear prediction and repeated
//! linearization along the predicted control sequence.
//!
//! Each control step runs a small number of internal iterations: roll the
//! process model over the prediction horizon along the current candidate
//! control sequence, linearize the predicted outputs around it, solve the
//! resulting constrained quadratic program for the control increments, and
//! repeat until the candidate sequence stops moving. Only the first element
//! of the final sequence is applied.

use serde::{Deserialize, Serialize};
use std::fmt;

pub mod armijo;
pub mod controller;
pub mod model;
pub mod pretrain;
pub mod qp;

pub use armijo::{armijo_search, ArmijoParams};
pub use controller::{NplptController, NplptDiagnostics};
pub use model::{AdaptOutcome, LinearSisoModel, ProcessModel};
pub use pretrain::{pretrain_elman, PretrainOutcome, PretrainSpec};
pub use qp::solve_qp;

#[derive(Debug, Clone, PartialEq)]
pub enum MpcError {
    InvalidProblem(String),
    NonFinitePrediction { iteration: usize },
    NonFiniteSensitivity { iteration: usize },
    QpFailed(String),
}

impl fmt::Display for MpcError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MpcError::InvalidProblem(msg) => write!(f, "invalid horizon problem: {msg}"),
            MpcError::NonFinitePrediction { iteration } => {
                write!(f, "non-finite prediction in internal iteration {iteration}")
            }
            MpcError::NonFiniteSensitivity { iteration } => {
                write!(f, "non-finite sensitivity in internal iteration {iteration}")
            }
            MpcError::QpFailed(msg) => write!(f, "quadratic program failed: {msg}"),
        }
    }
}

impl std::error::Error for MpcError {}

/// Horizons, weighting, bounds and internal-iteration thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MpcProblem {
    pub prediction_horizon: usize,
    pub control_horizon: usize,
    /// Weight on the squared control increments.
    pub lambda: f64,
    pub u_min: f64,
    pub u_max: f64,
    pub du_max: f64,
    pub y_min: f64,
    pub y_max: f64,
    pub max_internal_iters: usize,
    /// Internal iterations stop once the control sequence moves less than
    /// this (max norm).
    pub du_tol: f64,
    /// ... or once the mean squared setpoint error of the linearized
    /// prediction falls below this.
    pub err_tol: f64,
}

impl MpcProblem {
    pub fn validate(&self) -> Result<(), MpcError> {
        let fail = |msg: &str| Err(MpcError::InvalidProblem(msg.into()));
        if self.control_horizon == 0 || self.control_horizon > self.prediction_horizon {
            return fail("control horizon must satisfy 1 <= Nu <= N");
        }
        if self.lambda < 0.0 {
            return fail("lambda must be non-negative");
        }
        if !(self.u_min < self.u_max) {
            return fail("control bounds must satisfy u_min < u_max");
        }
        if !(self.du_max > 0.0) {
            return fail("du_max must be positive");
        }
        if !(self.y_min < self.y_max) {
            return fail("output bounds must satisfy y_min < y_max");
        }
        if self.max_internal_iters == 0 {
            return fail("at least one internal iteration is required");
        }
        if !(self.du_tol > 0.0) || !(self.err_tol > 0.0) {
            return fail("stop thresholds must be positive");
        }
        Ok(())
    }
}

/// One linearization of the predicted trajectory: outputs and sensitivities
/// along the control sequence `u_traj`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryLinearization {
    /// Predicted outputs, length N (disturbance-corrected).
    pub y_pred: Vec<f64>,
    /// `sensitivity[p][q] = d y(k+p+1) / d u(k+q)`, N x Nu.
    pub sensitivity: Vec<Vec<f64>>,
    /// The control sequence the prediction was rolled along, length Nu.
    pub u_traj: Vec<f64>,
}

impl TrajectoryLinearization {
    pub fn check_shapes(&self, n: usize, nu: usize) -> Result<(), MpcError> {
        if self.y_pred.len() != n
            || self.u_traj.len() != nu
            || self.sensitivity.len() != n
            || self.sensitivity.iter().any(|row| row.len() != nu)
        {
            return Err(MpcError::InvalidProblem(format!(
                "linearization shapes do not match N = {n}, Nu = {nu}"
            )));
        }
        Ok(())
    }
}
