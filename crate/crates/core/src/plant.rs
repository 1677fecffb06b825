//! Discrete-time benchmark plant: a two-state nonlinear process with an
//! optional output delay line and a time-varying parameter schedule.
//!
//! State update (step `k-1` to `k`):
//!
//! ```text
//! x1(k) = a1*x1(k-1) + a2*x2(k-1) + u(k-1)
//! x2(k) = x1(k-1) / (a3 + x1(k-1)^2 + x2(k-1)^2)
//! y(k)  = x1(k)
//! ```
//!
//! The control signal enters additively in the `x1` update; the injection
//! mode is an explicit enum so alternatives can be added.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::fmt;

/// Denominator magnitudes below this abort the run instead of blowing up.
pub const SINGULARITY_GUARD: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum PlantError {
    /// `a3 + x1^2 + x2^2` hit the singular manifold of the state map.
    SingularDenominator { denominator: f64, step: u64 },
    NonFiniteState { step: u64 },
}

impl fmt::Display for PlantError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            PlantError::SingularDenominator { denominator, step } => write!(
                f,
                "state-map denominator {denominator:e} within {SINGULARITY_GUARD:e} of zero at step {step}"
            ),
            PlantError::NonFiniteState { step } => {
                write!(f, "plant state became non-finite at step {step}")
            }
        }
    }
}

impl std::error::Error for PlantError {}

/// The three process constants.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantParams {
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl PlantParams {
    pub const fn new(a1: f64, a2: f64, a3: f64) -> Self {
        PlantParams { a1, a2, a3 }
    }
}

/// Plant state plus the step index it belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantState {
    pub x1: f64,
    pub x2: f64,
    pub k: u64,
}

impl Default for PlantState {
    fn default() -> Self {
        PlantState { x1: 0.0, x2: 0.0, k: 0 }
    }
}

/// Where the control signal enters the state update.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlInjection {
    /// `u` is added to the `x1` update.
    AdditiveX1,
}

/// Advance the plant one step under control `u`, returning the new state
/// and the (undelayed) output.
pub fn step(
    state: &PlantState,
    params: &PlantParams,
    u: f64,
    injection: ControlInjection,
) -> Result<(PlantState, f64), PlantError> {
    let denominator = params.a3 + state.x1 * state.x1 + state.x2 * state.x2;
    if denominator.abs() < SINGULARITY_GUARD {
        return Err(PlantError::SingularDenominator { denominator, step: state.k });
    }
    let x1 = match injection {
        ControlInjection::AdditiveX1 => params.a1 * state.x1 + params.a2 * state.x2 + u,
    };
    let x2 = state.x1 / denominator;
    if !x1.is_finite() || !x2.is_finite() {
        return Err(PlantError::NonFiniteState { step: state.k });
    }
    let next = PlantState { x1, x2, k: state.k + 1 };
    Ok((next, x1))
}

/// Fixed-length FIFO: the value pushed now comes back out `len` pushes later.
/// A zero-length line is the identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DelayLine {
    buffer: VecDeque<f64>,
    len: usize,
}

impl DelayLine {
    /// Create a line of `len` steps, pre-filled with zeros.
    pub fn new(len: usize) -> Self {
        DelayLine { buffer: std::iter::repeat(0.0).take(len).collect(), len }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Push `value` and return the value pushed `len` calls earlier.
    pub fn push(&mut self, value: f64) -> f64 {
        if self.len == 0 {
            return value;
        }
        self.buffer.push_back(value);
        self.buffer.pop_front().expect("delay buffer is never empty when len > 0")
    }

    /// Drop all history, refilling with zeros.
    pub fn reset(&mut self) {
        for v in self.buffer.iter_mut() {
            *v = 0.0;
        }
    }
}

/// Piecewise-constant parameter schedule, right-continuous at switch times.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSchedule {
    /// `(switch_time_s, params)` pairs with strictly increasing times,
    /// the first at t = 0.
    pub entries: Vec<(f64, PlantParams)>,
}

impl ParamSchedule {
    pub fn constant(params: PlantParams) -> Self {
        ParamSchedule { entries: vec![(0.0, params)] }
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.entries.is_empty() {
            return Err("parameter schedule is empty".into());
        }
        if self.entries[0].0 != 0.0 {
            return Err("parameter schedule must start at t = 0".into());
        }
        for pair in self.entries.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return Err("parameter schedule switch times must be strictly increasing".into());
            }
        }
        Ok(())
    }

    /// Params of the latest switch time <= `t`.
    pub fn params_at(&self, t: f64) -> PlantParams {
        let mut current = self.entries[0].1;
        for &(switch_time, params) in &self.entries {
            if switch_time <= t {
                current = params;
            } else {
                break;
            }
        }
        current
    }
}
