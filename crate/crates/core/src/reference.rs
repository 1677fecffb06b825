//! Reference-signal generation: sine, filtered square and ramped square
//! segments, each active on a half-open time window.
//!
//! Square segments are shaped by a discrete first-order filter. The filter
//! uses the exact zero-order-hold discretization `y' = a*y + (1-a)*u` with
//! `a = exp(-Ts/tau)`; a forward-Euler pole would sit at `1 - Ts/tau`, which
//! is unusable at the 50 ms sampling of the delayed scenario (Ts/tau = 2).

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum ReferenceError {
    /// `t` is not covered by any segment window.
    OutOfWindow { t: f64 },
}

impl fmt::Display for ReferenceError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ReferenceError::OutOfWindow { t } => {
                write!(f, "no reference segment covers t = {t}")
            }
        }
    }
}

impl std::error::Error for ReferenceError {}

/// One step of the discrete first-order lag, unity DC gain.
pub fn filter_step(state: f64, input: f64, ts: f64, tau: f64) -> f64 {
    debug_assert!(ts > 0.0 && tau > 0.0);
    let a = (-ts / tau).exp();
    a * state + (1.0 - a) * input
}

/// One reference segment, active on `window = [start, end)` seconds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum ReferenceSpec {
    Sine {
        amplitude: f64,
        /// rad/s
        angular_frequency: f64,
        window: (f64, f64),
    },
    /// Square wave through the first-order filter. The first half period
    /// sits at `levels.1` (the high level), the second at `levels.0`.
    FilteredSquare {
        levels: (f64, f64),
        period: f64,
        filter_time_constant: f64,
        window: (f64, f64),
    },
    /// Square wave with linear transitions of `ramp_duration` between
    /// levels, then filtered. The first transition ramps up from zero.
    RampedSquare {
        levels: (f64, f64),
        period: f64,
        ramp_duration: f64,
        filter_time_constant: f64,
        window: (f64, f64),
    },
}

impl ReferenceSpec {
    pub fn window(&self) -> (f64, f64) {
        match *self {
            ReferenceSpec::Sine { window, .. }
            | ReferenceSpec::FilteredSquare { window, .. }
            | ReferenceSpec::RampedSquare { window, .. } => window,
        }
    }

    pub fn validate(&self) -> Result<(), String> {
        let (start, end) = self.window();
        if !(start < end) {
            return Err(format!("segment window [{start}, {end}) is empty"));
        }
        match *self {
            ReferenceSpec::Sine { amplitude, .. } if amplitude <= 0.0 => {
                Err("sine amplitude must be positive".into())
            }
            ReferenceSpec::FilteredSquare { period, filter_time_constant, .. }
            | ReferenceSpec::RampedSquare { period, filter_time_constant, .. }
                if period <= 0.0 || filter_time_constant <= 0.0 =>
            {
                Err("square period and filter time constant must be positive".into())
            }
            ReferenceSpec::RampedSquare { ramp_duration, period, .. }
                if ramp_duration < 0.0 || ramp_duration > period / 2.0 =>
            {
                Err("ramp duration must lie in [0, period/2]".into())
            }
            _ => Ok(()),
        }
    }

    /// Raw (pre-filter) value at elapsed time `tau_rel` since window start.
    fn raw(&self, tau_rel: f64) -> f64 {
        match *self {
            ReferenceSpec::Sine { amplitude, angular_frequency, .. } => {
                amplitude * (angular_frequency * tau_rel).sin()
            }
            ReferenceSpec::FilteredSquare { levels, period, .. } => {
                square_level(levels, period, tau_rel)
            }
            ReferenceSpec::RampedSquare { levels, period, ramp_duration, .. } => {
                ramped_square_level(levels, period, ramp_duration, tau_rel)
            }
        }
    }
}

fn square_level(levels: (f64, f64), period: f64, tau_rel: f64) -> f64 {
    let phase = tau_rel.rem_euclid(period);
    if phase < period / 2.0 {
        levels.1
    } else {
        levels.0
    }
}

/// Trapezoid wave: at every level switch (including the one at tau_rel = 0,
/// which starts from 0 rather than from the opposite level) the value ramps
/// linearly over `ramp_duration`.
fn ramped_square_level(levels: (f64, f64), period: f64, ramp: f64, tau_rel: f64) -> f64 {
    let (low, high) = levels;
    let half = period / 2.0;
    let phase = tau_rel.rem_euclid(period);
    let (since_switch, target, previous) = if phase < half {
        let previous = if tau_rel < half { 0.0 } else { low };
        (phase, high, previous)
    } else {
        (phase - half, low, high)
    };
    if ramp > 0.0 && since_switch < ramp {
        previous + (target - previous) * since_switch / ramp
    } else {
        target
    }
}

/// Stateful generator over a list of segments. Must be queried at strictly
/// increasing sample times with the step `ts` it was built with, because the
/// square segments carry a discrete filter state.
#[derive(Debug, Clone)]
pub struct ReferenceGenerator {
    segments: Vec<ReferenceSpec>,
    ts: f64,
    /// Filter state per segment (unused for sine segments).
    filter_states: Vec<f64>,
}

impl ReferenceGenerator {
    pub fn new(segments: Vec<ReferenceSpec>, ts: f64) -> Result<Self, String> {
        if ts <= 0.0 {
            return Err("sample time must be positive".into());
        }
        for segment in &segments {
            segment.validate()?;
        }
        let filter_states = vec![0.0; segments.len()];
        Ok(ReferenceGenerator { segments, ts, filter_states })
    }

    pub fn segments(&self) -> &[ReferenceSpec] {
        &self.segments
    }

    /// Reference value at time `t`, advancing the active segment's filter.
    pub fn reference_at(&mut self, t: f64) -> Result<f64, ReferenceError> {
        let index = self
            .segments
            .iter()
            .position(|segment| {
                let (start, end) = segment.window();
                start <= t && t < end
            })
            .ok_or(ReferenceError::OutOfWindow { t })?;
        let segment = &self.segments[index];
        let tau_rel = t - segment.window().0;
        let raw = segment.raw(tau_rel);
        let value = match segment {
            ReferenceSpec::Sine { .. } => raw,
            ReferenceSpec::FilteredSquare { filter_time_constant, .. }
            | ReferenceSpec::RampedSquare { filter_time_constant, .. } => {
                let state = filter_step(self.filter_states[index], raw, self.ts, *filter_time_constant);
                self.filter_states[index] = state;
                state
            }
        };
        Ok(value)
    }
}
