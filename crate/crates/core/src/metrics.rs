//! Windowed integral control-quality indices over recorded traces:
//! IAE (integral of |e|), ISE (integral of e^2) and ITAE (integral of t|e|,
//! with t the absolute scenario time). All three use the trapezoidal rule
//! on the sampled error.

use serde::{Deserialize, Serialize};
use std::fmt;

#[derive(Debug, Clone, PartialEq)]
pub enum MetricsError {
    /// The window covers fewer than two samples.
    EmptyWindow { t0: f64, t1: f64 },
}

impl fmt::Display for MetricsError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MetricsError::EmptyWindow { t0, t1 } => {
                write!(f, "window [{t0}, {t1}) covers fewer than two trace samples")
            }
        }
    }
}

impl std::error::Error for MetricsError {}

/// One closed-loop sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: u64,
    pub t: f64,
    /// Reference (setpoint).
    pub r: f64,
    /// Measured process output.
    pub y: f64,
    /// Applied control.
    pub u: f64,
    /// Control error `r - y`.
    pub e: f64,
}

/// Recorded closed-loop run with a constant sample time.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ControlTrace {
    pub rows: Vec<TraceRow>,
}

impl ControlTrace {
    pub fn push(&mut self, row: TraceRow) {
        self.rows.push(row);
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }
}

/// The three indices over one window.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Icqi {
    pub iae: f64,
    pub ise: f64,
    pub itae: f64,
}

/// Indices for one `[t0, t1)` window, trapezoidal over the samples that fall
/// in `[t0, t1]`. Using the closing sample as the right integration endpoint
/// makes adjacent windows add up exactly to their union.
pub fn icqi(trace: &ControlTrace, window: (f64, f64)) -> Result<Icqi, MetricsError> {
    let (t0, t1) = window;
    let eps = 1e-9;
    let rows: Vec<&TraceRow> = trace
        .rows
        .iter()
        .filter(|row| row.t >= t0 - eps && row.t <= t1 + eps)
        .collect();
    if rows.len() < 2 {
        return Err(MetricsError::EmptyWindow { t0, t1 });
    }
    let mut iae = 0.0;
    let mut ise = 0.0;
    let mut itae = 0.0;
    for pair in rows.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        let dt = b.t - a.t;
        iae += 0.5 * (a.e.abs() + b.e.abs()) * dt;
        ise += 0.5 * (a.e * a.e + b.e * b.e) * dt;
        itae += 0.5 * (a.t * a.e.abs() + b.t * b.e.abs()) * dt;
    }
    Ok(Icqi { iae, ise, itae })
}

/// Windowed indices for one controller on one scenario.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IcqiEntry {
    pub window: (f64, f64),
    pub controller: String,
    pub iae: f64,
    pub ise: f64,
    pub itae: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct IcqiReport {
    pub entries: Vec<IcqiEntry>,
}

impl IcqiReport {
    pub fn entry(&self, controller: &str, window: (f64, f64)) -> Option<&IcqiEntry> {
        self.entries.iter().find(|e| {
            e.controller == controller
                && (e.window.0 - window.0).abs() < 1e-9
                && (e.window.1 - window.1).abs() < 1e-9
        })
    }
}
