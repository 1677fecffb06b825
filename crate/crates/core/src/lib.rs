//! Two neural-network adaptive controllers for a delayed nonlinear
//! benchmark process, plus the pieces needed to compare them: the plant and
//! its reference signals, network primitives, and integral control-quality
//! metrics over recorded traces.
//!
//! The two controllers:
//! - [`hdlnnc`]: a gradient-adaptive cascade of unsupervised feature layers
//!   and a feedforward stage with a stability-derived learning rate, fed by
//!   an online diagonally recurrent process model.
//! - [`ampc`]: a receding-horizon controller that repeatedly linearizes a
//!   context-recurrent process model along the predicted control sequence
//!   and solves a constrained quadratic program for the increments.

pub mod ampc;
pub mod ann;
pub mod hdlnnc;
pub mod metrics;
pub mod plant;
pub mod reference;

pub use ampc::{MpcProblem, NplptController};
pub use hdlnnc::{HdlnncConfig, HdlnncController};
pub use metrics::{icqi, ControlTrace, IcqiReport, TraceRow};
pub use plant::{ControlInjection, DelayLine, ParamSchedule, PlantParams, PlantState};
pub use reference::{ReferenceGenerator, ReferenceSpec};
