//! Scenario configuration: plant schedule, reference segments, controller
//! sizing and metric windows. Configs serialize to TOML with field names
//! matching the structs, and the two benchmark scenarios (plus a faster
//! desk variant of the first) are built in.

use nnctl_core::ampc::{ArmijoParams, MpcProblem, PretrainSpec};
use nnctl_core::hdlnnc::HdlnncConfig;
use nnctl_core::plant::{ControlInjection, ParamSchedule, PlantParams};
use nnctl_core::reference::ReferenceSpec;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;
use std::fmt;
use std::path::Path;

#[derive(Debug)]
pub enum ConfigError {
    Io(std::io::Error),
    Parse(String),
    Invalid(String),
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ConfigError::Io(e) => write!(f, "config io error: {e}"),
            ConfigError::Parse(e) => write!(f, "config parse error: {e}"),
            ConfigError::Invalid(e) => write!(f, "invalid config: {e}"),
        }
    }
}

impl std::error::Error for ConfigError {}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantSection {
    pub injection: ControlInjection,
    pub schedule: Vec<ScheduleEntry>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScheduleEntry {
    pub switch_time: f64,
    pub a1: f64,
    pub a2: f64,
    pub a3: f64,
}

impl PlantSection {
    pub fn to_schedule(&self) -> ParamSchedule {
        ParamSchedule {
            entries: self
                .schedule
                .iter()
                .map(|e| (e.switch_time, PlantParams::new(e.a1, e.a2, e.a3)))
                .collect(),
        }
    }
}

/// HDLNNC sizing; the neighborhood-schedule budget defaults to the scenario
/// step count when unset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HdlnncSection {
    /// Hidden widths of the controller stack.
    pub hidden: (usize, usize),
    pub alpha: f64,
    pub beta: f64,
    pub phi: f64,
    pub som_l0: f64,
    pub som_xi0: f64,
    pub som_xi_f: f64,
    #[serde(default)]
    pub som_max_samples: Option<u64>,
    pub hebbian_gamma: f64,
    pub hebbian_delta: f64,
    pub drnn_hidden: usize,
    #[serde(default)]
    pub cv_limits: Option<(f64, f64)>,
}

impl HdlnncSection {
    pub fn to_core(&self, scenario_steps: u64) -> HdlnncConfig {
        HdlnncConfig {
            hidden: self.hidden,
            alpha: self.alpha,
            beta: self.beta,
            phi: self.phi,
            som_l0: self.som_l0,
            som_xi0: self.som_xi0,
            som_xi_f: self.som_xi_f,
            som_max_samples: self.som_max_samples.unwrap_or(scenario_steps.max(1)),
            hebbian_gamma: self.hebbian_gamma,
            hebbian_delta: self.hebbian_delta,
            drnn_hidden: self.drnn_hidden,
            cv_limits: self.cv_limits,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmpcSection {
    pub problem: MpcProblem,
    pub elman_hidden: usize,
    /// Steps the model's input is delayed (matches the plant's output delay
    /// in the delayed scenario).
    pub model_input_delay: usize,
    pub armijo: ArmijoParams,
    pub pretrain: PretrainSpec,
    /// Load a pretrained model snapshot instead of pretraining in-run.
    #[serde(default)]
    pub pretrained_model: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioConfig {
    pub name: String,
    /// Sample time, seconds.
    pub ts: f64,
    /// Scenario length, seconds.
    pub duration: f64,
    /// Output-measurement delay in steps.
    pub delay_steps: usize,
    pub seed: u64,
    pub plant: PlantSection,
    pub reference: Vec<ReferenceSpec>,
    pub hdlnnc: HdlnncSection,
    pub ampc: AmpcSection,
    /// `[t0, t1)` metric windows.
    pub windows: Vec<(f64, f64)>,
    /// Time ranges rendered as charts after a run.
    #[serde(default)]
    pub plot_ranges: Vec<(f64, f64)>,
}

impl ScenarioConfig {
    pub fn steps(&self) -> u64 {
        (self.duration / self.ts).round() as u64
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let fail = |msg: String| Err(ConfigError::Invalid(msg));
        if !(self.ts > 0.0) {
            return fail("ts must be positive".into());
        }
        let steps = self.duration / self.ts;
        if !(self.duration > 0.0) || (steps - steps.round()).abs() > 1e-6 {
            return fail("duration must be a positive multiple of ts".into());
        }
        self.plant.to_schedule().validate().map_err(ConfigError::Invalid)?;
        for segment in &self.reference {
            segment.validate().map_err(ConfigError::Invalid)?;
        }
        for &(t0, t1) in &self.windows {
            if !(t0 < t1) || t0 < 0.0 || t1 > self.duration + 1e-9 {
                return fail(format!("metric window [{t0}, {t1}) outside the scenario"));
            }
        }
        self.hdlnnc.to_core(self.steps()).validate().map_err(ConfigError::Invalid)?;
        self.ampc.problem.validate().map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.ampc.armijo.validate().map_err(ConfigError::Invalid)?;
        self.ampc.pretrain.validate().map_err(ConfigError::Invalid)?;
        if self.ampc.elman_hidden == 0 {
            return fail("elman_hidden must be positive".into());
        }
        Ok(())
    }

    pub fn from_toml_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(ConfigError::Io)?;
        let config: ScenarioConfig =
            toml::from_str(&text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("scenario config serializes")
    }
}

fn benchmark_params() -> ScheduleEntry {
    ScheduleEntry { switch_time: 0.0, a1: 0.2, a2: 0.8, a3: 1.1 }
}

fn switched_params(at: f64) -> ScheduleEntry {
    ScheduleEntry { switch_time: at, a1: -0.2, a2: 1.4, a3: -15.0 }
}

fn table_hdlnnc() -> HdlnncSection {
    HdlnncSection {
        hidden: (10, 5),
        alpha: 9e-2,
        beta: 9e-1,
        phi: 1e-1,
        som_l0: 5e-5,
        som_xi0: 7e-5,
        som_xi_f: 5e-5,
        som_max_samples: None,
        hebbian_gamma: 1e-4,
        hebbian_delta: 1e-6,
        drnn_hidden: 10,
        cv_limits: None,
    }
}

fn table_ampc() -> AmpcSection {
    AmpcSection {
        problem: MpcProblem {
            prediction_horizon: 15,
            control_horizon: 3,
            lambda: 1.0,
            u_min: -1.5,
            u_max: 1.5,
            du_max: 0.3,
            y_min: -1.5,
            y_max: 1.5,
            max_internal_iters: 10,
            du_tol: 1e-7,
            err_tol: 1e-15,
        },
        elman_hidden: 5,
        model_input_delay: 0,
        armijo: ArmijoParams::default(),
        pretrain: PretrainSpec {
            amplitudes: vec![0.8, 0.6, 0.5],
            angular_frequency: PI / 4.0,
            segment_seconds: 8.0,
            mse_target: 1e-15,
            max_passes: 5000,
        },
        pretrained_model: None,
    }
}

/// Scenario with the slow sine then the filtered square, parameter switch
/// mid-run, no measurement delay.
fn no_delay_scenario(name: &str, ts: f64) -> ScenarioConfig {
    let duration = 150.0;
    ScenarioConfig {
        name: name.into(),
        ts,
        duration,
        delay_steps: 0,
        seed: 1,
        plant: PlantSection {
            injection: ControlInjection::AdditiveX1,
            schedule: vec![benchmark_params(), switched_params(100.0)],
        },
        reference: vec![
            ReferenceSpec::Sine {
                amplitude: 1.0,
                angular_frequency: PI / 4.0,
                window: (0.0, 100.0),
            },
            ReferenceSpec::FilteredSquare {
                levels: (-0.4, 0.4),
                period: 4.0,
                filter_time_constant: 0.025,
                window: (100.0, duration + ts),
            },
        ],
        hdlnnc: table_hdlnnc(),
        ampc: table_ampc(),
        windows: vec![
            (0.0, 8.0),
            (8.0, 16.0),
            (32.0, 40.0),
            (88.0, 96.0),
            (100.0, 104.0),
            (104.0, 108.0),
            (116.0, 120.0),
            (144.0, 148.0),
        ],
        plot_ranges: vec![(88.0, 96.0), (144.0, 148.0)],
    }
}

/// The delayed scenario: 50 ms sampling, ten-step output delay, longer
/// horizons, tighter rate bound, ramped square after the switch.
fn delay_scenario() -> ScenarioConfig {
    let ts = 0.05;
    let duration = 400.0;
    let mut hdlnnc = table_hdlnnc();
    hdlnnc.hidden = (15, 8);
    hdlnnc.drnn_hidden = 15;
    hdlnnc.cv_limits = Some((-5.0, 5.0));
    let mut ampc = table_ampc();
    ampc.problem.prediction_horizon = 30;
    ampc.problem.control_horizon = 5;
    ampc.problem.lambda = 0.8;
    ampc.problem.max_internal_iters = 20;
    ampc.problem.du_max = 3.5e-2;
    ampc.problem.u_min = -1.0;
    ampc.problem.u_max = 1.0;
    ampc.model_input_delay = 10;
    ScenarioConfig {
        name: "b_delay".into(),
        ts,
        duration,
        delay_steps: 10,
        seed: 1,
        plant: PlantSection {
            injection: ControlInjection::AdditiveX1,
            schedule: vec![benchmark_params(), switched_params(200.0)],
        },
        reference: vec![
            ReferenceSpec::Sine {
                amplitude: 1.0,
                angular_frequency: PI / 4.0,
                window: (0.0, 200.0),
            },
            ReferenceSpec::RampedSquare {
                levels: (-0.4, 0.4),
                period: 4.0,
                ramp_duration: 0.5,
                filter_time_constant: 0.025,
                window: (200.0, duration + ts),
            },
        ],
        hdlnnc,
        ampc,
        windows: vec![
            (0.0, 8.0),
            (8.0, 16.0),
            (32.0, 40.0),
            (88.0, 96.0),
            (136.0, 144.0),
            (184.0, 192.0),
            (200.0, 204.0),
            (204.0, 208.0),
            (216.0, 220.0),
            (244.0, 248.0),
            (320.0, 324.0),
            (396.0, 400.0),
        ],
        plot_ranges: vec![(88.0, 96.0), (184.0, 192.0)],
    }
}

/// The built-in scenarios: the benchmark pair at their native sampling plus
/// a desk variant of the first at 10 ms for fast iteration (not part of the
/// benchmark definition).
pub fn builtin_scenarios() -> Vec<ScenarioConfig> {
    vec![
        no_delay_scenario("a_no_delay", 0.001),
        delay_scenario(),
        no_delay_scenario("desk", 0.01),
    ]
}

pub fn builtin_scenario(name: &str) -> Option<ScenarioConfig> {
    builtin_scenarios().into_iter().find(|s| s.name == name)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn builtins_validate() {
        for scenario in builtin_scenarios() {
            scenario.validate().unwrap_or_else(|e| panic!("{}: {e}", scenario.name));
        }
    }

    #[test]
    fn a_no_delay_uses_millisecond_sampling() {
        let a = builtin_scenario("a_no_delay").unwrap();
        assert_eq!(a.ts, 0.001);
        assert_eq!(a.delay_steps, 0);
        assert_eq!(a.steps(), 150_000);
    }

    #[test]
    fn delay_scenario_matches_its_overrides() {
        let b = builtin_scenario("b_delay").unwrap();
        assert!((b.delay_steps as f64 * b.ts - 0.5).abs() < 1e-12);
        assert_eq!(b.ampc.problem.prediction_horizon, 30);
        assert_eq!(b.ampc.problem.control_horizon, 5);
        assert_eq!(b.ampc.problem.lambda, 0.8);
        assert_eq!(b.ampc.problem.max_internal_iters, 20);
        assert_eq!(b.ampc.problem.du_max, 3.5e-2);
        assert_eq!((b.ampc.problem.u_min, b.ampc.problem.u_max), (-1.0, 1.0));
        assert_eq!(b.hdlnnc.hidden, (15, 8));
        assert_eq!(b.hdlnnc.drnn_hidden, 15);
        assert_eq!(b.hdlnnc.cv_limits, Some((-5.0, 5.0)));
        assert_eq!(b.ampc.model_input_delay, 10);
    }

    #[test]
    fn toml_round_trip_preserves_the_config() {
        let desk = builtin_scenario("desk").unwrap();
        let text = desk.to_toml_string();
        let parsed: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(parsed, desk);
    }

    #[test]
    fn bad_configs_are_rejected() {
        let mut c = builtin_scenario("desk").unwrap();
        c.ts = -1.0;
        assert!(c.validate().is_err());

        let mut c = builtin_scenario("desk").unwrap();
        c.windows.push((140.0, 10.0));
        assert!(c.validate().is_err());

        let mut c = builtin_scenario("desk").unwrap();
        c.ampc.problem.control_horizon = 99;
        assert!(c.validate().is_err());
    }
}
