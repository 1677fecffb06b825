//! Closed-loop execution: both controllers run against independent plant
//! instances under the same reference realization and parameter schedule,
//! traces are recorded per step, metrics computed over the configured
//! windows, and all artifacts written to the output directory.

use crate::config::{ConfigError, ScenarioConfig};
use crate::plot;
use crate::report;
use crate::trace_io;
use nnctl_core::ampc::{pretrain, NplptController, PretrainOutcome};
use nnctl_core::ann::{snapshot, ElmanModel};
use nnctl_core::hdlnnc::HdlnncController;
use nnctl_core::metrics::{icqi, ControlTrace, IcqiEntry, IcqiReport, TraceRow};
use nnctl_core::plant::{self, DelayLine, PlantState};
use nnctl_core::reference::ReferenceGenerator;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

pub const HDLNNC_ID: &str = "hdlnnc";
pub const AMPC_ID: &str = "ampc";

// Seed salts keep the two controllers' weight draws independent.
const HDLNNC_SALT: u64 = 0x68646c;
const AMPC_SALT: u64 = 0x616d7063;

#[derive(Debug)]
pub enum RunError {
    Config(ConfigError),
    Io(std::io::Error),
    /// A controller or the plant aborted; partial traces were flushed.
    Aborted(String),
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            RunError::Config(e) => write!(f, "{e}"),
            RunError::Io(e) => write!(f, "io error: {e}"),
            RunError::Aborted(msg) => write!(f, "simulation aborted: {msg}"),
        }
    }
}

impl std::error::Error for RunError {}

impl From<std::io::Error> for RunError {
    fn from(e: std::io::Error) -> Self {
        RunError::Io(e)
    }
}

impl From<ConfigError> for RunError {
    fn from(e: ConfigError) -> Self {
        RunError::Config(e)
    }
}

/// Post-run constraint audit of a control column, recomputed from the trace
/// alone (independent of the controller's own clamping).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct ConstraintAudit {
    pub box_violations: u64,
    pub rate_violations: u64,
    pub max_abs_u: f64,
    pub max_abs_du: f64,
}

pub fn audit_constraints(trace: &ControlTrace, u_min: f64, u_max: f64, du_max: f64) -> ConstraintAudit {
    let mut audit = ConstraintAudit::default();
    let mut prev_u = 0.0;
    for (i, row) in trace.rows.iter().enumerate() {
        if row.u < u_min || row.u > u_max {
            audit.box_violations += 1;
        }
        audit.max_abs_u = audit.max_abs_u.max(row.u.abs());
        if i > 0 {
            let du = row.u - prev_u;
            if du.abs() > du_max {
                audit.rate_violations += 1;
            }
            audit.max_abs_du = audit.max_abs_du.max(du.abs());
        }
        prev_u = row.u;
    }
    audit
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunMetadata {
    pub scenario: String,
    pub seed: u64,
    pub config_sha256: String,
    pub wall_time_s: f64,
    pub pretrain_passes: usize,
    pub pretrain_final_mse: f64,
    pub pretrain_reached_target: bool,
    pub ampc_audit: ConstraintAudit,
    pub hdlnnc_model_total_abs_error: f64,
    pub aborted: BTreeMap<String, String>,
}

#[derive(Debug)]
pub struct RunArtifacts {
    pub out_dir: PathBuf,
    pub trace_paths: BTreeMap<String, PathBuf>,
    pub traces: BTreeMap<String, ControlTrace>,
    pub report: IcqiReport,
    pub report_json: PathBuf,
    pub report_text: PathBuf,
    pub plot_paths: Vec<PathBuf>,
    pub metadata: RunMetadata,
}

/// Reference samples for every step of the scenario, shared by both loops.
fn reference_samples(config: &ScenarioConfig) -> Result<Vec<f64>, ConfigError> {
    let mut generator = ReferenceGenerator::new(config.reference.clone(), config.ts)
        .map_err(ConfigError::Invalid)?;
    let steps = config.steps();
    let mut samples = Vec::with_capacity(steps as usize + 1);
    for k in 0..=steps {
        let t = k as f64 * config.ts;
        samples.push(
            generator
                .reference_at(t)
                .map_err(|e| ConfigError::Invalid(e.to_string()))?,
        );
    }
    Ok(samples)
}

/// One closed loop. The controller closure maps `(setpoint, measured)` to
/// the applied control; plant and delay line are owned here. On an abort
/// the partial trace is returned together with the message.
fn run_loop<F>(
    config: &ScenarioConfig,
    references: &[f64],
    mut controller: F,
) -> (ControlTrace, Option<String>)
where
    F: FnMut(f64, f64) -> Result<f64, String>,
{
    let steps = config.steps();
    let schedule = config.plant.to_schedule();
    let mut state = PlantState::default();
    let mut line = DelayLine::new(config.delay_steps);
    let mut measured = 0.0;
    let mut trace = ControlTrace::default();
    for k in 0..=steps {
        let t = k as f64 * config.ts;
        let r = references[k as usize];
        let u = match controller(r, measured) {
            Ok(u) => u,
            Err(msg) => return (trace, Some(format!("step {k}: {msg}"))),
        };
        trace.push(TraceRow { k, t, r, y: measured, u, e: r - measured });
        if k < steps {
            let params = schedule.params_at(t);
            match plant::step(&state, &params, u, config.plant.injection) {
                Ok((next, y)) => {
                    state = next;
                    measured = line.push(y);
                }
                Err(e) => return (trace, Some(format!("step {k}: {e}"))),
            }
        }
    }
    (trace, None)
}

/// Pretrain (or load) the predictive controller's process model.
pub fn prepare_ampc_model(
    config: &ScenarioConfig,
) -> Result<(ElmanModel, PretrainOutcome), RunError> {
    if let Some(path) = &config.ampc.pretrained_model {
        let model: ElmanModel = snapshot::load_json(Path::new(path))?;
        let outcome = PretrainOutcome {
            mse_history: Vec::new(),
            passes: 0,
            reached_target: true,
            final_mse: f64::NAN,
            armijo_violations: 0,
        };
        return Ok((model, outcome));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ AMPC_SALT);
    let mut model = ElmanModel::random(config.ampc.elman_hidden, config.ampc.model_input_delay, &mut rng);
    let spec = &config.ampc.pretrain;
    let inputs = pretrain::excitation_signal(spec, config.ts);
    let initial_params = config.plant.to_schedule().params_at(0.0);
    let targets = pretrain::plant_response(
        &initial_params,
        config.plant.injection,
        config.delay_steps,
        &inputs,
    )
    .map_err(|e| RunError::Aborted(format!("pretraining excitation: {e}")))?;
    let outcome = pretrain::pretrain_elman(
        &mut model,
        &inputs,
        &targets,
        &config.ampc.armijo,
        spec.mse_target,
        spec.max_passes,
    );
    log::info!(
        "pretraining: {} passes, final mse {:.3e}{}",
        outcome.passes,
        outcome.final_mse,
        if outcome.reached_target { " (target reached)" } else { "" }
    );
    Ok((model, outcome))
}

pub fn config_hash(config: &ScenarioConfig) -> String {
    let canonical = serde_json::to_string(config).expect("config serializes");
    let mut hasher = Sha256::new();
    hasher.update(canonical.as_bytes());
    let digest = hasher.finalize();
    digest.iter().map(|b| format!("{b:02x}")).collect()
}

/// Traces for both controllers without touching the filesystem.
pub fn simulate(
    config: &ScenarioConfig,
) -> Result<(BTreeMap<String, ControlTrace>, BTreeMap<String, String>, RunStats), RunError> {
    config.validate()?;
    let references = reference_samples(config)?;

    let (model, pretrain_outcome) = prepare_ampc_model(config)?;
    let mut ampc =
        NplptController::new(config.ampc.problem.clone(), model, config.ampc.armijo)
            .map_err(|e| RunError::Config(ConfigError::Invalid(e.to_string())))?;

    let mut hdl_rng = ChaCha8Rng::seed_from_u64(config.seed ^ HDLNNC_SALT);
    let hdl_config = config.hdlnnc.to_core(config.steps());
    let mut hdlnnc = HdlnncController::new(&hdl_config, &mut hdl_rng)
        .map_err(|e| RunError::Config(ConfigError::Invalid(e)))?;

    let mut traces = BTreeMap::new();
    let mut aborted = BTreeMap::new();

    let (trace, abort) = run_loop(config, &references, |r, y| {
        hdlnnc.control_step(r, y).map_err(|e| e.to_string())
    });
    if let Some(msg) = abort {
        aborted.insert(HDLNNC_ID.to_string(), msg);
    }
    traces.insert(HDLNNC_ID.to_string(), trace);

    let (trace, abort) = run_loop(config, &references, |r, y| Ok(ampc.control_step(r, y)));
    if let Some(msg) = abort {
        aborted.insert(AMPC_ID.to_string(), msg);
    }
    traces.insert(AMPC_ID.to_string(), trace);

    let stats = RunStats {
        pretrain: pretrain_outcome,
        hdlnnc_model_total_abs_error: hdlnnc.model.total_abs_error,
        ampc_held_steps: ampc.diagnostics.held_steps,
    };
    Ok((traces, aborted, stats))
}

#[derive(Debug, Clone)]
pub struct RunStats {
    pub pretrain: PretrainOutcome,
    pub hdlnnc_model_total_abs_error: f64,
    pub ampc_held_steps: u64,
}

/// Full scenario run: simulate, measure, and write every artifact.
pub fn run_scenario(config: &ScenarioConfig, out_dir: &Path) -> Result<RunArtifacts, RunError> {
    let started = Instant::now();
    std::fs::create_dir_all(out_dir)?;
    let (traces, aborted, stats) = simulate(config)?;

    let mut trace_paths = BTreeMap::new();
    for (id, trace) in &traces {
        let path = out_dir.join(format!("trace_{id}.csv"));
        trace_io::write_trace_csv(&path, trace, aborted.get(id).map(String::as_str))?;
        trace_paths.insert(id.clone(), path);
    }

    // Windowed metrics for both controllers.
    let mut entries = Vec::new();
    for (id, trace) in &traces {
        for &window in &config.windows {
            match icqi(trace, window) {
                Ok(values) => entries.push(IcqiEntry {
                    window,
                    controller: id.clone(),
                    iae: values.iae,
                    ise: values.ise,
                    itae: values.itae,
                }),
                Err(e) => log::warn!("{id}: skipping window [{}, {}): {e}", window.0, window.1),
            }
        }
    }
    let report = IcqiReport { entries };
    let report_json = out_dir.join("report.json");
    let report_text = out_dir.join("report.txt");
    report::write_report_json(&report_json, &report)?;
    report::write_report_text(&report_text, &report, &config.windows)?;

    let mut plot_paths = Vec::new();
    if aborted.is_empty() {
        for &range in &config.plot_ranges {
            plot_paths.extend(plot::emit_plots(out_dir, &traces, range).map_err(RunError::Aborted)?);
        }
    }

    let ampc_audit = audit_constraints(
        &traces[AMPC_ID],
        config.ampc.problem.u_min,
        config.ampc.problem.u_max,
        config.ampc.problem.du_max,
    );
    if ampc_audit.box_violations + ampc_audit.rate_violations > 0 {
        log::warn!("constraint audit failed: {ampc_audit:?}");
    }

    let metadata = RunMetadata {
        scenario: config.name.clone(),
        seed: config.seed,
        config_sha256: config_hash(config),
        wall_time_s: started.elapsed().as_secs_f64(),
        pretrain_passes: stats.pretrain.passes,
        pretrain_final_mse: stats.pretrain.final_mse,
        pretrain_reached_target: stats.pretrain.reached_target,
        ampc_audit,
        hdlnnc_model_total_abs_error: stats.hdlnnc_model_total_abs_error,
        aborted: aborted.clone(),
    };
    std::fs::write(
        out_dir.join("metadata.json"),
        serde_json::to_string_pretty(&metadata).expect("metadata serializes"),
    )?;
    // The resolved config rides along so `report` can recompute everything.
    std::fs::write(out_dir.join("config.toml"), config.to_toml_string())?;

    let artifacts = RunArtifacts {
        out_dir: out_dir.to_path_buf(),
        trace_paths,
        traces,
        report,
        report_json,
        report_text,
        plot_paths,
        metadata,
    };
    if !aborted.is_empty() {
        let summary =
            aborted.iter().map(|(id, msg)| format!("{id}: {msg}")).collect::<Vec<_>>().join("; ");
        return Err(RunError::Aborted(summary));
    }
    Ok(artifacts)
}
