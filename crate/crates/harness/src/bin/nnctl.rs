//! Command line for the adaptive-controller workbench.
//!
//! Exit codes: 0 success, 1 simulation abort, 2 configuration error.

use clap::{Parser, Subcommand};
use nnctl_harness::config::{builtin_scenario, ScenarioConfig};
use nnctl_harness::run::{prepare_ampc_model, run_scenario, RunError};
use nnctl_harness::{report, trace_io};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "nnctl", about = "Adaptive-controller benchmark workbench", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Pretrain the predictive controller's process model and save it.
    Pretrain {
        /// Scenario config (TOML); defines plant, sampling and excitation.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in scenario name instead of a config file.
        #[arg(long)]
        scenario: Option<String>,
        /// Output model snapshot (JSON).
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Override the configured MSE stop target.
        #[arg(long)]
        mse_target: Option<f64>,
    },
    /// Run a scenario: both controllers, traces, report and plots.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Built-in scenario: a_no_delay, b_delay or desk.
        #[arg(long)]
        scenario: Option<String>,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// Recompute and print the report for a finished run directory.
    Report {
        /// Run directory produced by `run`.
        #[arg(long, name = "in")]
        in_dir: PathBuf,
    },
}

fn load_config(
    config: Option<PathBuf>,
    scenario: Option<String>,
    seed: Option<u64>,
) -> Result<ScenarioConfig, String> {
    let mut resolved = match (config, scenario) {
        (Some(_), Some(_)) => {
            return Err("pass either --config or --scenario, not both".into());
        }
        (Some(path), None) => {
            ScenarioConfig::from_toml_file(&path).map_err(|e| e.to_string())?
        }
        (None, Some(name)) => builtin_scenario(&name)
            .ok_or_else(|| format!("unknown scenario '{name}' (try a_no_delay, b_delay, desk)"))?,
        (None, None) => return Err("one of --config or --scenario is required".into()),
    };
    if let Some(seed) = seed {
        resolved.seed = seed;
    }
    Ok(resolved)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    match cli.command {
        Command::Pretrain { config, scenario, out, seed, mse_target } => {
            let mut config = match load_config(config, scenario, seed) {
                Ok(c) => c,
                Err(e) => return config_failure(&e),
            };
            if let Some(target) = mse_target {
                config.ampc.pretrain.mse_target = target;
            }
            // Always pretrain here, even if the config points at a snapshot.
            config.ampc.pretrained_model = None;
            match prepare_ampc_model(&config) {
                Ok((model, outcome)) => {
                    if let Err(e) = nnctl_core::ann::snapshot::save_json(&out, &model) {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                    println!(
                        "pretrained in {} passes, final mse {:.6e}{}; model written to {}",
                        outcome.passes,
                        outcome.final_mse,
                        if outcome.reached_target { " (target reached)" } else { "" },
                        out.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(RunError::Config(e)) => config_failure(&e.to_string()),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Run { config, scenario, seed, out } => {
            let config = match load_config(config, scenario, seed) {
                Ok(c) => c,
                Err(e) => return config_failure(&e),
            };
            match run_scenario(&config, &out) {
                Ok(artifacts) => {
                    println!(
                        "run complete: {} steps, artifacts in {}",
                        config.steps(),
                        artifacts.out_dir.display()
                    );
                    print!("{}", report::render_text_table(&artifacts.report, &config.windows));
                    ExitCode::SUCCESS
                }
                Err(RunError::Config(e)) => config_failure(&e.to_string()),
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            }
        }
        Command::Report { in_dir } => {
            let config = match ScenarioConfig::from_toml_file(&in_dir.join("config.toml")) {
                Ok(c) => c,
                Err(e) => return config_failure(&e.to_string()),
            };
            let mut entries = Vec::new();
            for id in [nnctl_harness::HDLNNC_ID, nnctl_harness::AMPC_ID] {
                let path = in_dir.join(format!("trace_{id}.csv"));
                let (trace, marker) = match trace_io::read_trace_csv(&path) {
                    Ok(r) => r,
                    Err(e) => {
                        eprintln!("error: {e}");
                        return ExitCode::from(1);
                    }
                };
                if let Some(marker) = marker {
                    eprintln!("note: {id} trace was aborted: {marker}");
                }
                for &window in &config.windows {
                    if let Ok(v) = nnctl_core::metrics::icqi(&trace, window) {
                        entries.push(nnctl_core::metrics::IcqiEntry {
                            window,
                            controller: id.to_string(),
                            iae: v.iae,
                            ise: v.ise,
                            itae: v.itae,
                        });
                    }
                }
            }
            let report_data = nnctl_core::metrics::IcqiReport { entries };
            print!("{}", report::render_text_table(&report_data, &config.windows));
            ExitCode::SUCCESS
        }
    }
}

fn config_failure(message: &str) -> ExitCode {
    eprintln!("config error: {message}");
    ExitCode::from(2)
}
