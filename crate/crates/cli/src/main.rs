//! `gaitspace` command line: corpus synthesis, training, scripted rollouts,
//! evaluation suites and the live session host.
//!
//! Exit codes: 0 success, 1 runtime failure (including failed evaluation
//! criteria), 2 usage error. Every failure ends with one JSON line on stderr:
//! `{"error":{"kind":"...","message":"..."}}`.

use std::fmt::Write as _;
use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::AtomicBool;
use std::sync::Arc;

use clap::{Parser, Subcommand, ValueEnum};
use gaitspace::config::{Preset, RunConfig};
use gaitspace::experiments::{
    detection_experiment, envelope_experiment, loop_budget, schedule_experiment, MAX_RECOVERY_STEPS,
};
use gaitspace::formats::{load_checkpoint, read_dataset, save_checkpoint, write_dataset, write_json, Checkpoint};
use gaitspace::pipeline::{
    calibrated_planner, generate_dataset, held_out_fit, latent_structure, nominal_scenario, train_and_identify,
    Evaluation,
};
use gaitspace::planner::DEFAULT_K_SIGMA;
use gaitspace::service::{serve, Session};
use gaitspace::sim::{run_rollout, Scenario};
use gaitspace::vae::{check_loss_gradients, gait_frequency, Batch, VaeNetworks};
use serde_json::json;
use sha2::{Digest, Sha256};

#[derive(Parser, Debug)]
#[command(name = "gaitspace", version, about = "Latent-space trot planner")]
struct Cli {
    /// TOML run configuration; defaults to the desk preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Preset used when no configuration file is given.
    #[arg(long, global = true, value_enum)]
    preset: Option<PresetArg>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum PresetArg {
    Desk,
    Full,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum Suite {
    Gradcheck,
    Clustering,
    Contacts,
    Envelope,
    Detection,
    Schedule,
    Budget,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Synthesize oracle trot trajectories into a binary dataset.
    GenData {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, env = "GAITSPACE_SEED")]
        seed: Option<u64>,
    },
    /// Train the model, identify the drive dimension and write a checkpoint.
    Train {
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        steps: Option<usize>,
        #[arg(long, env = "GAITSPACE_SEED")]
        seed: Option<u64>,
        /// Per-step loss terms as CSV.
        #[arg(long)]
        loss_csv: Option<PathBuf>,
    },
    /// Run a scripted scenario in closed loop and write a JSON report.
    Rollout {
        #[arg(long)]
        model: Option<PathBuf>,
        /// Scenario timeline, TOML or JSON.
        #[arg(long)]
        scenario: PathBuf,
        /// Report path; stdout when absent.
        #[arg(long)]
        report: Option<PathBuf>,
        /// Disturbance threshold; calibrated on the scenario's nominal run when absent.
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long, env = "GAITSPACE_SEED")]
        seed: Option<u64>,
    },
    /// Run an evaluation suite and print a pass/fail table as CSV.
    Eval {
        #[arg(long, value_enum)]
        suite: Suite,
        #[arg(long)]
        model: Option<PathBuf>,
        /// Dataset the model was trained on (clustering and contacts suites).
        #[arg(long)]
        data: Option<PathBuf>,
        /// Detailed per-item CSV for the envelope and schedule suites.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long, env = "GAITSPACE_SEED")]
        seed: Option<u64>,
    },
    /// Host the live session over WebSocket.
    Serve {
        #[arg(long)]
        model: Option<PathBuf>,
        #[arg(long)]
        port: Option<u16>,
        #[arg(long)]
        bind: Option<String>,
        #[arg(long, env = "GAITSPACE_SEED")]
        seed: Option<u64>,
    },
}

enum Failure {
    Usage(String),
    Runtime(gaitspace::Error),
    Criteria(String),
}

impl From<gaitspace::Error> for Failure {
    fn from(e: gaitspace::Error) -> Self {
        Failure::Runtime(e)
    }
}

fn error_line(kind: &str, message: &str) -> String {
    json!({ "error": { "kind": kind, "message": message } }).to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            eprintln!("{}", error_line("usage", e.kind().as_str().unwrap_or("invalid arguments")));
            return ExitCode::from(2);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(message)) => {
            eprintln!("{}", error_line("usage", &message));
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("{}", error_line(e.kind(), &e.to_string()));
            ExitCode::from(1)
        }
        Err(Failure::Criteria(message)) => {
            eprintln!("{}", error_line("criteria_failed", &message));
            ExitCode::from(1)
        }
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Failure> {
    match (&cli.config, cli.preset) {
        (Some(path), _) => Ok(RunConfig::load(path)?),
        (None, Some(PresetArg::Full)) => Ok(RunConfig::preset(Preset::Full)),
        (None, _) => Ok(RunConfig::desk()),
    }
}

fn require<'a>(path: &'a Option<PathBuf>, flag: &str, why: &str) -> Result<&'a Path, Failure> {
    path.as_deref().ok_or_else(|| Failure::Usage(format!("--{flag} is required {why}")))
}

fn run(cli: Cli) -> Result<(), Failure> {
    let mut config = load_config(&cli)?;
    match cli.command {
        Command::GenData { out, seed } => {
            let seed = seed.unwrap_or(config.seed);
            let dataset = generate_dataset(&config, seed)?;
            write_dataset(&out, &dataset)?;
            let bytes = std::fs::read(&out).map_err(|e| gaitspace::Error::io(&out, e))?;
            println!(
                "{}",
                json!({
                    "out": out,
                    "seed": seed,
                    "trajectories": dataset.trajectories.len(),
                    "ticks": dataset.total_ticks(),
                    "sha256": hex(&Sha256::digest(&bytes)),
                })
            );
            Ok(())
        }
        Command::Train { data, out, steps, seed, loss_csv } => {
            if let Some(steps) = steps {
                config.training.steps = steps;
            }
            if let Some(seed) = seed {
                config.training.seed = seed;
            }
            let dataset = read_dataset(&data)?;
            let trained = train_and_identify(&dataset, &config)?;
            let summary = trained.loss_summary();
            save_checkpoint(&out, &Checkpoint::new(trained.outcome.model.clone(), trained.metadata.clone()))?;
            if let Some(path) = loss_csv {
                let mut csv = String::from("step,total,reconstruction,kl,bce\n");
                for (i, l) in trained.outcome.history.iter().enumerate() {
                    let _ = writeln!(csv, "{i},{},{},{},{}", l.total, l.reconstruction, l.kl, l.bce);
                }
                std::fs::write(&path, csv).map_err(|e| gaitspace::Error::io(&path, e))?;
            }
            println!(
                "{}",
                json!({
                    "out": out,
                    "seed": config.training.seed,
                    "steps": summary.steps,
                    "loss_initial": summary.initial,
                    "loss_final": summary.last,
                    "loss_drop": summary.drop_fraction(),
                    "drive_dimension": trained.identification.dimension,
                    "drive_power_ratio": trained.identification.power_ratio_to_median(),
                    "held_out_mse": trained.metadata.held_out_mse,
                })
            );
            Ok(())
        }
        Command::Rollout { model, scenario, report, threshold, seed } => {
            let model = load_checkpoint(require(&model, "model", "for rollout")?)?.model;
            let seed = seed.unwrap_or(config.seed);
            let scenario = load_scenario(&scenario)?;
            let (options, calibration) = match threshold {
                Some(t) => (gaitspace::planner::PlannerOptions { threshold: t, ..config.planner.clone() }, None),
                None if config.planner.threshold.is_finite() => (config.planner.clone(), None),
                None => {
                    let (o, c) = calibrated_planner(&model, &config, &scenario, seed)?;
                    (o, Some(c))
                }
            };
            let result = run_rollout(&model, &options, &config.sim, &scenario, seed)?;
            let doc = json!({ "seed": seed, "calibration": calibration, "report": result });
            match report {
                Some(path) => write_json(&path, &doc)?,
                None => println!("{doc}"),
            }
            Ok(())
        }
        Command::Eval { suite, model, data, csv, seed } => {
            let seed = seed.unwrap_or(config.seed);
            let table = eval(&config, suite, model.as_deref(), data.as_deref(), csv.as_deref(), seed)?;
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "suite,criterion,value,target,result");
            for row in &table {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{}",
                    row.suite,
                    row.criterion,
                    row.value,
                    row.target,
                    if row.pass { "PASS" } else { "FAIL" }
                );
            }
            let failed: Vec<&str> = table.iter().filter(|r| !r.pass).map(|r| r.criterion.as_str()).collect();
            if failed.is_empty() {
                Ok(())
            } else {
                Err(Failure::Criteria(format!("failed: {}", failed.join(", "))))
            }
        }
        Command::Serve { model, port, bind, seed } => {
            let model = load_checkpoint(require(&model, "model", "for serve")?)?.model;
            let seed = seed.unwrap_or(config.seed);
            let scenario = nominal_scenario(&config, config.experiments.calibration_s);
            let options = if config.planner.threshold.is_finite() {
                config.planner.clone()
            } else {
                calibrated_planner(&model, &config, &scenario, seed)?.0
            };
            let bind = bind.unwrap_or_else(|| config.service.bind.clone());
            let port = port.unwrap_or(config.service.port);
            let addr = format!("{bind}:{port}");
            let listener = TcpListener::bind(&addr).map_err(|e| gaitspace::Error::io(&addr, e))?;
            let local = listener.local_addr().map_err(|e| gaitspace::Error::io(&addr, e))?;
            eprintln!("listening on ws://{local} (threshold {:.4})", options.threshold);
            let session = Session::new(model, options, config.sim.clone(), scenario, seed)?;
            let summary = serve(
                listener,
                session,
                config.service.telemetry_hz,
                config.service.client_queue,
                Arc::new(AtomicBool::new(false)),
            )?;
            eprintln!("session ended after {} ticks", summary.ticks);
            Ok(())
        }
    }
}

fn load_scenario(path: &Path) -> Result<Scenario, Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| gaitspace::Error::io(path, e))?;
    let scenario: Scenario = if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| gaitspace::Error::Config(format!("{}: {e}", path.display())))?
    } else {
        toml::from_str(&text).map_err(|e| gaitspace::Error::Config(format!("{}: {e}", path.display())))?
    };
    scenario.validate()?;
    Ok(scenario)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

struct Row {
    suite: &'static str,
    criterion: String,
    value: String,
    target: String,
    pass: bool,
}

fn row(suite: &'static str, criterion: &str, value: impl ToString, target: &str, pass: bool) -> Row {
    Row { suite, criterion: criterion.into(), value: value.to_string(), target: target.into(), pass }
}

fn write_text(path: &Path, text: &str) -> Result<(), Failure> {
    std::fs::write(path, text).map_err(|e| Failure::Runtime(gaitspace::Error::io(path, e)))
}

fn eval(
    config: &RunConfig,
    suite: Suite,
    model_path: Option<&Path>,
    data_path: Option<&Path>,
    csv: Option<&Path>,
    seed: u64,
) -> Result<Vec<Row>, Failure> {
    let model_path = model_path.map(Path::to_path_buf);
    if suite == Suite::Gradcheck {
        let networks = match &model_path {
            Some(p) => load_checkpoint(p)?.model.networks,
            None => VaeNetworks::new(&config.model, seed),
        };
        let batch = Batch::random(&config.model, 4, seed);
        let report = check_loss_gradients(&networks, &config.model, &batch, 10, 1e-5, 1e-4, seed)?;
        let max = report.max_relative_error();
        return Ok(vec![
            row("gradcheck", "coordinates", report.entries.len(), ">= 10 per layer", true),
            row("gradcheck", "max_relative_error", format!("{max:.3e}"), "< 1e-4", report.passed()),
        ]);
    }
    let checkpoint = load_checkpoint(require(&model_path, "model", "for this suite")?)?;
    let model = checkpoint.model;
    match suite {
        Suite::Gradcheck => unreachable!(),
        Suite::Clustering | Suite::Contacts => {
            let data = read_dataset(data_path.ok_or_else(|| Failure::Usage("--data is required for this suite".into()))?)?;
            let eval = Evaluation::new(&model, &data, config, checkpoint.training.seed)?;
            if suite == Suite::Clustering {
                let gait_hz = gait_frequency(config.gait.swing_duration, config.gait.full_stance_duration);
                let s = latent_structure(&model, &eval, gait_hz)?;
                Ok(vec![
                    row("clustering", "knn_stance_accuracy", format!("{:.4}", s.knn_accuracy), ">= 0.8", s.knn_accuracy >= 0.8),
                    row("clustering", "drive_power_ratio", format!("{:.2}", s.power_ratio), ">= 3", s.power_ratio >= 3.0),
                    row(
                        "clustering",
                        "drive_dimension",
                        s.drive_dimension,
                        &format!("checkpoint {:?}", model.drive_dimension),
                        model.drive_dimension == Some(s.drive_dimension),
                    ),
                ])
            } else {
                let fit = held_out_fit(&model, &eval)?;
                Ok(vec![
                    row("contacts", "per_tick_accuracy", format!("{:.4}", fit.contacts.per_tick), ">= 0.9", fit.contacts.per_tick >= 0.9),
                    row("contacts", "per_foot_accuracy", format!("{:.4}", fit.contacts.per_foot), "info", true),
                    row("contacts", "held_out_mse", format!("{:.4}", fit.reconstruction_mse), "info", true),
                ])
            }
        }
        Suite::Envelope | Suite::Detection => {
            let scenario = nominal_scenario(config, config.experiments.calibration_s);
            let (options, calibration) = calibrated_planner(&model, config, &scenario, seed)?;
            if suite == Suite::Envelope {
                let [with, without] = envelope_experiment(&model, config, &options, seed)?;
                if let Some(path) = csv {
                    let mut text = String::from("magnitude,recovered_with,fell_with,recovered_without,fell_without,trials\n");
                    for (a, b) in with.points.iter().zip(&without.points) {
                        let _ = writeln!(text, "{},{},{},{},{},{}", a.magnitude, a.recovered, a.fell, b.recovered, b.fell, a.trials);
                    }
                    write_text(path, &text)?;
                }
                let (w, wo) = (with.envelope.unwrap_or(0.0), without.envelope.unwrap_or(0.0));
                Ok(vec![
                    row("envelope", "envelope_with_response", w, "info", true),
                    row("envelope", "envelope_without_response", wo, "info", true),
                    row("envelope", "response_benefit", format!("{w} vs {wo}"), "with >= without", w >= wo),
                ])
            } else {
                let d = detection_experiment(&model, config, &options, calibration, seed)?;
                let rate = d.detection_rate();
                let recovered = d.recovered_within(MAX_RECOVERY_STEPS);
                Ok(vec![
                    row("detection", "threshold", format!("{:.4}", calibration.threshold), &format!("mean + {DEFAULT_K_SIGMA} sigma"), true),
                    row("detection", "detected_within_0.1s", format!("{}/{}", d.detected(), d.trials()), ">= 90%", rate >= 0.9),
                    row(
                        "detection",
                        "false_triggers_per_s",
                        format!("{:.5} ({} in {} s)", d.false_trigger_rate(), d.false_triggers, d.nominal_s),
                        "< 1/60",
                        d.false_trigger_rate() < 1.0 / 60.0,
                    ),
                    row(
                        "detection",
                        "recovered_within_5_steps",
                        format!("{recovered}/{} (max {:?})", d.trials(), d.max_recovery_steps()),
                        "all trials",
                        recovered == d.trials(),
                    ),
                ])
            }
        }
        Suite::Schedule => {
            let s = schedule_experiment(&model, config, seed)?;
            if let Some(path) = csv {
                let mut text = String::from("from_tick,to_tick,swing_ticks,stance_ticks,executed_swing,executed_full_support,max_error_ticks\n");
                for g in &s.segments {
                    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(" ");
                    let _ = writeln!(
                        text,
                        "{},{},{},{},{},{},{}",
                        g.from_tick,
                        g.to_tick,
                        g.swing_ticks,
                        g.stance_ticks,
                        join(&g.executed_swing),
                        join(&g.executed_full_support),
                        g.max_error_ticks
                    );
                }
                write_text(path, &text)?;
            }
            let worst = s.segments.iter().map(|g| g.max_error_ticks).max().unwrap_or(0);
            Ok(vec![
                row("schedule", "max_duration_error_ticks", worst, "<= 1", s.within(1)),
                row("schedule", "standing_after_zero_amplitude", s.standing, "true", s.standing),
            ])
        }
        Suite::Budget => {
            let b = loop_budget(&model, config, 10.0, seed)?;
            Ok(vec![
                row("budget", "mean_plan_tick_s", format!("{:.6}", b.mean_s), &format!("< {}", b.period_s), b.mean_s < b.period_s),
                row("budget", "max_plan_tick_s", format!("{:.6}", b.max_s), "info", true),
            ])
        }
    }
}
