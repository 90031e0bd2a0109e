use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ids_core::config::ConfigDocument;
use ids_core::disambiguation::select_disambiguation_mode;
use ids_core::model::{BeliefState, Pose};
use ids_core::simulation::benchmark::BenchmarkRun;
use ids_core::simulation::trial::run_trial;
use ids_session::server::{serve, ServerSettings};
use ids_session::session::AxisScale;
use serde_json::json;

#[derive(Debug, Parser)]
#[command(name = "ids", version, about = "Goal inference and control-mode disambiguation for shared autonomy")]
struct Cli {
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct ConfigArg {
    /// JSON configuration file.
    #[arg(env = "IDS_CONFIG")]
    config: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run the simulated-operator benchmark for every predictor.
    Bench {
        #[command(flatten)]
        config: ConfigArg,
        /// Override the configured trial count.
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Run one scripted trial and write its log.
    Trial {
        #[command(flatten)]
        config: ConfigArg,
        /// Override the configured seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Print the disambiguation result for one state.
    Disamb {
        #[command(flatten)]
        config: ConfigArg,
        /// `x,y,z` or `x,y,z,qx,qy,qz,qw`; defaults to the configured start pose.
        #[arg(long, allow_hyphen_values = true)]
        pose: Option<String>,
        /// Comma-separated goal probabilities; defaults to uniform.
        #[arg(long, allow_hyphen_values = true)]
        belief: Option<String>,
    },
    /// Serve the teleoperation protocol until interrupted.
    Serve {
        #[command(flatten)]
        config: ConfigArg,
        #[arg(long, default_value_t = 8080)]
        port: u16,
        /// Session log directory; overrides the configured one.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

enum Failure {
    /// Bad arguments or configuration: exit 2.
    Usage(anyhow::Error),
    /// Anything that went wrong after the inputs were accepted: exit 1.
    Runtime(anyhow::Error),
}

impl Failure {
    fn usage(e: impl Into<anyhow::Error>) -> Self {
        Failure::Usage(e.into())
    }

    fn runtime(e: impl Into<anyhow::Error>) -> Self {
        Failure::Runtime(e.into())
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_tracing(cli.verbose);
    let result = match cli.command {
        Command::Bench { config, trials, out } => cmd_bench(&config.config, trials, &out),
        Command::Trial { config, seed, out } => cmd_trial(&config.config, seed, &out),
        Command::Disamb { config, pose, belief } => cmd_disamb(&config.config, pose.as_deref(), belief.as_deref()),
        Command::Serve { config, port, out } => cmd_serve(&config.config, port, out),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
        Err(Failure::Runtime(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_tracing(verbose: u8) {
    let level = match verbose {
        0 => "warn",
        1 => "info",
        2 => "debug",
        _ => "trace",
    };
    tracing_subscriber::fmt()
        .with_writer(std::io::stderr)
        .with_env_filter(tracing_subscriber::EnvFilter::new(level))
        .init();
}

fn load_config(path: &Path) -> Result<ConfigDocument, Failure> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("cannot read config {}", path.display()))
        .map_err(Failure::usage)?;
    ConfigDocument::from_json(&text)
        .with_context(|| format!("config {}", path.display()))
        .map_err(Failure::usage)
}

fn write_file(path: &Path, contents: &str) -> CmdResult {
    std::fs::write(path, contents)
        .with_context(|| format!("cannot write {}", path.display()))
        .map_err(Failure::runtime)
}

fn create_out_dir(dir: &Path) -> CmdResult {
    std::fs::create_dir_all(dir)
        .with_context(|| format!("cannot create output directory {}", dir.display()))
        .map_err(Failure::runtime)
}

fn cmd_bench(config: &Path, trials: Option<usize>, out: &Path) -> CmdResult {
    let doc = load_config(config)?;
    if trials == Some(0) {
        return Err(Failure::usage(anyhow::anyhow!("--trials must be at least 1")));
    }
    create_out_dir(out)?;
    tracing::info!(trials = trials.unwrap_or(doc.benchmark.trials), "running benchmark");
    let run = doc.run_benchmark(trials).map_err(Failure::runtime)?;
    let report = serde_json::to_string_pretty(&run.report).map_err(Failure::runtime)?;
    write_file(&out.join("benchmark-report.json"), &(report + "\n"))?;
    write_file(&out.join("benchmark-accuracy.csv"), &run.accuracy_csv())?;
    eprint!("{}", summary_table(&run));
    Ok(())
}

fn summary_table(run: &BenchmarkRun) -> String {
    let mut out = format!("{:<10} {:>9} {:>9}\n", "predictor", "mean %", "std %");
    for (kind, acc) in &run.report.accuracy {
        out.push_str(&format!(
            "{:<10} {:>9.2} {:>9.2}\n",
            kind.name(),
            acc.mean * 100.0,
            acc.std * 100.0
        ));
    }
    out.push_str(&format!(
        "{} trials, {:.1} steps per trial\n",
        run.report.trials, run.report.mean_trial_steps
    ));
    out
}

fn cmd_trial(config: &Path, seed: Option<u64>, out: &Path) -> CmdResult {
    let doc = load_config(config)?;
    let mut trial = doc.trial_config().map_err(Failure::usage)?;
    if let Some(s) = seed {
        trial.seed = s;
    }
    create_out_dir(out)?;
    let log = run_trial(&trial).map_err(Failure::runtime)?;
    let stem = format!("trial-{}", trial.seed);
    write_file(&out.join(format!("{stem}.csv")), &log.to_csv())?;
    let sidecar = json!({
        "seed": trial.seed,
        "predictor": trial.predictor,
        "steps": log.len(),
        "configDigest": doc.digest(),
        "config": doc,
    });
    let sidecar = serde_json::to_string_pretty(&sidecar).map_err(Failure::runtime)?;
    write_file(&out.join(format!("{stem}.json")), &(sidecar + "\n"))?;
    tracing::info!(seed = trial.seed, steps = log.len(), "trial written");
    Ok(())
}

fn parse_numbers(what: &str, text: &str) -> anyhow::Result<Vec<f64>> {
    let inner = text.trim().trim_start_matches('[').trim_end_matches(']');
    inner
        .split(',')
        .map(|s| {
            let s = s.trim();
            s.parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .with_context(|| format!("{what}: {s:?} is not a finite number"))
        })
        .collect()
}

fn parse_pose(text: &str) -> anyhow::Result<Pose> {
    let v = parse_numbers("pose", text)?;
    let json = match v.as_slice() {
        [x, y, z] => json!({"position": [x, y, z]}),
        [x, y, z, qx, qy, qz, qw] => json!({"position": [x, y, z], "orientation": [qx, qy, qz, qw]}),
        _ => anyhow::bail!("pose needs 3 or 7 numbers, got {}", v.len()),
    };
    serde_json::from_value(json).context("pose")
}

fn cmd_disamb(config: &Path, pose: Option<&str>, belief: Option<&str>) -> CmdResult {
    let doc = load_config(config)?;
    let trial = doc.trial_config().map_err(Failure::usage)?;
    let n = trial.scene.goal_count();
    let pose = match pose {
        Some(text) => parse_pose(text).map_err(Failure::usage)?,
        None => trial.start_pose,
    };
    let belief = match belief {
        Some(text) => {
            let values = parse_numbers("belief", text).map_err(Failure::usage)?;
            if values.len() != n {
                return Err(Failure::usage(anyhow::anyhow!(
                    "belief has {} entries but the scene has {n} goals",
                    values.len()
                )));
            }
            BeliefState::new(values).map_err(Failure::usage)?
        }
        None => BeliefState::uniform(n).map_err(Failure::usage)?,
    };
    let result = select_disambiguation_mode(
        &belief,
        &pose,
        &trial.interface,
        trial.initial_mode,
        &trial.disamb,
        &trial.field,
        &trial.scene,
        &trial.potential_field,
    )
    .map_err(Failure::runtime)?;
    println!("{}", serde_json::to_string_pretty(&result).map_err(Failure::runtime)?);
    Ok(())
}

fn cmd_serve(config: &Path, port: u16, out: Option<PathBuf>) -> CmdResult {
    let doc = load_config(config)?;
    let trial = doc.trial_config().map_err(Failure::usage)?;
    let settings = ServerSettings {
        trial,
        scale: AxisScale {
            translational: doc.teleop.translational_speed,
            rotational: doc.teleop.rotational_speed,
        },
        tick_hz: doc.teleop.tick_hz,
        log_dir: Some(out.or(doc.teleop.log_dir).unwrap_or_else(|| PathBuf::from("logs"))),
        static_dir: doc.teleop.static_dir,
    };
    let runtime = tokio::runtime::Runtime::new().map_err(Failure::runtime)?;
    runtime.block_on(async move {
        let listener = tokio::net::TcpListener::bind(("127.0.0.1", port))
            .await
            .with_context(|| format!("cannot bind port {port}"))
            .map_err(Failure::runtime)?;
        let addr = listener.local_addr().map_err(Failure::runtime)?;
        eprintln!("listening on http://{addr} (websocket at /ws)");
        serve(listener, settings, async {
            let _ = tokio::signal::ctrl_c().await;
            tracing::info!("interrupted; closing sessions");
        })
        .await
        .map_err(Failure::runtime)
    })
}
