use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};

use phasevo::checkpoint::{load_checkpoint, save_checkpoint, Checkpoint};
use phasevo::config::{BackendKind, Settings};
use phasevo::engine::{Control, Engine, Outcome, RunMode};
use phasevo::gateway::{Backend, Gateway, LiveBackend, ReplayBackend, ResponseCache, RetryPolicy};
use phasevo::lab::{run_lab, write_lab_csv};
use phasevo::landscape::{synthetic_task, SyntheticLandscape};
use phasevo::operators::templates::verify_templates;
use phasevo::report::emit_report;
use phasevo::task::{load_task, SplitCounts, TaskFile};

const CHECKPOINT_FILE: &str = "checkpoint.json";

#[derive(Parser)]
#[command(name = "phasevo", version, about = "Phased evolutionary prompt optimizer")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Live,
    Mock,
    Replay,
}

impl From<BackendArg> for BackendKind {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Live => BackendKind::Live,
            BackendArg::Mock => BackendKind::Mock,
            BackendArg::Replay => BackendKind::Replay,
        }
    }
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    task: PathBuf,
    #[arg(long)]
    config: PathBuf,
    #[arg(long, value_enum)]
    backend: Option<BackendArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "phasevo-out")]
    out: PathBuf,
    /// Stop after this many steps, leaving a resumable checkpoint.
    #[arg(long)]
    max_steps: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Optimize a prompt for a task.
    Run(RunArgs),
    /// Continue an interrupted run from its checkpoint.
    Resume {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Output directory; defaults to the checkpoint's directory.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        max_steps: Option<usize>,
    },
    /// Write CSV traces and a summary from a checkpoint.
    Report {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Measure per-operator improvement odds on the synthetic landscape.
    Lab {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "phasevo-lab")]
        out: PathBuf,
    },
    /// Random-evolution baseline: same initialization, random operators.
    Baseline {
        #[command(flatten)]
        run: RunArgs,
        #[arg(long)]
        iterations: usize,
    },
}

/// A failure the user caused on the command line.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(Usage(format!("file not found: {}", path.display())).into());
    }
    Ok(())
}

fn build_gateway(settings: &Settings, task: &TaskFile) -> Result<Gateway> {
    let b = &settings.backend;
    let backend: Arc<dyn Backend> = match b.backend {
        BackendKind::Mock => Arc::new(Arc::new(SyntheticLandscape::new(&b.mock_target, task)).backend()),
        BackendKind::Live => Arc::new(LiveBackend::from_env(b.endpoint.clone(), b.model.clone())?),
        BackendKind::Replay => {
            let path = b
                .replay_cache
                .as_ref()
                .context("the replay backend needs replay_cache in the config")?;
            Arc::new(ReplayBackend::open(path)?)
        }
    };
    let mut gateway = Gateway::new(backend)
        .with_retry(RetryPolicy {
            attempts: b.retry_attempts,
            base_delay: Duration::from_millis(b.retry_base_ms),
        })
        .with_max_in_flight(b.max_in_flight);
    if let (Some(path), false) = (&b.replay_cache, b.backend == BackendKind::Replay) {
        gateway = gateway.with_cache(ResponseCache::open(path)?);
    }
    Ok(gateway)
}

/// Steps the engine, checkpointing after every step.
fn drive(engine: &mut Engine<'_>, settings: &Settings, task: &TaskFile, gateway: &Gateway, out: &Path, max_steps: Option<usize>) -> Result<()> {
    let checkpoint = out.join(CHECKPOINT_FILE);
    let mut steps = 0usize;
    let outcome = engine.run_with(|e| {
        save_checkpoint(&checkpoint, &Checkpoint::capture(settings, task, e, gateway)?)?;
        steps += 1;
        Ok(match max_steps {
            Some(n) if steps >= n => Control::Stop,
            _ => Control::Continue,
        })
    })?;
    match outcome {
        Outcome::Finished { best, record } => {
            emit_report(&record, Some(&best), &gateway.ledger_snapshot(), out)?;
            println!("{}", best.text);
            log::info!(
                "finished best={} score={:.4} iterations={} out={}",
                best.id,
                best.dev_score.unwrap_or(0.0),
                record.total_iterations,
                out.display()
            );
        }
        Outcome::Stopped => {
            log::info!("stopped checkpoint={}", checkpoint.display());
            eprintln!("stopped; resume with: phasevo resume --checkpoint {}", checkpoint.display());
        }
    }
    Ok(())
}

fn start(args: &RunArgs, mode: RunMode) -> Result<()> {
    require_file(&args.task)?;
    require_file(&args.config)?;
    let mut settings = Settings::load(&args.config)?;
    if let Some(b) = args.backend {
        settings.backend.backend = b.into();
    }
    if let Some(seed) = args.seed {
        settings.run.rng_seed = seed;
    }
    let task = load_task(&args.task)?;
    let gateway = build_gateway(&settings, &task)?;
    let mut engine = Engine::new(&settings.run, &task, &gateway, mode)?;
    drive(&mut engine, &settings, &task, &gateway, &args.out, args.max_steps)
}

fn resume(checkpoint: &Path, out: Option<PathBuf>, max_steps: Option<usize>) -> Result<()> {
    require_file(checkpoint)?;
    let cp = load_checkpoint(checkpoint)?;
    if cp.engine.is_done() {
        println!("already Done");
        return Ok(());
    }
    let out = out.unwrap_or_else(|| match checkpoint.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    });
    let gateway = build_gateway(&cp.settings, &cp.task)?;
    let mut engine = cp.resume(&gateway)?;
    drive(&mut engine, &cp.settings, &cp.task, &gateway, &out, max_steps)
}

fn report(checkpoint: &Path, out: &Path) -> Result<()> {
    require_file(checkpoint)?;
    let cp = load_checkpoint(checkpoint)?;
    let record = &cp.engine.record;
    let best = record
        .best
        .clone()
        .or_else(|| cp.engine.population.as_ref().and_then(|p| p.best().cloned()));
    emit_report(record, best.as_ref(), &cp.ledger, out)?;
    log::info!("report out={}", out.display());
    Ok(())
}

fn lab(config: &Path, seed: Option<u64>, out: &Path) -> Result<()> {
    require_file(config)?;
    let settings = Settings::load(config)?;
    let seed = seed.unwrap_or(settings.run.rng_seed);
    let task = synthetic_task("lab", seed, SplitCounts::new(20, 50, 0))?;
    let landscape = Arc::new(SyntheticLandscape::new(&settings.backend.mock_target, &task));
    let gateway = Gateway::new(Arc::new(landscape.backend()));
    let stats = run_lab(
        &settings.lab,
        seed,
        settings.run.operator_temperature,
        settings.run.execution,
        &gateway,
        landscape.as_ref(),
    )?;
    write_lab_csv(&stats, out)?;
    for s in &stats.operators {
        println!("{:<20} {:>4}/{:<4} improved", s.operator.name(), s.improvements, s.applications);
    }
    Ok(())
}

fn execute(command: Command) -> Result<()> {
    verify_templates()?;
    match command {
        Command::Run(args) => start(&args, RunMode::Phased),
        Command::Baseline { run, iterations } => start(&run, RunMode::Baseline { iterations }),
        Command::Resume { checkpoint, out, max_steps } => resume(&checkpoint, out, max_steps),
        Command::Report { checkpoint, out } => report(&checkpoint, &out),
        Command::Lab { config, seed, out } => lab(&config, seed, &out),
    }
}

fn init_logging() {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info"))
        .format(|buf, record| {
            writeln!(
                buf,
                "level={} target={} {}",
                record.level(),
                record.target(),
                record.args()
            )
        })
        .init();
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    init_logging();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::FAILURE
            }
        }
    }
}
