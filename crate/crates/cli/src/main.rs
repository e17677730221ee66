//! `demoforge`: run the pipeline, single stages, resume or the benchmark.
//!
//! Exit codes: 0 when the invoked command fully succeeded, 2 when it
//! finished with recorded problems (dropped modules, a missing report, a
//! failed topic) and 1 on a fatal error. Logs go to stderr as one JSON
//! record per line; the result summary goes to stdout.

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Duration;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use demoforge::gateway::{Backend, OpenAiCompatBackend};
use demoforge::pipeline::{
    resume, run_benchmark, run_pipeline, run_stage, BenchmarkManifest, Environment, EngineKind, RunInputs, RunOptions,
};
use demoforge::{Gateway, GatewayConfig, GatewayMode, LogitCapability, PipelineConfig, RunManifest, RunStatus, Stage};

#[derive(Debug, Parser)]
#[command(name = "demoforge", version, about = "Turn a research document into an interactive demo site")]
struct Cli {
    #[command(flatten)]
    global: Global,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Global {
    /// Pipeline configuration file (TOML). Flags below override it.
    #[arg(long, global = true, env = "DEMOFORGE_CONFIG")]
    config: Option<PathBuf>,
    /// How model calls are served.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Replay)]
    gateway: ModeArg,
    /// Fixture directory for replay and record.
    #[arg(long, global = true, default_value = "fixtures")]
    fixtures: PathBuf,
    /// What the live backend reports for answer tokens.
    #[arg(long, global = true, value_enum, default_value_t = CapabilityArg::Logprobs)]
    logits: CapabilityArg,
    /// Per-request timeout of the live backend, in seconds.
    #[arg(long, global = true, default_value_t = 300)]
    request_timeout: u64,
    /// Concurrent model requests.
    #[arg(long, global = true, default_value_t = 4)]
    concurrency: usize,
    /// Append every model request and response to this JSON-lines file.
    #[arg(long, global = true)]
    request_log: Option<PathBuf>,
    /// Log filter, e.g. `info` or `demoforge=debug`.
    #[arg(long, global = true, env = "DEMOFORGE_LOG", default_value = "info")]
    log: String,
    #[command(flatten)]
    overrides: Overrides,
}

/// Overrides for fresh runs; stage commands and resume use the
/// configuration stored in the run manifest.
#[derive(Debug, Args)]
struct Overrides {
    /// Candidates per module.
    #[arg(long, global = true)]
    attempts: Option<u32>,
    /// Trajectory frames shown to the reviewer.
    #[arg(long, global = true)]
    screenshot_budget: Option<usize>,
    /// Pixel-diff threshold for a visible change.
    #[arg(long, global = true)]
    epsilon: Option<f64>,
    /// Seed of the random interaction probe.
    #[arg(long, global = true)]
    probe_seed: Option<u64>,
    /// Probe steps; defaults to twice the interactive element count.
    #[arg(long, global = true)]
    probe_budget: Option<usize>,
    #[arg(long, global = true, value_enum)]
    engine: Option<EngineArg>,
    /// Scaffold directory replacing the built-in static scaffold.
    #[arg(long, global = true)]
    scaffold: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Replay,
    Record,
    Live,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum CapabilityArg {
    Raw,
    Logprobs,
    None,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum EngineArg {
    Raster,
    Chrome,
}

#[derive(Debug, Args)]
struct NewRun {
    /// Input document (PDF).
    #[arg(long)]
    paper: PathBuf,
    /// Checklist for the evaluation (TOML).
    #[arg(long)]
    checklist: Option<PathBuf>,
    /// Run directory; must not hold a run yet.
    #[arg(long)]
    run_dir: PathBuf,
}

#[derive(Debug, Args)]
struct ExistingRun {
    #[arg(long)]
    run_dir: PathBuf,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Ingest the document and plan its modules.
    Plan(NewRun),
    /// Sample candidate blocks for every module.
    Generate(ExistingRun),
    /// Compile and screenshot every candidate.
    Build(ExistingRun),
    /// Score candidates and select one per module.
    Score(ExistingRun),
    /// Merge the selected blocks and package the site.
    Merge(ExistingRun),
    /// Evaluate the packaged site.
    Eval(ExistingRun),
    /// Run every stage.
    Run {
        #[command(flatten)]
        run: NewRun,
        /// Stop after this stage, leaving a resumable run.
        #[arg(long)]
        stop_after: Option<Stage>,
    },
    /// Continue a run from its first incomplete stage.
    Resume(ExistingRun),
    /// Run every topic of a benchmark manifest.
    Bench {
        /// CSV with `abbrev,topic,domain,originating_work,checklist,paper`.
        #[arg(long)]
        manifest: PathBuf,
        /// One run directory per topic is created here.
        #[arg(long)]
        runs: PathBuf,
        /// Topics run concurrently.
        #[arg(long, default_value_t = 2)]
        parallel: usize,
        /// Write the JSON report here as well as to stdout.
        #[arg(long)]
        report: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    init_logging(&cli.global.log);
    match execute(&cli) {
        Ok(code) => code,
        Err(e) => {
            tracing::error!(error = format!("{e:#}"), "command failed");
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn init_logging(filter: &str) {
    let filter = tracing_subscriber::EnvFilter::try_new(filter).unwrap_or_else(|_| tracing_subscriber::EnvFilter::new("info"));
    tracing_subscriber::fmt().json().with_env_filter(filter).with_writer(std::io::stderr).with_current_span(false).init();
}

fn execute(cli: &Cli) -> Result<ExitCode> {
    let g = &cli.global;
    match &cli.command {
        Command::Plan(run) => fresh_run(g, run, Some(Stage::Plan)),
        Command::Run { run, stop_after } => fresh_run(g, run, *stop_after),
        Command::Generate(r) => single_stage(g, &r.run_dir, Stage::Generate),
        Command::Build(r) => single_stage(g, &r.run_dir, Stage::Build),
        Command::Score(r) => single_stage(g, &r.run_dir, Stage::Score),
        Command::Merge(r) => single_stage(g, &r.run_dir, Stage::Merge),
        Command::Eval(r) => single_stage(g, &r.run_dir, Stage::Eval),
        Command::Resume(r) => {
            let manifest = RunManifest::load(&r.run_dir)?;
            let gateway = gateway(g)?;
            let env = Environment::new(&manifest.config, &gateway)?;
            let manifest = resume(&env, &r.run_dir, &RunOptions::default())?;
            Ok(report_run(&manifest, None))
        }
        Command::Bench { manifest, runs, parallel, report } => {
            let config = config(g)?;
            let topics = BenchmarkManifest::load(manifest)?;
            let gateway = gateway(g)?;
            let result = run_benchmark(&topics, &config, &gateway, runs, *parallel)?;
            let json = serde_json::to_string_pretty(&result)?;
            if let Some(path) = report {
                std::fs::write(path, format!("{json}\n")).with_context(|| format!("writing {}", path.display()))?;
            }
            println!("{json}");
            let all_complete = result.rows.iter().all(|r| r.status == RunStatus::Complete);
            Ok(if all_complete { ExitCode::SUCCESS } else { ExitCode::from(2) })
        }
    }
}

fn fresh_run(g: &Global, run: &NewRun, stop_after: Option<Stage>) -> Result<ExitCode> {
    let config = config(g)?;
    let gateway = gateway(g)?;
    let env = Environment::new(&config, &gateway)?;
    let inputs = RunInputs { paper: run.paper.clone(), checklist: run.checklist.clone() };
    let manifest = run_pipeline(&inputs, &config, &env, &run.run_dir, &RunOptions { stop_after })?;
    Ok(report_run(&manifest, stop_after))
}

fn single_stage(g: &Global, run_dir: &Path, stage: Stage) -> Result<ExitCode> {
    let manifest = RunManifest::load(run_dir)?;
    let gateway = gateway(g)?;
    let env = Environment::new(&manifest.config, &gateway)?;
    let manifest = run_stage(&env, run_dir, stage)?;
    Ok(report_run(&manifest, Some(stage)))
}

/// Prints the summary and maps the outcome to an exit code. A stage counts
/// as fully successful when it recorded no problem of its own.
fn report_run(m: &RunManifest, last: Option<Stage>) -> ExitCode {
    let summary = serde_json::json!({
        "run_id": m.run_id,
        "status": m.status,
        "stages_completed": m.stages_completed,
        "dropped_modules": m.dropped_modules,
        "errors": m.errors,
        "evaluation": m.evaluation.as_ref().map(|e| &e.summary),
    });
    println!("{summary}");
    let ok = match last.filter(|s| *s != Stage::Eval) {
        None | Some(Stage::Eval) => m.status == RunStatus::Complete,
        Some(stage) => {
            let own_errors = m.errors.iter().any(|e| e.starts_with(&format!("{}:", stage.as_str())));
            let dropped = stage >= Stage::Score && !m.dropped_modules.is_empty();
            m.status != RunStatus::Failed && !own_errors && !dropped
        }
    };
    if ok {
        ExitCode::SUCCESS
    } else if m.status == RunStatus::Failed {
        ExitCode::from(1)
    } else {
        ExitCode::from(2)
    }
}

fn config(g: &Global) -> Result<PipelineConfig> {
    let mut c = match &g.config {
        Some(path) => PipelineConfig::load(path)?,
        None => PipelineConfig::default(),
    };
    let o = &g.overrides;
    if let Some(v) = o.attempts {
        c.attempts = v;
    }
    if o.screenshot_budget.is_some() {
        c.screenshot_budget = o.screenshot_budget;
    }
    if let Some(v) = o.epsilon {
        c.epsilon = v;
    }
    if let Some(v) = o.probe_seed {
        c.probe_seed = v;
    }
    if o.probe_budget.is_some() {
        c.probe_budget = o.probe_budget;
    }
    if let Some(e) = o.engine {
        c.engine = match e {
            EngineArg::Raster => EngineKind::Raster,
            EngineArg::Chrome => EngineKind::Chrome,
        };
    }
    if o.scaffold.is_some() {
        c.scaffold = o.scaffold.clone();
    }
    c.validate()?;
    Ok(c)
}

fn gateway(g: &Global) -> Result<Gateway> {
    let mode = match g.gateway {
        ModeArg::Replay => GatewayMode::Replay,
        ModeArg::Record => GatewayMode::Record,
        ModeArg::Live => GatewayMode::Live,
    };
    let backend: Option<Arc<dyn Backend>> = match mode {
        GatewayMode::Replay => None,
        _ => {
            let capability = match g.logits {
                CapabilityArg::Raw => LogitCapability::Raw,
                CapabilityArg::Logprobs => LogitCapability::LogProbs,
                CapabilityArg::None => LogitCapability::None,
            };
            let b = OpenAiCompatBackend::from_env(capability, Duration::from_secs(g.request_timeout))?;
            Some(Arc::new(b))
        }
    };
    if mode == GatewayMode::Replay && !g.fixtures.is_dir() {
        bail!("fixture directory {} does not exist", g.fixtures.display());
    }
    let config = GatewayConfig {
        mode,
        fixtures_dir: g.fixtures.clone(),
        concurrency: g.concurrency.max(1),
        log_path: g.request_log.clone(),
        ..GatewayConfig::default()
    };
    Ok(Gateway::new(config, backend)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flags_override_the_config_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("c.toml");
        std::fs::write(&path, "attempts = 2\nprobe_seed = 9\n").unwrap();
        let cli = Cli::parse_from(["demoforge", "--config", path.to_str().unwrap(), "--attempts", "5", "resume", "--run-dir", "x"]);
        let c = config(&cli.global).unwrap();
        assert_eq!((c.attempts, c.probe_seed), (5, 9));
        let bad = Cli::parse_from(["demoforge", "--attempts", "9", "resume", "--run-dir", "x"]);
        assert!(config(&bad.global).is_err());
    }

    #[test]
    fn stage_names_parse() {
        let cli = Cli::parse_from(["demoforge", "run", "--paper", "p.pdf", "--run-dir", "r", "--stop-after", "score"]);
        assert!(matches!(cli.command, Command::Run { stop_after: Some(Stage::Score), .. }));
        assert!(Cli::try_parse_from(["demoforge", "run", "--paper", "p", "--run-dir", "r", "--stop-after", "ship"]).is_err());
    }
}
