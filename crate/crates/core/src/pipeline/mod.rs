//! End-to-end driver: configuration, run directories, stage execution with
//! resume, and the benchmark runner.
//!
//! Run directory layout (paths relative to the run root):
//!
//! ```text
//! manifest.json            document.json           spec            checklist.toml
//! blocks/<m>/candidate-<n>/{source,response,build.log,site/,screenshot.png,score.json}
//! merged/{app-source,build.log,site/}
//! eval/{landing.png,descriptions.json,checklist.json,probe.json,review.json,
//!       failure.json,complexity.json,summary.json,trajectory/}
//! ```
//!
//! Each stage reads only what earlier stages persisted, so any stage can be
//! rerun or resumed from disk.

pub mod benchmark;
pub mod config;
pub mod manifest;
mod stages;

use std::path::Path;
use std::sync::Arc;

use thiserror::Error;

use crate::gateway::Gateway;
use crate::harness::cdp::CdpEngine;
use crate::harness::raster::RasterEngine;
use crate::harness::{BrowserEngine, RenderOptions, Renderer, Scaffold};
use crate::ingest::IngestError;
use crate::plan::PlanError;

pub use self::benchmark::{run_benchmark, BenchmarkError, BenchmarkManifest, BenchmarkReport, GroupRow, TopicEntry, TopicRow};
pub use self::config::{EngineKind, ExtractorKind, MatcherKind, ModelRoles, PipelineConfig};
pub use self::manifest::{RunManifest, RunStatus, Stage, ERROR_LOG, MANIFEST_FILE};
pub use self::stages::{resume, run_pipeline, run_stage, RunInputs, RunOptions};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("ingest failed: {0}")]
    Ingest(#[from] IngestError),
    #[error("planning failed: {0}")]
    Plan(#[from] PlanError),
    #[error("no run at {0}")]
    UnknownRun(String),
    #[error("run manifest is corrupt: {0}")]
    CorruptManifest(String),
    #[error("a run already exists at {0}")]
    RunExists(String),
    #[error("stage {stage} needs {needs} to have completed")]
    StageOrder { stage: &'static str, needs: &'static str },
    #[error("i/o: {0}")]
    Io(String),
}

impl From<std::io::Error> for PipelineError {
    fn from(e: std::io::Error) -> Self {
        PipelineError::Io(e.to_string())
    }
}

const BUILTIN_SCAFFOLD: &[(&str, &str)] = &[
    ("scaffold.toml", include_str!("../../assets/scaffold-static/scaffold.toml")),
    ("block-host/index.html", include_str!("../../assets/scaffold-static/block-host/index.html")),
    ("full-app/index.html", include_str!("../../assets/scaffold-static/full-app/index.html")),
];

/// Writes the built-in static scaffold into `dir`.
pub fn write_builtin_scaffold(dir: &Path) -> std::io::Result<()> {
    for (rel, text) in BUILTIN_SCAFFOLD {
        let path = dir.join(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, text)?;
    }
    Ok(())
}

/// What a run needs besides its configuration.
pub struct Environment<'g> {
    pub gateway: &'g Gateway,
    pub renderer: Renderer,
    pub scaffold: Scaffold,
    _builtin: Option<tempfile::TempDir>,
}

impl<'g> Environment<'g> {
    pub fn new(config: &PipelineConfig, gateway: &'g Gateway) -> Result<Self, PipelineError> {
        let engine: Arc<dyn BrowserEngine> = match config.engine {
            EngineKind::Raster => Arc::new(RasterEngine::new()),
            EngineKind::Chrome => Arc::new(
                CdpEngine::from_env().ok_or_else(|| PipelineError::InvalidConfig("engine = \"chrome\" needs DEMOFORGE_CHROME".into()))?,
            ),
        };
        let options = RenderOptions {
            viewport: config.viewport,
            settle_ms: config.timeouts.settle_ms,
            load_timeout_ms: config.timeouts.load_ms,
        };
        let renderer = Renderer::new(engine, options, config.render_sessions);
        let (scaffold, builtin) = match &config.scaffold {
            Some(dir) => (Scaffold::load(dir.clone()).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?, None),
            None => {
                let tmp = tempfile::Builder::new().prefix("demoforge-scaffold-").tempdir()?;
                write_builtin_scaffold(tmp.path())?;
                let s = Scaffold::load(tmp.path().to_path_buf()).map_err(|e| PipelineError::InvalidConfig(e.to_string()))?;
                (s, Some(tmp))
            }
        };
        Ok(Self { gateway, renderer, scaffold, _builtin: builtin })
    }
}
