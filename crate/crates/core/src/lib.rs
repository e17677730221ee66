//! Turns a research document into an interactive single-page demo.
//!
//! The pipeline plans a list of interactive modules, samples several
//! candidate blocks per module, renders and scores each candidate from its
//! screenshot, keeps the best one, merges the survivors into one app with
//! sidebar navigation and evaluates the result with a checklist match and a
//! seeded interaction probe. Every model call goes through [`gateway`], which
//! can record and replay fixtures so whole runs are reproducible offline.

pub mod blocks;
pub mod diff;
pub mod digest;
pub mod eval;
pub mod fsutil;
pub mod gateway;
pub mod harness;
pub mod ingest;
pub mod merger;
pub mod pipeline;
pub mod plan;
pub mod scorer;
pub mod serde_ext;
pub mod sync;
pub mod text;
pub mod tokenize;

#[cfg(any(test, feature = "testkit"))]
pub mod testkit;

pub use crate::eval::{ChecklistResult, FailureCategory, ProbeReport};
pub use crate::gateway::{Gateway, GatewayConfig, GatewayMode, LogitCapability};
pub use crate::harness::{InteractionTrajectory, Screenshot, Viewport};
pub use crate::pipeline::{BenchmarkManifest, BenchmarkReport, PipelineConfig, PipelineError, RunManifest, RunStatus, Stage};
pub use crate::plan::GenerationSpec;
pub use crate::scorer::{QualityScore, ScoringFunction, SelectionRecord};
