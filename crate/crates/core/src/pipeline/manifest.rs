//! The persistent record of one run. Paths are relative to the run
//! directory; the file is rewritten atomically after every stage.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::blocks::BlockStatus;
use crate::eval::FailureCategory;
use crate::harness::Viewport;
use crate::scorer::SelectionRecord;

use super::config::PipelineConfig;
use super::PipelineError;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const ERROR_LOG: &str = "error.log";

/// Pipeline stages in execution order. Ingest runs inside `Plan`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stage {
    Plan,
    Generate,
    Build,
    Score,
    Merge,
    Eval,
}

impl Stage {
    pub const ALL: [Stage; 6] = [Stage::Plan, Stage::Generate, Stage::Build, Stage::Score, Stage::Merge, Stage::Eval];

    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Plan => "plan",
            Stage::Generate => "generate",
            Stage::Build => "build",
            Stage::Score => "score",
            Stage::Merge => "merge",
            Stage::Eval => "eval",
        }
    }

    pub fn previous(self) -> Option<Stage> {
        let i = Self::ALL.iter().position(|s| *s == self).expect("listed");
        i.checked_sub(1).map(|p| Self::ALL[p])
    }
}

impl std::str::FromStr for Stage {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL.into_iter().find(|st| st.as_str() == s).ok_or_else(|| format!("unknown stage {s:?}"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    InProgress,
    /// Every module was kept and every report was produced.
    Complete,
    /// A site exists but something was dropped or a report is missing.
    Partial,
    /// No site could be produced.
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateRecord {
    pub variant: u32,
    pub seed: u64,
    pub status: BlockStatus,
    /// Extracted source; absent when generation failed.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    pub response: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub build_log: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshot: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub viewport: Option<Viewport>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub console_errors: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub score: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModuleRecord {
    pub module_id: u32,
    pub title: String,
    pub candidates: Vec<CandidateRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectionRecord>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedRecord {
    pub source: String,
    pub registry: BTreeMap<u32, String>,
    pub layout: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub entry: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub site_digest: Option<String>,
    pub build_log: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub disallowed_imports: Vec<String>,
}

/// Headline numbers; the full reports sit beside it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalSummary {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub completion_rate: Option<f64>,
    pub failure_ratio: f64,
    pub probe_failure_ratio: f64,
    pub elements: usize,
    pub code_tokens: usize,
    pub category: FailureCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vlm_visual: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub screenshots_used: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checklist: Option<String>,
    pub probe: String,
    pub trajectory: String,
    pub landing: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub review: Option<String>,
    pub failure: String,
    pub complexity: String,
    pub descriptions: String,
    pub summary: EvalSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub run_id: String,
    pub status: RunStatus,
    pub config: PipelineConfig,
    /// Input document as given, and the SHA-256 of its bytes.
    pub paper: String,
    pub paper_digest: String,
    /// Copy of the checklist inside the run directory.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checklist: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub document: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<String>,
    pub stages_completed: Vec<Stage>,
    pub modules: Vec<ModuleRecord>,
    /// Modules with no buildable candidate; left out of the merge.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub dropped_modules: Vec<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub merged: Option<MergedRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub evaluation: Option<EvalRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub errors: Vec<String>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<Stage, f64>,
}

impl RunManifest {
    pub fn new(run_id: String, config: PipelineConfig, paper: String, paper_digest: String) -> Self {
        Self {
            run_id,
            status: RunStatus::InProgress,
            config,
            paper,
            paper_digest,
            checklist: None,
            document: None,
            spec: None,
            stages_completed: Vec::new(),
            modules: Vec::new(),
            dropped_modules: Vec::new(),
            merged: None,
            evaluation: None,
            errors: Vec::new(),
            timings: BTreeMap::new(),
        }
    }

    pub fn completed(&self, stage: Stage) -> bool {
        self.stages_completed.contains(&stage)
    }

    pub fn module_mut(&mut self, id: u32) -> Option<&mut ModuleRecord> {
        self.modules.iter_mut().find(|m| m.module_id == id)
    }

    /// The manifest with run-specific identity and timings removed; equal
    /// for two runs that produced the same artifacts.
    pub fn normalized(&self) -> Self {
        Self { run_id: String::new(), timings: BTreeMap::new(), ..self.clone() }
    }

    /// Every path the manifest references, relative to the run directory.
    pub fn referenced_paths(&self) -> Vec<&str> {
        let mut out: Vec<&str> = [&self.checklist, &self.document, &self.spec].into_iter().flatten().map(String::as_str).collect();
        for c in self.modules.iter().flat_map(|m| &m.candidates) {
            out.push(&c.response);
            out.extend([&c.source, &c.build_log, &c.site, &c.screenshot, &c.score].into_iter().flatten().map(String::as_str));
        }
        if let Some(m) = &self.merged {
            out.extend([m.source.as_str(), m.build_log.as_str()]);
            out.extend([&m.site, &m.entry].into_iter().flatten().map(String::as_str));
        }
        if let Some(e) = &self.evaluation {
            out.extend([&e.probe, &e.trajectory, &e.landing, &e.failure, &e.complexity, &e.descriptions].map(String::as_str));
            out.extend([&e.checklist, &e.review].into_iter().flatten().map(String::as_str));
        }
        out
    }

    /// Writes `manifest.json` atomically after checking that every
    /// referenced path exists.
    pub fn save(&self, run_dir: &Path) -> Result<(), PipelineError> {
        if let Some(missing) = self.referenced_paths().into_iter().find(|p| !run_dir.join(p).exists()) {
            return Err(PipelineError::Io(format!("manifest references missing path {missing}")));
        }
        let mut bytes = serde_json::to_vec_pretty(self).map_err(|e| PipelineError::Io(e.to_string()))?;
        bytes.push(b'\n');
        crate::fsutil::write_atomic(&run_dir.join(MANIFEST_FILE), &bytes).map_err(|e| PipelineError::Io(e.to_string()))
    }

    pub fn load(run_dir: &Path) -> Result<Self, PipelineError> {
        let path = run_dir.join(MANIFEST_FILE);
        let text = match std::fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Err(PipelineError::UnknownRun(run_dir.display().to_string())),
            Err(e) => return Err(PipelineError::Io(e.to_string())),
        };
        serde_json::from_str(&text).map_err(|e| PipelineError::CorruptManifest(format!("{}: {e}", path.display())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stages_parse_and_order() {
        for s in Stage::ALL {
            assert_eq!(s.as_str().parse::<Stage>().unwrap(), s);
        }
        assert_eq!(Stage::Plan.previous(), None);
        assert_eq!(Stage::Eval.previous(), Some(Stage::Merge));
        assert!("deploy".parse::<Stage>().is_err());
    }

    #[test]
    fn save_load_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(RunManifest::load(dir.path()), Err(PipelineError::UnknownRun(_))));
        let mut m = RunManifest::new("r1".into(), PipelineConfig::default(), "paper.pdf".into(), "abc".into());
        m.timings.insert(Stage::Plan, 1.5);
        m.save(dir.path()).unwrap();
        assert_eq!(RunManifest::load(dir.path()).unwrap(), m);

        m.spec = Some("spec".into());
        assert!(matches!(m.save(dir.path()), Err(PipelineError::Io(_))));
        std::fs::write(dir.path().join("spec"), "x").unwrap();
        m.save(dir.path()).unwrap();

        let other = RunManifest { run_id: "r2".into(), timings: BTreeMap::new(), ..m.clone() };
        assert_ne!(other, m);
        assert_eq!(other.normalized(), m.normalized());

        std::fs::write(dir.path().join(MANIFEST_FILE), "{ not json").unwrap();
        assert!(matches!(RunManifest::load(dir.path()), Err(PipelineError::CorruptManifest(_))));
    }
}
