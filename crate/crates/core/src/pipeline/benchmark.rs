//! Topic manifest and the benchmark runner.
//!
//! A topic's score is its checklist completion rate; a topic whose run
//! failed or produced no checklist report scores 0. Groups are the
//! abbreviation prefix before the first `-` (`Alg`, `DS`, `ML`, ...).

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::config::PipelineConfig;
use super::manifest::RunStatus;
use super::stages::{run_pipeline, RunInputs, RunOptions};
use super::Environment;
use crate::eval::FailureCategory;
use crate::gateway::Gateway;

#[derive(Debug, Error)]
pub enum BenchmarkError {
    #[error("benchmark manifest has no topics")]
    EmptyManifest,
    #[error("benchmark manifest is unreadable: {0}")]
    ManifestFormat(String),
    #[error("abbreviation {0:?} repeats")]
    DuplicateTopic(String),
    #[error("benchmark i/o: {0}")]
    Io(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TopicEntry {
    pub abbrev: String,
    pub topic: String,
    pub domain: String,
    pub originating_work: String,
    /// Relative to the manifest file.
    pub checklist: PathBuf,
    pub paper: PathBuf,
}

impl TopicEntry {
    pub fn group(&self) -> &str {
        self.abbrev.split('-').next().unwrap_or(&self.abbrev)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BenchmarkManifest {
    /// Directory the entry paths are resolved against.
    pub root: PathBuf,
    pub topics: Vec<TopicEntry>,
}

impl BenchmarkManifest {
    /// Parses CSV with the header `abbrev,topic,domain,originating_work,checklist,paper`.
    pub fn parse(text: &str, root: impl Into<PathBuf>) -> Result<Self, BenchmarkError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(text.as_bytes());
        let topics = reader
            .deserialize::<TopicEntry>()
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| BenchmarkError::ManifestFormat(e.to_string()))?;
        let manifest = Self { root: root.into(), topics };
        manifest.validate()?;
        Ok(manifest)
    }

    pub fn load(path: &Path) -> Result<Self, BenchmarkError> {
        let text = std::fs::read_to_string(path).map_err(|e| BenchmarkError::Io(format!("{}: {e}", path.display())))?;
        Self::parse(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<(), BenchmarkError> {
        if self.topics.is_empty() {
            return Err(BenchmarkError::EmptyManifest);
        }
        let mut seen = BTreeSet::new();
        for t in &self.topics {
            if !seen.insert(t.abbrev.as_str()) {
                return Err(BenchmarkError::DuplicateTopic(t.abbrev.clone()));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TopicRow {
    pub abbrev: String,
    pub topic: String,
    pub domain: String,
    pub group: String,
    pub run_dir: PathBuf,
    pub status: RunStatus,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_ratio: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<FailureCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupRow {
    pub topics: usize,
    /// Arithmetic mean of member topic scores.
    pub mean: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    /// Candidates per module used for every topic.
    pub attempts: u32,
    pub rows: Vec<TopicRow>,
    pub groups: BTreeMap<String, GroupRow>,
    pub mean: f64,
}

impl BenchmarkReport {
    pub fn from_rows(attempts: u32, rows: Vec<TopicRow>) -> Self {
        let mut groups: BTreeMap<String, (usize, f64)> = BTreeMap::new();
        for r in &rows {
            let g = groups.entry(r.group.clone()).or_default();
            g.0 += 1;
            g.1 += r.score;
        }
        let groups = groups.into_iter().map(|(k, (n, sum))| (k, GroupRow { topics: n, mean: sum / n as f64 })).collect();
        let mean = if rows.is_empty() { 0.0 } else { rows.iter().map(|r| r.score).sum::<f64>() / rows.len() as f64 };
        Self { attempts, rows, groups, mean }
    }
}

/// One pipeline run per topic under `runs_root/<abbrev>`, at most
/// `parallel` at a time. Topic failures are recorded, never propagated.
pub fn run_benchmark(
    manifest: &BenchmarkManifest,
    config: &PipelineConfig,
    gateway: &Gateway,
    runs_root: &Path,
    parallel: usize,
) -> Result<BenchmarkReport, BenchmarkError> {
    manifest.validate()?;
    std::fs::create_dir_all(runs_root).map_err(|e| BenchmarkError::Io(e.to_string()))?;
    let next = AtomicUsize::new(0);
    let rows: Mutex<Vec<Option<TopicRow>>> = Mutex::new(vec![None; manifest.topics.len()]);
    std::thread::scope(|s| {
        for _ in 0..parallel.clamp(1, manifest.topics.len()) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::SeqCst);
                let Some(entry) = manifest.topics.get(i) else { break };
                let row = run_topic(manifest, entry, config, gateway, runs_root);
                rows.lock().unwrap_or_else(|e| e.into_inner())[i] = Some(row);
            });
        }
    });
    let rows = rows.into_inner().unwrap_or_else(|e| e.into_inner()).into_iter().map(|r| r.expect("every topic ran")).collect();
    Ok(BenchmarkReport::from_rows(config.attempts, rows))
}

fn run_topic(manifest: &BenchmarkManifest, entry: &TopicEntry, config: &PipelineConfig, gateway: &Gateway, runs_root: &Path) -> TopicRow {
    let run_dir = runs_root.join(&entry.abbrev);
    let mut row = TopicRow {
        abbrev: entry.abbrev.clone(),
        topic: entry.topic.clone(),
        domain: entry.domain.clone(),
        group: entry.group().to_string(),
        run_dir: run_dir.clone(),
        status: RunStatus::Failed,
        score: 0.0,
        failure_ratio: None,
        category: None,
        error: None,
    };
    let inputs = RunInputs { paper: manifest.root.join(&entry.paper), checklist: Some(manifest.root.join(&entry.checklist)) };
    let outcome = Environment::new(config, gateway).and_then(|env| run_pipeline(&inputs, config, &env, &run_dir, &RunOptions::default()));
    match outcome {
        Ok(m) => {
            row.status = m.status;
            if let Some(summary) = m.evaluation.as_ref().map(|e| &e.summary) {
                row.score = summary.completion_rate.unwrap_or(0.0);
                row.failure_ratio = Some(summary.failure_ratio);
                row.category = Some(summary.category);
            }
            if let Some(first) = m.errors.first() {
                row.error = Some(first.clone());
            }
        }
        Err(e) => {
            tracing::warn!(topic = %entry.abbrev, error = %e, "topic failed");
            row.error = Some(e.to_string());
        }
    }
    row
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_manifest_has_nineteen_unique_topics() {
        let m = BenchmarkManifest::load(&crate::testkit::assets_dir().join("benchmark/topics.csv")).unwrap();
        assert_eq!(m.topics.len(), 19);
        let groups: BTreeSet<&str> = m.topics.iter().map(TopicEntry::group).collect();
        assert_eq!(groups, BTreeSet::from(["Alg", "DS", "Dist", "ML", "Math", "Phys", "Sys"]));
        for t in &m.topics {
            assert!(m.root.join(&t.checklist).is_file(), "{} checklist missing", t.abbrev);
            crate::eval::Checklist::load(&m.root.join(&t.checklist)).unwrap();
        }
    }

    #[test]
    fn empty_and_duplicate_manifests_are_rejected() {
        let header = "abbrev,topic,domain,originating_work,checklist,paper\n";
        assert!(matches!(BenchmarkManifest::parse(header, "."), Err(BenchmarkError::EmptyManifest)));
        let dup = format!("{header}A-1,t,d,w,c.toml,p.pdf\nA-1,t,d,w,c.toml,p.pdf\n");
        assert!(matches!(BenchmarkManifest::parse(&dup, "."), Err(BenchmarkError::DuplicateTopic(_))));
        assert!(matches!(BenchmarkManifest::parse("a,b\n1,2\n", "."), Err(BenchmarkError::ManifestFormat(_))));
    }

    #[test]
    fn group_means_are_arithmetic() {
        let row = |abbrev: &str, score: f64| TopicRow {
            abbrev: abbrev.into(),
            topic: String::new(),
            domain: String::new(),
            group: abbrev.split('-').next().unwrap().into(),
            run_dir: PathBuf::new(),
            status: RunStatus::Complete,
            score,
            failure_ratio: None,
            category: None,
            error: None,
        };
        let r = BenchmarkReport::from_rows(3, vec![row("ML-A", 0.5), row("ML-B", 1.0), row("Sys-C", 0.25)]);
        assert_eq!(r.groups["ML"], GroupRow { topics: 2, mean: 0.75 });
        assert_eq!(r.groups["Sys"], GroupRow { topics: 1, mean: 0.25 });
        assert_eq!(r.mean, 1.75 / 3.0);
        assert_eq!(r.attempts, 3);
    }
}
