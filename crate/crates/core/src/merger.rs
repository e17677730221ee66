//! Merging selected blocks into one application with sidebar navigation.
//!
//! Navigation contract, independent of the output stack: the app has a
//! single `<nav>`; the entry for module N carries `data-nav="N"` and its
//! label as text; module N's content sits in an element with
//! `data-view="N"`.

use std::collections::{BTreeMap, BTreeSet};
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use regex::Regex;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::blocks::MODULE_MARKER;
use crate::gateway::{Gateway, GatewayError, ModelRequest, Role, Sampling};
use crate::harness::{compile, BuildError, BuildOptions, Scaffold, TemplateKind};
use crate::plan::{serialize_spec, GenerationSpec};
use crate::text::largest_code_region;

pub const LAYOUT_SIDEBAR: &str = "sidebar";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SelectedBlock {
    pub module_id: u32,
    pub variant: u32,
    pub source: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MergedApp {
    pub source: String,
    /// Module id to navigation label.
    pub registry: BTreeMap<u32, String>,
    pub layout: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiteArtifact {
    pub site_dir: PathBuf,
    pub entry: PathBuf,
    pub build_log: String,
    pub digest: String,
}

#[derive(Debug, Error)]
pub enum MergeError {
    #[error("no selected blocks to merge")]
    NothingToMerge,
    #[error("merged output unusable: {0}")]
    MergeParseError(String),
    #[error("navigation lacks modules {0:?}")]
    MissingModuleEntry(Vec<u32>),
    #[error(transparent)]
    Gateway(#[from] GatewayError),
}

#[derive(Debug, Clone, PartialEq)]
pub struct MergeOptions {
    pub model: String,
    pub max_tokens: u32,
    pub target_stack: String,
}

impl Default for MergeOptions {
    fn default() -> Self {
        Self { model: "merger".into(), max_tokens: 16_384, target_stack: "A single self-contained HTML document body.".into() }
    }
}

fn ordered(blocks: &[SelectedBlock]) -> Vec<&SelectedBlock> {
    let mut v: Vec<&SelectedBlock> = blocks.iter().collect();
    v.sort_by_key(|b| b.module_id);
    v
}

pub fn build_merge_prompt(blocks: &[SelectedBlock], spec: &GenerationSpec, options: &MergeOptions) -> Result<ModelRequest, MergeError> {
    if blocks.is_empty() {
        return Err(MergeError::NothingToMerge);
    }
    let mut p = String::new();
    p.push_str("Combine the finished blocks below into one self-contained interactive website.\n\n");
    p.push_str("Specification:\n");
    p.push_str(&serialize_spec(spec));
    p.push_str(&format!("\nTarget stack:\n{}\n\n", options.target_stack.trim()));
    p.push_str("Layout requirements:\n");
    p.push_str("- One application unit. A single sidebar `<nav>` lists every block below, in order.\n");
    p.push_str("- The sidebar entry for module N carries `data-nav=\"N\"` and shows the module title as its label.\n");
    p.push_str("- Module N's content is wrapped in one element with `data-view=\"N\"`; only the first view is visible initially.\n");
    p.push_str(&format!("- Keep each block's `{MODULE_MARKER} N: ...` comment and its behavior; resolve id clashes if any.\n"));
    p.push_str("- Reply with the complete source in a single fenced code block.\n");
    for b in ordered(blocks) {
        let title = spec.module(b.module_id).map(|m| m.title.as_str()).unwrap_or("untitled");
        p.push_str(&format!("\n### Block for module {}: {}\n```\n{}\n```\n", b.module_id, title, b.source.trim_end()));
    }
    Ok(ModelRequest::new(Role::Merger, options.model.clone(), p).with_sampling(Sampling::greedy(options.max_tokens)))
}

fn nav_entry_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r#"data-nav\s*=\s*\{?\s*["'](\d+)["']\s*\}?[^>]*>\s*([^<]*?)\s*<"#).expect("valid regex"))
}

fn nav_open_re() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| Regex::new(r"(?i)<nav\b").expect("valid regex"))
}

/// Extracts and checks the app from a merger reply; `expected` is the set of
/// selected module ids.
pub fn parse_merged(reply: &str, expected: &BTreeSet<u32>) -> Result<MergedApp, MergeError> {
    let source = largest_code_region(reply).ok_or_else(|| MergeError::MergeParseError("no fenced code region".into()))?;
    let navs = nav_open_re().find_iter(source).count();
    if navs != 1 {
        return Err(MergeError::MergeParseError(format!("expected one <nav>, found {navs}")));
    }
    let mut registry = BTreeMap::new();
    for cap in nav_entry_re().captures_iter(source) {
        let id: u32 = cap[1].parse().map_err(|_| MergeError::MergeParseError(format!("bad module id {:?}", &cap[1])))?;
        if registry.insert(id, cap[2].to_string()).is_some() {
            return Err(MergeError::MergeParseError(format!("module {id} has two navigation entries")));
        }
    }
    let unknown: Vec<u32> = registry.keys().filter(|id| !expected.contains(id)).copied().collect();
    if !unknown.is_empty() {
        return Err(MergeError::MergeParseError(format!("navigation names unselected modules {unknown:?}")));
    }
    let labels: BTreeSet<&String> = registry.values().collect();
    if labels.len() != registry.len() || registry.values().any(|l| l.is_empty()) {
        return Err(MergeError::MergeParseError("navigation labels must be unique and non-empty".into()));
    }
    let missing: Vec<u32> = expected.iter().filter(|id| !registry.contains_key(id)).copied().collect();
    if !missing.is_empty() {
        return Err(MergeError::MissingModuleEntry(missing));
    }
    Ok(MergedApp { source: format!("{source}\n"), registry, layout: LAYOUT_SIDEBAR.into() })
}

/// Asks the merger for the combined app. Unparseable replies get one
/// reformat retry; a missing navigation entry is final.
pub fn merge(blocks: &[SelectedBlock], spec: &GenerationSpec, gateway: &Gateway, options: &MergeOptions) -> Result<MergedApp, MergeError> {
    let request = build_merge_prompt(blocks, spec, options)?;
    let expected: BTreeSet<u32> = blocks.iter().map(|b| b.module_id).collect();
    let reply = gateway.complete(&request)?;
    match parse_merged(&reply, &expected) {
        Err(MergeError::MergeParseError(problem)) => {
            tracing::warn!(%problem, "merger reply unusable, asking for a reformat");
            let retry = reformat_request(&request, &reply, &problem);
            parse_merged(&gateway.complete(&retry)?, &expected)
        }
        other => other,
    }
}

pub fn reformat_request(original: &ModelRequest, previous: &str, problem: &str) -> ModelRequest {
    let prompt = format!(
        "{}\n\nA previous reply could not be used ({problem}). Return the full application again as one fenced code \
         block that meets every layout requirement above.\n\nPrevious reply:\n{previous}\n",
        original.prompt
    );
    ModelRequest::new(Role::Merger, original.model.clone(), prompt).with_sampling(original.sampling.clone())
}

/// Compiles the merged app in full-app mode into `out_dir`.
pub fn package(merged: &MergedApp, scaffold: &Scaffold, out_dir: &Path, options: &BuildOptions) -> Result<SiteArtifact, BuildError> {
    let result = compile(&merged.source, scaffold, TemplateKind::FullApp, out_dir, options)?;
    let site_dir = result.site_dir.ok_or_else(|| BuildError::BuildFailure { log: "build produced no site".into() })?;
    Ok(SiteArtifact {
        entry: site_dir.join("index.html"),
        site_dir,
        build_log: result.log,
        digest: result.digest.unwrap_or_default(),
    })
}

/// Imports in `source` outside the scaffold's allowed dependencies. Relative
/// imports are always allowed.
pub fn disallowed_imports(source: &str, allowed: &[String]) -> Vec<String> {
    static RE: OnceLock<Regex> = OnceLock::new();
    let re = RE.get_or_init(|| {
        Regex::new(r#"(?m)(?:^\s*import\s+(?:[^'"]*?\s+from\s+)?|require\(\s*)["']([^"']+)["']"#).expect("valid regex")
    });
    let mut out: Vec<String> = re
        .captures_iter(source)
        .map(|c| c[1].to_string())
        .filter(|m| !m.starts_with('.'))
        .filter(|m| {
            let root = match m.strip_prefix('@') {
                Some(rest) => format!("@{}", rest.split('/').take(2).collect::<Vec<_>>().join("/")),
                None => m.split('/').next().unwrap_or(m).to_string(),
            };
            !allowed.contains(&root)
        })
        .collect();
    out.sort();
    out.dedup();
    out
}
