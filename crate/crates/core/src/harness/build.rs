//! Compiling a source unit inside a scaffold template.
//!
//! A scaffold directory holds `scaffold.toml` and two template trees, one that
//! hosts a single block and one for the merged application. Each compile
//! copies the chosen template into a fresh temporary workspace, places the
//! source at the template's injection marker and builds it. Scaffolds without
//! a build command are static: the workspace is checked (tag balance and
//! interaction references) and copied as the site.

use std::fs;
use std::io::{self, Read};
use std::path::{Path, PathBuf};
use std::process::{Command, Stdio};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use thiserror::Error;
use wait_timeout::ChildExt;

use super::raster::behavior::dangling_references;
use super::raster::dom::Dom;
use crate::digest::tree_digest;
use crate::fsutil::{copy_tree, replace_tree};

pub const SCAFFOLD_FILE: &str = "scaffold.toml";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TemplateKind {
    BlockHost,
    FullApp,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BuildCommand {
    /// Program and arguments, run in the workspace root.
    pub command: Vec<String>,
    /// Directory, relative to the workspace, holding the built site.
    pub output_dir: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScaffoldConfig {
    pub name: String,
    /// Output stack description quoted into generation prompts.
    pub target_stack: String,
    pub block_host: String,
    pub full_app: String,
    /// Template-relative file that receives the source.
    pub inject_file: String,
    pub marker: String,
    #[serde(default)]
    pub allowed_dependencies: Vec<String>,
    #[serde(default)]
    pub build: Option<BuildCommand>,
}

#[derive(Debug, Clone)]
pub struct Scaffold {
    root: PathBuf,
    config: ScaffoldConfig,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("build exceeded {secs} s")]
    BuildTimeout { secs: u64, log: String },
    #[error("build toolchain not found: {0}")]
    ToolchainMissing(String),
    #[error("build failed")]
    BuildFailure { log: String },
    #[error("workspace is not empty: {0}")]
    WorkspaceNotEmpty(PathBuf),
    #[error("template has {found} injection markers, expected exactly one")]
    InjectionMarkerMissing { found: usize },
    #[error("source is empty")]
    EmptySource,
    #[error("scaffold: {0}")]
    Scaffold(String),
    #[error("workspace i/o: {0}")]
    Io(#[from] io::Error),
}

impl BuildError {
    /// Text suitable for a `build.log`; never empty.
    pub fn log(&self) -> String {
        match self {
            BuildError::BuildTimeout { log, .. } | BuildError::BuildFailure { log } if !log.trim().is_empty() => {
                format!("{log}\n{self}")
            }
            other => other.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BuildStatus {
    Success,
    Failure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BuildResult {
    pub status: BuildStatus,
    pub log: String,
    pub site_dir: Option<PathBuf>,
    pub duration_secs: f64,
    /// Tree digest of the site on success.
    pub digest: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BuildOptions {
    pub timeout: Duration,
    /// Parent for temporary workspaces; the system default when `None`.
    pub work_root: Option<PathBuf>,
}

impl Default for BuildOptions {
    fn default() -> Self {
        Self { timeout: Duration::from_secs(180), work_root: None }
    }
}

impl Scaffold {
    pub fn load(root: impl Into<PathBuf>) -> Result<Self, BuildError> {
        let root = root.into();
        let text = fs::read_to_string(root.join(SCAFFOLD_FILE))
            .map_err(|e| BuildError::Scaffold(format!("{}: {e}", root.join(SCAFFOLD_FILE).display())))?;
        let config: ScaffoldConfig = toml::from_str(&text).map_err(|e| BuildError::Scaffold(e.to_string()))?;
        let scaffold = Self { root, config };
        for kind in [TemplateKind::BlockHost, TemplateKind::FullApp] {
            let dir = scaffold.template_dir(kind);
            if !dir.join(&scaffold.config.inject_file).is_file() {
                return Err(BuildError::Scaffold(format!("{} lacks {}", dir.display(), scaffold.config.inject_file)));
            }
        }
        Ok(scaffold)
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn config(&self) -> &ScaffoldConfig {
        &self.config
    }

    pub fn template_dir(&self, kind: TemplateKind) -> PathBuf {
        self.root.join(match kind {
            TemplateKind::BlockHost => &self.config.block_host,
            TemplateKind::FullApp => &self.config.full_app,
        })
    }

    /// Copies the template into an empty `workspace` with `source` placed at
    /// the injection marker.
    pub fn instantiate(&self, kind: TemplateKind, source: &str, workspace: &Path) -> Result<(), BuildError> {
        if source.trim().is_empty() {
            return Err(BuildError::EmptySource);
        }
        if workspace.exists() && fs::read_dir(workspace)?.next().is_some() {
            return Err(BuildError::WorkspaceNotEmpty(workspace.to_path_buf()));
        }
        let template = self.template_dir(kind);
        let host = fs::read_to_string(template.join(&self.config.inject_file))?;
        let found = host.matches(&self.config.marker).count();
        if found != 1 {
            return Err(BuildError::InjectionMarkerMissing { found });
        }
        copy_tree(&template, workspace)?;
        fs::write(workspace.join(&self.config.inject_file), host.replacen(&self.config.marker, source, 1))?;
        Ok(())
    }
}

/// Builds `source` and copies the resulting site to `out_dir`, replacing it.
pub fn compile(
    source: &str,
    scaffold: &Scaffold,
    kind: TemplateKind,
    out_dir: &Path,
    options: &BuildOptions,
) -> Result<BuildResult, BuildError> {
    let started = Instant::now();
    let temp = match &options.work_root {
        Some(root) => {
            fs::create_dir_all(root)?;
            tempfile::Builder::new().prefix("build-").tempdir_in(root)?
        }
        None => tempfile::Builder::new().prefix("demoforge-build-").tempdir()?,
    };
    let workspace = temp.path().join("project");
    scaffold.instantiate(kind, source, &workspace)?;
    let (site, log) = match &scaffold.config.build {
        None => (workspace.clone(), static_build(&workspace, &scaffold.config.inject_file)?),
        Some(cmd) => {
            let log = run_command(&cmd.command, &workspace, temp.path(), options.timeout)?;
            (workspace.join(&cmd.output_dir), log)
        }
    };
    if !site.join("index.html").is_file() {
        return Err(BuildError::BuildFailure { log: format!("{log}\nbuild produced no index.html") });
    }
    replace_tree(&site, out_dir)?;
    Ok(BuildResult {
        status: BuildStatus::Success,
        log,
        site_dir: Some(out_dir.to_path_buf()),
        duration_secs: started.elapsed().as_secs_f64(),
        digest: Some(tree_digest(out_dir)?),
    })
}

fn static_build(workspace: &Path, inject_file: &str) -> Result<String, BuildError> {
    let html = fs::read_to_string(workspace.join(inject_file))?;
    let mut problems = check_tag_balance(&html);
    problems.extend(dangling_references(&Dom::parse(&html)));
    if !problems.is_empty() {
        return Err(BuildError::BuildFailure { log: problems.join("\n") });
    }
    Ok(format!("static build: {inject_file} checked, {} bytes", html.len()))
}

fn run_command(argv: &[String], cwd: &Path, log_dir: &Path, timeout: Duration) -> Result<String, BuildError> {
    let (program, args) = argv.split_first().ok_or_else(|| BuildError::Scaffold("empty build command".into()))?;
    let out_path = log_dir.join("build.out");
    let stdout = fs::File::create(&out_path)?;
    let stderr = stdout.try_clone()?;
    let mut child = match Command::new(program)
        .args(args)
        .current_dir(cwd)
        .stdin(Stdio::null())
        .stdout(stdout)
        .stderr(stderr)
        .spawn()
    {
        Ok(c) => c,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(BuildError::ToolchainMissing(program.clone())),
        Err(e) => return Err(e.into()),
    };
    let status = child.wait_timeout(timeout)?;
    let read_log = || {
        let mut s = String::new();
        let _ = fs::File::open(&out_path).and_then(|mut f| f.read_to_string(&mut s));
        s
    };
    match status {
        None => {
            let _ = child.kill();
            let _ = child.wait();
            Err(BuildError::BuildTimeout { secs: timeout.as_secs(), log: read_log() })
        }
        Some(s) if s.success() => Ok(read_log()),
        Some(s) => Err(BuildError::BuildFailure { log: format!("{}\n{} exited with {s}", read_log(), program) }),
    }
}

const VOID_TAGS: &[&str] = &[
    "area", "base", "br", "col", "embed", "hr", "img", "input", "link", "meta", "param", "source", "track", "wbr",
];
const OPTIONAL_CLOSE: &[&str] = &["p", "li", "option", "td", "th", "tr", "dt", "dd", "tbody", "thead"];

/// Unclosed, stray and mismatched tags, with 1-based line numbers.
pub fn check_tag_balance(html: &str) -> Vec<String> {
    let mut problems = Vec::new();
    let mut stack: Vec<(String, usize)> = Vec::new();
    let bytes = html.as_bytes();
    let line_at = |pos: usize| html[..pos].matches('\n').count() + 1;
    let mut i = 0;
    while let Some(off) = html[i..].find('<') {
        let start = i + off;
        if html[start..].starts_with("<!--") {
            match html[start..].find("-->") {
                Some(end) => i = start + end + 3,
                None => {
                    problems.push(format!("line {}: unterminated comment", line_at(start)));
                    break;
                }
            }
            continue;
        }
        let Some(end_off) = html[start..].find('>') else {
            problems.push(format!("line {}: unterminated tag", line_at(start)));
            break;
        };
        let end = start + end_off;
        let inner = &html[start + 1..end];
        i = end + 1;
        if inner.starts_with('!') || inner.starts_with('?') {
            continue;
        }
        let closing = inner.starts_with('/');
        let name: String = inner
            .trim_start_matches('/')
            .chars()
            .take_while(|c| c.is_ascii_alphanumeric() || *c == '-')
            .collect::<String>()
            .to_ascii_lowercase();
        if name.is_empty() {
            // A bare `<` in text, e.g. "a < b".
            i = start + 1;
            continue;
        }
        if closing {
            while let Some((top, _)) = stack.last() {
                if *top == name || !OPTIONAL_CLOSE.contains(&top.as_str()) || !stack.iter().any(|(t, _)| *t == name) {
                    break;
                }
                stack.pop();
            }
            match stack.last() {
                Some((top, _)) if *top == name => {
                    stack.pop();
                }
                Some((top, open_line)) => {
                    problems.push(format!(
                        "line {}: </{name}> closes <{top}> opened on line {open_line}",
                        line_at(start)
                    ));
                    if stack.iter().any(|(t, _)| *t == name) {
                        while stack.pop().is_some_and(|(t, _)| t != name) {}
                    }
                }
                None => problems.push(format!("line {}: stray </{name}>", line_at(start))),
            }
            continue;
        }
        let self_closing = inner.trim_end().ends_with('/');
        if VOID_TAGS.contains(&name.as_str()) || self_closing {
            continue;
        }
        if name == "script" || name == "style" {
            let close = format!("</{name}");
            match html[i..].to_ascii_lowercase().find(&close) {
                Some(c) => {
                    let close_end = html[i + c..].find('>').map(|e| i + c + e + 1).unwrap_or(bytes.len());
                    i = close_end;
                }
                None => {
                    problems.push(format!("line {}: <{name}> is never closed", line_at(start)));
                    break;
                }
            }
            continue;
        }
        if OPTIONAL_CLOSE.contains(&name.as_str()) && stack.last().is_some_and(|(t, _)| *t == name) {
            stack.pop();
        }
        stack.push((name, line_at(start)));
    }
    for (tag, line) in stack.into_iter().filter(|(t, _)| !OPTIONAL_CLOSE.contains(&t.as_str())) {
        problems.push(format!("line {line}: <{tag}> is never closed"));
    }
    problems
}
