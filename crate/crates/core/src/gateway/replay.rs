//! Content-addressed fixture files: `<dir>/<key>.json`, one per request.

use std::collections::BTreeMap;
use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use serde::{Deserialize, Serialize};

use super::request::{ModelRequest, Operation, ReplayKey, Role};
use super::LogitMode;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FixtureResponse {
    Text(String),
    /// Logits keyed by the backend's own token surface forms.
    Logits {
        mode: LogitMode,
        values: BTreeMap<String, f64>,
    },
    /// The backend could not report logits; replays as the same error.
    LogitsUnsupported(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Fixture {
    pub key: ReplayKey,
    pub operation: Operation,
    pub role: Role,
    pub model: String,
    /// Stored for readability and diffing; lookup uses `key` only.
    pub prompt: String,
    pub images: Vec<String>,
    pub response: FixtureResponse,
}

impl Fixture {
    pub fn new(op: Operation, req: &ModelRequest, response: FixtureResponse) -> Self {
        Self {
            key: ReplayKey::new(op, req),
            operation: op,
            role: req.role,
            model: req.model.clone(),
            prompt: req.prompt.clone(),
            images: req.images.iter().map(|i| i.digest.clone()).collect(),
            response,
        }
    }
}

/// Reads are concurrent; writes take the lock exclusively and land via
/// write-to-temp-then-rename.
#[derive(Debug)]
pub struct FixtureStore {
    dir: PathBuf,
    lock: RwLock<()>,
}

impl FixtureStore {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into(), lock: RwLock::new(()) }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn path_for(&self, key: &ReplayKey) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &ReplayKey) -> io::Result<Option<Fixture>> {
        let _guard = self.lock.read().unwrap_or_else(|e| e.into_inner());
        let path = self.path_for(key);
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(e),
        };
        let fixture: Fixture = serde_json::from_slice(&bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
        Ok(Some(fixture))
    }

    pub fn put(&self, fixture: &Fixture) -> io::Result<PathBuf> {
        let _guard = self.lock.write().unwrap_or_else(|e| e.into_inner());
        fs::create_dir_all(&self.dir)?;
        let path = self.path_for(&fixture.key);
        let mut tmp = tempfile::NamedTempFile::new_in(&self.dir)?;
        let mut json = serde_json::to_vec_pretty(fixture).map_err(io::Error::other)?;
        json.push(b'\n');
        tmp.write_all(&json)?;
        tmp.persist(&path).map_err(|e| e.error)?;
        Ok(path)
    }

    pub fn len(&self) -> usize {
        fs::read_dir(&self.dir)
            .map(|rd| {
                rd.filter_map(Result::ok)
                    .filter(|e| e.path().extension().is_some_and(|x| x == "json"))
                    .count()
            })
            .unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}
