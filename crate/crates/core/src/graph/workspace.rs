//! On-disk layout of one user's state and write-through persistence.
//!
//! ```text
//! <data-dir>/
//!   graph.json
//!   snapshots/<name>.json
//!   quizzes/<quiz_id>.json
//!   prompts/<template_id>.txt
//! ```

use std::fs::{self, File, OpenOptions};
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::Serialize;

use super::model::{KnowledgeGraph, FORMAT_VERSION};
use super::{GraphError, GraphStore};

pub const GRAPH_FILE: &str = "graph.json";
pub const SNAPSHOTS_DIR: &str = "snapshots";
pub const QUIZZES_DIR: &str = "quizzes";
pub const PROMPTS_DIR: &str = "prompts";

/// Pretty-printed JSON with a trailing newline.
pub fn to_pretty_json<T: Serialize>(value: &T) -> String {
    let mut text = serde_json::to_string_pretty(value).expect("graph types always serialize");
    text.push('\n');
    text
}

/// Write via temp file, fsync, rename. Readers see either the old or the new
/// content, never a torn file.
pub fn atomic_write(path: &Path, contents: &str) -> Result<(), GraphError> {
    let file_name = path
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    let tmp = path.with_file_name(format!("{file_name}.tmp"));
    let write = || -> std::io::Result<()> {
        let mut file = File::create(&tmp)?;
        file.write_all(contents.as_bytes())?;
        file.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| {
        let _ = fs::remove_file(&tmp);
        GraphError::io(path, e)
    })
}

pub fn persist_graph(graph: &KnowledgeGraph, path: &Path) -> Result<(), GraphError> {
    atomic_write(path, &to_pretty_json(graph))
}

/// Parses and validates a graph file.
pub fn load_graph(path: &Path) -> Result<KnowledgeGraph, GraphError> {
    load_store(path).map(|store| store.to_graph())
}

pub fn load_store(path: &Path) -> Result<GraphStore, GraphError> {
    let text = fs::read_to_string(path).map_err(|e| GraphError::io(path, e))?;
    let parse_err = |message: String| GraphError::Parse {
        path: path.to_path_buf(),
        message,
    };
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| parse_err(e.to_string()))?;
    // Check the version before the schema so a future format reports as
    // such rather than as a parse failure.
    match raw.get("version").and_then(serde_json::Value::as_u64) {
        Some(v) if v == u64::from(FORMAT_VERSION) => {}
        Some(v) => {
            return Err(GraphError::SchemaVersionMismatch {
                found: v,
                expected: FORMAT_VERSION,
            })
        }
        None => return Err(parse_err("missing integer \"version\" field".into())),
    }
    let graph: KnowledgeGraph = serde_json::from_value(raw).map_err(|e| parse_err(e.to_string()))?;
    GraphStore::from_graph(graph)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct SnapshotRecord {
    pub name: String,
    /// Relative to the data directory.
    pub path: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RestoreReport {
    pub restored: String,
    pub backup: SnapshotRecord,
}

fn validate_snapshot_name(name: &str) -> Result<(), GraphError> {
    let ok = !name.is_empty()
        && name.len() <= 128
        && !name.starts_with('.')
        && name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '-' | '_' | '.'));
    if ok {
        Ok(())
    } else {
        Err(GraphError::InvalidSnapshotName(name.to_string()))
    }
}

/// A data directory plus the live graph loaded from it.
#[derive(Debug)]
pub struct Workspace {
    root: PathBuf,
    store: GraphStore,
}

impl Workspace {
    /// Opens (creating if needed) a data directory. A missing graph file
    /// starts an empty graph; a present one must validate.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, GraphError> {
        let root = root.into();
        for dir in [root.clone(), root.join(SNAPSHOTS_DIR), root.join(QUIZZES_DIR)] {
            fs::create_dir_all(&dir).map_err(|e| GraphError::io(&dir, e))?;
        }
        let graph_path = root.join(GRAPH_FILE);
        let store = if graph_path.exists() {
            load_store(&graph_path)?
        } else {
            let store = GraphStore::new();
            persist_graph(&store.to_graph(), &graph_path)?;
            store
        };
        Ok(Self { root, store })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn graph_path(&self) -> PathBuf {
        self.root.join(GRAPH_FILE)
    }

    pub fn snapshots_dir(&self) -> PathBuf {
        self.root.join(SNAPSHOTS_DIR)
    }

    pub fn quizzes_dir(&self) -> PathBuf {
        self.root.join(QUIZZES_DIR)
    }

    pub fn prompts_dir(&self) -> PathBuf {
        self.root.join(PROMPTS_DIR)
    }

    pub fn store(&self) -> &GraphStore {
        &self.store
    }

    /// Writes the live graph to `graph.json`.
    pub fn save(&self) -> Result<(), GraphError> {
        persist_graph(&self.store.to_graph(), &self.graph_path())
    }

    /// Applies `f` to the live graph and writes the result to disk before
    /// returning. If `f` fails or the write fails, the in-memory graph is
    /// rolled back to its state before the call.
    pub fn mutate<T, E>(&mut self, f: impl FnOnce(&mut GraphStore) -> Result<T, E>) -> Result<T, E>
    where
        E: From<GraphError>,
    {
        let backup = self.store.clone();
        let value = match f(&mut self.store) {
            Ok(v) => v,
            Err(e) => {
                self.store = backup;
                return Err(e);
            }
        };
        if let Err(e) = self.save() {
            self.store = backup;
            return Err(e.into());
        }
        Ok(value)
    }

    pub fn snapshot_create(&self, name: &str) -> Result<SnapshotRecord, GraphError> {
        validate_snapshot_name(name)?;
        let rel = format!("{SNAPSHOTS_DIR}/{name}.json");
        let path = self.root.join(&rel);
        let mut file = OpenOptions::new()
            .write(true)
            .create_new(true)
            .open(&path)
            .map_err(|e| match e.kind() {
                std::io::ErrorKind::AlreadyExists => {
                    GraphError::DuplicateSnapshotName(name.to_string())
                }
                _ => GraphError::io(&path, e),
            })?;
        let body = to_pretty_json(&self.store.to_graph());
        file.write_all(body.as_bytes())
            .and_then(|_| file.sync_all())
            .map_err(|e| {
                let _ = fs::remove_file(&path);
                GraphError::io(&path, e)
            })?;
        Ok(SnapshotRecord {
            name: name.to_string(),
            path: rel,
            created_at: Utc::now(),
        })
    }

    pub fn list_snapshots(&self) -> Result<Vec<SnapshotRecord>, GraphError> {
        let dir = self.snapshots_dir();
        let entries = fs::read_dir(&dir).map_err(|e| GraphError::io(&dir, e))?;
        let mut records = Vec::new();
        for entry in entries {
            let entry = entry.map_err(|e| GraphError::io(&dir, e))?;
            let path = entry.path();
            let Some(name) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".json"))
            else {
                continue;
            };
            let created_at = entry
                .metadata()
                .and_then(|m| m.modified())
                .map(DateTime::<Utc>::from)
                .map_err(|e| GraphError::io(&path, e))?;
            records.push(SnapshotRecord {
                name: name.to_string(),
                path: format!("{SNAPSHOTS_DIR}/{name}.json"),
                created_at,
            });
        }
        records.sort_by(|a, b| (a.created_at, &a.name).cmp(&(b.created_at, &b.name)));
        Ok(records)
    }

    /// Replaces the live graph with a snapshot. The live graph is saved as a
    /// `pre-restore-<timestamp>` snapshot first.
    pub fn snapshot_restore(&mut self, name: &str) -> Result<RestoreReport, GraphError> {
        validate_snapshot_name(name)?;
        let path = self.snapshots_dir().join(format!("{name}.json"));
        if !path.is_file() {
            return Err(GraphError::NotFound(format!("snapshot {name}")));
        }
        let restored = load_store(&path)?;

        let stamp = Utc::now().format("%Y%m%dT%H%M%S%.9fZ").to_string();
        let mut attempt = 0;
        let backup = loop {
            let candidate = if attempt == 0 {
                format!("pre-restore-{stamp}")
            } else {
                format!("pre-restore-{stamp}-{attempt}")
            };
            match self.snapshot_create(&candidate) {
                Err(GraphError::DuplicateSnapshotName(_)) => attempt += 1,
                other => break other?,
            }
        };

        let previous = std::mem::replace(&mut self.store, restored);
        if let Err(e) = self.save() {
            self.store = previous;
            return Err(e);
        }
        Ok(RestoreReport {
            restored: name.to_string(),
            backup,
        })
    }
}
