//! Project snapshots on disk, one JSON file per project under a store root.
//!
//! Writes go to a temporary file in the same directory, are fsynced, then
//! renamed over the target, so a crash leaves either the previous or the new
//! snapshot and never a partial one.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::time::UNIX_EPOCH;

use ner_workbench_core::snapshot::{ProjectSnapshot, VersionProbe, FORMAT_VERSION};
use ner_workbench_core::Project;
use serde::Serialize;

pub const DEFAULT_MAX_DOCUMENTS: usize = 100;

#[derive(Debug, thiserror::Error)]
pub enum StoreError {
    #[error("I/O failure on {path}: {source}")]
    IoFailure { path: PathBuf, source: io::Error },
    #[error("unsupported snapshot format version {0} (this build reads {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("corrupt snapshot: {0}")]
    CorruptSnapshot(String),
    #[error("unknown project `{0}`")]
    UnknownProject(String),
    #[error("invalid project id `{0}`: use letters, digits, `-` and `_`")]
    InvalidProjectId(String),
}

impl StoreError {
    pub fn code(&self) -> &'static str {
        match self {
            StoreError::IoFailure { .. } => "IoFailure",
            StoreError::UnsupportedVersion(_) => "UnsupportedVersion",
            StoreError::CorruptSnapshot(_) => "CorruptSnapshot",
            StoreError::UnknownProject(_) => "UnknownProject",
            StoreError::InvalidProjectId(_) => "InvalidProjectId",
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::IoFailure {
        path: path.to_path_buf(),
        source,
    }
}

/// Pretty JSON with a trailing newline. Identical projects encode to
/// identical bytes.
pub fn encode_snapshot(project: &Project) -> Vec<u8> {
    let mut bytes = serde_json::to_vec_pretty(&project.snapshot()).expect("snapshot serializes");
    bytes.push(b'\n');
    bytes
}

/// Checks the version before anything else, so files from a newer build are
/// refused without being partially read.
pub fn decode_snapshot(bytes: &[u8]) -> Result<Project, StoreError> {
    let probe: VersionProbe =
        serde_json::from_slice(bytes).map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?;
    if probe.format_version != FORMAT_VERSION {
        return Err(StoreError::UnsupportedVersion(probe.format_version));
    }
    let snapshot: ProjectSnapshot =
        serde_json::from_slice(bytes).map_err(|e| StoreError::CorruptSnapshot(e.to_string()))?;
    Project::from_snapshot(snapshot).map_err(|e| match e {
        ner_workbench_core::Error::UnsupportedVersion(v) => StoreError::UnsupportedVersion(v),
        other => StoreError::CorruptSnapshot(other.to_string()),
    })
}

pub fn save_snapshot(path: &Path, project: &Project) -> Result<(), StoreError> {
    write_atomic(path, &encode_snapshot(project))
}

pub fn load_snapshot(path: &Path) -> Result<Project, StoreError> {
    decode_snapshot(&fs::read(path).map_err(io_err(path))?)
}

/// Temp file in the target's directory, fsync, rename, fsync the directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), StoreError> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::Builder::new()
        .prefix(".tmp-")
        .suffix(".part")
        .tempfile_in(dir)
        .map_err(io_err(dir))?;
    tmp.write_all(bytes).map_err(io_err(tmp.path()))?;
    tmp.as_file().sync_all().map_err(io_err(path))?;
    tmp.persist(path).map_err(|e| StoreError::IoFailure {
        path: path.to_path_buf(),
        source: e.error,
    })?;
    #[cfg(unix)]
    fs::File::open(dir).and_then(|d| d.sync_all()).map_err(io_err(dir))?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ProjectMeta {
    pub project_id: String,
    pub name: String,
    pub documents: usize,
    /// Milliseconds since the Unix epoch.
    pub modified_ms: u64,
}

#[derive(Debug, Clone)]
pub struct Store {
    root: PathBuf,
}

pub fn valid_project_id(id: &str) -> bool {
    !id.is_empty() && id.len() <= 128 && id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_')
}

impl Store {
    /// Opens a store, creating the root directory if needed.
    pub fn open(root: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let root = root.into();
        fs::create_dir_all(&root).map_err(io_err(&root))?;
        Ok(Store { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_for(&self, id: &str) -> Result<PathBuf, StoreError> {
        if !valid_project_id(id) {
            return Err(StoreError::InvalidProjectId(id.into()));
        }
        Ok(self.root.join(format!("{id}.json")))
    }

    pub fn exists(&self, id: &str) -> bool {
        self.path_for(id).map(|p| p.is_file()).unwrap_or(false)
    }

    pub fn save(&self, project: &Project) -> Result<(), StoreError> {
        save_snapshot(&self.path_for(project.id())?, project)
    }

    pub fn load(&self, id: &str) -> Result<Project, StoreError> {
        let path = self.path_for(id)?;
        let bytes = match fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::UnknownProject(id.into())),
            Err(e) => return Err(io_err(&path)(e)),
        };
        let project = decode_snapshot(&bytes)?;
        if project.id() != id {
            return Err(StoreError::CorruptSnapshot(format!(
                "file {id}.json holds project `{}`",
                project.id()
            )));
        }
        Ok(project)
    }

    pub fn delete_project(&self, id: &str) -> Result<(), StoreError> {
        let path = self.path_for(id)?;
        match fs::remove_file(&path) {
            Ok(()) => Ok(()),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Err(StoreError::UnknownProject(id.into())),
            Err(e) => Err(io_err(&path)(e)),
        }
    }

    /// Most recently modified first. Files that fail to load are skipped
    /// with a warning rather than hiding the rest.
    pub fn list_projects(&self) -> Result<Vec<ProjectMeta>, StoreError> {
        let mut out = Vec::new();
        for entry in fs::read_dir(&self.root).map_err(io_err(&self.root))? {
            let entry = entry.map_err(io_err(&self.root))?;
            let path = entry.path();
            let Some(id) = path
                .file_name()
                .and_then(|n| n.to_str())
                .and_then(|n| n.strip_suffix(".json"))
                .filter(|id| valid_project_id(id))
            else {
                continue;
            };
            let modified_ms = entry
                .metadata()
                .and_then(|m| m.modified())
                .map_err(io_err(&path))?
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_millis() as u64)
                .unwrap_or(0);
            match self.load(id) {
                Ok(p) => out.push(ProjectMeta {
                    project_id: p.id().into(),
                    name: p.name().into(),
                    documents: p.document_count(),
                    modified_ms,
                }),
                Err(e) => tracing::warn!(project = id, error = %e, "skipping unreadable snapshot"),
            }
        }
        out.sort_by(|a, b| b.modified_ms.cmp(&a.modified_ms).then_with(|| a.project_id.cmp(&b.project_id)));
        Ok(out)
    }
}
