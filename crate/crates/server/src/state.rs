use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use axum::http::StatusCode;
use labelforge::project::{append_event, Corpora, Project, ProjectConfig, ProjectError, EVENTS_FILE, PROJECT_FILE};
use tokio::sync::{Mutex, RwLock};

use crate::ApiError;

/// Quiet period after a concept edit before the label model is refitted.
pub const DEFAULT_DEBOUNCE: Duration = Duration::from_millis(250);
const SNAPSHOT_FILE: &str = "snapshot.json";

/// Corpus files a new project may be created from.
pub(crate) const PROJECT_FILES: &[&str] = &["unlabeled.jsonl", "dev.jsonl", "test.jsonl", "valid.jsonl", PROJECT_FILE];

pub(crate) struct Handle {
    project: Mutex<Project>,
    dir: PathBuf,
    edits: AtomicU64,
}

impl Handle {
    /// Runs one command under the project lock and persists the events it
    /// appended. The timestamp is wall-clock milliseconds, clamped so the log
    /// stays monotone.
    pub(crate) async fn run<T>(
        &self,
        command: impl FnOnce(&mut Project, u64) -> Result<T, ProjectError>,
    ) -> Result<T, ApiError> {
        let mut project = self.project.lock().await;
        let before = project.events().len();
        let now = SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64);
        let timestamp = now.max(project.last_timestamp());
        let out = command(&mut project, timestamp)?;
        if project.events().len() > before {
            let log = self.dir.join(EVENTS_FILE);
            for event in &project.events()[before..] {
                append_event(&log, event)?;
            }
            let tmp = self.dir.join(format!("{SNAPSHOT_FILE}.tmp"));
            fs::write(&tmp, project.state_json())?;
            fs::rename(&tmp, self.dir.join(SNAPSHOT_FILE))?;
        }
        Ok(out)
    }

    /// Read access to the current project.
    pub(crate) async fn read<T>(&self, f: impl FnOnce(&Project) -> T) -> T {
        f(&*self.project.lock().await)
    }
}

struct Inner {
    data_dir: PathBuf,
    debounce: Duration,
    projects: RwLock<BTreeMap<String, Arc<Handle>>>,
}

#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

fn valid_name(name: &str) -> bool {
    !name.is_empty()
        && name.len() <= 64
        && name.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
}

impl AppState {
    /// Opens every project directory under `data_dir`, creating `data_dir`
    /// if needed.
    pub fn open(data_dir: impl Into<PathBuf>, debounce: Duration) -> Result<AppState, ProjectError> {
        let data_dir = data_dir.into();
        let io = |e: std::io::Error| ProjectError::Io(format!("{}: {e}", data_dir.display()));
        fs::create_dir_all(&data_dir).map_err(io)?;
        let mut projects = BTreeMap::new();
        let mut dirs: Vec<PathBuf> =
            fs::read_dir(&data_dir).map_err(io)?.filter_map(|e| e.ok()).map(|e| e.path()).collect();
        dirs.sort();
        for dir in dirs.into_iter().filter(|d| d.join("unlabeled.jsonl").is_file()) {
            let project = Project::open_dir(&dir)?;
            log::info!("opened project {} at revision {}", project.id(), project.revision());
            let id = project.id().to_string();
            projects.insert(id, Arc::new(Handle { project: Mutex::new(project), dir, edits: AtomicU64::new(0) }));
        }
        Ok(AppState { inner: Arc::new(Inner { data_dir, debounce, projects: RwLock::new(projects) }) })
    }

    pub(crate) async fn project(&self, id: &str) -> Result<Arc<Handle>, ApiError> {
        self.inner.projects.read().await.get(id).cloned().ok_or_else(|| ApiError::not_found(format!("no project {id}")))
    }

    pub(crate) async fn project_ids(&self) -> Vec<String> {
        self.inner.projects.read().await.keys().cloned().collect()
    }

    /// Validates the uploaded files, writes them to a new project directory
    /// and registers the project.
    pub(crate) async fn create(&self, name: &str, files: &BTreeMap<String, String>) -> Result<String, ApiError> {
        if !valid_name(name) {
            return Err(ApiError::bad_request("project names use 1 to 64 letters, digits, '-' or '_'"));
        }
        if let Some(unknown) = files.keys().find(|k| !PROJECT_FILES.contains(&k.as_str())) {
            return Err(ApiError::bad_request(format!("unexpected file {unknown}; expected one of {PROJECT_FILES:?}")));
        }
        let unlabeled = files.get("unlabeled.jsonl").ok_or_else(|| ApiError::bad_request("unlabeled.jsonl is required"))?;
        let config: ProjectConfig = match files.get(PROJECT_FILE) {
            Some(text) => serde_json::from_str(text)
                .map_err(|e| ApiError::from(ProjectError::Config(format!("{PROJECT_FILE}: {e}"))))?,
            None => ProjectConfig::default(),
        };
        let get = |f: &str| files.get(f).map(String::as_str);
        let corpora = Corpora::from_jsonl(unlabeled, get("dev.jsonl"), get("test.jsonl"), get("valid.jsonl"))?;
        let project = Project::new(name, config, corpora)?;

        let mut projects = self.inner.projects.write().await;
        let dir = self.inner.data_dir.join(name);
        if projects.contains_key(name) || dir.exists() {
            return Err(ApiError::new(StatusCode::CONFLICT, "project_exists", format!("project {name} already exists")));
        }
        fs::create_dir_all(&dir)?;
        for (file, text) in files {
            fs::write(dir.join(file), text)?;
        }
        let handle = Handle { project: Mutex::new(project), dir, edits: AtomicU64::new(0) };
        projects.insert(name.to_string(), Arc::new(handle));
        Ok(name.to_string())
    }

    /// Refits `handle` once no concept edit has arrived for the debounce
    /// period.
    pub(crate) fn schedule_refit(&self, handle: Arc<Handle>) {
        let generation = handle.edits.fetch_add(1, Ordering::SeqCst) + 1;
        let delay = self.inner.debounce;
        tokio::spawn(async move {
            tokio::time::sleep(delay).await;
            if handle.edits.load(Ordering::SeqCst) != generation {
                return;
            }
            let result = handle.run(|p, ts| if p.is_stale() { p.refit(ts).map(Some) } else { Ok(None) }).await;
            if let Err(e) = result {
                log::error!("debounced refit failed: {}", e.message);
            }
        });
    }

    pub fn data_dir(&self) -> &Path {
        &self.inner.data_dir
    }
}
