//! Session registry shared by the HTTP handlers.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use forgespark_core::unit::{Technique, Uut};
use serde::{Deserialize, Serialize};

use crate::config::ForgeConfig;
use crate::project::relative_path;
use crate::session::{generate, Session, SessionError, SESSIONS_DIR};
use crate::telemetry::Telemetry;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateSession {
    pub uut: Uut,
    pub technique: Technique,
    /// Dotted config keys overriding the service configuration.
    #[serde(default)]
    pub config: BTreeMap<String, serde_json::Value>,
}

pub type SessionHandle = Arc<Mutex<Session>>;

pub struct SessionManager {
    root: PathBuf,
    config: ForgeConfig,
    telemetry: Arc<Telemetry>,
    sessions: RwLock<BTreeMap<String, SessionHandle>>,
    next_id: AtomicU64,
}

fn lock(handle: &SessionHandle) -> std::sync::MutexGuard<'_, Session> {
    handle.lock().unwrap_or_else(|e| e.into_inner())
}

fn id_number(id: &str) -> Option<u64> {
    id.strip_prefix('s')?.parse().ok()
}

impl SessionManager {
    /// Restores Ready sessions from their snapshots.
    pub fn new(root: &Path, config: ForgeConfig) -> Arc<SessionManager> {
        let telemetry = Arc::new(Telemetry::new(root, config.telemetry.enabled));
        let mut sessions = BTreeMap::new();
        let mut max_id = 0;
        if let Ok(entries) = std::fs::read_dir(root.join(SESSIONS_DIR)) {
            let mut paths: Vec<PathBuf> =
                entries.filter_map(|e| e.ok().map(|e| e.path())).collect();
            paths.sort();
            for path in paths
                .into_iter()
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
            {
                match Session::restore(&path) {
                    Ok(s) if s.is_ready() => {
                        max_id = max_id.max(id_number(&s.id).unwrap_or(0));
                        sessions.insert(s.id.clone(), Arc::new(Mutex::new(s)));
                    }
                    Ok(_) => {}
                    Err(e) => tracing::warn!("skipping snapshot {}: {e}", path.display()),
                }
            }
        }
        Arc::new(SessionManager {
            root: root.to_path_buf(),
            config,
            telemetry,
            sessions: RwLock::new(sessions),
            next_id: AtomicU64::new(max_id + 1),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn telemetry(&self) -> &Telemetry {
        &self.telemetry
    }

    /// Registers a session and starts generation on a worker thread.
    pub fn create(self: &Arc<Self>, request: CreateSession) -> Result<String, SessionError> {
        let mut config = self.config.clone();
        for (k, v) in request.config {
            config
                .set_json(&k, v)
                .map_err(|e| SessionError::InvalidRequest(e.to_string()))?;
        }
        let mut uut = request.uut;
        let rel = relative_path(&self.root, uut.file()).ok_or_else(|| {
            SessionError::InvalidRequest(format!(
                "'{}' is outside the project",
                uut.file().display()
            ))
        })?;
        match &mut uut {
            Uut::File { file } | Uut::Function { file, .. } | Uut::Line { file, .. } => *file = rel,
        }
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let handle = Arc::new(Mutex::new(Session::new(
            id.clone(),
            &self.root,
            uut,
            request.technique,
            config,
        )));
        self.sessions
            .write()
            .expect("sessions lock")
            .insert(id.clone(), handle.clone());
        let manager = self.clone();
        std::thread::Builder::new()
            .name(format!("generate-{id}"))
            .spawn(move || {
                generate(&manager.telemetry, &handle);
                let s = lock(&handle);
                if s.is_ready() {
                    s.save_snapshot();
                }
            })
            .map_err(|e| SessionError::InvalidRequest(format!("cannot start generation: {e}")))?;
        Ok(id)
    }

    pub fn get(&self, id: &str) -> Result<SessionHandle, SessionError> {
        self.sessions
            .read()
            .expect("sessions lock")
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()))
    }

    pub fn ids(&self) -> Vec<String> {
        let mut ids: Vec<String> = self
            .sessions
            .read()
            .expect("sessions lock")
            .keys()
            .cloned()
            .collect();
        ids.sort_by_key(|id| id_number(id).unwrap_or(u64::MAX));
        ids
    }

    /// Runs `op` with exclusive access to the session, then persists it.
    pub fn with_session<T>(
        &self,
        id: &str,
        op: impl FnOnce(&mut Session, &Telemetry) -> Result<T, SessionError>,
    ) -> Result<T, SessionError> {
        let handle = self.get(id)?;
        let mut s = lock(&handle);
        let out = op(&mut s, &self.telemetry)?;
        if s.is_ready() {
            s.save_snapshot();
        }
        Ok(out)
    }

    /// Runs a read-only `op` on the session.
    pub fn read_session<T>(
        &self,
        id: &str,
        op: impl FnOnce(&Session) -> Result<T, SessionError>,
    ) -> Result<T, SessionError> {
        let handle = self.get(id)?;
        let s = lock(&handle);
        op(&s)
    }

    /// Blocks until the session leaves Building/Generating.
    pub fn wait(&self, id: &str, timeout: std::time::Duration) -> Result<(), SessionError> {
        let start = std::time::Instant::now();
        loop {
            let done = self.read_session(id, |s| Ok(s.is_ready() || s.error().is_some()))?;
            if done || start.elapsed() > timeout {
                return Ok(());
            }
            std::thread::sleep(std::time::Duration::from_millis(10));
        }
    }
}
