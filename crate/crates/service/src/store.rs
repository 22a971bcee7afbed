//! Sessions on disk: one append-only JSON-lines file per session.
//!
//! The first line of `<id>.jsonl` is a header (`id`, `created_at`); each
//! following line is one [`SessionEvent`]. Every write is flushed with
//! `sync_data` before the call returns, so an acknowledged event survives a
//! crash. A torn final line left by a crash mid-write is dropped on load.

use std::collections::HashMap;
use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;
use wd_core::session::{is_valid_session_id, EventPayload, Session, SessionError, SessionEvent};

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("session `{0}` not found")]
    NotFound(String),
    #[error("session `{0}` already exists")]
    Exists(String),
    #[error(transparent)]
    Session(#[from] SessionError),
    #[error("session store i/o: {0}")]
    Io(#[from] io::Error),
    #[error("session file {path} is corrupt at line {line}: {reason}")]
    Corrupt { path: String, line: usize, reason: String },
}

#[derive(Serialize, Deserialize)]
struct Header {
    id: String,
    created_at: DateTime<Utc>,
}

type Slot = Arc<Mutex<Option<Session>>>;

pub struct SessionStore {
    dir: PathBuf,
    slots: Mutex<HashMap<String, Slot>>,
}

impl SessionStore {
    pub fn open(data_dir: &Path) -> Result<Self, StoreError> {
        let dir = data_dir.join("sessions");
        fs::create_dir_all(&dir)?;
        Ok(Self { dir, slots: Mutex::new(HashMap::new()) })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, id: &str) -> PathBuf {
        self.dir.join(format!("{id}.jsonl"))
    }

    /// Per-session lock; appends to one session are serialized, different
    /// sessions proceed independently.
    fn slot(&self, id: &str) -> Slot {
        self.slots.lock().expect("slot map poisoned").entry(id.to_string()).or_default().clone()
    }

    pub fn create(&self, id: &str, created_at: DateTime<Utc>) -> Result<Session, StoreError> {
        if !is_valid_session_id(id) {
            return Err(StoreError::Exists(id.to_string()));
        }
        let slot = self.slot(id);
        let mut guard = slot.lock().expect("session lock poisoned");
        let path = self.path(id);
        let mut file = match OpenOptions::new().write(true).create_new(true).open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::AlreadyExists => return Err(StoreError::Exists(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let header = serde_json::to_string(&Header { id: id.to_string(), created_at }).expect("header serializes");
        file.write_all(format!("{header}\n").as_bytes())?;
        file.sync_data()?;
        // Make the new directory entry itself durable.
        File::open(&self.dir)?.sync_all()?;
        let session = Session::new(id, created_at);
        *guard = Some(session.clone());
        Ok(session)
    }

    pub fn get(&self, id: &str) -> Result<Session, StoreError> {
        if !is_valid_session_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let slot = self.slot(id);
        let mut guard = slot.lock().expect("session lock poisoned");
        Ok(self.loaded(id, &mut guard)?.clone())
    }

    fn loaded<'a>(&self, id: &str, guard: &'a mut Option<Session>) -> Result<&'a mut Session, StoreError> {
        if guard.is_none() {
            *guard = Some(self.load(id)?);
        }
        Ok(guard.as_mut().expect("just loaded"))
    }

    fn load(&self, id: &str) -> Result<Session, StoreError> {
        let path = self.path(id);
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Err(StoreError::NotFound(id.to_string())),
            Err(e) => return Err(e.into()),
        };
        let corrupt = |line: usize, reason: String| StoreError::Corrupt { path: path.display().to_string(), line, reason };
        let mut reader = BufReader::new(file);
        let mut good_len = 0u64;
        let mut session: Option<Session> = None;
        let mut line_no = 0;
        loop {
            let mut line = String::new();
            let n = reader.read_line(&mut line)?;
            if n == 0 {
                break;
            }
            line_no += 1;
            // Lines are written with their newline in one call, so a line
            // without one is a torn write that was never acknowledged.
            if !line.ends_with('\n') {
                break;
            }
            let text = line.trim_end();
            match &mut session {
                None => {
                    let h: Header = serde_json::from_str(text).map_err(|e| corrupt(line_no, e.to_string()))?;
                    session = Some(Session::new(h.id, h.created_at));
                }
                Some(s) => s.events.push(serde_json::from_str(text).map_err(|e| corrupt(line_no, e.to_string()))?),
            }
            good_len += n as u64;
        }
        let session = session.ok_or_else(|| StoreError::NotFound(id.to_string()))?;
        let on_disk = fs::metadata(&path)?.len();
        if on_disk > good_len {
            tracing::warn!(session = id, dropped_bytes = on_disk - good_len, "dropping torn tail of session log");
            let f = OpenOptions::new().write(true).open(&path)?;
            f.set_len(good_len)?;
            f.sync_data()?;
        }
        Ok(session)
    }

    /// Checks causal order, then writes and syncs the event before
    /// returning it.
    pub fn append(&self, id: &str, payload: EventPayload, now: DateTime<Utc>) -> Result<SessionEvent, StoreError> {
        if !is_valid_session_id(id) {
            return Err(StoreError::NotFound(id.to_string()));
        }
        let slot = self.slot(id);
        let mut guard = slot.lock().expect("session lock poisoned");
        let session = self.loaded(id, &mut guard)?;
        let event = session.append(payload, now)?.clone();
        let line = serde_json::to_string(&event).expect("events serialize");
        let written = OpenOptions::new().append(true).open(self.path(id)).and_then(|mut f| {
            f.write_all(format!("{line}\n").as_bytes())?;
            f.sync_data()
        });
        if let Err(e) = written {
            session.events.pop();
            // The file may now hold a partial line; reload from disk next time.
            *guard = None;
            return Err(e.into());
        }
        Ok(event)
    }

    /// Forgets in-memory state so the next access re-reads from disk.
    pub fn evict_all(&self) {
        self.slots.lock().expect("slot map poisoned").clear();
    }
}
