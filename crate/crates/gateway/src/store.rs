//! On-disk persistence: one JSON document for the service state and an
//! append-only JSONL journal of endorsement and moderation events.

use std::fs::{self, File, OpenOptions};
use std::io::{self, BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use meronym_core::identity::JournalEvent;
use meronym_core::service::PersistedState;
use thiserror::Error;

const STATE_FILE: &str = "state.json";
const JOURNAL_FILE: &str = "journal.jsonl";

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Corrupt { path: PathBuf, source: serde_json::Error },
}

fn io_at(path: &Path) -> impl FnOnce(io::Error) -> StoreError + '_ {
    move |source| StoreError::Io {
        path: path.to_owned(),
        source,
    }
}

#[derive(Debug, Clone)]
pub struct Store {
    dir: PathBuf,
}

impl Store {
    /// Creates the directory if needed and checks that it is writable.
    pub fn open(dir: impl Into<PathBuf>) -> Result<Self, StoreError> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(io_at(&dir))?;
        let store = Self { dir };
        let journal = store.journal_path();
        OpenOptions::new().create(true).append(true).open(&journal).map_err(io_at(&journal))?;
        Ok(store)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn state_path(&self) -> PathBuf {
        self.dir.join(STATE_FILE)
    }

    pub fn journal_path(&self) -> PathBuf {
        self.dir.join(JOURNAL_FILE)
    }

    /// `None` for a fresh store.
    pub fn load(&self) -> Result<Option<PersistedState>, StoreError> {
        let path = self.state_path();
        let file = match File::open(&path) {
            Ok(f) => f,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(io_at(&path)(e)),
        };
        serde_json::from_reader(BufReader::new(file))
            .map(Some)
            .map_err(|source| StoreError::Corrupt { path, source })
    }

    /// Replaces the state document atomically: write a sibling file, sync it,
    /// then rename over the old one.
    pub fn save(&self, state: &PersistedState) -> Result<(), StoreError> {
        let path = self.state_path();
        let tmp = self.dir.join(format!("{STATE_FILE}.tmp"));
        let body = serde_json::to_vec(state).map_err(|source| StoreError::Corrupt {
            path: path.clone(),
            source,
        })?;
        let mut file = File::create(&tmp).map_err(io_at(&tmp))?;
        file.write_all(&body).map_err(io_at(&tmp))?;
        file.sync_all().map_err(io_at(&tmp))?;
        fs::rename(&tmp, &path).map_err(io_at(&path))
    }

    pub fn append_journal(&self, events: &[JournalEvent]) -> Result<(), StoreError> {
        if events.is_empty() {
            return Ok(());
        }
        let path = self.journal_path();
        let mut buf = Vec::new();
        for event in events {
            serde_json::to_writer(&mut buf, event).expect("journal events serialize");
            buf.push(b'\n');
        }
        let mut file = OpenOptions::new().create(true).append(true).open(&path).map_err(io_at(&path))?;
        file.write_all(&buf).map_err(io_at(&path))?;
        file.sync_data().map_err(io_at(&path))
    }

    pub fn read_journal(&self) -> Result<Vec<JournalEvent>, StoreError> {
        let path = self.journal_path();
        let file = File::open(&path).map_err(io_at(&path))?;
        let mut out = Vec::new();
        for line in BufReader::new(file).lines() {
            let line = line.map_err(io_at(&path))?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|source| StoreError::Corrupt {
                path: path.clone(),
                source,
            })?);
        }
        Ok(out)
    }
}
