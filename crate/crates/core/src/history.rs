//! Per-test outcome and duration from previous runs, persisted as one
//! JSON file per project.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::OutcomeKind;

pub const HISTORY_VERSION: u32 = 1;
pub const HISTORY_DIR: &str = ".flowtest";
pub const HISTORY_FILE: &str = "history.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    #[serde(rename = "id")]
    pub test_id: String,
    pub outcome: OutcomeKind,
    #[serde(rename = "duration_s")]
    pub duration: f64,
    pub run_id: String,
    pub finished_at: DateTime<Utc>,
}

#[derive(Serialize, Deserialize)]
struct HistoryFile {
    version: u32,
    records: Vec<RunRecord>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct HistoryStore {
    latest: BTreeMap<String, RunRecord>,
    storage_path: Option<PathBuf>,
    load_warning: Option<String>,
}

/// `<project>/.flowtest/history.json`
pub fn default_history_path(project_root: &Path) -> PathBuf {
    project_root.join(HISTORY_DIR).join(HISTORY_FILE)
}

impl HistoryStore {
    /// A store that lives only in memory.
    pub fn in_memory() -> Self {
        HistoryStore::default()
    }

    /// Load the store at `path`. A missing file yields an empty store; an
    /// unreadable, corrupt or unknown-version file yields an empty store
    /// with a warning.
    pub fn load(path: impl Into<PathBuf>) -> Self {
        let path = path.into();
        let mut store = HistoryStore { storage_path: Some(path.clone()), ..Default::default() };
        let bytes = match fs::read(&path) {
            Ok(bytes) => bytes,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return store,
            Err(e) => {
                store.load_warning = Some(format!("{}: cannot read history: {e}", path.display()));
                return store;
            }
        };
        match serde_json::from_slice::<HistoryFile>(&bytes) {
            Ok(file) if file.version == HISTORY_VERSION => {
                for record in file.records {
                    store.insert(record);
                }
            }
            Ok(file) => {
                store.load_warning =
                    Some(format!("{}: unsupported history version {}; starting empty", path.display(), file.version));
            }
            Err(e) => {
                store.load_warning = Some(format!("{}: corrupt history ({e}); starting empty", path.display()));
            }
        }
        store
    }

    pub fn storage_path(&self) -> Option<&Path> {
        self.storage_path.as_deref()
    }

    pub fn load_warning(&self) -> Option<&str> {
        self.load_warning.as_deref()
    }

    pub fn latest(&self) -> &BTreeMap<String, RunRecord> {
        &self.latest
    }

    pub fn get(&self, test_id: &str) -> Option<&RunRecord> {
        self.latest.get(test_id)
    }

    pub fn last_outcome(&self, test_id: &str) -> Option<OutcomeKind> {
        self.latest.get(test_id).map(|r| r.outcome)
    }

    pub fn len(&self) -> usize {
        self.latest.len()
    }

    pub fn is_empty(&self) -> bool {
        self.latest.is_empty()
    }

    // Most recent wins by finished_at; on a tie the later-applied record wins.
    fn insert(&mut self, record: RunRecord) {
        match self.latest.get(&record.test_id) {
            Some(existing) if existing.finished_at > record.finished_at => {}
            _ => {
                self.latest.insert(record.test_id.clone(), record);
            }
        }
    }

    /// Merge the records of one completed run and persist when the store
    /// has a storage path.
    pub fn record_run(&mut self, records: impl IntoIterator<Item = RunRecord>) -> Result<()> {
        for record in records {
            self.insert(record);
        }
        if self.storage_path.is_some() {
            self.persist()?;
        }
        Ok(())
    }

    pub fn persist(&self) -> Result<()> {
        match self.stage()? {
            Some(staged) => staged.commit(),
            None => Ok(()),
        }
    }

    /// Write the serialized store to a temporary sibling file. Nothing is
    /// visible at the storage path until [`StagedWrite::commit`].
    pub fn stage(&self) -> Result<Option<StagedWrite>> {
        let Some(path) = &self.storage_path else {
            return Ok(None);
        };
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
        let file = HistoryFile { version: HISTORY_VERSION, records: self.latest.values().cloned().collect() };
        let json = serde_json::to_vec_pretty(&file).expect("history serializes");
        let tmp = path.with_extension("json.tmp");
        let mut f = fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
        f.write_all(&json).map_err(|e| Error::io(&tmp, e))?;
        f.sync_all().map_err(|e| Error::io(&tmp, e))?;
        Ok(Some(StagedWrite { tmp, target: path.clone() }))
    }
}

#[must_use = "a staged write is invisible until committed"]
pub struct StagedWrite {
    tmp: PathBuf,
    target: PathBuf,
}

impl StagedWrite {
    pub fn commit(self) -> Result<()> {
        fs::rename(&self.tmp, &self.target).map_err(|e| Error::io(&self.target, e))
    }
}
