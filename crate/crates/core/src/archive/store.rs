//! Memento storage with an append-only JSON-lines journal.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::{Mutex, RwLock};

use base64::engine::general_purpose::STANDARD as BASE64;
use base64::Engine;
use serde::{Deserialize, Serialize};

use crate::date::DatetimeStamp;
use crate::headers::DatetimeInterval;
use crate::record::{MementoDraft, MementoRecord};
use crate::timemap::MementoEntry;

use super::ArchiveError;

#[derive(Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "snake_case")]
enum JournalEntry {
    Put {
        uri_m: String,
        uri_r: String,
        datetime: DatetimeStamp,
        created: DatetimeStamp,
        media_type: String,
        language: Option<String>,
        validity: Option<DatetimeInterval>,
        digest: String,
        body: String,
    },
    Validity {
        uri_m: String,
        validity: DatetimeInterval,
    },
}

#[derive(Default)]
struct State {
    // Each list is kept sorted by (datetime, uri_m).
    by_original: HashMap<String, Vec<MementoRecord>>,
    original_of: HashMap<String, String>,
}

impl State {
    fn insert(&mut self, record: MementoRecord) -> Result<(), ArchiveError> {
        if self.original_of.contains_key(record.uri_m()) {
            return Err(ArchiveError::DuplicateMemento(record.uri_m().to_string()));
        }
        self.original_of
            .insert(record.uri_m().to_string(), record.uri_r().to_string());
        let list = self.by_original.entry(record.uri_r().to_string()).or_default();
        let key = (record.datetime(), record.uri_m().to_string());
        let pos = list.partition_point(|r| (r.datetime(), r.uri_m().to_string()) < key);
        list.insert(pos, record);
        Ok(())
    }

    fn find_mut(&mut self, uri_m: &str) -> Option<&mut MementoRecord> {
        let uri_r = self.original_of.get(uri_m)?;
        self.by_original
            .get_mut(uri_r)?
            .iter_mut()
            .find(|r| r.uri_m() == uri_m)
    }
}

/// Keyed by original URI; bodies are never replaced once stored.
pub struct ArchiveStore {
    state: RwLock<State>,
    journal: Option<Mutex<File>>,
    path: Option<PathBuf>,
}

impl ArchiveStore {
    pub fn in_memory() -> Self {
        ArchiveStore {
            state: RwLock::new(State::default()),
            journal: None,
            path: None,
        }
    }

    /// Opens (or creates) a journal file and replays it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self, ArchiveError> {
        let path = path.as_ref();
        let mut state = State::default();
        if path.exists() {
            let reader = BufReader::new(File::open(path).map_err(ArchiveError::journal)?);
            for (lineno, line) in reader.lines().enumerate() {
                let line = line.map_err(ArchiveError::journal)?;
                if line.trim().is_empty() {
                    continue;
                }
                let entry: JournalEntry = serde_json::from_str(&line).map_err(|e| {
                    ArchiveError::Journal(format!("{}:{}: {e}", path.display(), lineno + 1))
                })?;
                replay(&mut state, entry)?;
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(ArchiveError::journal)?;
        Ok(ArchiveStore {
            state: RwLock::new(state),
            journal: Some(Mutex::new(file)),
            path: Some(path.to_path_buf()),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    fn append(&self, entry: &JournalEntry) -> Result<(), ArchiveError> {
        if let Some(journal) = &self.journal {
            let mut line = serde_json::to_string(entry).expect("journal entry serializes");
            line.push('\n');
            let mut file = journal.lock().expect("journal lock");
            file.write_all(line.as_bytes()).map_err(ArchiveError::journal)?;
            file.flush().map_err(ArchiveError::journal)?;
        }
        Ok(())
    }

    pub fn put(&self, record: MementoRecord) -> Result<String, ArchiveError> {
        let mut state = self.state.write().expect("store lock");
        if state.original_of.contains_key(record.uri_m()) {
            return Err(ArchiveError::DuplicateMemento(record.uri_m().to_string()));
        }
        self.append(&JournalEntry::Put {
            uri_m: record.uri_m().to_string(),
            uri_r: record.uri_r().to_string(),
            datetime: record.datetime(),
            created: record.created(),
            media_type: record.media_type().to_string(),
            language: record.language().map(str::to_string),
            validity: record.validity(),
            digest: record.digest().to_string(),
            body: BASE64.encode(record.body()),
        })?;
        let uri_m = record.uri_m().to_string();
        state.insert(record)?;
        Ok(uri_m)
    }

    pub fn set_validity(&self, uri_m: &str, validity: DatetimeInterval) -> Result<(), ArchiveError> {
        let mut state = self.state.write().expect("store lock");
        let record = state
            .find_mut(uri_m)
            .ok_or_else(|| ArchiveError::UnknownMemento(uri_m.to_string()))?;
        record.set_validity(validity)?;
        self.append(&JournalEntry::Validity {
            uri_m: uri_m.to_string(),
            validity,
        })
    }

    /// A clone of the record; bodies are shared, not copied.
    pub fn get(&self, uri_m: &str) -> Option<MementoRecord> {
        let state = self.state.read().expect("store lock");
        let uri_r = state.original_of.get(uri_m)?;
        state.by_original.get(uri_r)?.iter().find(|r| r.uri_m() == uri_m).cloned()
    }

    pub fn latest(&self, uri_r: &str) -> Option<MementoRecord> {
        let state = self.state.read().expect("store lock");
        state.by_original.get(uri_r)?.last().cloned()
    }

    pub fn records(&self, uri_r: &str) -> Vec<MementoRecord> {
        let state = self.state.read().expect("store lock");
        state.by_original.get(uri_r).cloned().unwrap_or_default()
    }

    /// Sorted metadata snapshot for one original.
    pub fn entries(&self, uri_r: &str) -> Vec<MementoEntry> {
        let state = self.state.read().expect("store lock");
        state
            .by_original
            .get(uri_r)
            .map(|list| list.iter().map(MementoEntry::from).collect())
            .unwrap_or_default()
    }

    pub fn originals(&self) -> Vec<String> {
        let state = self.state.read().expect("store lock");
        let mut v: Vec<_> = state.by_original.keys().cloned().collect();
        v.sort();
        v
    }

    pub fn len(&self) -> usize {
        self.state.read().expect("store lock").original_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

fn replay(state: &mut State, entry: JournalEntry) -> Result<(), ArchiveError> {
    match entry {
        JournalEntry::Put {
            uri_m,
            uri_r,
            datetime,
            created,
            media_type,
            language,
            validity,
            digest,
            body,
        } => {
            let body = BASE64
                .decode(body)
                .map_err(|e| ArchiveError::Journal(format!("bad body encoding for {uri_m}: {e}")))?;
            let record = MementoDraft {
                uri_m,
                uri_r,
                datetime,
                created,
                media_type,
                language,
                body,
                validity,
            }
            .build_with_digest(digest)?;
            state.insert(record)
        }
        JournalEntry::Validity { uri_m, validity } => {
            let record = state
                .find_mut(&uri_m)
                .ok_or_else(|| ArchiveError::UnknownMemento(uri_m.clone()))?;
            record.set_validity(validity)?;
            Ok(())
        }
    }
}
