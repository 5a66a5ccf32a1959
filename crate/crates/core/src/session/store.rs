//! Persistent lexicon and per-session event logs.
//!
//! Both files are replaced wholesale through a temporary file in the same
//! directory followed by a rename, so readers never observe a partial write.

use std::collections::BTreeMap;
use std::io::{self, Write};
use std::path::{Path, PathBuf};
use std::sync::RwLock;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};

use super::events::SessionEvent;
use crate::error::SessionError;

/// Writes `bytes` to `path` via a sibling temp file and an atomic rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexiconEntry {
    pub node: String,
    pub confidence: f64,
    pub n: usize,
    pub committed_at: DateTime<Utc>,
}

/// Committed word → node mappings. Serializes as a JSON object keyed by word.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Lexicon {
    entries: BTreeMap<String, LexiconEntry>,
}

impl Lexicon {
    pub fn get(&self, word: &str) -> Option<&LexiconEntry> {
        self.entries.get(word)
    }

    pub fn contains(&self, word: &str) -> bool {
        self.entries.contains_key(word)
    }

    pub fn insert(&mut self, word: String, entry: LexiconEntry) {
        self.entries.insert(word, entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &LexiconEntry)> {
        self.entries.iter()
    }

    /// Reads a lexicon file; a missing file is an empty lexicon.
    pub fn load(path: &Path) -> io::Result<Self> {
        match std::fs::read_to_string(path) {
            Ok(text) => serde_json::from_str(&text)
                .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e)),
            Err(e) if e.kind() == io::ErrorKind::NotFound => Ok(Lexicon::default()),
            Err(e) => Err(e),
        }
    }

    pub fn save(&self, path: &Path) -> io::Result<()> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        write_atomic(path, &bytes)
    }
}

/// The lexicon shared by all sessions: many readers, one committer at a time.
#[derive(Debug, Default)]
pub struct LexiconStore {
    inner: RwLock<Lexicon>,
    path: Option<PathBuf>,
}

impl LexiconStore {
    pub fn in_memory() -> Self {
        LexiconStore::default()
    }

    /// Opens (or starts) a file-backed lexicon.
    pub fn open(path: impl Into<PathBuf>) -> io::Result<Self> {
        let path = path.into();
        let lexicon = Lexicon::load(&path)?;
        Ok(LexiconStore {
            inner: RwLock::new(lexicon),
            path: Some(path),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn snapshot(&self) -> Lexicon {
        self.inner.read().expect("lexicon lock poisoned").clone()
    }

    pub fn contains(&self, word: &str) -> bool {
        self.inner.read().expect("lexicon lock poisoned").contains(word)
    }

    pub fn get(&self, word: &str) -> Option<LexiconEntry> {
        self.inner.read().expect("lexicon lock poisoned").get(word).cloned()
    }

    /// Adds or replaces an entry. The file is written before the in-memory
    /// view changes; on a write failure neither changes.
    pub fn commit(&self, word: &str, entry: LexiconEntry) -> io::Result<()> {
        let mut guard = self.inner.write().expect("lexicon lock poisoned");
        let mut next = guard.clone();
        next.insert(word.to_string(), entry);
        if let Some(path) = &self.path {
            next.save(path)?;
        }
        *guard = next;
        Ok(())
    }
}

/// Append-only event log for one session, stored as JSON lines.
#[derive(Debug, Clone)]
pub struct EventLog {
    path: PathBuf,
}

impl EventLog {
    /// Creates an empty log file at `path`.
    pub fn create(path: impl Into<PathBuf>) -> io::Result<Self> {
        let log = EventLog { path: path.into() };
        write_atomic(&log.path, b"")?;
        Ok(log)
    }

    /// Binds to an existing log file without touching it.
    pub fn attach(path: impl Into<PathBuf>) -> Self {
        EventLog { path: path.into() }
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Rewrites the file with the full event list.
    pub fn persist(&self, events: &[SessionEvent]) -> io::Result<()> {
        write_atomic(&self.path, &encode_events(events)?)
    }

    pub fn read(&self) -> Result<Vec<SessionEvent>, SessionError> {
        let text = std::fs::read_to_string(&self.path)?;
        decode_events(&text)
    }
}

pub fn encode_events(events: &[SessionEvent]) -> io::Result<Vec<u8>> {
    let mut out = Vec::new();
    for e in events {
        serde_json::to_writer(&mut out, e)?;
        out.push(b'\n');
    }
    Ok(out)
}

/// Parses JSON-lines event text. Blank lines are ignored.
pub fn decode_events(text: &str) -> Result<Vec<SessionEvent>, SessionError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l)
                .map_err(|e| SessionError::CorruptLog(format!("line {}: {e}", i + 1)))
        })
        .collect()
}
