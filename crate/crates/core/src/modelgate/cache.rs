//! Response cache backed by an append-only JSON Lines journal.

use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use std::sync::{Mutex, RwLock};

use super::transport::ChatResponse;
use crate::error::Result;

#[derive(Debug, Serialize, Deserialize)]
struct JournalEntry {
    key: String,
    response: ChatResponse,
}

/// Map from request digest to response. Reads are concurrent; appends are
/// serialized through one writer. The first response stored under a key is
/// the one every later read sees.
#[derive(Debug)]
pub struct ResponseCache {
    path: Option<PathBuf>,
    entries: RwLock<HashMap<String, ChatResponse>>,
    journal: Mutex<Option<BufWriter<File>>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        Self {
            path: None,
            entries: RwLock::new(HashMap::new()),
            journal: Mutex::new(None),
        }
    }

    /// Opens (or creates) the journal at `path` and replays it. A torn final
    /// line, left by an interrupted write, is ignored.
    pub fn open(path: &Path) -> Result<Self> {
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        let mut entries = HashMap::new();
        if path.exists() {
            let lines: Vec<String> = BufReader::new(File::open(path)?)
                .lines()
                .collect::<std::io::Result<_>>()?;
            let last = lines.len().saturating_sub(1);
            for (n, line) in lines.iter().enumerate() {
                if line.trim().is_empty() {
                    continue;
                }
                match serde_json::from_str::<JournalEntry>(line) {
                    Ok(e) => {
                        entries.entry(e.key).or_insert(e.response);
                    }
                    Err(e) if n == last => {
                        log::warn!("{}: ignoring torn final journal line: {e}", path.display());
                    }
                    Err(e) => {
                        return Err(crate::Error::Parse {
                            path: path.to_path_buf(),
                            line: n + 1,
                            message: e.to_string(),
                        })
                    }
                }
            }
        }
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        Ok(Self {
            path: Some(path.to_path_buf()),
            entries: RwLock::new(entries),
            journal: Mutex::new(Some(BufWriter::new(file))),
        })
    }

    pub fn path(&self) -> Option<&Path> {
        self.path.as_deref()
    }

    pub fn get(&self, key: &str) -> Option<ChatResponse> {
        self.entries.read().expect("cache lock").get(key).cloned()
    }

    pub fn len(&self) -> usize {
        self.entries.read().expect("cache lock").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Stores `response` unless the key is already present; returns the
    /// response now associated with `key`.
    pub fn insert(&self, key: &str, response: ChatResponse) -> Result<ChatResponse> {
        let mut journal = self.journal.lock().expect("journal lock");
        {
            let entries = self.entries.read().expect("cache lock");
            if let Some(existing) = entries.get(key) {
                return Ok(existing.clone());
            }
        }
        if let Some(w) = journal.as_mut() {
            let entry = JournalEntry {
                key: key.to_string(),
                response,
            };
            serde_json::to_writer(&mut *w, &entry)?;
            w.write_all(b"\n")?;
            w.flush()?;
            self.entries
                .write()
                .expect("cache lock")
                .insert(entry.key, entry.response.clone());
            Ok(entry.response)
        } else {
            self.entries
                .write()
                .expect("cache lock")
                .insert(key.to_string(), response.clone());
            Ok(response)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn resp(s: &str) -> ChatResponse {
        ChatResponse {
            content: s.into(),
            logprobs: None,
        }
    }

    #[test]
    fn journal_replays() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cache/journal.jsonl");
        {
            let c = ResponseCache::open(&path).unwrap();
            c.insert("k1", resp("a")).unwrap();
            c.insert("k2", resp("b")).unwrap();
            assert_eq!(c.insert("k1", resp("zzz")).unwrap().content, "a");
        }
        let c = ResponseCache::open(&path).unwrap();
        assert_eq!(c.len(), 2);
        assert_eq!(c.get("k2").unwrap().content, "b");
        let lines = std::fs::read_to_string(&path).unwrap().lines().count();
        assert_eq!(lines, 2);
    }

    #[test]
    fn torn_tail_tolerated() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        std::fs::write(
            &path,
            "{\"key\":\"a\",\"response\":{\"content\":\"x\"}}\n{\"key\":\"b\",\"resp",
        )
        .unwrap();
        let c = ResponseCache::open(&path).unwrap();
        assert_eq!(c.len(), 1);
    }

    #[test]
    fn corrupt_middle_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("j.jsonl");
        std::fs::write(
            &path,
            "garbage\n{\"key\":\"a\",\"response\":{\"content\":\"x\"}}\n",
        )
        .unwrap();
        assert!(ResponseCache::open(&path).is_err());
    }
}
