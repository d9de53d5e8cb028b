//! Reading and writing run artifacts relative to a run directory.

use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use nlicurate::modelgate::ScoreOutcome;
use nlicurate::{Error, Result};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

/// One scored instance as stored in a scores file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub instance_id: String,
    pub outcome: ScoreOutcome,
}

#[derive(Debug, Clone)]
pub struct ArtifactDir {
    root: PathBuf,
}

impl ArtifactDir {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Self { root: root.into() }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    fn create(&self, rel: &str) -> Result<std::fs::File> {
        let path = self.path(rel);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        Ok(std::fs::File::create(path)?)
    }

    pub fn exists(&self, rel: &str) -> bool {
        self.path(rel).is_file()
    }

    fn open(&self, rel: &str) -> Result<std::fs::File> {
        std::fs::File::open(self.path(rel)).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::Validation(format!(
                "missing artifact {rel}; run the stage that produces it first"
            )),
            _ => Error::Io(e),
        })
    }

    pub fn write_json<T: Serialize + ?Sized>(&self, rel: &str, value: &T) -> Result<()> {
        let mut body = serde_json::to_vec_pretty(value)?;
        body.push(b'\n');
        self.write_bytes(rel, &body)
    }

    pub fn write_bytes(&self, rel: &str, body: &[u8]) -> Result<()> {
        self.create(rel)?.write_all(body)?;
        Ok(())
    }

    pub fn write_jsonl<T: Serialize>(&self, rel: &str, rows: &[T]) -> Result<()> {
        let mut body = Vec::new();
        for row in rows {
            serde_json::to_writer(&mut body, row)?;
            body.push(b'\n');
        }
        self.write_bytes(rel, &body)
    }

    pub fn read_json<T: DeserializeOwned>(&self, rel: &str) -> Result<T> {
        Ok(serde_json::from_reader(BufReader::new(self.open(rel)?))?)
    }

    pub fn read_jsonl<T: DeserializeOwned>(&self, rel: &str) -> Result<Vec<T>> {
        let path = self.path(rel);
        let mut out = Vec::new();
        for (i, line) in BufReader::new(self.open(rel)?).lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            out.push(serde_json::from_str(&line).map_err(|e| Error::Parse {
                path: path.clone(),
                line: i + 1,
                message: e.to_string(),
            })?);
        }
        Ok(out)
    }
}
