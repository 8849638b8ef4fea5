//! On-disk response cache. One JSON file per entry, named by the entry key.

use std::fs;
use std::io::{self, Write};
use std::path::{Path, PathBuf};

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::GatewayError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheEntry {
    pub key: String,
    pub raw_response: String,
    pub created_at: DateTime<Utc>,
}

#[derive(Serialize)]
struct KeyMaterial<'a> {
    model: &'a str,
    temperature: f64,
    top_p: f64,
    prompt: &'a str,
    round: u32,
}

/// Hex SHA-256 of the canonical JSON encoding of the query parameters.
pub fn cache_key(model: &str, temperature: f64, top_p: f64, prompt: &str, round: u32) -> String {
    let material = KeyMaterial {
        model,
        temperature,
        top_p,
        prompt,
        round,
    };
    let bytes = serde_json::to_vec(&material).expect("key material serializes");
    hex::encode(Sha256::digest(&bytes))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct CacheSummary {
    pub entries: usize,
    pub bytes: u64,
}

#[derive(Debug, Clone)]
pub struct ResponseCache {
    dir: PathBuf,
}

fn cache_err(path: &Path, e: impl ToString) -> GatewayError {
    GatewayError::Cache {
        path: path.display().to_string(),
        message: e.to_string(),
    }
}

fn is_key(name: &str) -> bool {
    name.len() == 64 && name.bytes().all(|b| b.is_ascii_hexdigit())
}

impl ResponseCache {
    /// Opens `dir`, creating it when missing.
    pub fn open(dir: &Path) -> Result<Self, GatewayError> {
        fs::create_dir_all(dir).map_err(|e| cache_err(dir, e))?;
        Ok(ResponseCache {
            dir: dir.to_path_buf(),
        })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Result<Option<CacheEntry>, GatewayError> {
        let path = self.path(key);
        let text = match fs::read_to_string(&path) {
            Ok(t) => t,
            Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(cache_err(&path, e)),
        };
        let entry: CacheEntry = serde_json::from_str(&text).map_err(|e| cache_err(&path, e))?;
        if entry.key != key {
            return Err(cache_err(&path, "entry key does not match file name"));
        }
        Ok(Some(entry))
    }

    /// Writes `entry` through a temporary file and an atomic no-clobber
    /// rename. Returns the entry that ends up stored, which is the existing
    /// one if another writer got there first.
    pub fn put(&self, entry: CacheEntry) -> Result<CacheEntry, GatewayError> {
        let path = self.path(&entry.key);
        if let Some(existing) = self.get(&entry.key)? {
            return Ok(existing);
        }
        let mut tmp = tempfile::Builder::new()
            .prefix(".pending-")
            .tempfile_in(&self.dir)
            .map_err(|e| cache_err(&self.dir, e))?;
        let body = serde_json::to_string_pretty(&entry).expect("cache entry serializes");
        tmp.write_all(body.as_bytes())
            .and_then(|_| tmp.as_file().sync_all())
            .map_err(|e| cache_err(tmp.path(), e))?;
        match tmp.persist_noclobber(&path) {
            Ok(_) => Ok(entry),
            Err(e) if e.error.kind() == io::ErrorKind::AlreadyExists => self
                .get(&entry.key)?
                .ok_or_else(|| cache_err(&path, "entry vanished after a concurrent write")),
            Err(e) => Err(cache_err(&path, e.error)),
        }
    }

    /// All entry keys, sorted.
    pub fn keys(&self) -> Result<Vec<String>, GatewayError> {
        let mut keys = Vec::new();
        for item in fs::read_dir(&self.dir).map_err(|e| cache_err(&self.dir, e))? {
            let item = item.map_err(|e| cache_err(&self.dir, e))?;
            let name = item.file_name().to_string_lossy().into_owned();
            if let Some(stem) = name.strip_suffix(".json") {
                if is_key(stem) {
                    keys.push(stem.to_string());
                }
            }
        }
        keys.sort();
        Ok(keys)
    }

    pub fn summary(&self) -> Result<CacheSummary, GatewayError> {
        let mut s = CacheSummary::default();
        for key in self.keys()? {
            let path = self.path(&key);
            s.entries += 1;
            s.bytes += fs::metadata(&path).map_err(|e| cache_err(&path, e))?.len();
        }
        Ok(s)
    }

    /// Removes every entry and returns how many were deleted.
    pub fn clear(&self) -> Result<usize, GatewayError> {
        let keys = self.keys()?;
        for key in &keys {
            let path = self.path(key);
            fs::remove_file(&path).map_err(|e| cache_err(&path, e))?;
        }
        Ok(keys.len())
    }

    /// Writes every entry as one JSON line, in key order.
    pub fn export<W: Write>(&self, mut out: W) -> Result<usize, GatewayError> {
        let keys = self.keys()?;
        for key in &keys {
            let entry = self.get(key)?.expect("listed key exists");
            let line = serde_json::to_string(&entry).expect("cache entry serializes");
            writeln!(out, "{line}").map_err(|e| cache_err(&self.dir, e))?;
        }
        Ok(keys.len())
    }
}
