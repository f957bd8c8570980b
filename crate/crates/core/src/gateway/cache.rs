use std::collections::HashMap;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use super::{Backend, BackendError, CompletionRequest, CompletionResponse};
use crate::error::{Error, Result};

/// Cache identity of a request: purpose and seed hint are deliberately
/// not part of it.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct CacheKey {
    backend: String,
    prompt_text: String,
    temperature_bits: u64,
    max_tokens: Option<u32>,
}

impl CacheKey {
    pub fn new(backend: &str, req: &CompletionRequest) -> Self {
        CacheKey {
            backend: backend.to_string(),
            prompt_text: req.prompt_text.clone(),
            temperature_bits: req.temperature.to_bits(),
            max_tokens: req.max_tokens,
        }
    }
}

/// One line of the append-only replay file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CacheRecord {
    pub backend: String,
    pub prompt_text: String,
    pub temperature: f64,
    pub max_tokens: Option<u32>,
    pub text: String,
    pub prompt_tokens: u64,
    pub completion_tokens: u64,
}

impl CacheRecord {
    fn key(&self) -> CacheKey {
        CacheKey {
            backend: self.backend.clone(),
            prompt_text: self.prompt_text.clone(),
            temperature_bits: self.temperature.to_bits(),
            max_tokens: self.max_tokens,
        }
    }

    fn response(&self) -> CompletionResponse {
        CompletionResponse {
            text: self.text.clone(),
            prompt_tokens: self.prompt_tokens,
            completion_tokens: self.completion_tokens,
        }
    }
}

fn read_records(path: &Path) -> Result<Vec<CacheRecord>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: CacheRecord = serde_json::from_str(&line)
            .map_err(|e| Error::parse(format!("{}:{}", path.display(), i + 1), e.to_string()))?;
        out.push(rec);
    }
    Ok(out)
}

/// Response cache, optionally persisted as append-only JSONL. The first
/// response stored for a key wins.
pub struct ResponseCache {
    map: RwLock<HashMap<CacheKey, CompletionResponse>>,
    file: Option<Mutex<File>>,
}

impl ResponseCache {
    pub fn in_memory() -> Self {
        ResponseCache {
            map: RwLock::new(HashMap::new()),
            file: None,
        }
    }

    /// Loads every record already in `path` (if it exists) and appends new
    /// entries to it.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut map = HashMap::new();
        if path.exists() {
            for rec in read_records(path)? {
                map.entry(rec.key()).or_insert_with(|| rec.response());
            }
        }
        let file = OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)
            .map_err(|e| Error::io(path, e))?;
        Ok(ResponseCache {
            map: RwLock::new(map),
            file: Some(Mutex::new(file)),
        })
    }

    pub fn len(&self) -> usize {
        self.map.read().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn get(&self, key: &CacheKey) -> Option<CompletionResponse> {
        self.map.read().get(key).cloned()
    }

    /// Stores `resp` unless the key is already present; returns whichever
    /// response is now cached.
    pub fn insert(
        &self,
        key: CacheKey,
        resp: CompletionResponse,
    ) -> std::result::Result<CompletionResponse, String> {
        let mut map = self.map.write();
        if let Some(existing) = map.get(&key) {
            return Ok(existing.clone());
        }
        if let Some(file) = &self.file {
            let rec = CacheRecord {
                backend: key.backend.clone(),
                prompt_text: key.prompt_text.clone(),
                temperature: f64::from_bits(key.temperature_bits),
                max_tokens: key.max_tokens,
                text: resp.text.clone(),
                prompt_tokens: resp.prompt_tokens,
                completion_tokens: resp.completion_tokens,
            };
            let mut line = serde_json::to_string(&rec).map_err(|e| e.to_string())?;
            line.push('\n');
            let mut f = file.lock();
            f.write_all(line.as_bytes()).map_err(|e| e.to_string())?;
            f.flush().map_err(|e| e.to_string())?;
        }
        map.insert(key, resp.clone());
        Ok(resp)
    }
}

/// Serves responses recorded in a replay file, regardless of which backend
/// produced them. Anything not recorded is a miss.
pub struct ReplayBackend {
    path: PathBuf,
    map: HashMap<(String, u64, Option<u32>), CompletionResponse>,
}

impl ReplayBackend {
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut map = HashMap::new();
        for rec in read_records(path)? {
            map.entry((rec.prompt_text.clone(), rec.temperature.to_bits(), rec.max_tokens))
                .or_insert_with(|| rec.response());
        }
        Ok(ReplayBackend {
            path: path.to_path_buf(),
            map,
        })
    }
}

impl Backend for ReplayBackend {
    fn identity(&self) -> String {
        format!("replay:{}", self.path.display())
    }

    fn complete(&self, req: &CompletionRequest) -> std::result::Result<CompletionResponse, BackendError> {
        self.map
            .get(&(req.prompt_text.clone(), req.temperature.to_bits(), req.max_tokens))
            .cloned()
            .ok_or_else(|| {
                let head: String = req.prompt_text.chars().take(60).collect();
                BackendError::ScriptMiss(format!("replay has no entry for {head:?}"))
            })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gateway::{Gateway, GatewayError, MockBackend, Purpose};
    use std::sync::Arc;

    #[test]
    fn persisted_cache_round_trips_through_replay() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("replay.jsonl");
        let backend = MockBackend::new()
            .with_responder(|r: &CompletionRequest| Some(format!("echo {}", r.prompt_text)));
        {
            let g = Gateway::new(Arc::new(backend)).with_cache(ResponseCache::open(&path).unwrap());
            for p in ["a", "b", "a"] {
                g.complete(&CompletionRequest::new(p, 0.0, Purpose::Evaluation)).unwrap();
            }
        }
        let lines = std::fs::read_to_string(&path).unwrap();
        assert_eq!(lines.lines().count(), 2);

        let reopened = ResponseCache::open(&path).unwrap();
        assert_eq!(reopened.len(), 2);

        let g = Gateway::new(Arc::new(ReplayBackend::open(&path).unwrap()));
        let r = g.complete(&CompletionRequest::new("b", 0.0, Purpose::Evaluation)).unwrap();
        assert_eq!(r.text, "echo b");
        assert!(matches!(
            g.complete(&CompletionRequest::new("b", 0.5, Purpose::Evaluation)),
            Err(GatewayError::ScriptMiss(_))
        ));
    }

    #[test]
    fn first_write_wins() {
        let c = ResponseCache::in_memory();
        let key = CacheKey::new("m", &CompletionRequest::new("p", 0.5, Purpose::Evaluation));
        let first = CompletionResponse {
            text: "one".into(),
            ..Default::default()
        };
        let second = CompletionResponse {
            text: "two".into(),
            ..Default::default()
        };
        c.insert(key.clone(), first).unwrap();
        assert_eq!(c.insert(key.clone(), second).unwrap().text, "one");
        assert_eq!(c.get(&key).unwrap().text, "one");
    }

    #[test]
    fn corrupt_replay_file_is_a_parse_error() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.jsonl");
        std::fs::write(&path, "{not json\n").unwrap();
        assert!(matches!(ReplayBackend::open(&path), Err(Error::Parse { .. })));
    }
}
