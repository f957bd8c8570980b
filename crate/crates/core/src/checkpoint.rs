//! Versioned JSON checkpoints.
//!
//! A checkpoint is self-contained: it embeds the settings, the task, the
//! engine state, the RNG position, the cost ledger and the evaluation cache,
//! so a resumed run continues exactly where the interrupted one stopped.

use std::io::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::config::Settings;
use crate::engine::{Engine, EngineState, RngState};
use crate::error::{Error, Result};
use crate::evaluation::EvalCacheSnapshot;
use crate::gateway::{CostLedger, Gateway};
use crate::task::TaskFile;

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub settings: Settings,
    pub task: TaskFile,
    pub backend: String,
    pub rng: RngState,
    pub engine: EngineState,
    pub ledger: CostLedger,
    pub eval_cache: EvalCacheSnapshot,
}

impl Checkpoint {
    pub fn capture(settings: &Settings, task: &TaskFile, engine: &Engine<'_>, gateway: &Gateway) -> Result<Self> {
        Ok(Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: settings.hash()?,
            settings: settings.clone(),
            task: task.clone(),
            backend: gateway.backend_identity(),
            rng: engine.rng_state(),
            engine: engine.state().clone(),
            ledger: gateway.ledger_snapshot(),
            eval_cache: engine.evaluator().snapshot_cache(),
        })
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }

    /// Parses and checks version and config hash.
    pub fn from_json(text: &str, origin: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::parse(origin, e.to_string()))?;
        match value.get("version").and_then(Value::as_u64) {
            Some(v) if v == u64::from(CHECKPOINT_VERSION) => {}
            Some(v) => {
                return Err(Error::Incompatible(format!(
                    "{origin} has version {v}, this build reads version {CHECKPOINT_VERSION}"
                )))
            }
            None => return Err(Error::parse(origin, "missing checkpoint version")),
        }
        let cp: Checkpoint = serde_json::from_value(value).map_err(|e| Error::parse(origin, e.to_string()))?;
        let hash = cp.settings.hash()?;
        if hash != cp.config_hash {
            return Err(Error::Incompatible(format!(
                "{origin}: config hash {} does not match its settings ({hash})",
                cp.config_hash
            )));
        }
        Ok(cp)
    }

    /// Restores the ledger into `gateway` and rebuilds the engine.
    ///
    /// Fails with `Incompatible` when `gateway` talks to a different backend
    /// than the one that wrote the checkpoint.
    pub fn resume<'a>(&'a self, gateway: &'a Gateway) -> Result<Engine<'a>> {
        let identity = gateway.backend_identity();
        if identity != self.backend {
            return Err(Error::Incompatible(format!(
                "checkpoint was written with backend {:?}, not {identity:?}",
                self.backend
            )));
        }
        gateway.restore_ledger(self.ledger.clone());
        Engine::resume(&self.settings.run, &self.task, gateway, self.engine.clone(), &self.rng, &self.eval_cache)
    }
}

/// Writes `bytes` next to `path` and renames over it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let name = path
        .file_name()
        .ok_or_else(|| Error::InvalidArgument(format!("{} is not a file path", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    let mut f = std::fs::File::create(&tmp).map_err(|e| Error::io(&tmp, e))?;
    f.write_all(bytes).map_err(|e| Error::io(&tmp, e))?;
    f.sync_all().map_err(|e| Error::io(&tmp, e))?;
    drop(f);
    std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
}

pub fn save_checkpoint(path: impl AsRef<Path>, checkpoint: &Checkpoint) -> Result<()> {
    write_atomic(path.as_ref(), checkpoint.to_json()?.as_bytes())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Checkpoint> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    Checkpoint::from_json(&text, &path.display().to_string())
}
