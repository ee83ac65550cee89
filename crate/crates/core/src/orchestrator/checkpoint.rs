//! `<root>/epoch_<k>/{controller.bin, evaluator.bin, rng.json, meta.json}`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::archive::fnv1a64;
use crate::nn::TensorArchive;
use crate::session::{Progress, Session, SessionRngs};

const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub version: u32,
    pub epoch: usize,
    pub controller: String,
    pub evaluator: String,
    /// Hash of the session config; resuming under another config fails.
    pub config_hash: u64,
    pub progress: Progress,
}

fn config_hash(session: &Session) -> u64 {
    fnv1a64(session.config.to_yaml_string().as_bytes())
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e))
}

/// Writes the session state under `root/epoch_<epochs_done>` and returns
/// that directory. Files go to a temporary sibling first.
pub fn save_checkpoint(session: &Session, root: &Path) -> Result<PathBuf> {
    let epoch = session.progress.epochs_done;
    let dir = root.join(format!("epoch_{epoch}"));
    let tmp = root.join(format!(".epoch_{epoch}.tmp"));
    if tmp.exists() {
        std::fs::remove_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    }
    std::fs::create_dir_all(&tmp).map_err(|e| Error::io(&tmp, e))?;
    let meta = CheckpointMeta {
        version: VERSION,
        epoch,
        controller: session.controller.type_name().into(),
        evaluator: session.evaluator.type_name().into(),
        config_hash: config_hash(session),
        progress: session.progress.clone(),
    };
    write(&tmp.join("controller.bin"), &session.controller.save()?.to_bytes())?;
    write(&tmp.join("evaluator.bin"), &session.evaluator.save()?.to_bytes())?;
    write(&tmp.join("rng.json"), &serde_json::to_vec_pretty(&session.rngs)?)?;
    write(&tmp.join("meta.json"), &serde_json::to_vec_pretty(&meta)?)?;
    if dir.exists() {
        std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
    }
    std::fs::rename(&tmp, &dir).map_err(|e| Error::io(&dir, e))?;
    Ok(dir)
}

/// Restores controller, evaluator, RNG streams and progress. On error the
/// session is unchanged.
pub fn load_checkpoint(session: &mut Session, dir: &Path) -> Result<CheckpointMeta> {
    let ctx = |e: Error| e.context(format!("checkpoint {}", dir.display()));
    let meta: CheckpointMeta = serde_json::from_slice(&read(&dir.join("meta.json")).map_err(ctx)?).map_err(|e| ctx(e.into()))?;
    if meta.version != VERSION {
        return Err(ctx(Error::Checkpoint(format!("version {} (expected {VERSION})", meta.version))));
    }
    if meta.config_hash != config_hash(session) {
        return Err(ctx(Error::Checkpoint("written under a different config".into())));
    }
    let rngs: SessionRngs = serde_json::from_slice(&read(&dir.join("rng.json")).map_err(ctx)?).map_err(|e| ctx(e.into()))?;
    let controller = TensorArchive::from_bytes(&read(&dir.join("controller.bin")).map_err(ctx)?).map_err(ctx)?;
    let evaluator = TensorArchive::from_bytes(&read(&dir.join("evaluator.bin")).map_err(ctx)?).map_err(ctx)?;
    let previous = session.controller.save()?;
    session.controller.load(&controller).map_err(ctx)?;
    if let Err(e) = session.evaluator.load(&evaluator) {
        session.controller.load(&previous)?;
        return Err(ctx(e));
    }
    session.rngs = rngs;
    session.progress = meta.progress.clone();
    Ok(meta)
}

/// Highest-numbered complete `epoch_<k>` directory under `root`.
pub fn latest_checkpoint(root: &Path) -> Result<Option<PathBuf>> {
    let Ok(entries) = std::fs::read_dir(root) else {
        return Ok(None);
    };
    let mut best: Option<(usize, PathBuf)> = None;
    for entry in entries {
        let path = entry.map_err(|e| Error::io(root, e))?.path();
        let k = path
            .file_name()
            .and_then(|n| n.to_str())
            .and_then(|n| n.strip_prefix("epoch_"))
            .and_then(|n| n.parse::<usize>().ok());
        if let Some(k) = k {
            if path.join("meta.json").is_file() && best.as_ref().is_none_or(|(b, _)| k > *b) {
                best = Some((k, path));
            }
        }
    }
    Ok(best.map(|(_, p)| p))
}

/// Accepts a checkpoint directory, a checkpoint root, or a run directory
/// holding `ckpt/`.
pub fn resolve_checkpoint(path: &Path) -> Result<PathBuf> {
    if path.join("meta.json").is_file() {
        return Ok(path.to_path_buf());
    }
    for root in [path.join("ckpt"), path.to_path_buf()] {
        if let Some(p) = latest_checkpoint(&root)? {
            return Ok(p);
        }
    }
    Err(Error::Checkpoint(format!("no checkpoint found under {}", path.display())))
}
