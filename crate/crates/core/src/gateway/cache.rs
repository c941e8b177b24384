//! Persistent response cache: one JSON file per (request, sample) key.
//!
//! Writes publish atomically via rename, so concurrent readers never see a
//! torn entry; a racing duplicate computation is allowed and last write wins
//! with identical content. Corrupt entries are discarded and recomputed.

use super::Completion;
use std::fs;
use std::path::PathBuf;

pub struct ResponseCache {
    dir: PathBuf,
}

impl ResponseCache {
    /// Open (creating if needed) a cache directory.
    pub fn open(dir: impl Into<PathBuf>) -> std::io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        Ok(ResponseCache { dir })
    }

    fn path_for(&self, key: &str) -> PathBuf {
        self.dir.join(format!("{key}.json"))
    }

    pub fn get(&self, key: &str) -> Option<Completion> {
        let path = self.path_for(key);
        let bytes = fs::read(&path).ok()?;
        match serde_json::from_slice(&bytes) {
            Ok(completion) => Some(completion),
            Err(e) => {
                log::warn!("discarding corrupt cache entry {}: {e}", path.display());
                let _ = fs::remove_file(&path);
                None
            }
        }
    }

    pub fn put(&self, key: &str, completion: &Completion) {
        let path = self.path_for(key);
        let tmp = self.dir.join(format!(".{key}.tmp-{}", std::process::id()));
        let bytes = serde_json::to_vec(completion).expect("completion serializes");
        if fs::write(&tmp, bytes).and_then(|_| fs::rename(&tmp, &path)).is_err() {
            log::warn!("failed to publish cache entry {}", path.display());
            let _ = fs::remove_file(&tmp);
        }
    }
}
