use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::models::ModelSpec;

/// Bumped whenever a cached quantity changes meaning.
const CACHE_VERSION: u32 = 1;

/// Everything an eigenvalue list depends on.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectrumKey {
    pub version: u32,
    pub model: ModelSpec,
    pub sites: usize,
    pub sector: String,
    pub block: String,
}

impl SpectrumKey {
    pub fn new(model: &ModelSpec, sites: usize, sector: &str, block: &str) -> Self {
        SpectrumKey {
            version: CACHE_VERSION,
            model: model.clone(),
            sites,
            sector: sector.into(),
            block: block.into(),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn digest(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("key serializes");
        hex::encode(Sha256::digest(bytes))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CachedSpectrum {
    pub key: SpectrumKey,
    pub fragment: Option<usize>,
    pub eigenvalues: Vec<f64>,
}

/// Content-addressed store of eigenvalue lists under `<dir>/<digest>.json`.
#[derive(Clone, Debug)]
pub struct SpectrumCache {
    dir: PathBuf,
}

impl SpectrumCache {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        SpectrumCache { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    fn path(&self, key: &SpectrumKey) -> PathBuf {
        self.dir.join(format!("{}.json", key.digest()))
    }

    /// The stored entry if present and its key matches exactly.
    pub fn get(&self, key: &SpectrumKey) -> Result<Option<CachedSpectrum>> {
        let path = self.path(key);
        let bytes = match std::fs::read(&path) {
            Ok(b) => b,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(None),
            Err(e) => return Err(Error::io(path, e)),
        };
        let entry: CachedSpectrum = match serde_json::from_slice(&bytes) {
            Ok(e) => e,
            Err(_) => return Ok(None),
        };
        Ok((entry.key == *key).then_some(entry))
    }

    pub fn put(&self, entry: &CachedSpectrum) -> Result<()> {
        std::fs::create_dir_all(&self.dir).map_err(|e| Error::io(&self.dir, e))?;
        let path = self.path(&entry.key);
        let tmp = path.with_extension("json.tmp");
        std::fs::write(&tmp, serde_json::to_vec(entry)?).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, &path).map_err(|e| Error::io(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digest_tracks_every_input() {
        let m = ModelSpec::pert_ppxpp(0.09).unwrap();
        let base = SpectrumKey::new(&m, 12, "k0.Ip", "largest");
        assert_eq!(base.digest(), SpectrumKey::new(&m, 12, "k0.Ip", "largest").digest());
        let other_delta = SpectrumKey::new(&ModelSpec::pert_ppxpp(0.1).unwrap(), 12, "k0.Ip", "largest");
        assert_ne!(base.digest(), other_delta.digest());
        assert_ne!(base.digest(), SpectrumKey::new(&m, 13, "k0.Ip", "largest").digest());
        assert_ne!(base.digest(), SpectrumKey::new(&m, 12, "k0.Im", "largest").digest());
        assert_ne!(base.digest(), SpectrumKey::new(&m, 12, "k0.Ip", "sector").digest());
    }

    #[test]
    fn entries_round_trip_exactly() {
        let dir = tempfile::tempdir().unwrap();
        let cache = SpectrumCache::new(dir.path().join("cache"));
        let key = SpectrumKey::new(&ModelSpec::qgl(), 10, "k0.Ip", "largest");
        assert!(cache.get(&key).unwrap().is_none());
        let entry = CachedSpectrum {
            key: key.clone(),
            fragment: Some(0),
            eigenvalues: vec![-1.0 / 3.0, 0.1 + 0.2, std::f64::consts::PI],
        };
        cache.put(&entry).unwrap();
        assert_eq!(cache.get(&key).unwrap().unwrap(), entry);
    }
}
