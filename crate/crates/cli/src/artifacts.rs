//! Atomic artifact writes, config-hash tagging and the run manifest.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use skelshap_core::hashing::sha256_hex;
use skelshap_core::shap::io::read_attributions;
use skelshap_core::{Error, Result};

pub const HASH_PREFIX: &str = "# config_hash=";
pub const MANIFEST: &str = "manifest.json";

/// Writes `bytes` to a temporary file next to `path`, then renames it.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|d| !d.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| Error::Io(e.error))?;
    Ok(())
}

/// CSV body prefixed by a `# config_hash=` comment line.
pub fn tagged_csv(hash: &str, body: &[u8]) -> Vec<u8> {
    let mut out = format!("{HASH_PREFIX}{hash}\n").into_bytes();
    out.extend_from_slice(body);
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub config_hash: String,
    pub seed: u64,
    /// Named seeds used by the stage.
    pub seeds: BTreeMap<String, serde_json::Value>,
    pub versions: BTreeMap<String, String>,
    /// Artifact file name to SHA-256 of its contents.
    pub artifacts: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub stages: BTreeMap<String, StageRecord>,
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("skelshap".to_string(), env!("CARGO_PKG_VERSION").to_string()),
        ("checkpoint_format".to_string(), "GCNC0001".to_string()),
        ("feature_format".to_string(), "FEAT0001".to_string()),
        ("attribution_format".to_string(), "PHIV0001".to_string()),
    ])
}

/// Collects a stage's artifacts and records them in the manifest.
pub struct Stage {
    dir: PathBuf,
    name: &'static str,
    record: StageRecord,
}

impl Stage {
    pub fn new(dir: &Path, name: &'static str, config_hash: &str, seed: u64) -> Self {
        Self {
            dir: dir.to_path_buf(),
            name,
            record: StageRecord {
                config_hash: config_hash.to_string(),
                seed,
                versions: versions(),
                ..Default::default()
            },
        }
    }

    pub fn seed(&mut self, name: &str, value: impl Serialize) -> Result<()> {
        self.record.seeds.insert(name.to_string(), serde_json::to_value(value)?);
        Ok(())
    }

    pub fn write(&mut self, file: &str, bytes: &[u8]) -> Result<PathBuf> {
        let path = self.dir.join(file);
        write_atomic(&path, bytes)?;
        self.record.artifacts.insert(file.to_string(), sha256_hex(bytes));
        Ok(path)
    }

    pub fn finish(self) -> Result<()> {
        let path = self.dir.join(MANIFEST);
        let mut manifest = read_manifest(&self.dir)?.unwrap_or_default();
        manifest.stages.insert(self.name.to_string(), self.record);
        write_atomic(&path, &serde_json::to_vec_pretty(&manifest)?)
    }
}

pub fn read_manifest(dir: &Path) -> Result<Option<Manifest>> {
    let path = dir.join(MANIFEST);
    if !path.exists() {
        return Ok(None);
    }
    let manifest = serde_json::from_slice(&std::fs::read(&path)?)
        .map_err(|e| Error::Corrupt { what: "manifest", detail: format!("{}: {e}", path.display()) })?;
    Ok(Some(manifest))
}

/// Config hash carried by each artifact in `dir`, keyed by file name.
pub fn artifact_hashes(dir: &Path) -> Result<BTreeMap<String, String>> {
    let mut out = BTreeMap::new();
    let mut entries: Vec<PathBuf> =
        std::fs::read_dir(dir)?.map(|e| e.map(|e| e.path())).collect::<std::io::Result<_>>()?;
    entries.sort();
    for path in entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or_default().to_string();
        let ext = path.extension().and_then(|e| e.to_str()).unwrap_or_default();
        let hash = match ext {
            "csv" => {
                let text = std::fs::read_to_string(&path)?;
                let first = text.lines().next().unwrap_or_default();
                first
                    .strip_prefix(HASH_PREFIX)
                    .map(str::to_string)
                    .ok_or_else(|| Error::Data(format!("{name} carries no config hash")))?
            }
            "phiv" => {
                let (header, _) = read_attributions(std::fs::File::open(&path)?)?;
                header.extra["config_hash"]
                    .as_str()
                    .map(str::to_string)
                    .ok_or_else(|| Error::Data(format!("{name} carries no config hash")))?
            }
            "json" if name != MANIFEST => {
                let value: serde_json::Value = serde_json::from_slice(&std::fs::read(&path)?)?;
                match value.get("config_hash").and_then(|h| h.as_str()) {
                    Some(h) => h.to_string(),
                    None => continue,
                }
            }
            _ => continue,
        };
        out.insert(name, hash);
    }
    if let Some(manifest) = read_manifest(dir)? {
        for (stage, record) in manifest.stages {
            out.insert(format!("{MANIFEST}:{stage}"), record.config_hash);
        }
    }
    Ok(out)
}

/// Fails when the artifacts in `dir` come from more than one config.
pub fn check_single_hash(dir: &Path) -> Result<Option<String>> {
    let hashes = artifact_hashes(dir)?;
    let distinct: BTreeSet<&String> = hashes.values().collect();
    match distinct.len() {
        0 => Ok(None),
        1 => Ok(distinct.into_iter().next().cloned()),
        _ => {
            let listing: Vec<String> = hashes.iter().map(|(f, h)| format!("{f}={}", &h[..h.len().min(12)])).collect();
            Err(Error::Data(format!("mixed config hashes in {}: {}", dir.display(), listing.join(", "))))
        }
    }
}
