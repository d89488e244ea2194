//! Workspace root, artifact registry and staleness checks.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufReader, Write};
use std::path::{Path, PathBuf};

use canonlab_core::{sha256_hex, Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{Config, CONFIG_FILE};

pub const REGISTRY_FILE: &str = "registry.json";
pub const ARTIFACT_DIR: &str = "artifacts";

/// Upstream keys with this prefix name a config section.
const CONFIG_PREFIX: &str = "config.";
/// Upstream keys with this prefix record external inputs; never checked.
const SOURCE_PREFIX: &str = "source:";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactEntry {
    /// Path relative to the workspace root.
    pub path: String,
    pub sha256: String,
    /// Hash of every input at the time the artifact was written.
    pub upstream: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Registry {
    pub artifacts: BTreeMap<String, ArtifactEntry>,
}

pub struct Workspace {
    pub root: PathBuf,
    pub config: Config,
    pub registry: Registry,
}

impl Workspace {
    /// Create the directory layout, a default config (unless one exists) and
    /// an empty registry (unless one exists).
    pub fn init(root: &Path) -> Result<Workspace> {
        fs::create_dir_all(root.join(ARTIFACT_DIR))?;
        let cfg_path = root.join(CONFIG_FILE);
        if !cfg_path.exists() {
            fs::write(&cfg_path, Config::default().to_toml()?)?;
        }
        let reg_path = root.join(REGISTRY_FILE);
        if !reg_path.exists() {
            write_json(&reg_path, &Registry::default())?;
        }
        Workspace::open(root)
    }

    pub fn open(root: &Path) -> Result<Workspace> {
        let reg_path = root.join(REGISTRY_FILE);
        if !reg_path.exists() {
            return Err(Error::invalid(format!("{} is not an initialized workspace (run `init`)", root.display())));
        }
        let config = Config::load(&root.join(CONFIG_FILE))?;
        let registry: Registry = serde_json::from_reader(BufReader::new(fs::File::open(reg_path)?))?;
        Ok(Workspace { root: root.to_path_buf(), config, registry })
    }

    pub fn resolve(&self, path: &str) -> PathBuf {
        let p = Path::new(path);
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.root.join(p)
        }
    }

    pub fn entry(&self, name: &str) -> Option<&ArtifactEntry> {
        self.registry.artifacts.get(name)
    }

    pub fn hashes(&self) -> BTreeMap<String, String> {
        self.registry.artifacts.iter().map(|(k, v)| (k.clone(), v.sha256.clone())).collect()
    }

    /// Path of a registered artifact whose bytes and upstreams are current.
    pub fn require(&self, name: &str) -> Result<PathBuf> {
        let entry = self.entry(name).ok_or_else(|| Error::MissingArtifact(name.to_string()))?;
        let path = self.resolve(&entry.path);
        let bytes = fs::read(&path).map_err(|_| Error::MissingArtifact(format!("{name} ({})", entry.path)))?;
        let found = sha256_hex(&bytes);
        if found != entry.sha256 {
            return Err(Error::Stale {
                artifact: name.into(),
                upstream: format!("{name} (file contents)"),
                expected: entry.sha256.clone(),
                found,
            });
        }
        for (up, expected) in &entry.upstream {
            if up.starts_with(SOURCE_PREFIX) {
                continue;
            }
            let current = match up.strip_prefix(CONFIG_PREFIX) {
                Some(section) => self.config.section_hash(section)?,
                None => self.entry(up).map(|e| e.sha256.clone()).unwrap_or_else(|| "missing".into()),
            };
            if &current != expected {
                return Err(Error::Stale {
                    artifact: name.into(),
                    upstream: up.clone(),
                    expected: expected.clone(),
                    found: current,
                });
            }
        }
        Ok(path)
    }

    pub fn read_bytes(&self, name: &str) -> Result<Vec<u8>> {
        Ok(fs::read(self.require(name)?)?)
    }

    /// Upstream map for artifacts built from `inputs` under `sections`.
    /// Every input must itself be current.
    pub fn upstream(&self, inputs: &[&str], sections: &[&str]) -> Result<BTreeMap<String, String>> {
        let mut map = BTreeMap::new();
        for &i in inputs {
            self.require(i)?;
            map.insert(i.to_string(), self.entry(i).expect("required above").sha256.clone());
        }
        for &s in sections {
            map.insert(format!("{CONFIG_PREFIX}{s}"), self.config.section_hash(s)?);
        }
        Ok(map)
    }

    /// Record an external input file by hash.
    pub fn source(map: &mut BTreeMap<String, String>, label: &str, bytes: &[u8]) {
        map.insert(format!("{SOURCE_PREFIX}{label}"), sha256_hex(bytes));
    }

    /// Write an artifact under `artifacts/` and register it.
    pub fn put(&mut self, name: &str, file: &str, bytes: &[u8], upstream: BTreeMap<String, String>) -> Result<String> {
        let rel = format!("{ARTIFACT_DIR}/{file}");
        let path = self.root.join(&rel);
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("partial");
        fs::write(&tmp, bytes)?;
        fs::rename(&tmp, &path)?;
        let sha = sha256_hex(bytes);
        self.registry.artifacts.insert(name.to_string(), ArtifactEntry { path: rel, sha256: sha.clone(), upstream });
        self.save_registry()?;
        Ok(sha)
    }

    pub fn save_registry(&self) -> Result<()> {
        write_json(&self.root.join(REGISTRY_FILE), &self.registry)
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    let tmp = path.with_extension("partial");
    let mut f = fs::File::create(&tmp)?;
    f.write_all(&bytes)?;
    f.sync_all()?;
    fs::rename(tmp, path)?;
    Ok(())
}
