//! Output bundles: every artifact is listed with its SHA-256.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Entry {
    pub stage: String,
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub entries: Vec<Entry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> anyhow::Result<String> {
    let bytes = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&bytes))
}

/// Writes files into one directory and records them.
pub struct Bundle {
    dir: PathBuf,
    manifest: Manifest,
}

impl Bundle {
    pub fn create(dir: &Path) -> anyhow::Result<Self> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let manifest =
            Manifest { tool: "rydberg-mis".into(), version: env!("CARGO_PKG_VERSION").into(), entries: Vec::new() };
        Ok(Self { dir: dir.to_path_buf(), manifest })
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn write(&mut self, stage: &str, name: &str, bytes: &[u8]) -> anyhow::Result<PathBuf> {
        let path = self.dir.join(name);
        std::fs::write(&path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.manifest.entries.push(Entry {
            stage: stage.into(),
            file: name.into(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn finish(self) -> anyhow::Result<Manifest> {
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(self.dir.join(MANIFEST_NAME), text + "\n")?;
        Ok(self.manifest)
    }
}

/// Re-hashes every listed file; `path` is the manifest or its directory.
pub fn verify(path: &Path) -> anyhow::Result<Manifest> {
    let (dir, file) = if path.is_dir() { (path.to_path_buf(), path.join(MANIFEST_NAME)) } else {
        (path.parent().map(Path::to_path_buf).unwrap_or_default(), path.to_path_buf())
    };
    let text = std::fs::read_to_string(&file).with_context(|| format!("reading {}", file.display()))?;
    let manifest: Manifest = serde_json::from_str(&text)?;
    let mut bad = Vec::new();
    for e in &manifest.entries {
        match sha256_file(&dir.join(&e.file)) {
            Ok(h) if h == e.sha256 => {}
            Ok(h) => bad.push(format!("{}: expected {}, found {h}", e.file, e.sha256)),
            Err(err) => bad.push(format!("{}: {err:#}", e.file)),
        }
    }
    if !bad.is_empty() {
        bail!("hash check failed:\n  {}", bad.join("\n  "));
    }
    Ok(manifest)
}
