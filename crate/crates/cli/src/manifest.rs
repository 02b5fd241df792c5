//! Run manifests: the resolved config, seed and checksums of every artifact.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::artifacts::{self, MANIFEST};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::sweep::SweepSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ManifestKind {
    Run,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ArtifactEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub kind: ManifestKind,
    pub tool_version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: ExperimentConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<SweepSpec>,
    pub artifacts: Vec<ArtifactEntry>,
}

pub fn sha256_file(path: &Path) -> Result<(String, u64)> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    Ok((hex::encode(Sha256::digest(&bytes)), bytes.len() as u64))
}

/// Checksums of every file below `dir` except manifests.
pub fn checksums(dir: &Path) -> Result<Vec<ArtifactEntry>> {
    artifacts::list_files(dir)?
        .into_iter()
        .filter(|rel| rel.file_name().is_none_or(|n| n != MANIFEST))
        .map(|rel| {
            let (sha256, bytes) = sha256_file(&dir.join(&rel))?;
            let path = rel.components().map(|c| c.as_os_str().to_string_lossy()).collect::<Vec<_>>().join("/");
            Ok(ArtifactEntry { path, sha256, bytes })
        })
        .collect()
}

impl Manifest {
    fn build(kind: ManifestKind, config: &ExperimentConfig, sweep: Option<SweepSpec>, dir: &Path) -> Result<Self> {
        let mut config = config.clone();
        config.output_dir = None;
        Ok(Self {
            kind,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            seed: config.seed,
            config_hash: config.hash()?,
            config,
            sweep,
            artifacts: checksums(dir)?,
        })
    }

    pub fn for_run(config: &ExperimentConfig, dir: &Path) -> Result<Self> {
        Self::build(ManifestKind::Run, config, None, dir)
    }

    pub fn for_sweep(base: &ExperimentConfig, sweep: &SweepSpec, dir: &Path) -> Result<Self> {
        Self::build(ManifestKind::Sweep, base, Some(sweep.clone()), dir)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::config(e.to_string()))?;
        fs::write(path, text).map_err(Error::io(path))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        let manifest: Self =
            toml::from_str(&text).map_err(|detail| Error::Parse { path: path.to_path_buf(), detail })?;
        let hash = manifest.config.hash()?;
        if hash != manifest.config_hash {
            return Err(Error::Artifact {
                path: path.to_path_buf(),
                reason: format!("config hash {hash} does not match recorded {}", manifest.config_hash),
            });
        }
        Ok(manifest)
    }

    /// Compare recorded checksums against the files in `dir`.
    pub fn verify(&self, dir: &Path) -> Result<()> {
        let found = checksums(dir)?;
        let mut problems = Vec::new();
        for want in &self.artifacts {
            match found.iter().find(|f| f.path == want.path) {
                None => problems.push(format!("{} missing", want.path)),
                Some(f) if f.sha256 != want.sha256 => problems.push(format!("{} differs", want.path)),
                Some(_) => {}
            }
        }
        for f in &found {
            if !self.artifacts.iter().any(|a| a.path == f.path) {
                problems.push(format!("{} unexpected", f.path));
            }
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(Error::Replay(problems.join("; ")))
        }
    }
}
