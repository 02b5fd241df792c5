//! Experiment runner for the hierarchical federated averaging simulator:
//! configs, runs, sweeps, artifacts and manifests.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod artifacts;
pub mod config;
pub mod error;
pub mod experiment;
pub mod manifest;
pub mod sweep;

use std::path::Path;

pub use config::ExperimentConfig;
pub use error::{Error, Result};
pub use manifest::{Manifest, ManifestKind};
pub use sweep::SweepSpec;

/// Re-execute the run or sweep recorded in `manifest_path` into `out` and
/// check every artifact against the recorded checksums.
pub fn replay(manifest_path: &Path, out: &Path) -> Result<Manifest> {
    let manifest = Manifest::load(manifest_path)?;
    match (&manifest.kind, &manifest.sweep) {
        (ManifestKind::Run, _) => {
            experiment::run_experiment(&manifest.config, out, None)?;
        }
        (ManifestKind::Sweep, Some(spec)) => {
            sweep::run_sweep(&manifest.config, spec, out)?;
        }
        (ManifestKind::Sweep, None) => {
            return Err(Error::Artifact {
                path: manifest_path.to_path_buf(),
                reason: "sweep manifest has no sweep table".into(),
            })
        }
    }
    manifest.verify(out)?;
    Ok(manifest)
}
