//! Experiment configuration, read from TOML.
//!
//! Every field has a default; an empty file describes the reference setup of
//! 50 clients under 5 edges, batch size 20, step size 0.01 decaying by 0.995
//! per epoch, on a synthetic 10-class dataset.

use std::fs;
use std::path::{Path, PathBuf};

use hierfl_core::bounds::HVariant;
use hierfl_core::costmodel::{CostParams, EnergyScope};
use hierfl_core::datasets::{PartitionScheme, Topology};
use hierfl_core::hierfavg::{CloudRoute, Mode};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    F32,
    #[default]
    F64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DataSource {
    #[default]
    Synthetic,
    Mnist,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetConfig {
    pub source: DataSource,
    /// Seed of the synthetic generator; the experiment seed when absent.
    pub seed: Option<u64>,
    pub classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub test_per_class: usize,
    pub separation: f64,
    pub train_images: Option<PathBuf>,
    pub train_labels: Option<PathBuf>,
    pub test_images: Option<PathBuf>,
    pub test_labels: Option<PathBuf>,
    pub limit: Option<usize>,
    pub test_limit: Option<usize>,
}

impl Default for DatasetConfig {
    fn default() -> Self {
        Self {
            source: DataSource::Synthetic,
            seed: None,
            classes: 10,
            dim: 32,
            samples_per_class: 600,
            test_per_class: 100,
            separation: 3.0,
            train_images: None,
            train_labels: None,
            test_images: None,
            test_labels: None,
            limit: None,
            test_limit: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub clients: usize,
    pub edges: usize,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self { clients: 50, edges: 5 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelFamily {
    #[default]
    LogisticRegression,
    Mlp,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub kind: ModelFamily,
    pub hidden_dim: usize,
    pub l2_reg: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self { kind: ModelFamily::LogisticRegression, hidden_dim: 32, l2_reg: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanKind {
    #[default]
    EpochDecay,
    Fixed,
    PerCloudInterval,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScheduleConfig {
    pub kappa1: usize,
    pub kappa2: usize,
    pub total_updates: usize,
    pub batch_size: usize,
    pub mode: Mode,
    pub plan: PlanKind,
    /// Initial (epoch_decay) or constant (fixed) step size.
    pub eta: f64,
    pub decay: f64,
    /// One step size per cloud interval, for `per_cloud_interval`.
    pub etas: Vec<f64>,
    /// Also record every n-th local update.
    pub eval_interval: Option<usize>,
    pub cloud_route: CloudRoute,
}

impl Default for ScheduleConfig {
    fn default() -> Self {
        Self {
            kappa1: 6,
            kappa2: 10,
            total_updates: 1200,
            batch_size: 20,
            mode: Mode::MinibatchSgd,
            plan: PlanKind::EpochDecay,
            eta: 0.01,
            decay: 0.995,
            etas: Vec::new(),
            eval_interval: None,
            cloud_route: CloudRoute::Flat,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BoundsConfig {
    pub enabled: bool,
    pub divergence_probes: usize,
    pub smoothness_probes: usize,
    pub h_variant: HVariant,
    /// Full-batch descent steps of the centralized reference run used to
    /// estimate `F(w*)` for convex models.
    pub reference_steps: usize,
}

impl Default for BoundsConfig {
    fn default() -> Self {
        Self {
            enabled: true,
            divergence_probes: 6,
            smoothness_probes: 6,
            h_variant: HVariant::Corrected,
            reference_steps: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ReportConfig {
    /// Accuracy levels for `T_α` and `E_α`.
    pub alphas: Vec<f64>,
    pub energy_scope: EnergyScope,
}

impl Default for ReportConfig {
    fn default() -> Self {
        Self { alphas: vec![0.5, 0.7, 0.85], energy_scope: EnergyScope::PerClient }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub precision: Precision,
    pub output_dir: Option<PathBuf>,
    pub dataset: DatasetConfig,
    pub topology: TopologyConfig,
    pub partition: PartitionScheme,
    pub model: ModelConfig,
    pub schedule: ScheduleConfig,
    pub cost: CostParams,
    pub bounds: BoundsConfig,
    pub report: ReportConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            precision: Precision::F64,
            output_dir: None,
            dataset: DatasetConfig::default(),
            topology: TopologyConfig::default(),
            partition: PartitionScheme::EdgeNiid,
            model: ModelConfig::default(),
            schedule: ScheduleConfig::default(),
            cost: CostParams::mnist(),
            bounds: BoundsConfig::default(),
            report: ReportConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str, path: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|detail| Error::Parse { path: path.to_path_buf(), detail })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        Self::from_toml_str(&text, path)
    }

    /// Apply `key=value` overrides; keys are dotted paths such as
    /// `schedule.kappa1`, values are TOML literals (bare words are strings).
    pub fn with_overrides(&self, overrides: &[String]) -> Result<Self> {
        if overrides.is_empty() {
            return Ok(self.clone());
        }
        let mut doc = toml::Value::try_from(self).map_err(|e| Error::config(e.to_string()))?;
        for item in overrides {
            let (key, raw) =
                item.split_once('=').ok_or_else(|| Error::config(format!("override {item:?} is not key=value")))?;
            let value = parse_literal(raw.trim());
            set_path(&mut doc, key.trim(), value)?;
        }
        doc.try_into().map_err(|e: toml::de::Error| Error::config(format!("after overrides: {e}")))
    }

    pub fn topology(&self) -> Result<Topology> {
        Ok(Topology::new(self.topology.clients, self.topology.edges)?)
    }

    /// Checks that need no data: divisibility, positivity, and whether the
    /// partition scheme fits the topology.
    pub fn validate(&self) -> Result<()> {
        let s = &self.schedule;
        if s.kappa1 == 0 || s.kappa2 == 0 || s.total_updates == 0 {
            return Err(Error::config("schedule.kappa1, schedule.kappa2 and schedule.total_updates must be positive"));
        }
        if !s.total_updates.is_multiple_of(s.kappa1 * s.kappa2) {
            return Err(Error::config(format!(
                "schedule.total_updates = {} is not a multiple of kappa1*kappa2 = {}",
                s.total_updates,
                s.kappa1 * s.kappa2
            )));
        }
        if s.mode == Mode::MinibatchSgd && s.batch_size == 0 {
            return Err(Error::config("schedule.batch_size must be positive"));
        }
        if s.eval_interval == Some(0) {
            return Err(Error::config("schedule.eval_interval must be positive"));
        }
        let positive = |x: f64| x > 0.0 && x.is_finite();
        match s.plan {
            PlanKind::Fixed | PlanKind::EpochDecay if !positive(s.eta) => {
                return Err(Error::config("schedule.eta must be positive"))
            }
            PlanKind::EpochDecay if !(positive(s.decay) && s.decay <= 1.0) => {
                return Err(Error::config("schedule.decay must lie in (0, 1]"))
            }
            PlanKind::PerCloudInterval if s.etas.len() != s.total_updates / (s.kappa1 * s.kappa2) => {
                return Err(Error::config(format!(
                    "schedule.etas needs {} entries, one per cloud interval",
                    s.total_updates / (s.kappa1 * s.kappa2)
                )))
            }
            _ => {}
        }
        let topology = self.topology()?;
        let cpe = topology.clients_per_edge();
        let classes = self.num_classes();
        match self.partition {
            PartitionScheme::EdgeIid if cpe != classes => {
                return Err(Error::config(format!(
                    "partition edge_iid needs topology.clients / topology.edges = {classes}, got {cpe}"
                )))
            }
            PartitionScheme::EdgeNiid if cpe < classes.div_ceil(2) => {
                return Err(Error::config(format!(
                    "partition edge_niid needs at least {} clients per edge, got {cpe}",
                    classes.div_ceil(2)
                )))
            }
            _ => {}
        }
        let d = &self.dataset;
        match d.source {
            DataSource::Synthetic => {
                if d.classes < 2 || d.dim == 0 || d.samples_per_class == 0 || d.test_per_class == 0 {
                    return Err(Error::config("dataset needs at least two classes and positive sizes"));
                }
            }
            DataSource::Mnist => {
                for (name, p) in [
                    ("dataset.train_images", &d.train_images),
                    ("dataset.train_labels", &d.train_labels),
                    ("dataset.test_images", &d.test_images),
                    ("dataset.test_labels", &d.test_labels),
                ] {
                    if p.is_none() {
                        return Err(Error::config(format!("{name} is required for mnist")));
                    }
                }
            }
        }
        if self.model.kind == ModelFamily::Mlp && self.model.hidden_dim == 0 {
            return Err(Error::config("model.hidden_dim must be positive"));
        }
        if !(self.model.l2_reg >= 0.0 && self.model.l2_reg.is_finite()) {
            return Err(Error::config("model.l2_reg must be nonnegative"));
        }
        if self.bounds.enabled && (self.bounds.divergence_probes == 0 || self.bounds.smoothness_probes < 2) {
            return Err(Error::config("bounds needs divergence_probes >= 1 and smoothness_probes >= 2"));
        }
        if self.report.alphas.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::config("report.alphas must lie in [0, 1]"));
        }
        self.cost.validate()?;
        Ok(())
    }

    pub fn num_classes(&self) -> usize {
        match self.dataset.source {
            DataSource::Synthetic => self.dataset.classes,
            DataSource::Mnist => 10,
        }
    }

    pub fn data_seed(&self) -> u64 {
        self.dataset.seed.unwrap_or(self.seed)
    }

    /// Canonical TOML of everything that affects results.
    pub fn canonical_toml(&self) -> Result<String> {
        let mut c = self.clone();
        c.output_dir = None;
        toml::to_string(&c).map_err(|e| Error::config(e.to_string()))
    }

    pub fn hash(&self) -> Result<String> {
        Ok(hex::encode(Sha256::digest(self.canonical_toml()?.as_bytes())))
    }
}

fn parse_literal(raw: &str) -> toml::Value {
    let wrapped = format!("v = {raw}");
    match wrapped.parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

fn set_path(doc: &mut toml::Value, key: &str, value: toml::Value) -> Result<()> {
    let mut parts = key.split('.').peekable();
    let mut node = doc;
    while let Some(part) = parts.next() {
        let table = node
            .as_table_mut()
            .ok_or_else(|| Error::config(format!("override key {key:?}: {part:?} is not inside a table")))?;
        if parts.peek().is_none() {
            table.insert(part.to_string(), value);
            return Ok(());
        }
        node = table.entry(part.to_string()).or_insert_with(|| toml::Value::Table(toml::Table::new()));
    }
    Err(Error::config("empty override key"))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_gives_reference_defaults() {
        let c = ExperimentConfig::from_toml_str("", Path::new("x.toml")).unwrap();
        assert_eq!(c, ExperimentConfig::default());
        assert_eq!((c.topology.clients, c.topology.edges), (50, 5));
        assert_eq!(c.schedule.batch_size, 20);
        assert_eq!((c.schedule.eta, c.schedule.decay), (0.01, 0.995));
        c.validate().unwrap();
    }

    #[test]
    fn unknown_fields_name_the_line() {
        let err =
            ExperimentConfig::from_toml_str("seed = 1\n[schedule]\nkapa1 = 3\n", Path::new("c.toml")).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("c.toml") && msg.contains("kapa1") && msg.contains("line 3"), "{msg}");
    }

    #[test]
    fn indivisible_budget_is_rejected() {
        let c = ExperimentConfig::default().with_overrides(&["schedule.total_updates=100".into()]).unwrap();
        let msg = c.validate().unwrap_err().to_string();
        assert!(msg.contains("total_updates"), "{msg}");
    }

    #[test]
    fn overrides_reach_nested_fields() {
        let c = ExperimentConfig::default()
            .with_overrides(&[
                "schedule.kappa1=3".into(),
                "partition=edge_iid".into(),
                "model.kind=mlp".into(),
                "report.alphas=[0.6, 0.9]".into(),
                "dataset.seed=9".into(),
            ])
            .unwrap();
        assert_eq!(c.schedule.kappa1, 3);
        assert_eq!(c.partition, PartitionScheme::EdgeIid);
        assert_eq!(c.model.kind, ModelFamily::Mlp);
        assert_eq!(c.report.alphas, vec![0.6, 0.9]);
        assert_eq!(c.data_seed(), 9);
        assert!(ExperimentConfig::default().with_overrides(&["nope".into()]).is_err());
        assert!(ExperimentConfig::default().with_overrides(&["schedule.bogus=1".into()]).is_err());
    }

    #[test]
    fn scheme_feasibility_is_checked() {
        let c = ExperimentConfig::default()
            .with_overrides(&["topology.edges=10".into(), "partition=edge_iid".into()])
            .unwrap();
        assert!(c.validate().is_err());
        let c = ExperimentConfig::default().with_overrides(&["topology.edges=25".into()]).unwrap();
        assert!(c.validate().is_err());
    }

    #[test]
    fn hash_ignores_output_dir() {
        let a = ExperimentConfig::default();
        let mut b = a.clone();
        b.output_dir = Some("elsewhere".into());
        assert_eq!(a.hash().unwrap(), b.hash().unwrap());
        b.seed = 1;
        assert_ne!(a.hash().unwrap(), b.hash().unwrap());
    }

    #[test]
    fn canonical_form_round_trips() {
        let a = ExperimentConfig::default().with_overrides(&["schedule.eval_interval=3".into()]).unwrap();
        let text = a.canonical_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text, Path::new("m")).unwrap(), a);
    }
}
