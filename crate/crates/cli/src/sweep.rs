//! Grid sweeps over aggregation intervals, step size, partition and seed.

use std::fs;
use std::path::Path;

use hierfl_core::datasets::PartitionScheme;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::artifacts::{self, MANIFEST, SWEEP};
use crate::config::{ExperimentConfig, PlanKind};
use crate::error::{Error, Result};
use crate::experiment::{run_experiment, RunSummary};
use crate::manifest::Manifest;

/// Axes of a sweep. An absent axis keeps the base config's value.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSpec {
    pub kappa1: Option<Vec<usize>>,
    pub kappa2: Option<Vec<usize>>,
    /// Fixes `κ1κ2`; each point then uses `κ2 = cloud_period / κ1`.
    pub cloud_period: Option<usize>,
    pub eta: Option<Vec<f64>>,
    pub scheme: Option<Vec<PartitionScheme>>,
    pub seeds: Option<Vec<u64>>,
    /// Accuracy for epochs-to-target and the reported `T_α`, `E_α`; the
    /// first configured alpha when absent.
    pub target_accuracy: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub scheme: PartitionScheme,
    pub kappa1: usize,
    pub kappa2: Option<usize>,
    pub eta: f64,
    pub seed: u64,
}

impl GridPoint {
    pub fn label(&self) -> String {
        let k2 = self.kappa2.map_or_else(|| "na".to_string(), |k| k.to_string());
        format!("{}_k1-{}_k2-{}_eta-{}_seed-{}", self.scheme.as_str(), self.kappa1, k2, self.eta, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub point: GridPoint,
    pub outcome: std::result::Result<RunSummary, String>,
}

fn axis<T: Clone>(name: &str, given: &Option<Vec<T>>, base: T) -> Result<Vec<T>> {
    match given {
        None => Ok(vec![base]),
        Some(v) if v.is_empty() => Err(Error::config(format!("sweep axis {name} is empty"))),
        Some(v) => Ok(v.clone()),
    }
}

impl SweepSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(Error::io(path))?;
        toml::from_str(&text).map_err(|detail| Error::Parse { path: path.to_path_buf(), detail })
    }

    /// Grid points in sorted coordinate order.
    pub fn points(&self, base: &ExperimentConfig) -> Result<Vec<GridPoint>> {
        if [self.kappa1.is_none(), self.kappa2.is_none(), self.cloud_period.is_none(), self.eta.is_none()]
            .iter()
            .all(|&b| b)
            && self.scheme.is_none()
            && self.seeds.is_none()
        {
            return Err(Error::config("sweep grid has no axes"));
        }
        if self.cloud_period.is_some() && self.kappa2.is_some() {
            return Err(Error::config("sweep sets both kappa2 and cloud_period"));
        }
        if self.cloud_period == Some(0) {
            return Err(Error::config("sweep cloud_period must be positive"));
        }
        let mut schemes = axis("scheme", &self.scheme, base.partition)?;
        let mut k1s = axis("kappa1", &self.kappa1, base.schedule.kappa1)?;
        let mut k2s = match self.cloud_period {
            Some(_) => vec![None],
            None => axis("kappa2", &self.kappa2, base.schedule.kappa2)?.into_iter().map(Some).collect(),
        };
        let mut etas = axis("eta", &self.eta, base.schedule.eta)?;
        let mut seeds = axis("seeds", &self.seeds, base.seed)?;
        schemes.sort();
        schemes.dedup();
        k1s.sort();
        k1s.dedup();
        k2s.sort();
        k2s.dedup();
        etas.sort_by(f64::total_cmp);
        etas.dedup();
        seeds.sort();
        seeds.dedup();

        let mut points = Vec::new();
        for &scheme in &schemes {
            for &kappa1 in &k1s {
                for &kappa2 in &k2s {
                    for &eta in &etas {
                        for &seed in &seeds {
                            points.push(GridPoint { scheme, kappa1, kappa2, eta, seed });
                        }
                    }
                }
            }
        }
        Ok(points)
    }

    /// The base config specialised to one grid point.
    pub fn point_config(&self, base: &ExperimentConfig, p: &GridPoint) -> Result<ExperimentConfig> {
        let mut c = base.clone();
        c.output_dir = None;
        c.partition = p.scheme;
        c.seed = p.seed;
        c.schedule.kappa1 = p.kappa1;
        c.schedule.kappa2 = match (p.kappa2, self.cloud_period) {
            (Some(k2), _) => k2,
            (None, Some(period)) if period % p.kappa1 == 0 => period / p.kappa1,
            (None, Some(period)) => {
                return Err(Error::config(format!("cloud_period {period} is not a multiple of kappa1 {}", p.kappa1)))
            }
            (None, None) => unreachable!("kappa2 absent only with a cloud period"),
        };
        if self.eta.is_some() {
            if c.schedule.plan == PlanKind::PerCloudInterval {
                return Err(Error::config("an eta axis needs a fixed or epoch_decay step plan"));
            }
            c.schedule.eta = p.eta;
        }
        c.validate()?;
        Ok(c)
    }
}

pub const SWEEP_COLUMNS: [&str; 14] = [
    "scheme",
    "kappa1",
    "kappa2",
    "eta",
    "seed",
    "status",
    "final_accuracy",
    "final_epochs",
    "epochs_to_target",
    "t_alpha",
    "e_alpha",
    "g_c_end",
    "max_deviation",
    "error",
];

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

pub fn write_rows(path: &Path, rows: &[SweepRow]) -> Result<()> {
    let file = fs::File::create(path).map_err(Error::io(path))?;
    let mut w = csv::Writer::from_writer(file);
    w.write_record(SWEEP_COLUMNS)?;
    for r in rows {
        let p = &r.point;
        let mut rec = vec![
            p.scheme.as_str().to_string(),
            p.kappa1.to_string(),
            p.kappa2.map(|k| k.to_string()).unwrap_or_default(),
            p.eta.to_string(),
            p.seed.to_string(),
        ];
        match &r.outcome {
            Ok(s) => rec.extend([
                "ok".to_string(),
                s.final_accuracy.to_string(),
                s.final_epochs.to_string(),
                opt(s.epochs_to_target),
                opt(s.t_alpha),
                opt(s.e_alpha),
                opt(s.g_c_end),
                opt(s.max_deviation),
                String::new(),
            ]),
            Err(e) => {
                rec.extend(["failed".to_string()]);
                rec.extend(std::iter::repeat_n(String::new(), 7));
                rec.push(e.clone());
            }
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(Error::io(path))
}

/// Run every grid point into `out/points/<label>`, then write the combined
/// summary and the sweep manifest.
pub fn run_sweep(base: &ExperimentConfig, spec: &SweepSpec, out: &Path) -> Result<Vec<SweepRow>> {
    let points = spec.points(base)?;
    let root = out.join("points");
    fs::create_dir_all(&root).map_err(Error::io(&root))?;
    let rows: Vec<SweepRow> = points
        .into_par_iter()
        .map(|mut point| {
            let dir = root.join(point.label());
            let outcome = spec
                .point_config(base, &point)
                .and_then(|c| {
                    point.kappa2 = Some(c.schedule.kappa2);
                    run_experiment(&c, &dir, spec.target_accuracy)
                })
                .map_err(|e| e.to_string());
            SweepRow { point, outcome }
        })
        .collect();
    write_rows(&out.join(SWEEP), &rows)?;
    artifacts::validate_dir(out)?;
    Manifest::for_sweep(base, spec, out)?.write(&out.join(MANIFEST))?;
    Ok(rows)
}
