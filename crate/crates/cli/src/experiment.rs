//! Building the data, model and schedule from a config, running HierFAVG,
//! and deriving the bound and cost reports.

use std::fs;
use std::path::Path;

use hierfl_core::bounds::{self, BoundParams, Theorem1};
use hierfl_core::costmodel::{self, Accounting, AccuracyPoint, CostReport};
use hierfl_core::datasets::{self, load_mnist_idx, Dataset, Partition, SyntheticSpec, Topology};
use hierfl_core::divergence::{estimate_divergence, DivergenceEstimate, ProbeSource};
use hierfl_core::hierfavg::{self, Event, Mode, RunConfig, RunOutput, Schedule, StepPlan};
use hierfl_core::models::{
    estimate_smoothness_with, EmpiricalLoss, ModelSpec, Objective, SmoothnessOptions, SmoothnessParams,
};
use hierfl_core::numcore::{axpy, WeightVector};
use hierfl_core::Scalar;
use rayon::prelude::*;

use crate::artifacts;
use crate::config::{DataSource, ExperimentConfig, ModelFamily, PlanKind, Precision};
use crate::error::{Error, Result};
use crate::manifest::Manifest;

pub struct Prepared<T> {
    pub train: Dataset<T>,
    pub test: Dataset<T>,
    pub topology: Topology,
    pub partition: Partition,
    pub spec: ModelSpec<T>,
}

pub fn prepare<T: Scalar>(config: &ExperimentConfig) -> Result<Prepared<T>> {
    config.validate()?;
    let d = &config.dataset;
    let (train, test) = match d.source {
        DataSource::Synthetic => {
            let mut spec = SyntheticSpec::new(d.classes, d.dim, d.samples_per_class, config.data_seed());
            spec.separation = d.separation;
            spec.generate_split::<T>(d.test_per_class)?
        }
        DataSource::Mnist => {
            let path = |p: &Option<std::path::PathBuf>| p.clone().expect("checked by validate");
            let train = load_mnist_idx(path(&d.train_images), path(&d.train_labels), d.limit)?;
            let test = load_mnist_idx(path(&d.test_images), path(&d.test_labels), d.test_limit)?;
            (train, test)
        }
    };
    let topology = config.topology()?;
    let partition = datasets::partition(&train, topology, config.partition, config.seed)?;
    let (dim, classes) = (train.dim(), train.num_classes());
    let spec = match config.model.kind {
        ModelFamily::LogisticRegression => ModelSpec::logistic(dim, classes),
        ModelFamily::Mlp => ModelSpec::mlp(dim, config.model.hidden_dim, classes),
    }
    .with_l2(T::lit(config.model.l2_reg));
    Ok(Prepared { train, test, topology, partition, spec })
}

pub fn schedule<T: Scalar>(config: &ExperimentConfig) -> Result<Schedule<T>> {
    let s = &config.schedule;
    let plan = match s.plan {
        PlanKind::Fixed => StepPlan::Fixed(T::lit(s.eta)),
        PlanKind::EpochDecay => StepPlan::EpochDecay { initial: T::lit(s.eta), rate: T::lit(s.decay) },
        PlanKind::PerCloudInterval => StepPlan::PerCloudInterval(s.etas.iter().map(|&e| T::lit(e)).collect()),
    };
    Ok(Schedule::new(s.kappa1, s.kappa2, s.total_updates, plan)?)
}

pub fn run_config<T: Scalar>(config: &ExperimentConfig) -> Result<RunConfig<T>> {
    let s = &config.schedule;
    let mut rc = RunConfig::new(schedule(config)?, s.batch_size, s.mode, config.seed);
    rc.eval_interval = s.eval_interval;
    rc.cloud_route = s.cloud_route;
    rc.keep_checkpoints = config.bounds.enabled;
    Ok(rc)
}

pub fn simulate<T: Scalar>(config: &ExperimentConfig) -> Result<(Prepared<T>, RunOutput<T>)> {
    let prepared = prepare::<T>(config)?;
    let output = hierfavg::run_hierfavg(
        &prepared.topology,
        &prepared.train,
        prepared.test.samples(),
        &prepared.partition,
        &prepared.spec,
        &run_config(config)?,
    )?;
    Ok((prepared, output))
}

/// Passes over client 0's shard completed after `k` local updates.
pub fn epochs_at<T: Scalar>(config: &ExperimentConfig, prepared: &Prepared<T>, k: usize) -> f64 {
    match config.schedule.mode {
        Mode::FullGradient => k as f64,
        Mode::MinibatchSgd => {
            let shard = prepared.partition.client_size(0);
            let per_epoch = shard.div_ceil(config.schedule.batch_size);
            k as f64 / per_epoch as f64
        }
    }
}

/// Epochs until the test accuracy first reaches `target`.
pub fn epochs_to_target<T: Scalar>(
    config: &ExperimentConfig,
    prepared: &Prepared<T>,
    output: &RunOutput<T>,
    target: f64,
) -> Option<f64> {
    output.trace.iter().find(|r| r.test_accuracy.as_f64() >= target).map(|r| epochs_at(config, prepared, r.k))
}

pub fn cost_report<T: Scalar>(config: &ExperimentConfig, output: &RunOutput<T>) -> Result<CostReport> {
    let points: Vec<AccuracyPoint> = output.trace.iter().map(AccuracyPoint::from).collect();
    let accounting = Accounting {
        kappa1: config.schedule.kappa1,
        kappa2: config.schedule.kappa2,
        scope: config.report.energy_scope,
        clients: config.topology.clients,
        edges: config.topology.edges,
    };
    Ok(costmodel::accumulate(&points, &accounting, &config.cost, &config.report.alphas)?)
}

/// Largest `ρ` and `β` over the clients' local objectives, probed around `center`.
pub fn client_smoothness<T: Scalar>(
    prepared: &Prepared<T>,
    probes: usize,
    seed: u64,
    center: &WeightVector<T>,
) -> Result<SmoothnessParams<T>> {
    let per_client = (0..prepared.partition.num_clients())
        .into_par_iter()
        .map(|c| {
            let samples = prepared.partition.shard(c).iter().map(|&i| prepared.train.get(i));
            let objective = EmpiricalLoss::new(&prepared.spec, samples)?;
            let opts = SmoothnessOptions::new(probes, seed).around(center.clone());
            Ok(estimate_smoothness_with(&objective, &opts)?)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(per_client.into_iter().fold(SmoothnessParams { rho: T::zero(), beta: T::zero() }, SmoothnessParams::max))
}

/// Divergences over random probes around `w0` together with every checkpoint.
pub fn divergence<T: Scalar>(
    config: &ExperimentConfig,
    prepared: &Prepared<T>,
    output: &RunOutput<T>,
    w0: &WeightVector<T>,
) -> Result<DivergenceEstimate<T>> {
    let p = prepared;
    let random = estimate_divergence(
        &p.topology,
        &p.train,
        &p.partition,
        &p.spec,
        config.bounds.divergence_probes,
        &ProbeSource::Random { center: Some(w0.clone()) },
        config.seed,
    )?;
    if output.checkpoints.is_empty() {
        return Ok(random);
    }
    let traj = estimate_divergence(
        &p.topology,
        &p.train,
        &p.partition,
        &p.spec,
        output.checkpoints.len(),
        &ProbeSource::Trajectory(output.checkpoints.clone()),
        config.seed,
    )?;
    Ok(random.merge(&traj)?)
}

/// Measured deviation next to `G_c(k)` at one trace point. At cloud
/// aggregations the deviation is the one just before the reset.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundRow<T> {
    pub k: usize,
    pub q: usize,
    pub eta: T,
    pub deviation: T,
    pub g_c: T,
    pub g_c_end: T,
}

/// Absolute allowance for rounding in the measured deviation. Where
/// `G_c(k) = 0` the averaged and centralized iterates agree only up to
/// rounding.
pub fn rounding_slack<T: Scalar>() -> T {
    T::lit(1000.0) * T::epsilon()
}

impl<T: Scalar> BoundRow<T> {
    pub fn within(&self) -> bool {
        self.deviation <= self.g_c + rounding_slack::<T>()
    }
}

pub struct BoundReport<T> {
    pub smoothness: SmoothnessParams<T>,
    pub divergence: DivergenceEstimate<T>,
    pub rows: Vec<BoundRow<T>>,
    /// `key value` lines for the summary file.
    pub summary: Vec<(String, String)>,
}

impl<T: Scalar> BoundReport<T> {
    pub fn params(&self, config: &ExperimentConfig, eta: T) -> BoundParams<T> {
        BoundParams::new(
            self.smoothness.beta,
            self.divergence.client_edge,
            self.divergence.edge_cloud,
            eta,
            config.schedule.kappa1,
            config.schedule.kappa2,
        )
        .with_rho(self.smoothness.rho)
        .with_variant(config.bounds.h_variant)
    }
}

fn interval_eta<T: Scalar>(output: &RunOutput<T>, sched: &Schedule<T>, q: usize) -> T {
    match sched.interval_etas() {
        Some(etas) => etas[q - 1],
        // decaying steps: the largest step seen in the interval
        None => output.trace.iter().filter(|r| sched.interval_of(r.k) == q).fold(T::zero(), |m, r| m.max(r.eta)),
    }
}

/// Long centralized descent from `start`; its final loss stands in for `F(w*)`.
pub fn reference_minimum<T: Scalar>(
    prepared: &Prepared<T>,
    start: &WeightVector<T>,
    beta: T,
    steps: usize,
) -> Result<T> {
    let indices = prepared.partition.assigned_indices();
    let global = EmpiricalLoss::new(&prepared.spec, indices.iter().map(|&i| prepared.train.get(i)))?;
    let eta = T::one() / beta;
    let mut w = start.clone();
    let mut best = global.value(&w)?;
    for _ in 0..steps {
        let (loss, g) = global.value_and_gradient(&w)?;
        best = best.min(loss);
        w = axpy(&w, &g, eta)?;
    }
    Ok(best.min(global.value(&w)?))
}

pub fn bound_report<T: Scalar>(
    config: &ExperimentConfig,
    prepared: &Prepared<T>,
    output: &RunOutput<T>,
) -> Result<BoundReport<T>> {
    let w0 = output
        .checkpoints
        .first()
        .cloned()
        .map_or_else(|| hierfavg::initial_weights(&prepared.spec, config.seed), Ok)?;
    let smoothness = client_smoothness(prepared, config.bounds.smoothness_probes, config.seed, &w0)?;
    let divergence = divergence(config, prepared, output, &w0)?;
    let sched = schedule::<T>(config)?;
    let mut report = BoundReport { smoothness, divergence, rows: Vec::new(), summary: Vec::new() };

    let etas: Vec<T> = (1..=sched.cloud_intervals()).map(|q| interval_eta(output, &sched, q)).collect();
    for r in &output.trace {
        let Some(dev) = r.deviation else { continue };
        let q = sched.interval_of(r.k);
        let params = report.params(config, etas[q - 1]);
        let deviation = if r.event == Event::CloudAgg { output.interval_end_deviations[q - 1] } else { dev };
        report.rows.push(BoundRow {
            k: r.k,
            q,
            eta: etas[q - 1],
            deviation,
            g_c: bounds::g_c(r.k, q, &params)?,
            g_c_end: bounds::g_c_end(&params)?,
        });
    }

    let push = |s: &mut Vec<(String, String)>, k: &str, v: String| s.push((k.to_string(), v));
    let mut summary = Vec::new();
    push(&mut summary, "beta", smoothness.beta.to_string());
    push(&mut summary, "rho", smoothness.rho.to_string());
    push(&mut summary, "client_edge_divergence", report.divergence.client_edge.to_string());
    push(&mut summary, "edge_cloud_divergence", report.divergence.edge_cloud.to_string());
    push(&mut summary, "divergence_probes", report.divergence.probe_count.to_string());
    let first = report.params(config, etas[0]);
    push(&mut summary, "g_c_end", bounds::g_c_end(&first)?.to_string());
    push(&mut summary, "g_nc", bounds::g_nc(&first)?.to_string());
    let violations = report.rows.iter().filter(|r| !r.within()).count();
    push(&mut summary, "deviation_rows", report.rows.len().to_string());
    push(&mut summary, "deviation_violations", violations.to_string());

    let fixed_steps = sched.interval_etas().is_some();
    if prepared.spec.is_convex() && fixed_steps {
        let f_star =
            reference_minimum(prepared, &output.final_weights, smoothness.beta, config.bounds.reference_steps)?;
        push(&mut summary, "f_star_estimate", f_star.to_string());
        let gaps: Vec<T> = output.virtual_end_losses.iter().map(|&f| f - f_star).collect();
        let final_gap = gaps.last().copied().unwrap_or(T::zero());
        push(&mut summary, "final_virtual_gap", final_gap.to_string());
        match bounds::omega_from_gaps(&gaps) {
            Ok(omega) => {
                let epsilon = final_gap;
                let phis: Vec<T> = etas.iter().map(|&e| bounds::phi_from_omega(omega, smoothness.beta, e)).collect();
                let outcome = if phis.iter().any(|&p| !(p > T::zero())) {
                    Theorem1::Infeasible { condition: "phi is not positive (eta > 2/beta)".into() }
                } else {
                    bounds::theorem1_diminishing(&first, &etas, &phis, &vec![epsilon; etas.len()])?
                };
                push(&mut summary, "omega", omega.to_string());
                push(&mut summary, "theorem1", theorem1_text(&outcome));
            }
            Err(_) => push(&mut summary, "theorem1", "uncalibrated (nonpositive gap)".into()),
        }
    } else if !prepared.spec.is_convex() && fixed_steps {
        let rhs = bounds::theorem2_rhs(&first, &etas, output.initial_loss, T::zero())?;
        push(&mut summary, "theorem2_rhs", rhs.to_string());
        if config.schedule.eval_interval == Some(1) {
            push(&mut summary, "theorem2_lhs", weighted_grad_average(output).to_string());
        }
    }
    report.summary = summary;
    Ok(report)
}

fn theorem1_text<T: Scalar>(t: &Theorem1<T>) -> String {
    match t {
        Theorem1::Bound(v) => v.to_string(),
        Theorem1::Infeasible { condition } => format!("infeasible: {condition}"),
    }
}

/// `Σ_k η_k ‖∇F(w(k))‖² / Σ_k η_k` over the recorded updates.
pub fn weighted_grad_average<T: Scalar>(output: &RunOutput<T>) -> T {
    let (num, den) =
        output.trace.iter().fold((T::zero(), T::zero()), |(n, d), r| (n + r.eta * r.grad_norm_sq, d + r.eta));
    num / den
}

/// Headline numbers of a finished run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub final_accuracy: f64,
    pub final_epochs: f64,
    pub epochs_to_target: Option<f64>,
    pub t_alpha: Option<f64>,
    pub e_alpha: Option<f64>,
    pub g_c_end: Option<f64>,
    pub max_deviation: Option<f64>,
}

/// Run one experiment, write every artifact and the manifest into `out`.
pub fn run_experiment(config: &ExperimentConfig, out: &Path, target: Option<f64>) -> Result<RunSummary> {
    match config.precision {
        Precision::F64 => run_as::<f64>(config, out, target),
        Precision::F32 => run_as::<f32>(config, out, target),
    }
}

fn run_as<T: Scalar>(config: &ExperimentConfig, out: &Path, target: Option<f64>) -> Result<RunSummary> {
    let (prepared, output) = simulate::<T>(config)?;
    fs::create_dir_all(out).map_err(Error::io(out))?;

    artifacts::write_partition(&out.join(artifacts::PARTITION), &prepared, config)?;
    artifacts::write_trace(&out.join(artifacts::TRACE), &output.trace)?;

    let cost = cost_report(config, &output)?;
    artifacts::write_cost(&out.join(artifacts::COST), &cost)?;
    artifacts::write_text(&out.join(artifacts::COST_SUMMARY), |w| Ok(cost.write_summary(w)?))?;

    let mut g_c_end = None;
    if config.bounds.enabled {
        let report = bound_report(config, &prepared, &output)?;
        artifacts::write_text(&out.join(artifacts::DIVERGENCE), |w| Ok(report.divergence.write_text(w)?))?;
        artifacts::write_bound_rows(&out.join(artifacts::BOUNDS), &report.rows)?;
        artifacts::write_key_values(&out.join(artifacts::BOUNDS_SUMMARY), &report.summary)?;
        g_c_end = report.rows.first().map(|r| r.g_c_end.as_f64());
    }
    artifacts::validate_dir(out)?;
    Manifest::for_run(config, out)?.write(&out.join(artifacts::MANIFEST))?;

    let target = target.or_else(|| config.report.alphas.first().copied());
    let alpha = target.and_then(|t| cost.alphas.iter().find(|a| a.alpha == t).copied());
    let last = output.trace.last();
    Ok(RunSummary {
        final_accuracy: last.map_or(output.initial.accuracy, |r| r.test_accuracy).as_f64(),
        final_epochs: epochs_at(config, &prepared, config.schedule.total_updates),
        epochs_to_target: target.and_then(|t| epochs_to_target(config, &prepared, &output, t)),
        t_alpha: alpha.and_then(|a| a.t_alpha()),
        e_alpha: alpha.and_then(|a| a.e_alpha()),
        g_c_end,
        max_deviation: output
            .interval_end_deviations
            .iter()
            .chain(output.trace.iter().filter_map(|r| r.deviation.as_ref()))
            .map(|d| d.as_f64())
            .reduce(f64::max),
    })
}
