//! The HierFAVG training loop: local updates on every client, edge
//! aggregation every `κ1` updates, cloud aggregation every `κ1κ2` updates,
//! and the virtual centralized sequence that restarts at every cloud
//! aggregation.

mod sampler;
mod schedule;

pub use sampler::MinibatchSampler;
pub use schedule::{Schedule, StepPlan};

use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::datasets::{Dataset, Partition, Sample, Topology};
use crate::error::{Error, Result};
use crate::models::{self, EmpiricalLoss, ModelKind, ModelSpec, Objective};
use crate::numcore::{axpy, l2_distance, weighted_average, WeightVector};
use crate::rng::{domain, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    MinibatchSgd,
    /// Every local update uses the gradient of the client's whole shard.
    FullGradient,
}

/// How the cloud forms `w(k)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CloudRoute {
    /// `Σ_i |D_i| w_i / |D|` over all clients in ascending order.
    #[default]
    Flat,
    /// `Σ_ℓ |D^ℓ| w^ℓ / |D|` over the freshly aggregated edge models.
    ViaEdges,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Event {
    LocalStep,
    EdgeAgg,
    CloudAgg,
}

impl Event {
    pub fn as_str(&self) -> &'static str {
        match self {
            Event::LocalStep => "local_step",
            Event::EdgeAgg => "edge_agg",
            Event::CloudAgg => "cloud_agg",
        }
    }
}

impl std::str::FromStr for Event {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "local_step" => Ok(Event::LocalStep),
            "edge_agg" => Ok(Event::EdgeAgg),
            "cloud_agg" => Ok(Event::CloudAgg),
            other => Err(Error::config(format!("unknown trace event {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TraceRecord<T> {
    pub k: usize,
    pub event: Event,
    /// Global training loss `F(w(k))`.
    pub global_loss: T,
    pub test_accuracy: T,
    /// `‖w(k) − u(k)‖`, taken after any reset at `k`.
    pub deviation: Option<T>,
    pub grad_norm_sq: T,
    /// Step size of update `k` on client 0.
    pub eta: T,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Evaluation<T> {
    pub loss: T,
    pub accuracy: T,
}

#[derive(Debug, Clone)]
pub struct RunConfig<T> {
    pub schedule: Schedule<T>,
    pub batch_size: usize,
    pub mode: Mode,
    pub seed: u64,
    /// Also record every `n`-th local update, besides aggregations.
    pub eval_interval: Option<usize>,
    pub track_virtual: bool,
    pub cloud_route: CloudRoute,
    /// Keep `w0` and `w` at every cloud aggregation.
    pub keep_checkpoints: bool,
    /// Overrides the seeded initialization.
    pub initial: Option<WeightVector<T>>,
}

impl<T: Scalar> RunConfig<T> {
    pub fn new(schedule: Schedule<T>, batch_size: usize, mode: Mode, seed: u64) -> Self {
        Self {
            schedule,
            batch_size,
            mode,
            seed,
            eval_interval: None,
            track_virtual: true,
            cloud_route: CloudRoute::Flat,
            keep_checkpoints: false,
            initial: None,
        }
    }

    pub fn every_step(mut self) -> Self {
        self.eval_interval = Some(1);
        self
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput<T> {
    pub trace: Vec<TraceRecord<T>>,
    /// Evaluation of `w0` on the test set.
    pub initial: Evaluation<T>,
    pub initial_loss: T,
    pub final_weights: WeightVector<T>,
    /// `‖w(qκ1κ2) − u_q(qκ1κ2)‖` just before each reset, one per interval.
    pub interval_end_deviations: Vec<T>,
    /// `F(u_q(qκ1κ2))` just before each reset.
    pub virtual_end_losses: Vec<T>,
    pub checkpoints: Vec<WeightVector<T>>,
    pub samples_per_client: Vec<usize>,
}

impl<T: Scalar> RunOutput<T> {
    pub fn count(&self, event: Event) -> usize {
        self.trace.iter().filter(|r| r.event == event).count()
    }
}

/// Mean loss and top-1 accuracy of `w` on `test`.
pub fn evaluate<T: Scalar>(spec: &ModelSpec<T>, w: &WeightVector<T>, test: &[Sample<T>]) -> Result<Evaluation<T>> {
    if test.is_empty() {
        return Err(Error::domain("evaluation needs a nonempty test set"));
    }
    let loss = models::loss(spec, w, test)?;
    let mut correct = 0usize;
    for s in test {
        if models::predict(spec, w, &s.features)? == s.label {
            correct += 1;
        }
    }
    Ok(Evaluation { loss, accuracy: T::from_count(correct) / T::from_count(test.len()) })
}

/// Common starting point `w0`: zeros for logistic regression, `N(0, 0.01²)`
/// entries for the MLP.
pub fn initial_weights<T: Scalar>(spec: &ModelSpec<T>, seed: u64) -> Result<WeightVector<T>> {
    spec.validate()?;
    match spec.kind {
        ModelKind::LogisticRegression => WeightVector::zeros(spec.param_dim()),
        ModelKind::Mlp { .. } => {
            let mut rng = stream(seed, &[domain::INIT]);
            let normal = Normal::new(0.0, 0.01).expect("valid normal");
            WeightVector::new((0..spec.param_dim()).map(|_| T::lit(normal.sample(&mut rng))).collect())
        }
    }
}

/// Centralized gradient descent on the global loss, restarted from `w` at
/// every cloud aggregation.
#[derive(Debug, Clone)]
pub struct VirtualSequence<T> {
    u: WeightVector<T>,
}

impl<T: Scalar> VirtualSequence<T> {
    pub fn new(start: WeightVector<T>) -> Self {
        Self { u: start }
    }

    pub fn reset(&mut self, w: &WeightVector<T>) {
        self.u = w.clone();
    }

    pub fn step<O: Objective<T>>(&mut self, objective: &O, eta: T) -> Result<()> {
        let g = objective.gradient(&self.u)?;
        self.u = axpy(&self.u, &g, eta)?;
        Ok(())
    }

    pub fn weights(&self) -> &WeightVector<T> {
        &self.u
    }

    pub fn deviation(&self, w: &WeightVector<T>) -> Result<T> {
        l2_distance(w, &self.u)
    }
}

struct Client<'a, T> {
    w: WeightVector<T>,
    samples: Vec<&'a Sample<T>>,
    sampler: Option<MinibatchSampler>,
    passes: u64,
}

impl<T: Scalar> Client<'_, T> {
    /// One local update; returns the step size used.
    fn step(&mut self, spec: &ModelSpec<T>, schedule: &Schedule<T>, k: usize) -> Result<T> {
        let (g, eta) = match &mut self.sampler {
            Some(sampler) => {
                let batch = sampler.next_batch();
                let g = models::gradient(spec, &self.w, batch.iter().map(|&p| self.samples[p]))?;
                (g, schedule.eta(k, sampler.epochs()))
            }
            None => {
                let eta = schedule.eta(k, self.passes);
                self.passes += 1;
                (models::gradient(spec, &self.w, self.samples.iter().copied())?, eta)
            }
        };
        self.w = axpy(&self.w, &g, eta)?;
        Ok(eta)
    }
}

fn check_inputs<T: Scalar>(
    topology: &Topology,
    train: &Dataset<T>,
    partition: &Partition,
    spec: &ModelSpec<T>,
    config: &RunConfig<T>,
) -> Result<()> {
    topology.validate()?;
    config.schedule.validate()?;
    spec.validate()?;
    if partition.num_clients() != topology.num_clients || partition.num_edges() != topology.num_edges {
        return Err(Error::config(format!(
            "partition has {} clients over {} edges but topology declares {} over {}",
            partition.num_clients(),
            partition.num_edges(),
            topology.num_clients,
            topology.num_edges
        )));
    }
    if partition.assigned_indices().last().is_some_and(|&i| i >= train.len()) {
        return Err(Error::config("partition references samples outside the training set"));
    }
    if train.dim() != spec.input_dim || train.num_classes() > spec.num_classes {
        return Err(Error::config("training data does not match the model shape"));
    }
    if config.mode == Mode::MinibatchSgd && config.batch_size == 0 {
        return Err(Error::config("batch_size must be positive"));
    }
    if config.eval_interval == Some(0) {
        return Err(Error::config("eval_interval must be positive"));
    }
    Ok(())
}

/// Run HierFAVG for `schedule.total_updates` local updates.
pub fn run_hierfavg<T: Scalar>(
    topology: &Topology,
    train: &Dataset<T>,
    test: &[Sample<T>],
    partition: &Partition,
    spec: &ModelSpec<T>,
    config: &RunConfig<T>,
) -> Result<RunOutput<T>> {
    check_inputs(topology, train, partition, spec, config)?;
    let schedule = &config.schedule;
    let w0 = match &config.initial {
        Some(w) if w.dim() != spec.param_dim() => {
            return Err(Error::Dimension { expected: spec.param_dim(), found: w.dim() })
        }
        Some(w) => w.clone(),
        None => initial_weights(spec, config.seed)?,
    };

    let sizes: Vec<T> = partition.client_sizes().into_iter().map(T::from_count).collect();
    let edge_sizes: Vec<T> = (0..partition.num_edges()).map(|l| T::from_count(partition.edge_size(l))).collect();
    let global = EmpiricalLoss::new(spec, partition.assigned_indices().into_iter().map(|i| train.get(i)))?;

    let mut clients = (0..partition.num_clients())
        .map(|c| {
            let samples: Vec<&Sample<T>> = partition.shard(c).iter().map(|&i| train.get(i)).collect();
            let sampler = match config.mode {
                Mode::MinibatchSgd => Some(MinibatchSampler::new(config.seed, c, samples.len(), config.batch_size)?),
                Mode::FullGradient => None,
            };
            Ok(Client { w: w0.clone(), samples, sampler, passes: 0 })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut virt = config.track_virtual.then(|| VirtualSequence::new(w0.clone()));
    let mut edge_weights: Vec<Option<WeightVector<T>>> = vec![None; partition.num_edges()];
    let mut out = RunOutput {
        trace: Vec::with_capacity(schedule.total_updates / schedule.kappa1),
        initial: evaluate(spec, &w0, test)?,
        initial_loss: global.value(&w0)?,
        final_weights: w0.clone(),
        interval_end_deviations: Vec::with_capacity(schedule.cloud_intervals()),
        virtual_end_losses: Vec::with_capacity(schedule.cloud_intervals()),
        checkpoints: if config.keep_checkpoints { vec![w0.clone()] } else { Vec::new() },
        samples_per_client: partition.client_sizes(),
    };

    for k in 1..=schedule.total_updates {
        let etas = clients.par_iter_mut().map(|c| c.step(spec, schedule, k)).collect::<Result<Vec<T>>>()?;
        let eta = etas[0];
        if let Some(v) = virt.as_mut() {
            v.step(&global, eta)?;
        }

        let edge_agg = schedule.is_edge_aggregation(k);
        let cloud_agg = schedule.is_cloud_aggregation(k);
        let mut global_w = None;
        if edge_agg {
            for (l, slot) in edge_weights.iter_mut().enumerate() {
                let members = partition.edge_clients(l);
                let ws: Vec<&WeightVector<T>> = members.iter().map(|&c| &clients[c].w).collect();
                let weights: Vec<T> = members.iter().map(|&c| sizes[c]).collect();
                let agg = weighted_average(&ws, &weights)?;
                if !cloud_agg {
                    for &c in members {
                        clients[c].w = agg.clone();
                    }
                }
                *slot = Some(agg);
            }
        }
        if cloud_agg {
            let w = match config.cloud_route {
                CloudRoute::Flat => {
                    let ws: Vec<&WeightVector<T>> = clients.iter().map(|c| &c.w).collect();
                    weighted_average(&ws, &sizes)?
                }
                CloudRoute::ViaEdges => {
                    let ws: Vec<&WeightVector<T>> =
                        edge_weights.iter().map(|e| e.as_ref().expect("edge aggregated")).collect();
                    weighted_average(&ws, &edge_sizes)?
                }
            };
            for c in &mut clients {
                c.w = w.clone();
            }
            if let Some(v) = virt.as_mut() {
                out.interval_end_deviations.push(v.deviation(&w)?);
                out.virtual_end_losses.push(global.value(v.weights())?);
                v.reset(&w);
            }
            if config.keep_checkpoints {
                out.checkpoints.push(w.clone());
            }
            global_w = Some(w);
        }

        let scheduled_eval = config.eval_interval.is_some_and(|n| k % n == 0);
        if !(edge_agg || scheduled_eval) {
            continue;
        }
        let w = match global_w {
            Some(w) => w,
            None => {
                let ws: Vec<&WeightVector<T>> = clients.iter().map(|c| &c.w).collect();
                weighted_average(&ws, &sizes)?
            }
        };
        let (global_loss, grad) = global.value_and_gradient(&w)?;
        let eval = evaluate(spec, &w, test)?;
        out.trace.push(TraceRecord {
            k,
            event: if cloud_agg {
                Event::CloudAgg
            } else if edge_agg {
                Event::EdgeAgg
            } else {
                Event::LocalStep
            },
            global_loss,
            test_accuracy: eval.accuracy,
            deviation: virt.as_ref().map(|v| v.deviation(&w)).transpose()?,
            grad_norm_sq: grad.norm_sq(),
            eta,
        });
    }

    let ws: Vec<&WeightVector<T>> = clients.iter().map(|c| &c.w).collect();
    out.final_weights = weighted_average(&ws, &sizes)?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datasets::{partition, PartitionScheme, SyntheticSpec};
    use proptest::prelude::*;

    struct Fixture {
        train: Dataset<f64>,
        test: Dataset<f64>,
        topology: Topology,
        partition: Partition,
        spec: ModelSpec<f64>,
    }

    fn fixture(clients: usize, edges: usize, scheme: PartitionScheme) -> Fixture {
        let (train, test) = SyntheticSpec::new(4, 5, 30, 11).generate_split(10).unwrap();
        let topology = Topology::new(clients, edges).unwrap();
        let partition = partition(&train, topology, scheme, 3).unwrap();
        Fixture { train, test, topology, partition, spec: ModelSpec::logistic(5, 4) }
    }

    fn run(f: &Fixture, config: &RunConfig<f64>) -> RunOutput<f64> {
        run_hierfavg(&f.topology, &f.train, f.test.samples(), &f.partition, &f.spec, config).unwrap()
    }

    #[test]
    fn unit_periods_with_full_gradients_match_centralized_descent() {
        let f = fixture(4, 2, PartitionScheme::Iid);
        let schedule = Schedule::fixed(1, 1, 30, 0.5).unwrap();
        let out = run(&f, &RunConfig::new(schedule, 1, Mode::FullGradient, 0));
        let union: Vec<&Sample<f64>> = f.partition.assigned_indices().iter().map(|&i| f.train.get(i)).collect();
        let mut w = WeightVector::zeros(f.spec.param_dim()).unwrap();
        for _ in 0..30 {
            let g = models::gradient(&f.spec, &w, union.iter().copied()).unwrap();
            w = axpy(&w, &g, 0.5).unwrap();
        }
        for (a, b) in out.final_weights.as_slice().iter().zip(w.as_slice()) {
            assert!((a - b).abs() <= 1e-9);
        }
        assert!(out.trace.iter().all(|r| r.deviation == Some(0.0)));
    }

    #[test]
    fn single_client_is_plain_local_sgd() {
        let (train, test) = SyntheticSpec::new(3, 4, 20, 2).generate_split(5).unwrap();
        let topology = Topology::new(1, 1).unwrap();
        let part = partition(&train, topology, PartitionScheme::Iid, 0).unwrap();
        let spec = ModelSpec::logistic(4, 3);
        let config = RunConfig::new(Schedule::fixed(3, 2, 24, 0.2).unwrap(), 7, Mode::MinibatchSgd, 5);
        let out = run_hierfavg(&topology, &train, test.samples(), &part, &spec, &config).unwrap();

        let shard: Vec<&Sample<f64>> = part.shard(0).iter().map(|&i| train.get(i)).collect();
        let mut sampler = MinibatchSampler::new(5, 0, shard.len(), 7).unwrap();
        let mut w = WeightVector::zeros(spec.param_dim()).unwrap();
        for _ in 0..24 {
            let g = models::gradient(&spec, &w, sampler.next_batch().iter().map(|&p| shard[p])).unwrap();
            w = axpy(&w, &g, 0.2).unwrap();
        }
        assert_eq!(out.final_weights, w);
    }

    #[test]
    fn event_counts_follow_the_periods() {
        let f = fixture(6, 3, PartitionScheme::SimpleNiid);
        let schedule = Schedule::fixed(2, 3, 24, 0.1).unwrap();
        let out = run(&f, &RunConfig::new(schedule, 4, Mode::MinibatchSgd, 1));
        assert_eq!(out.count(Event::EdgeAgg) + out.count(Event::CloudAgg), 12);
        assert_eq!(out.count(Event::CloudAgg), 4);
        assert!(out.trace.windows(2).all(|p| p[0].k < p[1].k));
        for r in &out.trace {
            assert_eq!(r.k % 2, 0);
            assert_eq!(r.event == Event::CloudAgg, r.k % 6 == 0);
            assert!((0.0..=1.0).contains(&r.test_accuracy) && r.grad_norm_sq >= 0.0);
        }
        assert_eq!(out.interval_end_deviations.len(), 4);
    }

    #[test]
    fn deviation_vanishes_at_cloud_aggregations() {
        let f = fixture(6, 3, PartitionScheme::SimpleNiid);
        let schedule = Schedule::fixed(2, 2, 16, 0.3).unwrap();
        let out = run(&f, &RunConfig::new(schedule, 1, Mode::FullGradient, 1).every_step());
        assert_eq!(out.trace.len(), 16);
        for r in &out.trace {
            let d = r.deviation.unwrap();
            if r.k % 4 == 0 {
                assert_eq!(d, 0.0);
            } else if r.k % 4 != 1 {
                assert!(d > 0.0, "non-iid clients should drift at k={}", r.k);
            }
        }
        assert!(out.interval_end_deviations.iter().all(|&d| d > 0.0));
    }

    #[test]
    fn replicated_shards_never_deviate() {
        let base = SyntheticSpec::new(3, 4, 5, 8).generate::<f64>().unwrap();
        let n = base.len();
        let copies = 4;
        let samples: Vec<Sample<f64>> = (0..copies).flat_map(|_| base.samples().to_vec()).collect();
        let train = Dataset::new(samples, 3).unwrap();
        let shards: Vec<Vec<usize>> = (0..copies).map(|c| (c * n..(c + 1) * n).collect()).collect();
        let part = Partition::new(shards, vec![0, 0, 1, 1], 2, train.len()).unwrap();
        let topology = Topology::new(4, 2).unwrap();
        let spec = ModelSpec::logistic(4, 3);
        let config = RunConfig::new(Schedule::fixed(3, 2, 18, 0.4).unwrap(), 1, Mode::FullGradient, 0).every_step();
        let out = run_hierfavg(&topology, &train, base.samples(), &part, &spec, &config).unwrap();
        for r in &out.trace {
            assert!(r.deviation.unwrap() <= 1e-12, "k={} deviation {:?}", r.k, r.deviation);
        }
    }

    #[test]
    fn cloud_routes_agree() {
        let f = fixture(8, 4, PartitionScheme::SimpleNiid);
        let mut config = RunConfig::new(Schedule::fixed(3, 2, 36, 0.2).unwrap(), 5, Mode::MinibatchSgd, 9);
        let flat = run(&f, &config);
        config.cloud_route = CloudRoute::ViaEdges;
        let via = run(&f, &config);
        for (a, b) in flat.final_weights.as_slice().iter().zip(via.final_weights.as_slice()) {
            assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn thread_count_does_not_change_results() {
        let f = fixture(8, 2, PartitionScheme::SimpleNiid);
        let config = RunConfig::new(Schedule::fixed(2, 2, 20, 0.3).unwrap(), 3, Mode::MinibatchSgd, 4);
        let parallel = run(&f, &config);
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let serial = pool.install(|| run(&f, &config));
        assert_eq!(parallel.final_weights, serial.final_weights);
        assert_eq!(parallel.trace, serial.trace);
    }

    #[test]
    fn epoch_decay_shrinks_the_step() {
        let f = fixture(4, 2, PartitionScheme::Iid);
        let plan = StepPlan::EpochDecay { initial: 0.1, rate: 0.5 };
        let shard = f.partition.client_size(0);
        let config = RunConfig::new(Schedule::new(1, 1, 3 * shard, plan).unwrap(), 1, Mode::MinibatchSgd, 0);
        let out = run(&f, &config);
        assert_eq!(out.trace[0].eta, 0.1);
        assert_eq!(out.trace[shard].eta, 0.05);
        assert_eq!(out.trace[2 * shard].eta, 0.025);
    }

    #[test]
    fn mlp_initialization_is_seeded() {
        let spec = ModelSpec::<f64>::mlp(3, 4, 2);
        let a = initial_weights(&spec, 1).unwrap();
        assert_eq!(a, initial_weights(&spec, 1).unwrap());
        assert_ne!(a, initial_weights(&spec, 2).unwrap());
        assert!(a.norm() > 0.0 && a.as_slice().iter().all(|x| x.abs() < 0.1));
        assert_eq!(initial_weights(&ModelSpec::<f64>::logistic(3, 2), 1).unwrap().norm(), 0.0);
    }

    #[test]
    fn mismatched_topology_is_a_config_error() {
        let f = fixture(4, 2, PartitionScheme::Iid);
        let config = RunConfig::new(Schedule::fixed(1, 1, 2, 0.1).unwrap(), 2, Mode::MinibatchSgd, 0);
        let wrong = Topology::new(4, 4).unwrap();
        let err = run_hierfavg(&wrong, &f.train, f.test.samples(), &f.partition, &f.spec, &config);
        assert!(matches!(err, Err(Error::Config(_))));
        let mut zero_batch = config.clone();
        zero_batch.batch_size = 0;
        let err = run_hierfavg(&f.topology, &f.train, f.test.samples(), &f.partition, &f.spec, &zero_batch);
        assert!(matches!(err, Err(Error::Config(_))));
    }

    #[test]
    fn f32_runs_train() {
        let (train, test) = SyntheticSpec::new(3, 4, 30, 6).generate_split::<f32>(10).unwrap();
        let topology = Topology::new(3, 1).unwrap();
        let part = partition(&train, topology, PartitionScheme::Iid, 0).unwrap();
        let spec = ModelSpec::<f32>::logistic(4, 3);
        let config = RunConfig::new(Schedule::fixed(2, 2, 40, 0.5f32).unwrap(), 5, Mode::MinibatchSgd, 0);
        let out = run_hierfavg(&topology, &train, test.samples(), &part, &spec, &config).unwrap();
        let last = out.trace.last().unwrap();
        assert!(last.global_loss < out.initial_loss);
        assert!(last.test_accuracy > 0.5);
    }

    #[test]
    fn zero_weights_predict_the_first_class() {
        let test = SyntheticSpec::new(10, 6, 20, 4).generate::<f64>().unwrap();
        let spec = ModelSpec::logistic(6, 10);
        let w = WeightVector::zeros(spec.param_dim()).unwrap();
        let eval = evaluate(&spec, &w, test.samples()).unwrap();
        let brute = test.samples().iter().filter(|s| s.label == 0).count() as f64 / test.len() as f64;
        assert_eq!(eval.accuracy, brute);
        assert!((0.05..=0.15).contains(&eval.accuracy));
        assert_eq!(eval.loss.to_bits(), models::loss(&spec, &w, test.samples()).unwrap().to_bits());
    }

    #[test]
    fn separable_data_is_classified_perfectly() {
        let s = |x: f64, y| Sample { features: vec![x, 1.0 - x], label: y };
        let data = vec![s(0.0, 0), s(0.1, 0), s(0.2, 0), s(0.8, 1), s(0.9, 1), s(1.0, 1)];
        let spec = ModelSpec::logistic(2, 2);
        let mut w = WeightVector::zeros(spec.param_dim()).unwrap();
        for _ in 0..500 {
            w = axpy(&w, &models::gradient(&spec, &w, &data).unwrap(), 1.0).unwrap();
        }
        let brute = data.iter().filter(|x| models::predict(&spec, &w, &x.features).unwrap() == x.label).count();
        assert_eq!(brute, data.len());
        assert_eq!(evaluate(&spec, &w, &data).unwrap().accuracy, 1.0);
    }

    #[test]
    fn empty_test_set_is_rejected() {
        let spec = ModelSpec::<f64>::logistic(2, 2);
        let w = WeightVector::zeros(spec.param_dim()).unwrap();
        assert!(matches!(evaluate(&spec, &w, &[]), Err(Error::Domain(_))));
    }

    proptest! {
        #[test]
        fn redistribution_preserves_the_mean(
            values in prop::collection::vec(-5.0f64..5.0, 12),
            edges in 1usize..4,
        ) {
            let clients: Vec<WeightVector<f64>> =
                values.chunks(2).map(|c| WeightVector::new(c.to_vec()).unwrap()).collect();
            let ones = vec![1.0; clients.len()];
            let refs: Vec<&WeightVector<f64>> = clients.iter().collect();
            let before = weighted_average(&refs, &ones).unwrap();
            let per_edge = clients.len() / edges * edges;
            let group = per_edge / edges;
            let mut after = clients.clone();
            for l in 0..edges {
                let members: Vec<&WeightVector<f64>> = clients[l * group..(l + 1) * group].iter().collect();
                let agg = weighted_average(&members, &vec![1.0; group]).unwrap();
                for c in &mut after[l * group..(l + 1) * group] {
                    *c = agg.clone();
                }
            }
            let refs: Vec<&WeightVector<f64>> = after[..per_edge].iter().collect();
            let orig: Vec<&WeightVector<f64>> = clients[..per_edge].iter().collect();
            let lhs = weighted_average(&refs, &vec![1.0; per_edge]).unwrap();
            let rhs = weighted_average(&orig, &vec![1.0; per_edge]).unwrap();
            prop_assert!(l2_distance(&lhs, &rhs).unwrap() <= 1e-12);
            prop_assert_eq!(before.dim(), 2);
        }
    }
}
