//! Empirical client-edge (δ) and edge-cloud (Δ) gradient divergences.
//!
//! The definitional constants are suprema over all weights; these are
//! maxima over a finite probe set, i.e. empirical lower bounds.

use std::io::Write;

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::datasets::{Dataset, Partition, Sample, Topology};
use crate::error::{Error, Result};
use crate::models::{self, ModelSpec};
use crate::numcore::{l2_distance, weighted_average, WeightVector};
use crate::rng::{domain, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub enum ProbeSource<T> {
    /// The center (zeros when `None`), then Gaussian perturbations of it at
    /// scales 0.1 and 1 in turn.
    Random { center: Option<WeightVector<T>> },
    /// The first `probes` points of a recorded trajectory.
    Trajectory(Vec<WeightVector<T>>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceEstimate<T> {
    /// `δ_i` per client.
    pub per_client: Vec<T>,
    /// `Δ^ℓ` per edge.
    pub per_edge: Vec<T>,
    /// `δ = Σ_i |D_i| δ_i / |D|`.
    pub client_edge: T,
    /// `Δ = Σ_ℓ |D^ℓ| Δ^ℓ / |D|`.
    pub edge_cloud: T,
    pub probe_count: usize,
    client_sizes: Vec<usize>,
    edge_of: Vec<usize>,
}

fn weighted_mean<T: Scalar>(values: &[T], sizes: impl Iterator<Item = usize>) -> T {
    let mut total = 0usize;
    let mut acc = T::zero();
    for (&v, n) in values.iter().zip(sizes) {
        acc += T::from_count(n) * v;
        total += n;
    }
    acc / T::from_count(total)
}

impl<T: Scalar> DivergenceEstimate<T> {
    fn new(per_client: Vec<T>, per_edge: Vec<T>, probe_count: usize, partition: &Partition) -> Self {
        let client_sizes = partition.client_sizes();
        let edge_of: Vec<usize> = (0..partition.num_clients()).map(|c| partition.edge_of(c)).collect();
        let mut est = Self {
            per_client,
            per_edge,
            client_edge: T::zero(),
            edge_cloud: T::zero(),
            probe_count,
            client_sizes,
            edge_of,
        };
        est.aggregate();
        est
    }

    fn edge_sizes(&self) -> Vec<usize> {
        let mut sizes = vec![0; self.per_edge.len()];
        for (&n, &l) in self.client_sizes.iter().zip(&self.edge_of) {
            sizes[l] += n;
        }
        sizes
    }

    fn aggregate(&mut self) {
        self.client_edge = weighted_mean(&self.per_client, self.client_sizes.iter().copied());
        self.edge_cloud = weighted_mean(&self.per_edge, self.edge_sizes().into_iter());
    }

    /// `Σ_i |D_i| Δ^{ℓ(i)} / |D|`, summing each client under its own edge.
    pub fn edge_cloud_per_client(&self) -> T {
        let spread: Vec<T> = self.edge_of.iter().map(|&l| self.per_edge[l]).collect();
        weighted_mean(&spread, self.client_sizes.iter().copied())
    }

    /// Elementwise maximum of two estimates over the same partition.
    pub fn merge(&self, other: &Self) -> Result<Self> {
        if self.client_sizes != other.client_sizes || self.edge_of != other.edge_of {
            return Err(Error::domain("estimates come from different partitions"));
        }
        let max = |a: &[T], b: &[T]| a.iter().zip(b).map(|(&x, &y)| x.max(y)).collect();
        let mut est = Self {
            per_client: max(&self.per_client, &other.per_client),
            per_edge: max(&self.per_edge, &other.per_edge),
            probe_count: self.probe_count + other.probe_count,
            ..self.clone()
        };
        est.aggregate();
        Ok(est)
    }

    pub fn write_text<W: Write>(&self, out: &mut W) -> Result<()> {
        writeln!(out, "# gradient divergence, maxima over {} probes (empirical lower bounds)", self.probe_count)?;
        writeln!(out, "client_edge {}", self.client_edge)?;
        writeln!(out, "edge_cloud {}", self.edge_cloud)?;
        for (l, d) in self.per_edge.iter().enumerate() {
            writeln!(out, "edge {l} {d}")?;
        }
        for (i, d) in self.per_client.iter().enumerate() {
            writeln!(out, "client {i} edge {} {d}", self.edge_of[i])?;
        }
        Ok(())
    }
}

fn random_probe<T: Scalar>(center: &WeightVector<T>, seed: u64, i: usize) -> Result<WeightVector<T>> {
    if i == 0 {
        return Ok(center.clone());
    }
    let scale = if i % 2 == 1 { T::lit(0.1) } else { T::one() };
    let mut rng = stream(seed, &[domain::DIVERGENCE, i as u64]);
    let noise: Vec<T> = (0..center.dim()).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect();
    center.add_scaled(&WeightVector::new(noise)?, scale)
}

/// Distances `(‖∇F_i − ∇F^ℓ‖ per client, ‖∇F^ℓ − ∇F‖ per edge)` at `w`.
fn distances_at<T: Scalar>(
    spec: &ModelSpec<T>,
    shards: &[Vec<&Sample<T>>],
    partition: &Partition,
    w: &WeightVector<T>,
) -> Result<(Vec<T>, Vec<T>)> {
    let grads = shards.par_iter().map(|s| models::gradient(spec, w, s.iter().copied())).collect::<Result<Vec<_>>>()?;
    let edge_grads = (0..partition.num_edges())
        .map(|l| {
            let members = partition.edge_clients(l);
            let gs: Vec<&WeightVector<T>> = members.iter().map(|&c| &grads[c]).collect();
            let ws: Vec<T> = members.iter().map(|&c| T::from_count(partition.client_size(c))).collect();
            weighted_average(&gs, &ws)
        })
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&WeightVector<T>> = edge_grads.iter().collect();
    let edge_ws: Vec<T> = (0..partition.num_edges()).map(|l| T::from_count(partition.edge_size(l))).collect();
    let global = weighted_average(&refs, &edge_ws)?;
    let per_client = (0..partition.num_clients())
        .map(|c| l2_distance(&grads[c], &edge_grads[partition.edge_of(c)]))
        .collect::<Result<_>>()?;
    let per_edge = edge_grads.iter().map(|g| l2_distance(g, &global)).collect::<Result<_>>()?;
    Ok((per_client, per_edge))
}

/// Maximum gradient divergences over `probes` points drawn from `source`.
pub fn estimate_divergence<T: Scalar>(
    topology: &Topology,
    train: &Dataset<T>,
    partition: &Partition,
    spec: &ModelSpec<T>,
    probes: usize,
    source: &ProbeSource<T>,
    seed: u64,
) -> Result<DivergenceEstimate<T>> {
    topology.validate()?;
    spec.validate()?;
    if partition.num_clients() != topology.num_clients || partition.num_edges() != topology.num_edges {
        return Err(Error::config("partition does not match topology"));
    }
    if partition.assigned_indices().last().is_some_and(|&i| i >= train.len()) {
        return Err(Error::config("partition references samples outside the training set"));
    }
    let points: Vec<WeightVector<T>> = match source {
        ProbeSource::Random { center } => {
            let center = match center {
                Some(c) => c.clone(),
                None => WeightVector::zeros(spec.param_dim())?,
            };
            (0..probes).map(|i| random_probe(&center, seed, i)).collect::<Result<_>>()?
        }
        ProbeSource::Trajectory(list) => list.iter().take(probes).cloned().collect(),
    };
    if points.is_empty() {
        return Err(Error::domain("divergence estimation needs at least one probe"));
    }
    if let Some(p) = points.iter().find(|p| p.dim() != spec.param_dim()) {
        return Err(Error::Dimension { expected: spec.param_dim(), found: p.dim() });
    }

    let shards: Vec<Vec<&Sample<T>>> =
        (0..partition.num_clients()).map(|c| partition.shard(c).iter().map(|&i| train.get(i)).collect()).collect();
    let results = points.par_iter().map(|w| distances_at(spec, &shards, partition, w)).collect::<Result<Vec<_>>>()?;

    let mut per_client = vec![T::zero(); partition.num_clients()];
    let mut per_edge = vec![T::zero(); partition.num_edges()];
    for (pc, pe) in &results {
        for (m, &d) in per_client.iter_mut().zip(pc) {
            *m = m.max(d);
        }
        for (m, &d) in per_edge.iter_mut().zip(pe) {
            *m = m.max(d);
        }
    }
    Ok(DivergenceEstimate::new(per_client, per_edge, points.len(), partition))
}
