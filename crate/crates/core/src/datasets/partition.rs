use std::collections::BTreeSet;
use std::fmt;
use std::io::Write;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::Dataset;
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::scalar::Scalar;

/// Client/edge counts. Every edge serves the same number of clients.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Topology {
    pub num_clients: usize,
    pub num_edges: usize,
}

impl Topology {
    pub fn new(num_clients: usize, num_edges: usize) -> Result<Self> {
        let t = Self { num_clients, num_edges };
        t.validate()?;
        Ok(t)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_clients == 0 || self.num_edges == 0 {
            return Err(Error::config("topology needs at least one client and one edge"));
        }
        if !self.num_clients.is_multiple_of(self.num_edges) {
            return Err(Error::config(format!(
                "{} clients cannot be split evenly over {} edges",
                self.num_clients, self.num_edges
            )));
        }
        Ok(())
    }

    pub fn clients_per_edge(&self) -> usize {
        self.num_clients / self.num_edges
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PartitionScheme {
    /// Uniform random shards.
    Iid,
    /// Sort by label, cut into 2N shards, two shards per client, clients
    /// randomly placed on edges.
    SimpleNiid,
    /// One class per client; each edge's clients cover every class.
    EdgeIid,
    /// One class per client; each edge's clients cover ⌈C/2⌉ classes.
    EdgeNiid,
}

impl PartitionScheme {
    pub const ALL: [PartitionScheme; 4] =
        [PartitionScheme::Iid, PartitionScheme::SimpleNiid, PartitionScheme::EdgeIid, PartitionScheme::EdgeNiid];

    pub fn as_str(&self) -> &'static str {
        match self {
            PartitionScheme::Iid => "iid",
            PartitionScheme::SimpleNiid => "simple_niid",
            PartitionScheme::EdgeIid => "edge_iid",
            PartitionScheme::EdgeNiid => "edge_niid",
        }
    }
}

impl fmt::Display for PartitionScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for PartitionScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PartitionScheme::ALL
            .into_iter()
            .find(|p| p.as_str() == s)
            .ok_or_else(|| Error::config(format!("unknown partition scheme `{s}`")))
    }
}

/// Assignment of dataset indices to clients and of clients to edges.
///
/// Shards are disjoint, nonempty and sorted ascending. Clients are indexed
/// `0..N`; every reduction over clients walks them in that order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    client_shards: Vec<Vec<usize>>,
    edge_of: Vec<usize>,
    edge_clients: Vec<Vec<usize>>,
}

impl Partition {
    pub fn new(
        client_shards: Vec<Vec<usize>>,
        edge_of: Vec<usize>,
        num_edges: usize,
        dataset_len: usize,
    ) -> Result<Self> {
        if client_shards.is_empty() || num_edges == 0 {
            return Err(Error::config("partition needs at least one client and one edge"));
        }
        if client_shards.len() != edge_of.len() {
            return Err(Error::Dimension { expected: client_shards.len(), found: edge_of.len() });
        }
        let mut seen = vec![false; dataset_len];
        let mut shards = client_shards;
        for (i, shard) in shards.iter_mut().enumerate() {
            if shard.is_empty() {
                return Err(Error::config(format!("client {i} has an empty shard")));
            }
            shard.sort_unstable();
            for &idx in shard.iter() {
                if idx >= dataset_len {
                    return Err(Error::config(format!("client {i} references sample {idx} outside dataset")));
                }
                if std::mem::replace(&mut seen[idx], true) {
                    return Err(Error::config(format!("sample {idx} assigned to more than one client")));
                }
            }
        }
        let mut edge_clients = vec![Vec::new(); num_edges];
        for (client, &edge) in edge_of.iter().enumerate() {
            if edge >= num_edges {
                return Err(Error::config(format!("client {client} mapped to missing edge {edge}")));
            }
            edge_clients[edge].push(client);
        }
        if let Some(l) = edge_clients.iter().position(Vec::is_empty) {
            return Err(Error::config(format!("edge {l} has no clients")));
        }
        Ok(Self { client_shards: shards, edge_of, edge_clients })
    }

    pub fn num_clients(&self) -> usize {
        self.client_shards.len()
    }

    pub fn num_edges(&self) -> usize {
        self.edge_clients.len()
    }

    pub fn shard(&self, client: usize) -> &[usize] {
        &self.client_shards[client]
    }

    pub fn edge_of(&self, client: usize) -> usize {
        self.edge_of[client]
    }

    /// Clients under `edge`, ascending.
    pub fn edge_clients(&self, edge: usize) -> &[usize] {
        &self.edge_clients[edge]
    }

    pub fn client_size(&self, client: usize) -> usize {
        self.client_shards[client].len()
    }

    pub fn client_sizes(&self) -> Vec<usize> {
        self.client_shards.iter().map(Vec::len).collect()
    }

    pub fn edge_size(&self, edge: usize) -> usize {
        self.edge_clients[edge].iter().map(|&c| self.client_size(c)).sum()
    }

    pub fn total_size(&self) -> usize {
        self.client_shards.iter().map(Vec::len).sum()
    }

    /// All assigned indices, ascending.
    pub fn assigned_indices(&self) -> Vec<usize> {
        let mut all: Vec<usize> = self.client_shards.iter().flatten().copied().collect();
        all.sort_unstable();
        all
    }

    pub fn client_labels<T: Scalar>(&self, dataset: &Dataset<T>, client: usize) -> BTreeSet<usize> {
        self.shard(client).iter().map(|&i| dataset.get(i).label).collect()
    }

    pub fn edge_labels<T: Scalar>(&self, dataset: &Dataset<T>, edge: usize) -> BTreeSet<usize> {
        self.edge_clients(edge).iter().flat_map(|&c| self.client_labels(dataset, c)).collect()
    }
}

/// Split `dataset` over the clients and edges of `topology`.
///
/// Every scheme gives all clients the same number of samples, dropping the
/// remainder of the dataset.
pub fn partition<T: Scalar>(
    dataset: &Dataset<T>,
    topology: Topology,
    scheme: PartitionScheme,
    seed: u64,
) -> Result<Partition> {
    topology.validate()?;
    let n_clients = topology.num_clients;
    let cpe = topology.clients_per_edge();
    let mut rng = stream(seed, &[domain::PARTITION]);
    let contiguous_edges: Vec<usize> = (0..n_clients).map(|c| c / cpe).collect();

    let (shards, edge_of) = match scheme {
        PartitionScheme::Iid => {
            let per_client = dataset.len() / n_clients;
            if per_client == 0 {
                return Err(Error::config(format!(
                    "iid: {} samples cannot give each of {n_clients} clients a sample",
                    dataset.len()
                )));
            }
            let mut perm: Vec<usize> = (0..dataset.len()).collect();
            perm.shuffle(&mut rng);
            let shards = perm.chunks_exact(per_client).take(n_clients).map(<[usize]>::to_vec).collect();
            (shards, contiguous_edges)
        }
        PartitionScheme::SimpleNiid => {
            let n_shards = 2 * n_clients;
            let shard_len = dataset.len() / n_shards;
            if shard_len == 0 {
                return Err(Error::config(format!(
                    "simple_niid: {} samples are too few for {n_shards} label-sorted shards",
                    dataset.len()
                )));
            }
            let mut by_label: Vec<usize> = (0..dataset.len()).collect();
            by_label.sort_by_key(|&i| (dataset.get(i).label, i));
            let pieces: Vec<&[usize]> = by_label.chunks_exact(shard_len).take(n_shards).collect();
            let mut order: Vec<usize> = (0..n_shards).collect();
            order.shuffle(&mut rng);
            let shards = order.chunks_exact(2).map(|pair| [pieces[pair[0]], pieces[pair[1]]].concat()).collect();
            let mut clients: Vec<usize> = (0..n_clients).collect();
            clients.shuffle(&mut rng);
            let mut edge_of = vec![0; n_clients];
            for (slot, &client) in clients.iter().enumerate() {
                edge_of[client] = slot / cpe;
            }
            (shards, edge_of)
        }
        PartitionScheme::EdgeIid | PartitionScheme::EdgeNiid => {
            let classes = dataset.num_classes();
            let class_of_client = one_class_layout(scheme, topology, classes, &mut rng)?;
            let shards = deal_by_class(dataset, &class_of_client, &mut rng, scheme)?;
            (shards, contiguous_edges)
        }
    };
    Partition::new(shards, edge_of, topology.num_edges, dataset.len())
}

/// Class held by each client for the one-class-per-client schemes.
fn one_class_layout(
    scheme: PartitionScheme,
    topology: Topology,
    classes: usize,
    rng: &mut impl rand::Rng,
) -> Result<Vec<usize>> {
    let cpe = topology.clients_per_edge();
    let mut layout = Vec::with_capacity(topology.num_clients);
    match scheme {
        PartitionScheme::EdgeIid => {
            if cpe != classes {
                return Err(Error::config(format!(
                    "edge_iid needs clients per edge ({cpe}) equal to the number of classes ({classes})"
                )));
            }
            for _ in 0..topology.num_edges {
                let mut cls: Vec<usize> = (0..classes).collect();
                cls.shuffle(rng);
                layout.extend(cls);
            }
        }
        PartitionScheme::EdgeNiid => {
            let covered = classes.div_ceil(2);
            if cpe < covered {
                return Err(Error::config(format!(
                    "edge_niid needs at least {covered} clients per edge to cover {covered} classes, got {cpe}"
                )));
            }
            for edge in 0..topology.num_edges {
                let start = edge * classes / topology.num_edges;
                layout.extend((0..cpe).map(|j| (start + j % covered) % classes));
            }
        }
        _ => unreachable!("only one-class schemes have a class layout"),
    }
    Ok(layout)
}

fn deal_by_class<T: Scalar>(
    dataset: &Dataset<T>,
    class_of_client: &[usize],
    rng: &mut impl rand::Rng,
    scheme: PartitionScheme,
) -> Result<Vec<Vec<usize>>> {
    let classes = dataset.num_classes();
    let mut pools: Vec<Vec<usize>> = vec![Vec::new(); classes];
    for (i, s) in dataset.samples().iter().enumerate() {
        pools[s.label].push(i);
    }
    for pool in &mut pools {
        pool.shuffle(rng);
    }
    let mut holders = vec![0usize; classes];
    for &c in class_of_client {
        holders[c] += 1;
    }
    let per_client = (0..classes).filter(|&c| holders[c] > 0).map(|c| pools[c].len() / holders[c]).min().unwrap_or(0);
    if per_client == 0 {
        return Err(Error::config(format!("{scheme}: some class has fewer samples than clients holding it")));
    }
    let mut taken = vec![0usize; classes];
    Ok(class_of_client
        .iter()
        .map(|&c| {
            let start = taken[c];
            taken[c] += per_client;
            pools[c][start..start + per_client].to_vec()
        })
        .collect())
}

/// Write the assignment as text: a header line with counts, a column line,
/// then one `index,label,edge,client` row per assigned sample in index order.
pub fn write_partition<T: Scalar, W: Write>(
    out: &mut W,
    dataset: &Dataset<T>,
    partition: &Partition,
    scheme: PartitionScheme,
) -> Result<()> {
    let mut owner = vec![None; dataset.len()];
    for c in 0..partition.num_clients() {
        for &i in partition.shard(c) {
            owner[i] = Some(c);
        }
    }
    writeln!(
        out,
        "# partition samples={} assigned={} features={} classes={} clients={} edges={} scheme={}",
        dataset.len(),
        partition.total_size(),
        dataset.dim(),
        dataset.num_classes(),
        partition.num_clients(),
        partition.num_edges(),
        scheme
    )?;
    writeln!(out, "index,label,edge,client")?;
    for (i, client) in owner.iter().enumerate() {
        if let Some(c) = client {
            writeln!(out, "{i},{},{},{c}", dataset.get(i).label, partition.edge_of(*c))?;
        }
    }
    Ok(())
}
