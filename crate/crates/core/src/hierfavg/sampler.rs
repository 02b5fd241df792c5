use rand::seq::SliceRandom;

use crate::error::{Error, Result};
use crate::rng::{domain, stream};

/// Mini-batch positions within one client's shard.
///
/// Each epoch is a fresh permutation drawn from the stream keyed by
/// `(seed, client, epoch)`; batches are consecutive slices of it and the
/// last, possibly shorter, batch closes the epoch.
#[derive(Debug, Clone)]
pub struct MinibatchSampler {
    seed: u64,
    client: u64,
    batch: usize,
    epoch: u64,
    order: Vec<usize>,
    pos: usize,
}

impl MinibatchSampler {
    pub fn new(seed: u64, client: usize, shard_len: usize, batch: usize) -> Result<Self> {
        if shard_len == 0 || batch == 0 {
            return Err(Error::config("sampler needs a nonempty shard and a positive batch size"));
        }
        let mut s = Self { seed, client: client as u64, batch, epoch: 0, order: (0..shard_len).collect(), pos: 0 };
        s.shuffle();
        Ok(s)
    }

    fn shuffle(&mut self) {
        self.order.sort_unstable();
        let mut rng = stream(self.seed, &[domain::MINIBATCH, self.client, self.epoch]);
        self.order.shuffle(&mut rng);
    }

    /// Completed passes over the shard.
    pub fn epochs(&self) -> u64 {
        self.epoch
    }

    /// Next batch of shard positions.
    pub fn next_batch(&mut self) -> &[usize] {
        if self.pos == self.order.len() {
            self.epoch += 1;
            self.pos = 0;
            self.shuffle();
        }
        let start = self.pos;
        self.pos = (start + self.batch).min(self.order.len());
        &self.order[start..self.pos]
    }
}
