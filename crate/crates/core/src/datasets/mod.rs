//! Labeled datasets and their distribution over clients and edges.

mod mnist;
mod partition;
mod synthetic;

pub use mnist::{load_mnist_idx, IMAGES_MAGIC, LABELS_MAGIC};
pub use partition::{partition, write_partition, Partition, PartitionScheme, Topology};
pub use synthetic::{generate_synthetic, SyntheticSpec};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct Sample<T> {
    /// Each coordinate lies in `[0, 1]`.
    pub features: Vec<T>,
    pub label: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    samples: Vec<Sample<T>>,
    num_classes: usize,
    dim: usize,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(samples: Vec<Sample<T>>, num_classes: usize) -> Result<Self> {
        let first = samples.first().ok_or_else(|| Error::domain("dataset must contain at least one sample"))?;
        let dim = first.features.len();
        if dim == 0 || num_classes == 0 {
            return Err(Error::domain("feature dimension and class count must be positive"));
        }
        for (i, s) in samples.iter().enumerate() {
            if s.features.len() != dim {
                return Err(Error::Dimension { expected: dim, found: s.features.len() });
            }
            if s.label >= num_classes {
                return Err(Error::domain(format!("sample {i} has label {} outside [0, {num_classes})", s.label)));
            }
        }
        Ok(Self { samples, num_classes, dim })
    }

    pub fn samples(&self) -> &[Sample<T>] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, index: usize) -> &Sample<T> {
        &self.samples[index]
    }

    /// Samples at the given indices, cloned in order.
    pub fn select(&self, indices: &[usize]) -> Vec<Sample<T>> {
        indices.iter().map(|&i| self.samples[i].clone()).collect()
    }

    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.num_classes];
        for s in &self.samples {
            counts[s.label] += 1;
        }
        counts
    }

    /// Keep the first `n` samples.
    pub fn truncated(mut self, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::domain("cannot truncate a dataset to zero samples"));
        }
        self.samples.truncate(n);
        Ok(self)
    }
}
