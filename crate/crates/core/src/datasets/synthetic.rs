use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{Dataset, Sample};
use crate::error::{Error, Result};
use crate::rng::{domain, stream};
use crate::scalar::Scalar;

/// Gaussian mixture with one isotropic unit-variance cluster per class.
///
/// Class means are random directions scaled to `separation`. Features are
/// min-max normalized per coordinate to `[0, 1]` over everything generated in
/// one call, so train and test splits share the same map.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub num_classes: usize,
    pub dim: usize,
    pub samples_per_class: usize,
    pub separation: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(num_classes: usize, dim: usize, samples_per_class: usize, seed: u64) -> Self {
        Self { num_classes, dim, samples_per_class, separation: 3.0, seed }
    }

    fn validate(&self) -> Result<()> {
        if self.num_classes == 0 || self.dim == 0 || self.samples_per_class == 0 {
            return Err(Error::domain("num_classes, dim and samples_per_class must all be positive"));
        }
        if !(self.separation.is_finite() && self.separation > 0.0) {
            return Err(Error::domain("separation must be positive"));
        }
        Ok(())
    }

    pub fn generate<T: Scalar>(&self) -> Result<Dataset<T>> {
        let (train, _) = self.generate_parts(0)?;
        Dataset::new(train, self.num_classes)
    }

    /// Generate `samples_per_class + test_per_class` points per class and
    /// split them into (train, test). Both sets are class-major ordered.
    pub fn generate_split<T: Scalar>(&self, test_per_class: usize) -> Result<(Dataset<T>, Dataset<T>)> {
        if test_per_class == 0 {
            return Err(Error::domain("test_per_class must be positive"));
        }
        let (train, test) = self.generate_parts(test_per_class)?;
        Ok((Dataset::new(train, self.num_classes)?, Dataset::new(test, self.num_classes)?))
    }

    fn generate_parts<T: Scalar>(&self, test_per_class: usize) -> Result<(Vec<Sample<T>>, Vec<Sample<T>>)> {
        self.validate()?;
        let per_class = self.samples_per_class + test_per_class;
        let mut rng = stream(self.seed, &[domain::SYNTHETIC]);

        let means: Vec<Vec<f64>> = (0..self.num_classes)
            .map(|_| {
                let dir: Vec<f64> = (0..self.dim).map(|_| StandardNormal.sample(&mut rng)).collect();
                let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt().max(f64::MIN_POSITIVE);
                dir.iter().map(|x| x / norm * self.separation).collect()
            })
            .collect();

        let mut raw: Vec<(Vec<f64>, usize)> = Vec::with_capacity(per_class * self.num_classes);
        for (label, mean) in means.iter().enumerate() {
            for _ in 0..per_class {
                let x = mean.iter().map(|m| m + rng.sample::<f64, _>(StandardNormal)).collect();
                raw.push((x, label));
            }
        }

        let mut lo = vec![f64::INFINITY; self.dim];
        let mut hi = vec![f64::NEG_INFINITY; self.dim];
        for (x, _) in &raw {
            for j in 0..self.dim {
                lo[j] = lo[j].min(x[j]);
                hi[j] = hi[j].max(x[j]);
            }
        }

        let mut train = Vec::with_capacity(self.samples_per_class * self.num_classes);
        let mut test = Vec::with_capacity(test_per_class * self.num_classes);
        for (i, (x, label)) in raw.into_iter().enumerate() {
            let features = x
                .iter()
                .enumerate()
                .map(|(j, v)| {
                    let span = hi[j] - lo[j];
                    let unit = if span > 0.0 { (v - lo[j]) / span } else { 0.5 };
                    T::lit(unit)
                })
                .collect();
            let sample = Sample { features, label };
            if i % per_class < self.samples_per_class {
                train.push(sample);
            } else {
                test.push(sample);
            }
        }
        Ok((train, test))
    }
}

/// Deterministic labeled Gaussian-mixture dataset with default separation.
pub fn generate_synthetic<T: Scalar>(
    num_classes: usize,
    dim: usize,
    samples_per_class: usize,
    seed: u64,
) -> Result<Dataset<T>> {
    SyntheticSpec::new(num_classes, dim, samples_per_class, seed).generate()
}
