use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepPlan<T> {
    Fixed(T),
    /// One constant step size per cloud interval.
    PerCloudInterval(Vec<T>),
    /// `initial · rate^e`, where `e` counts the passes a client has completed
    /// over its own shard.
    EpochDecay {
        initial: T,
        rate: T,
    },
}

/// Aggregation periods and local-update budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule<T> {
    pub kappa1: usize,
    pub kappa2: usize,
    pub total_updates: usize,
    pub step_plan: StepPlan<T>,
}

impl<T: Scalar> Schedule<T> {
    pub fn new(kappa1: usize, kappa2: usize, total_updates: usize, step_plan: StepPlan<T>) -> Result<Self> {
        let s = Self { kappa1, kappa2, total_updates, step_plan };
        s.validate()?;
        Ok(s)
    }

    pub fn fixed(kappa1: usize, kappa2: usize, total_updates: usize, eta: T) -> Result<Self> {
        Self::new(kappa1, kappa2, total_updates, StepPlan::Fixed(eta))
    }

    pub fn validate(&self) -> Result<()> {
        if self.kappa1 == 0 || self.kappa2 == 0 || self.total_updates == 0 {
            return Err(Error::config("kappa1, kappa2 and total_updates must be positive"));
        }
        if !self.total_updates.is_multiple_of(self.cloud_period()) {
            return Err(Error::config(format!(
                "total_updates {} is not a multiple of kappa1*kappa2 = {}",
                self.total_updates,
                self.cloud_period()
            )));
        }
        let positive = |x: T| x > T::zero() && x.is_finite();
        match &self.step_plan {
            StepPlan::Fixed(eta) if !positive(*eta) => Err(Error::config("step size must be positive")),
            StepPlan::PerCloudInterval(etas) if etas.len() != self.cloud_intervals() => Err(Error::config(format!(
                "expected {} per-interval step sizes, found {}",
                self.cloud_intervals(),
                etas.len()
            ))),
            StepPlan::PerCloudInterval(etas) if !etas.iter().all(|&e| positive(e)) => {
                Err(Error::config("step sizes must be positive"))
            }
            StepPlan::EpochDecay { initial, rate } if !positive(*initial) || !positive(*rate) || *rate > T::one() => {
                Err(Error::config("decay needs a positive initial step and a rate in (0, 1]"))
            }
            _ => Ok(()),
        }
    }

    /// Local updates per cloud interval, `κ1κ2`.
    pub fn cloud_period(&self) -> usize {
        self.kappa1 * self.kappa2
    }

    /// Number of cloud intervals `B = K / (κ1κ2)`.
    pub fn cloud_intervals(&self) -> usize {
        self.total_updates / self.cloud_period()
    }

    /// Cloud interval (1-based) that contains update `k ≥ 1`.
    pub fn interval_of(&self, k: usize) -> usize {
        (k - 1) / self.cloud_period() + 1
    }

    pub fn is_edge_aggregation(&self, k: usize) -> bool {
        k > 0 && k.is_multiple_of(self.kappa1)
    }

    pub fn is_cloud_aggregation(&self, k: usize) -> bool {
        k > 0 && k.is_multiple_of(self.cloud_period())
    }

    /// Step size for update `k ≥ 1` taken after `epochs` completed passes.
    pub fn eta(&self, k: usize, epochs: u64) -> T {
        match &self.step_plan {
            StepPlan::Fixed(eta) => *eta,
            StepPlan::PerCloudInterval(etas) => etas[self.interval_of(k) - 1],
            StepPlan::EpochDecay { initial, rate } => *initial * rate.powi(epochs.min(i32::MAX as u64) as i32),
        }
    }

    /// Constant step size of each cloud interval; `None` under epoch decay.
    pub fn interval_etas(&self) -> Option<Vec<T>> {
        match &self.step_plan {
            StepPlan::Fixed(eta) => Some(vec![*eta; self.cloud_intervals()]),
            StepPlan::PerCloudInterval(etas) => Some(etas.clone()),
            StepPlan::EpochDecay { .. } => None,
        }
    }
}
