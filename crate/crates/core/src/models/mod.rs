//! Loss and gradient oracles for the two model families the simulator trains:
//! multinomial logistic regression (convex) and a one-hidden-layer tanh MLP
//! (non-convex). Both use mean cross-entropy plus `(l2_reg / 2)·‖w‖²`.

mod kernels;
mod smoothness;

pub use smoothness::{
    analytic_logistic_beta_bound, estimate_smoothness, estimate_smoothness_with, SmoothnessOptions, SmoothnessParams,
};

use serde::{Deserialize, Serialize};

use crate::datasets::Sample;
use crate::error::{Error, Result};
use crate::numcore::WeightVector;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum ModelKind {
    LogisticRegression,
    Mlp { hidden_dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelSpec<T> {
    pub kind: ModelKind,
    pub input_dim: usize,
    pub num_classes: usize,
    pub l2_reg: T,
}

impl<T: Scalar> ModelSpec<T> {
    pub fn logistic(input_dim: usize, num_classes: usize) -> Self {
        Self { kind: ModelKind::LogisticRegression, input_dim, num_classes, l2_reg: T::zero() }
    }

    pub fn mlp(input_dim: usize, hidden_dim: usize, num_classes: usize) -> Self {
        Self { kind: ModelKind::Mlp { hidden_dim }, input_dim, num_classes, l2_reg: T::zero() }
    }

    pub fn with_l2(mut self, l2_reg: T) -> Self {
        self.l2_reg = l2_reg;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.input_dim == 0 || self.num_classes < 2 {
            return Err(Error::config("model needs a positive input dimension and at least two classes"));
        }
        if let ModelKind::Mlp { hidden_dim: 0 } = self.kind {
            return Err(Error::config("mlp hidden_dim must be positive"));
        }
        if !(self.l2_reg >= T::zero() && self.l2_reg.is_finite()) {
            return Err(Error::config("l2_reg must be finite and nonnegative"));
        }
        Ok(())
    }

    pub fn is_convex(&self) -> bool {
        matches!(self.kind, ModelKind::LogisticRegression)
    }

    /// Number of trainable parameters.
    pub fn param_dim(&self) -> usize {
        let (d, c) = (self.input_dim, self.num_classes);
        match self.kind {
            ModelKind::LogisticRegression => c * (d + 1),
            ModelKind::Mlp { hidden_dim: h } => h * (d + 1) + c * (h + 1),
        }
    }

    fn check(&self, w: &WeightVector<T>) -> Result<()> {
        if w.dim() != self.param_dim() {
            return Err(Error::Dimension { expected: self.param_dim(), found: w.dim() });
        }
        Ok(())
    }
}

fn accumulate<'a, T, I>(
    spec: &ModelSpec<T>,
    w: &WeightVector<T>,
    samples: I,
    want_grad: bool,
) -> Result<(T, Option<WeightVector<T>>)>
where
    T: Scalar,
    I: IntoIterator<Item = &'a Sample<T>>,
{
    spec.check(w)?;
    let params = w.as_slice();
    let mut ws = kernels::Workspace::new(spec);
    let mut grad = if want_grad { vec![T::zero(); params.len()] } else { Vec::new() };
    let mut total = T::zero();
    let mut n = 0usize;
    for s in samples {
        if s.features.len() != spec.input_dim {
            return Err(Error::Dimension { expected: spec.input_dim, found: s.features.len() });
        }
        if s.label >= spec.num_classes {
            return Err(Error::domain(format!("label {} outside model classes", s.label)));
        }
        let g = if want_grad { Some(grad.as_mut_slice()) } else { None };
        total += kernels::sample_loss(spec, params, &s.features, s.label, &mut ws, g);
        n += 1;
    }
    if n == 0 {
        return Err(Error::domain("loss over an empty batch"));
    }
    let inv_n = T::one() / T::from_count(n);
    let half = T::lit(0.5);
    let loss = total * inv_n + half * spec.l2_reg * w.norm_sq();
    if !loss.is_finite() {
        return Err(Error::NonFinite("loss"));
    }
    let grad = if want_grad {
        for (g, &p) in grad.iter_mut().zip(params) {
            *g = *g * inv_n + spec.l2_reg * p;
        }
        Some(WeightVector::new(grad).map_err(|_| Error::NonFinite("gradient"))?)
    } else {
        None
    };
    Ok((loss, grad))
}

/// Mean cross-entropy over `samples` plus the L2 penalty.
pub fn loss<'a, T, I>(spec: &ModelSpec<T>, w: &WeightVector<T>, samples: I) -> Result<T>
where
    T: Scalar,
    I: IntoIterator<Item = &'a Sample<T>>,
{
    accumulate(spec, w, samples, false).map(|(l, _)| l)
}

/// Exact gradient of [`loss`].
pub fn gradient<'a, T, I>(spec: &ModelSpec<T>, w: &WeightVector<T>, samples: I) -> Result<WeightVector<T>>
where
    T: Scalar,
    I: IntoIterator<Item = &'a Sample<T>>,
{
    accumulate(spec, w, samples, true).map(|(_, g)| g.expect("gradient requested"))
}

pub fn loss_and_gradient<'a, T, I>(spec: &ModelSpec<T>, w: &WeightVector<T>, samples: I) -> Result<(T, WeightVector<T>)>
where
    T: Scalar,
    I: IntoIterator<Item = &'a Sample<T>>,
{
    accumulate(spec, w, samples, true).map(|(l, g)| (l, g.expect("gradient requested")))
}

/// Arg-max class; ties go to the lowest class index.
pub fn predict<T: Scalar>(spec: &ModelSpec<T>, w: &WeightVector<T>, features: &[T]) -> Result<usize> {
    spec.check(w)?;
    if features.len() != spec.input_dim {
        return Err(Error::Dimension { expected: spec.input_dim, found: features.len() });
    }
    let mut ws = kernels::Workspace::new(spec);
    let logits = kernels::forward(spec, w.as_slice(), features, &mut ws);
    let mut best = 0;
    for (c, &z) in logits.iter().enumerate().skip(1) {
        if z > logits[best] {
            best = c;
        }
    }
    Ok(best)
}

/// Something with a value and gradient at every point: the empirical loss
/// of a model on a sample set, or a closed-form test function.
pub trait Objective<T: Scalar>: Sync {
    fn dim(&self) -> usize;
    fn value(&self, w: &WeightVector<T>) -> Result<T>;
    fn gradient(&self, w: &WeightVector<T>) -> Result<WeightVector<T>>;
}

/// Full-batch empirical loss of `spec` on a fixed sample set.
pub struct EmpiricalLoss<'a, T> {
    spec: &'a ModelSpec<T>,
    samples: Vec<&'a Sample<T>>,
}

impl<'a, T: Scalar> EmpiricalLoss<'a, T> {
    pub fn new(spec: &'a ModelSpec<T>, samples: impl IntoIterator<Item = &'a Sample<T>>) -> Result<Self> {
        let samples: Vec<_> = samples.into_iter().collect();
        if samples.is_empty() {
            return Err(Error::domain("empirical loss over an empty sample set"));
        }
        Ok(Self { spec, samples })
    }

    pub fn samples(&self) -> &[&'a Sample<T>] {
        &self.samples
    }

    pub fn value_and_gradient(&self, w: &WeightVector<T>) -> Result<(T, WeightVector<T>)> {
        loss_and_gradient(self.spec, w, self.samples.iter().copied())
    }
}

impl<T: Scalar> Objective<T> for EmpiricalLoss<'_, T> {
    fn dim(&self) -> usize {
        self.spec.param_dim()
    }

    fn value(&self, w: &WeightVector<T>) -> Result<T> {
        loss(self.spec, w, self.samples.iter().copied())
    }

    fn gradient(&self, w: &WeightVector<T>) -> Result<WeightVector<T>> {
        gradient(self.spec, w, self.samples.iter().copied())
    }
}
