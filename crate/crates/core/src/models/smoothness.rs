//! Empirical Lipschitz (ρ) and smoothness (β) constants.
//!
//! Both are maxima of difference quotients over pairs of probe points, so
//! they are lower bounds on the true constants. Probe `i` depends only on
//! `(seed, i)`: a larger probe count evaluates a superset of pairs and can
//! only raise the estimates.
//!
//! Random pairs rarely line up with the top curvature direction, so each
//! probe point is also paired with a nearby point found by a few rounds of
//! finite-difference power iteration (for β) and a step along the gradient
//! (for ρ).

use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::{EmpiricalLoss, ModelKind, ModelSpec, Objective};
use crate::datasets::Sample;
use crate::error::{Error, Result};
use crate::numcore::{l2_distance, WeightVector};
use crate::rng::{domain, stream};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothnessParams<T> {
    /// Lipschitz constant of the loss value.
    pub rho: T,
    /// Lipschitz constant of the gradient.
    pub beta: T,
}

impl<T: Scalar> SmoothnessParams<T> {
    pub fn max(self, other: Self) -> Self {
        Self { rho: self.rho.max(other.rho), beta: self.beta.max(other.beta) }
    }
}

#[derive(Debug, Clone)]
pub struct SmoothnessOptions<T> {
    pub probes: usize,
    pub seed: u64,
    /// Probe cloud center; zeros when `None`.
    pub center: Option<WeightVector<T>>,
    /// Perturbation scales, cycled over the probes after the center.
    pub scales: Vec<T>,
    pub refine_steps: usize,
    pub fd_step: T,
}

impl<T: Scalar> SmoothnessOptions<T> {
    pub fn new(probes: usize, seed: u64) -> Self {
        Self { probes, seed, center: None, scales: vec![T::lit(0.1), T::one()], refine_steps: 8, fd_step: T::lit(1e-4) }
    }

    pub fn around(mut self, center: WeightVector<T>) -> Self {
        self.center = Some(center);
        self
    }
}

struct ProbeResult<T> {
    point: WeightVector<T>,
    value: T,
    grad: WeightVector<T>,
    refined: SmoothnessParams<T>,
}

fn unit<T: Scalar>(v: WeightVector<T>) -> Option<WeightVector<T>> {
    let n = v.norm();
    if n > T::zero() && n.is_finite() {
        v.scaled(T::one() / n).ok()
    } else {
        None
    }
}

fn probe_point<T: Scalar>(opts: &SmoothnessOptions<T>, center: &WeightVector<T>, i: usize) -> Result<WeightVector<T>> {
    if i == 0 || opts.scales.is_empty() {
        return Ok(center.clone());
    }
    let scale = opts.scales[(i - 1) % opts.scales.len()];
    let mut rng = stream(opts.seed, &[domain::SMOOTHNESS, i as u64]);
    let noise: Vec<T> = (0..center.dim()).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect();
    center.add_scaled(&WeightVector::new(noise)?, scale)
}

fn evaluate_probe<T: Scalar, O: Objective<T>>(
    objective: &O,
    opts: &SmoothnessOptions<T>,
    center: &WeightVector<T>,
    i: usize,
) -> Result<ProbeResult<T>> {
    let point = probe_point(opts, center, i)?;
    let value = objective.value(&point)?;
    let grad = objective.gradient(&point)?;
    let eps = opts.fd_step;
    let mut refined = SmoothnessParams { rho: T::zero(), beta: T::zero() };

    if let Some(dir) = unit(grad.clone()) {
        let other = point.add_scaled(&dir, eps)?;
        let dist = l2_distance(&point, &other)?;
        if dist > T::zero() {
            refined.rho = (objective.value(&other)? - value).abs() / dist;
        }
    }

    let mut rng = stream(opts.seed, &[domain::SMOOTHNESS, i as u64, 1]);
    let start: Vec<T> = (0..point.dim()).map(|_| T::lit(StandardNormal.sample(&mut rng))).collect();
    let mut dir = unit(WeightVector::new(start)?);
    for _ in 0..opts.refine_steps {
        let Some(v) = dir.take() else { break };
        let other = point.add_scaled(&v, eps)?;
        let dist = l2_distance(&point, &other)?;
        if dist <= T::zero() {
            break;
        }
        let diff = objective.gradient(&other)?.sub(&grad)?;
        refined.beta = refined.beta.max(diff.norm() / dist);
        dir = unit(diff);
    }
    Ok(ProbeResult { point, value, grad, refined })
}

/// Estimate ρ and β of an arbitrary objective.
pub fn estimate_smoothness_with<T: Scalar, O: Objective<T>>(
    objective: &O,
    opts: &SmoothnessOptions<T>,
) -> Result<SmoothnessParams<T>> {
    if opts.probes < 2 {
        return Err(Error::domain("smoothness estimation needs at least two probes"));
    }
    let center = match &opts.center {
        Some(c) if c.dim() != objective.dim() => {
            return Err(Error::Dimension { expected: objective.dim(), found: c.dim() })
        }
        Some(c) => c.clone(),
        None => WeightVector::zeros(objective.dim())?,
    };
    let results: Vec<ProbeResult<T>> =
        (0..opts.probes).into_par_iter().map(|i| evaluate_probe(objective, opts, &center, i)).collect::<Result<_>>()?;

    let mut est = SmoothnessParams { rho: T::zero(), beta: T::zero() };
    for (i, a) in results.iter().enumerate() {
        est = est.max(a.refined);
        for b in &results[i + 1..] {
            let dist = l2_distance(&a.point, &b.point)?;
            if dist > T::zero() {
                est.rho = est.rho.max((a.value - b.value).abs() / dist);
                est.beta = est.beta.max(a.grad.sub(&b.grad)?.norm() / dist);
            }
        }
    }
    Ok(est)
}

/// Estimate ρ and β of a model's empirical loss on `samples`, probing
/// around the origin.
pub fn estimate_smoothness<'a, T: Scalar>(
    spec: &'a ModelSpec<T>,
    samples: impl IntoIterator<Item = &'a Sample<T>>,
    probes: usize,
    seed: u64,
) -> Result<SmoothnessParams<T>> {
    let objective = EmpiricalLoss::new(spec, samples)?;
    estimate_smoothness_with(&objective, &SmoothnessOptions::new(probes, seed))
}

/// Upper bound on β for multinomial logistic regression:
/// `½ · max_j (‖x_j‖² + 1) + l2_reg`.
///
/// The per-sample Hessian is `(diag(p) − ppᵀ) ⊗ x̃x̃ᵀ` with `x̃ = (x, 1)`, and
/// every eigenvalue of `diag(p) − ppᵀ` is at most ½.
pub fn analytic_logistic_beta_bound<'a, T: Scalar>(
    spec: &ModelSpec<T>,
    samples: impl IntoIterator<Item = &'a Sample<T>>,
) -> Result<T> {
    if spec.kind != ModelKind::LogisticRegression {
        return Err(Error::domain("analytic smoothness bound exists only for logistic regression"));
    }
    let max_sq =
        samples.into_iter().map(|s| s.features.iter().fold(T::one(), |acc, &x| acc + x * x)).fold(T::zero(), T::max);
    Ok(T::lit(0.5) * max_sq + spec.l2_reg)
}
