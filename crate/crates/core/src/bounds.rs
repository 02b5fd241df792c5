//! Closed-form deviation and convergence bounds for HierFAVG.
//!
//! `h(x, δ, η) = (δ/β)((1 + ηβ)^x − 1) − ηδx` is evaluated as
//! `δη Σ_{j<x} ((1 + ηβ)^j − 1)`, which is the same quantity without the
//! cancellation between its two terms.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Which final term `h` uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HVariant {
    /// `− ηδx`: vanishes with δ and is nonnegative.
    #[default]
    Corrected,
    /// `− ηβx`: kept for comparison only; negative when δ = 0.
    AsPrinted,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams<T> {
    pub beta: T,
    pub rho: T,
    /// Client-edge divergence δ.
    pub delta: T,
    /// Edge-cloud divergence Δ.
    pub big_delta: T,
    pub eta: T,
    pub kappa1: usize,
    pub kappa2: usize,
    /// Number of cloud intervals `B`; `K = B κ1 κ2`.
    pub intervals: usize,
    pub epsilon: T,
    /// `φ = ω(1 − βη/2)`.
    pub phi: T,
    pub variant: HVariant,
}

impl<T: Scalar> BoundParams<T> {
    /// Deviation-bound parameters; `ρ`, `ε`, `φ` default to 1 and `B` to 1.
    pub fn new(beta: T, delta: T, big_delta: T, eta: T, kappa1: usize, kappa2: usize) -> Self {
        Self {
            beta,
            rho: T::one(),
            delta,
            big_delta,
            eta,
            kappa1,
            kappa2,
            intervals: 1,
            epsilon: T::one(),
            phi: T::one(),
            variant: HVariant::Corrected,
        }
    }

    pub fn with_rho(mut self, rho: T) -> Self {
        self.rho = rho;
        self
    }

    pub fn with_intervals(mut self, intervals: usize) -> Self {
        self.intervals = intervals;
        self
    }

    pub fn with_accuracy(mut self, epsilon: T, phi: T) -> Self {
        self.epsilon = epsilon;
        self.phi = phi;
        self
    }

    pub fn with_eta(mut self, eta: T) -> Self {
        self.eta = eta;
        self
    }

    pub fn with_variant(mut self, variant: HVariant) -> Self {
        self.variant = variant;
        self
    }

    pub fn cloud_period(&self) -> usize {
        self.kappa1 * self.kappa2
    }

    pub fn total_updates(&self) -> usize {
        self.intervals * self.cloud_period()
    }

    pub fn validate(&self) -> Result<()> {
        let pos = |x: T| x > T::zero() && x.is_finite();
        let nonneg = |x: T| x >= T::zero() && x.is_finite();
        if self.kappa1 == 0 || self.kappa2 == 0 || self.intervals == 0 {
            return Err(Error::domain("kappa1, kappa2 and the interval count must be positive"));
        }
        if !pos(self.beta) || !pos(self.eta) || !pos(self.rho) || !pos(self.epsilon) || !pos(self.phi) {
            return Err(Error::domain("beta, eta, rho, epsilon and phi must be positive"));
        }
        if !nonneg(self.delta) || !nonneg(self.big_delta) {
            return Err(Error::domain("divergences must be nonnegative"));
        }
        Ok(())
    }

    fn h(&self, x: usize, div: T) -> T {
        h_with(self.variant, x, div, self.eta, self.beta)
    }
}

/// `φ = ω(1 − βη/2)`.
pub fn phi_from_omega<T: Scalar>(omega: T, beta: T, eta: T) -> T {
    omega * (T::one() - beta * eta / T::lit(2.0))
}

/// `ω = min_q 1 / (F_q − F*)` over positive optimality gaps.
pub fn omega_from_gaps<T: Scalar>(gaps: &[T]) -> Result<T> {
    if gaps.is_empty() || gaps.iter().any(|&g| !(g > T::zero())) {
        return Err(Error::domain("omega needs a nonempty list of positive optimality gaps"));
    }
    Ok(gaps.iter().fold(T::infinity(), |m, &g| m.min(T::one() / g)))
}

/// Deviation growth after `x` local steps with divergence `div`.
pub fn h<T: Scalar>(x: usize, div: T, eta: T, beta: T) -> T {
    h_with(HVariant::Corrected, x, div, eta, beta)
}

pub fn h_with<T: Scalar>(variant: HVariant, x: usize, div: T, eta: T, beta: T) -> T {
    match variant {
        HVariant::Corrected => {
            let a = eta * beta;
            let (mut p, mut sum) = (T::zero(), T::zero());
            for _ in 0..x {
                sum += p;
                p = p * (T::one() + a) + a;
            }
            div * eta * sum
        }
        HVariant::AsPrinted => {
            let growth = (T::one() + eta * beta).powi(x as i32) - T::one();
            div / beta * growth - eta * beta * T::from_count(x)
        }
    }
}

/// Edge interval `p(k) = ⌈k/κ1 − (q−1)κ2⌉` of update `k` inside cloud interval `q`.
pub fn p_index(k: usize, kappa1: usize, kappa2: usize, q: usize) -> Result<usize> {
    if kappa1 == 0 || kappa2 == 0 || q == 0 {
        return Err(Error::domain("kappa1, kappa2 and q must be positive"));
    }
    let start = (q - 1) * kappa1 * kappa2;
    if k <= start || k > start + kappa1 * kappa2 {
        return Err(Error::domain(format!("update {k} is outside cloud interval {q}")));
    }
    Ok((k - start).div_ceil(kappa1))
}

/// Deviation bound `G_c(k)` for update `k` of cloud interval `q`.
pub fn g_c<T: Scalar>(k: usize, q: usize, params: &BoundParams<T>) -> Result<T> {
    params.validate()?;
    let (k1, k2) = (params.kappa1, params.kappa2);
    let p = p_index(k, k1, k2, q)?;
    let in_cloud = k - (q - 1) * k1 * k2;
    let in_edge = k - ((q - 1) * k2 + p - 1) * k1;
    let coeff = T::from_count(k1) / T::lit(2.0) * T::from_count(p * p + p - 2);
    Ok(params.h(in_cloud, params.big_delta) + params.h(in_edge, params.delta) + coeff * params.h(k1, params.delta))
}

/// Interval-end bound `h(κ1κ2, Δ) + ½(κ2² + κ2 − 1)(κ1 + 1) h(κ1, δ)`.
pub fn g_c_end<T: Scalar>(params: &BoundParams<T>) -> Result<T> {
    params.validate()?;
    let (k1, k2) = (params.kappa1, params.kappa2);
    let coeff = T::from_count((k2 * k2 + k2 - 1) * (k1 + 1)) / T::lit(2.0);
    Ok(params.h(k1 * k2, params.big_delta) + coeff * params.h(k1, params.delta))
}

/// Non-convex deviation bound
/// `h(κ1κ2, Δ) + κ1κ2 · ((1+ηβ)^{κ1κ2} − 1)/((1+ηβ)^{κ1} − 1) · h(κ1, δ) + h(κ1, δ)`.
pub fn g_nc<T: Scalar>(params: &BoundParams<T>) -> Result<T> {
    params.validate()?;
    let (k1, k2) = (params.kappa1, params.kappa2);
    // the ratio is the geometric sum Σ_{j<κ2} r^j with r = (1+ηβ)^{κ1}
    let r = (T::one() + params.eta * params.beta).powi(k1 as i32);
    let (mut term, mut ratio) = (T::one(), T::zero());
    for _ in 0..k2 {
        ratio += term;
        term *= r;
    }
    let hd = params.h(k1, params.delta);
    Ok(params.h(k1 * k2, params.big_delta) + T::from_count(k1 * k2) * ratio * hd + hd)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Theorem1<T> {
    Bound(T),
    Infeasible { condition: String },
}

impl<T: Scalar> Theorem1<T> {
    pub fn value(&self) -> Option<T> {
        match self {
            Theorem1::Bound(v) => Some(*v),
            Theorem1::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, Theorem1::Bound(_))
    }
}

fn theorem1_margin<T: Scalar>(params: &BoundParams<T>, epsilon: T, phi: T) -> Result<T> {
    let period = T::from_count(params.cloud_period());
    Ok(params.eta * phi - params.rho * g_c_end(params)? / (period * epsilon * epsilon))
}

/// `F(w(K)) − F(w*) ≤ 1 / (B(ηφ − ρ G_c_end / (κ1κ2 ε²)))`.
pub fn theorem1_bound<T: Scalar>(params: &BoundParams<T>) -> Result<Theorem1<T>> {
    params.validate()?;
    if params.eta > T::one() / params.beta {
        return Ok(Theorem1::Infeasible {
            condition: format!("eta {} exceeds 1/beta {}", params.eta, T::one() / params.beta),
        });
    }
    let margin = theorem1_margin(params, params.epsilon, params.phi)?;
    if !(margin > T::zero()) {
        return Ok(Theorem1::Infeasible {
            condition: format!("eta*phi - rho*G_c/(kappa1*kappa2*eps^2) = {margin} is not positive"),
        });
    }
    Ok(Theorem1::Bound(T::one() / (T::from_count(params.intervals) * margin)))
}

/// `1 / Σ_q (η_q φ_q − ρ G_c_end(η_q) / (κ1κ2 ε_q²))`.
pub fn theorem1_diminishing<T: Scalar>(
    params: &BoundParams<T>,
    etas: &[T],
    phis: &[T],
    epsilons: &[T],
) -> Result<Theorem1<T>> {
    if etas.is_empty() {
        return Err(Error::domain("step-size list is empty"));
    }
    if phis.len() != etas.len() || epsilons.len() != etas.len() {
        return Err(Error::Dimension { expected: etas.len(), found: phis.len().min(epsilons.len()) });
    }
    let mut total = T::zero();
    for (q, ((&eta, &phi), &eps)) in etas.iter().zip(phis).zip(epsilons).enumerate() {
        let p = params.with_eta(eta).with_accuracy(eps, phi);
        p.validate()?;
        if eta > T::one() / p.beta {
            return Ok(Theorem1::Infeasible { condition: format!("interval {}: eta {eta} exceeds 1/beta", q + 1) });
        }
        let margin = theorem1_margin(&p, eps, phi)?;
        if !(margin > T::zero()) {
            return Ok(Theorem1::Infeasible {
                condition: format!("interval {}: feasibility term {margin} is not positive", q + 1),
            });
        }
        total += margin;
    }
    Ok(Theorem1::Bound(T::one() / total))
}

/// Right-hand side of the average-squared-gradient bound:
/// `4(F(w0) − F*)/Ση + 4ρ Σ_q G_nc(η_q)/Ση + 2β² Σ_q κ1κ2 G_nc(η_q)²/Ση`,
/// with `Ση = κ1κ2 Σ_q η_q`.
pub fn theorem2_rhs<T: Scalar>(params: &BoundParams<T>, etas: &[T], f0: T, f_star: T) -> Result<T> {
    if etas.is_empty() {
        return Err(Error::domain("step-size list is empty"));
    }
    let period = T::from_count(params.cloud_period());
    let four = T::lit(4.0);
    let (mut sum_eta, mut sum_g, mut sum_g2) = (T::zero(), T::zero(), T::zero());
    for &eta in etas {
        let g = g_nc(&params.with_eta(eta))?;
        sum_eta += period * eta;
        sum_g += g;
        sum_g2 += period * g * g;
    }
    Ok(four * (f0 - f_star) / sum_eta
        + four * params.rho * sum_g / sum_eta
        + T::lit(2.0) * params.beta * params.beta * sum_g2 / sum_eta)
}

/// One row of a bound sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct GridRow<T> {
    pub params: BoundParams<T>,
    pub g_c_end: T,
    pub g_nc: T,
    pub theorem1: Theorem1<T>,
}

/// Evaluate the bounds over the cartesian product of the given axes, in
/// lexicographic `(κ1, κ2, η, δ, Δ, β)` order. Other fields come from `base`.
pub fn bound_grid<T: Scalar>(
    base: &BoundParams<T>,
    kappa1s: &[usize],
    kappa2s: &[usize],
    etas: &[T],
    deltas: &[T],
    big_deltas: &[T],
    betas: &[T],
) -> Result<Vec<GridRow<T>>> {
    let mut rows = Vec::new();
    for &kappa1 in kappa1s {
        for &kappa2 in kappa2s {
            for &eta in etas {
                for &delta in deltas {
                    for &big_delta in big_deltas {
                        for &beta in betas {
                            let params = BoundParams { kappa1, kappa2, eta, delta, big_delta, beta, ..*base };
                            rows.push(GridRow {
                                g_c_end: g_c_end(&params)?,
                                g_nc: g_nc(&params)?,
                                theorem1: theorem1_bound(&params)?,
                                params,
                            });
                        }
                    }
                }
            }
        }
    }
    Ok(rows)
}
