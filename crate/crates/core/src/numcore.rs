//! Dense parameter vectors and the handful of operations aggregation and
//! gradient steps need.
//!
//! Reductions accumulate strictly left to right in the order the caller
//! supplies, so a fixed client ordering gives bit-reproducible results.

use std::ops::Index;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Flat model parameter vector. Never empty, never holds NaN or infinity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar + Serialize + for<'a> Deserialize<'a>")]
pub struct WeightVector<T> {
    values: Vec<T>,
}

impl<T: Scalar> WeightVector<T> {
    pub fn new(values: Vec<T>) -> Result<Self> {
        if values.is_empty() {
            return Err(Error::domain("weight vector must have positive dimension"));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("WeightVector::new"));
        }
        Ok(Self { values })
    }

    pub fn zeros(dim: usize) -> Result<Self> {
        Self::new(vec![T::zero(); dim])
    }

    /// Construction that skips validation; callers guarantee the invariants.
    pub(crate) fn from_raw(values: Vec<T>) -> Self {
        debug_assert!(!values.is_empty());
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn norm_sq(&self) -> T {
        self.values.iter().fold(T::zero(), |acc, &v| acc + v * v)
    }

    pub fn norm(&self) -> T {
        self.norm_sq().sqrt()
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        check_dim(self.dim(), other.dim())?;
        Ok(self.values.iter().zip(&other.values).fold(T::zero(), |acc, (&a, &b)| acc + a * b))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        Ok(Self::from_raw(self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect()))
    }

    pub fn scaled(&self, factor: T) -> Result<Self> {
        finite(self.values.iter().map(|&v| v * factor).collect(), "WeightVector::scaled")
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, other: &Self, factor: T) -> Result<Self> {
        check_dim(self.dim(), other.dim())?;
        finite(
            self.values.iter().zip(&other.values).map(|(&a, &b)| a + factor * b).collect(),
            "WeightVector::add_scaled",
        )
    }

    pub fn all_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }
}

impl<T> Index<usize> for WeightVector<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.values[i]
    }
}

fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::Dimension { expected, found });
    }
    Ok(())
}

fn finite<T: Scalar>(values: Vec<T>, op: &'static str) -> Result<WeightVector<T>> {
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite(op));
    }
    Ok(WeightVector::from_raw(values))
}

/// `Σ weights[i] · vectors[i] / Σ weights`.
///
/// Evaluated as `v₀ + Σ weights[i] · (vectors[i] − v₀) / Σ weights`.
/// Weights are raw (e.g. dataset sizes); the total must be positive.
pub fn weighted_average<T: Scalar>(vectors: &[&WeightVector<T>], weights: &[T]) -> Result<WeightVector<T>> {
    if vectors.is_empty() {
        return Err(Error::domain("weighted average of an empty set"));
    }
    check_dim(vectors.len(), weights.len())?;
    if weights.iter().any(|w| *w < T::zero() || !w.is_finite()) {
        return Err(Error::domain("weights must be finite and nonnegative"));
    }
    let total = weights.iter().fold(T::zero(), |acc, &w| acc + w);
    if total <= T::zero() {
        return Err(Error::domain("total weight must be positive"));
    }
    // Accumulate offsets from the first vector: identical inputs then return
    // that vector bit-for-bit.
    let anchor = vectors[0];
    let dim = anchor.dim();
    let mut acc = vec![T::zero(); dim];
    for (v, &w) in vectors.iter().zip(weights) {
        check_dim(dim, v.dim())?;
        for ((a, &x), &x0) in acc.iter_mut().zip(&v.values).zip(&anchor.values) {
            *a += w * (x - x0);
        }
    }
    for (a, &x0) in acc.iter_mut().zip(&anchor.values) {
        *a = x0 + *a / total;
    }
    finite(acc, "weighted_average")
}

/// Gradient step `w − eta · g`.
pub fn axpy<T: Scalar>(w: &WeightVector<T>, g: &WeightVector<T>, eta: T) -> Result<WeightVector<T>> {
    if !(eta > T::zero()) {
        return Err(Error::domain("step size must be positive"));
    }
    check_dim(w.dim(), g.dim())?;
    finite(w.values.iter().zip(&g.values).map(|(&a, &b)| a - eta * b).collect(), "axpy")
}

pub fn l2_distance<T: Scalar>(a: &WeightVector<T>, b: &WeightVector<T>) -> Result<T> {
    check_dim(a.dim(), b.dim())?;
    Ok(a.values
        .iter()
        .zip(&b.values)
        .fold(T::zero(), |acc, (&x, &y)| {
            let d = x - y;
            acc + d * d
        })
        .sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn wv(v: &[f64]) -> WeightVector<f64> {
        WeightVector::new(v.to_vec()).unwrap()
    }

    #[test]
    fn weighted_average_examples() {
        let (a, b) = (wv(&[1.0, 1.0]), wv(&[3.0, 3.0]));
        assert_eq!(weighted_average(&[&a, &b], &[1.0, 1.0]).unwrap(), wv(&[2.0, 2.0]));

        let c = wv(&[2.0, 0.0]);
        assert_eq!(weighted_average(&[&c], &[5.0]).unwrap(), c);

        let (x, y, z) = (wv(&[1.0, 0.0]), wv(&[0.0, 1.0]), wv(&[0.0, 0.0]));
        let avg = weighted_average(&[&x, &y, &z], &[1.0, 2.0, 1.0]).unwrap();
        assert_eq!(avg, wv(&[0.25, 0.5]));
    }

    #[test]
    fn weighted_average_errors() {
        let (a, b) = (wv(&[1.0, 1.0]), wv(&[1.0]));
        assert!(matches!(weighted_average(&[&a, &b], &[1.0, 1.0]), Err(Error::Dimension { .. })));
        assert!(matches!(weighted_average(&[&a], &[1.0, 2.0]), Err(Error::Dimension { .. })));
        assert!(matches!(weighted_average(&[&a], &[0.0]), Err(Error::Domain(_))));
        assert!(matches!(weighted_average(&[&a, &a], &[1.0, -2.0]), Err(Error::Domain(_))));
        assert!(matches!(weighted_average::<f64>(&[], &[]), Err(Error::Domain(_))));
    }

    #[test]
    fn axpy_examples() {
        assert_eq!(axpy(&wv(&[1.0, 2.0]), &wv(&[1.0, 1.0]), 0.5).unwrap(), wv(&[0.5, 1.5]));
        assert_eq!(axpy(&wv(&[0.0, 0.0]), &wv(&[0.0, 0.0]), 0.1).unwrap(), wv(&[0.0, 0.0]));
        assert_eq!(axpy(&wv(&[3.0]), &wv(&[2.0]), 1.0).unwrap(), wv(&[1.0]));
        assert!(matches!(axpy(&wv(&[3.0]), &wv(&[2.0, 1.0]), 1.0), Err(Error::Dimension { .. })));
        assert!(axpy(&wv(&[3.0]), &wv(&[2.0]), 0.0).is_err());
        assert!(matches!(axpy(&wv(&[f64::MAX]), &wv(&[-f64::MAX]), 2.0), Err(Error::NonFinite(_))));
    }

    #[test]
    fn l2_distance_examples() {
        assert_eq!(l2_distance(&wv(&[1.0, 1.0]), &wv(&[1.0, 1.0])).unwrap(), 0.0);
        assert_eq!(l2_distance(&wv(&[3.0, 0.0]), &wv(&[0.0, 4.0])).unwrap(), 5.0);
        assert_eq!(l2_distance(&wv(&[1.0, 2.0, 3.0]), &wv(&[0.0, 0.0, 0.0])).unwrap(), 14f64.sqrt());
        assert!(l2_distance(&wv(&[1.0]), &wv(&[1.0, 2.0])).is_err());
    }

    #[test]
    fn rejects_empty_and_non_finite() {
        assert!(WeightVector::<f64>::new(vec![]).is_err());
        assert!(WeightVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(WeightVector::new(vec![f64::INFINITY]).is_err());
    }

    #[test]
    fn works_in_single_precision() {
        let a = WeightVector::new(vec![1.0f32, 2.0]).unwrap();
        let b = WeightVector::new(vec![3.0f32, 4.0]).unwrap();
        let avg = weighted_average(&[&a, &b], &[1.0, 3.0]).unwrap();
        assert_eq!(avg.as_slice(), &[2.5f32, 3.5]);
    }

    fn ulps_apart(a: f64, b: f64) -> u64 {
        if a == b {
            return 0;
        }
        let (ia, ib) = (a.to_bits() as i64, b.to_bits() as i64);
        (ia - ib).unsigned_abs()
    }

    fn vectors(n: usize, dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        prop::collection::vec(prop::collection::vec(-100.0f64..100.0, dim), n)
    }

    proptest! {
        #[test]
        fn equal_weights_give_arithmetic_mean(
            vs in prop::collection::vec(prop::collection::vec(1.0f64..100.0, 4), 5),
            w in 0.1f64..10.0,
        ) {
            let wvs: Vec<_> = vs.iter().map(|v| wv(v)).collect();
            let refs: Vec<_> = wvs.iter().collect();
            let avg = weighted_average(&refs, &[w; 5]).unwrap();
            for j in 0..4 {
                let mean = vs.iter().map(|v| v[j]).sum::<f64>() / 5.0;
                prop_assert!(ulps_apart(avg[j], mean) <= 8, "coordinate {j}: {} vs {}", avg[j], mean);
            }
        }

        #[test]
        fn scaling_weights_leaves_average_unchanged(
            vs in vectors(4, 3),
            ws in prop::collection::vec(0.1f64..5.0, 4),
            c in prop::sample::select(vec![2.0, 4.0, 0.5, 8.0]),
        ) {
            let wvs: Vec<_> = vs.iter().map(|v| wv(v)).collect();
            let refs: Vec<_> = wvs.iter().collect();
            let scaled: Vec<f64> = ws.iter().map(|w| w * c).collect();
            // power-of-two factors scale exactly
            prop_assert_eq!(
                weighted_average(&refs, &ws).unwrap(),
                weighted_average(&refs, &scaled).unwrap()
            );
        }

        #[test]
        fn identical_vectors_average_to_themselves(
            v in prop::collection::vec(-1.0e3f64..1.0e3, 1..8),
            ws in prop::collection::vec(1.0f64..100.0, 1..6),
        ) {
            let x = wv(&v);
            let refs: Vec<_> = ws.iter().map(|_| &x).collect();
            let avg = weighted_average(&refs, &ws).unwrap();
            prop_assert_eq!(avg, x);
        }

        #[test]
        fn distance_is_a_metric(abc in vectors(3, 5)) {
            let (a, b, c) = (wv(&abc[0]), wv(&abc[1]), wv(&abc[2]));
            let ab = l2_distance(&a, &b).unwrap();
            prop_assert_eq!(ab, l2_distance(&b, &a).unwrap());
            let ac = l2_distance(&a, &c).unwrap();
            let cb = l2_distance(&c, &b).unwrap();
            prop_assert!(ab <= ac + cb + 1e-9);
            prop_assert_eq!(l2_distance(&a, &a).unwrap(), 0.0);
        }
    }
}
