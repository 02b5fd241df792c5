//! Deterministic simulator for client-edge-cloud hierarchical federated
//! learning: HierFAVG training, gradient-divergence estimation, closed-form
//! deviation and convergence bounds, and a latency/energy cost model.
//!
//! The numeric code is generic over [`Scalar`] (`f32` or `f64`); the aliases
//! below fix the scalar type.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bounds;
pub mod costmodel;
pub mod datasets;
pub mod divergence;
pub mod error;
pub mod hierfavg;
pub mod models;
pub mod numcore;
pub mod rng;
pub mod scalar;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Weights = numcore::WeightVector<f64>;
pub type Weights32 = numcore::WeightVector<f32>;
pub type Dataset = datasets::Dataset<f64>;
pub type Dataset32 = datasets::Dataset<f32>;
pub type Sample = datasets::Sample<f64>;
pub type ModelSpec = models::ModelSpec<f64>;
pub type ModelSpec32 = models::ModelSpec<f32>;
pub type Schedule = hierfavg::Schedule<f64>;
pub type RunConfig = hierfavg::RunConfig<f64>;
pub type RunOutput = hierfavg::RunOutput<f64>;
pub type TraceRecord = hierfavg::TraceRecord<f64>;
pub type DivergenceEstimate = divergence::DivergenceEstimate<f64>;
pub type BoundParams = bounds::BoundParams<f64>;
