//! Per-sample forward/backward passes over flat parameter slices.
//!
//! Logistic layout: `W[c][d]` row-major, then `b[c]`.
//! MLP layout: `W1[h][d]`, `b1[h]`, `W2[c][h]`, `b2[c]`.

use super::{ModelKind, ModelSpec};
use crate::scalar::Scalar;

pub(super) struct Workspace<T> {
    hidden: Vec<T>,
    logits: Vec<T>,
    delta_hidden: Vec<T>,
}

impl<T: Scalar> Workspace<T> {
    pub(super) fn new(spec: &ModelSpec<T>) -> Self {
        let h = match spec.kind {
            ModelKind::LogisticRegression => 0,
            ModelKind::Mlp { hidden_dim } => hidden_dim,
        };
        Self { hidden: vec![T::zero(); h], logits: vec![T::zero(); spec.num_classes], delta_hidden: vec![T::zero(); h] }
    }
}

fn affine<T: Scalar>(weights: &[T], bias: &[T], input: &[T], out: &mut [T]) {
    let width = input.len();
    for (o, (row, &b)) in out.iter_mut().zip(weights.chunks_exact(width).zip(bias)) {
        *o = row.iter().zip(input).fold(b, |acc, (&w, &x)| acc + w * x);
    }
}

/// Logits for one input; the returned slice borrows the workspace.
pub(super) fn forward<'w, T: Scalar>(spec: &ModelSpec<T>, params: &[T], x: &[T], ws: &'w mut Workspace<T>) -> &'w [T] {
    let (d, c) = (spec.input_dim, spec.num_classes);
    match spec.kind {
        ModelKind::LogisticRegression => {
            let (w, b) = params.split_at(c * d);
            affine(w, b, x, &mut ws.logits);
        }
        ModelKind::Mlp { hidden_dim: h } => {
            let (w1, rest) = params.split_at(h * d);
            let (b1, rest) = rest.split_at(h);
            let (w2, b2) = rest.split_at(c * h);
            affine(w1, b1, x, &mut ws.hidden);
            for a in &mut ws.hidden {
                *a = a.tanh();
            }
            affine(w2, b2, &ws.hidden, &mut ws.logits);
        }
    }
    &ws.logits
}

/// Cross-entropy of one sample. When `grad` is given, the sample's gradient
/// is added into it.
pub(super) fn sample_loss<T: Scalar>(
    spec: &ModelSpec<T>,
    params: &[T],
    x: &[T],
    y: usize,
    ws: &mut Workspace<T>,
    grad: Option<&mut [T]>,
) -> T {
    forward(spec, params, x, ws);
    let max = ws.logits.iter().fold(T::neg_infinity(), |m, &z| m.max(z));
    let sum_exp = ws.logits.iter().fold(T::zero(), |acc, &z| acc + (z - max).exp());
    let log_norm = max + sum_exp.ln();
    let loss = log_norm - ws.logits[y];

    let Some(grad) = grad else { return loss };
    // logits become dL/dz = softmax − onehot
    for (c, z) in ws.logits.iter_mut().enumerate() {
        *z = (*z - log_norm).exp();
        if c == y {
            *z -= T::one();
        }
    }
    let (d, c) = (spec.input_dim, spec.num_classes);
    match spec.kind {
        ModelKind::LogisticRegression => {
            let (gw, gb) = grad.split_at_mut(c * d);
            outer_add(&ws.logits, x, gw, gb);
        }
        ModelKind::Mlp { hidden_dim: h } => {
            let w2 = &params[h * (d + 1)..h * (d + 1) + c * h];
            for (j, dh) in ws.delta_hidden.iter_mut().enumerate() {
                let back = ws.logits.iter().enumerate().fold(T::zero(), |acc, (k, &dz)| acc + w2[k * h + j] * dz);
                let a = ws.hidden[j];
                *dh = back * (T::one() - a * a);
            }
            let (first, second) = grad.split_at_mut(h * (d + 1));
            let (gw1, gb1) = first.split_at_mut(h * d);
            let (gw2, gb2) = second.split_at_mut(c * h);
            outer_add(&ws.logits, &ws.hidden, gw2, gb2);
            outer_add(&ws.delta_hidden, x, gw1, gb1);
        }
    }
    loss
}

/// `gw += delta ⊗ input`, `gb += delta`.
fn outer_add<T: Scalar>(delta: &[T], input: &[T], gw: &mut [T], gb: &mut [T]) {
    for ((row, b), &dz) in gw.chunks_exact_mut(input.len()).zip(gb.iter_mut()).zip(delta) {
        for (g, &xi) in row.iter_mut().zip(input) {
            *g += dz * xi;
        }
        *b += dz;
    }
}
