//! The propagation model: embedding tables, forward pass, and hand-derived
//! gradients.
//!
//! Parameters are three flat `f64` tables — entity embeddings, item
//! embeddings, and one `d x d` matrix per relation. The forward pass scores a
//! `(user, item)` pair by propagating a probe vector through the user's
//! sampled ripple sets (see [`crate::kg`]); the backward pass accumulates
//! exact analytic gradients into sparse per-row maps. Both directions are
//! plain loops over slices: no autodiff, no framework, nothing hidden.

mod forward;
mod loss;
mod params;

pub use forward::{ForwardTrace, HopTrace};
pub use loss::{Gradients, InteractionExample, LabeledTriple, LossParts};
pub use params::{Hyperparams, ModelParams};

use crate::{EntityId, ItemId, RelationId};

/// Errors from model construction and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum ModelError {
    #[error("expected a vector of length {expected}, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("entity id {id} out of range (entity count {count})")]
    EntityOutOfRange { id: EntityId, count: usize },
    #[error("relation id {id} out of range (relation count {count})")]
    RelationOutOfRange { id: RelationId, count: usize },
    #[error("item id {id} out of range (item count {count})")]
    ItemOutOfRange { id: ItemId, count: usize },
    #[error("ripple sets contain an empty hop")]
    EmptyHop,
    #[error("interaction batch is empty")]
    EmptyBatch,
    #[error("invalid hyperparameter: {0}")]
    InvalidHyperparam(&'static str),
}

/// Inner product of two equal-length slices.
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `m * v` for a row-major `d x d` matrix.
pub(crate) fn matvec(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    (0..d).map(|row| dot(&m[row * d..(row + 1) * d], v)).collect()
}

/// `m^T * v` for a row-major `d x d` matrix.
pub(crate) fn mat_t_vec(m: &[f64], v: &[f64], d: usize) -> Vec<f64> {
    let mut out = vec![0.0; d];
    for (row, &vr) in v.iter().enumerate() {
        for col in 0..d {
            out[col] += m[row * d + col] * vr;
        }
    }
    out
}

/// `acc += alpha * x`.
pub(crate) fn axpy(alpha: f64, x: &[f64], acc: &mut [f64]) {
    debug_assert_eq!(x.len(), acc.len());
    for (a, &xi) in acc.iter_mut().zip(x) {
        *a += alpha * xi;
    }
}

/// `acc += alpha * q * a^T` for a row-major `d x d` accumulator.
pub(crate) fn outer_acc(alpha: f64, q: &[f64], a: &[f64], acc: &mut [f64]) {
    let d = q.len();
    debug_assert_eq!(acc.len(), d * d);
    for (row, &qr) in q.iter().enumerate() {
        for (col, &ac) in a.iter().enumerate() {
            acc[row * d + col] += alpha * qr * ac;
        }
    }
}

/// Numerically stable logistic function.
pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Softmax with max-subtraction. Shifting every input by the same constant
/// cancels in `x - max`, so the stabilization never changes the result.
pub(crate) fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&x| (x - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / sum).collect()
}
