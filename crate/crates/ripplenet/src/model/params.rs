//! Hyperparameters and the flat parameter tables.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{Gradients, ModelError};
use crate::{EntityId, ItemId, RelationId};

/// Everything a training run is configured by. One root seed drives every
/// random choice (initialization, sampling, shuffling) via derived streams.
/// Fields omitted from a serialized config fall back to [`Default`];
/// unknown keys are rejected so a misspelled knob cannot silently revert.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Hyperparams {
    /// Embedding dimension d.
    pub dim: usize,
    /// Number of propagation hops.
    pub hops: usize,
    /// Triples sampled per hop (with replacement).
    pub ripple_size: usize,
    /// Per-batch L2 penalty on touched parameters.
    pub l2_weight: f64,
    /// Weight of the graph-reconstruction (triple-scoring) loss term.
    pub kge_weight: f64,
    /// SGD step size.
    pub learning_rate: f64,
    /// Interactions (and sampled triples) per SGD step.
    pub batch_size: usize,
    /// Full passes over the train split.
    pub epochs: usize,
    /// Root seed of the run.
    pub rng_seed: u64,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            dim: 16,
            hops: 2,
            ripple_size: 32,
            l2_weight: 1e-7,
            kge_weight: 0.01,
            learning_rate: 0.02,
            batch_size: 1024,
            epochs: 10,
            rng_seed: 42,
        }
    }
}

impl Hyperparams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if self.dim == 0 {
            return Err(ModelError::InvalidHyperparam("dim must be at least 1"));
        }
        if self.hops == 0 {
            return Err(ModelError::InvalidHyperparam("hops must be at least 1"));
        }
        if self.ripple_size == 0 {
            return Err(ModelError::InvalidHyperparam("ripple_size must be at least 1"));
        }
        if self.batch_size == 0 {
            return Err(ModelError::InvalidHyperparam("batch_size must be at least 1"));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(ModelError::InvalidHyperparam("learning_rate must be positive"));
        }
        if !(self.l2_weight >= 0.0 && self.l2_weight.is_finite()) {
            return Err(ModelError::InvalidHyperparam("l2_weight must be non-negative"));
        }
        if !(self.kge_weight >= 0.0 && self.kge_weight.is_finite()) {
            return Err(ModelError::InvalidHyperparam("kge_weight must be non-negative"));
        }
        Ok(())
    }
}

/// The trainable state: entity rows, item rows, and one `d x d` row-major
/// matrix per relation, all stored as flat `f64` tables.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    dim: usize,
    entity_emb: Vec<f64>,
    item_emb: Vec<f64>,
    relation_emb: Vec<f64>,
}

impl ModelParams {
    /// Fresh parameters: embedding rows uniform in `[-0.5/d, 0.5/d]` and
    /// relation matrices uniform in `+/- sqrt(6 / (d + d))`, drawn in a fixed
    /// order from the given seed.
    pub fn init(
        entity_count: usize,
        item_count: usize,
        relation_count: usize,
        dim: usize,
        rng_seed: u64,
    ) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let row_bound = 0.5 / dim as f64;
        let mat_bound = (6.0 / (dim + dim) as f64).sqrt();
        let mut draw = |n: usize, bound: f64| -> Vec<f64> {
            (0..n).map(|_| rng.gen_range(-bound..bound)).collect()
        };
        let entity_emb = draw(entity_count * dim, row_bound);
        let item_emb = draw(item_count * dim, row_bound);
        let relation_emb = draw(relation_count * dim * dim, mat_bound);
        ModelParams { dim, entity_emb, item_emb, relation_emb }
    }

    /// Rebuilds parameters from raw tables, validating shapes.
    pub fn from_parts(
        dim: usize,
        entity_emb: Vec<f64>,
        item_emb: Vec<f64>,
        relation_emb: Vec<f64>,
    ) -> Result<Self, ModelError> {
        if dim == 0 {
            return Err(ModelError::InvalidHyperparam("dim must be at least 1"));
        }
        if entity_emb.len() % dim != 0 || item_emb.len() % dim != 0 {
            return Err(ModelError::ShapeMismatch {
                expected: dim,
                got: entity_emb.len() % dim,
            });
        }
        if relation_emb.len() % (dim * dim) != 0 {
            return Err(ModelError::ShapeMismatch {
                expected: dim * dim,
                got: relation_emb.len() % (dim * dim),
            });
        }
        Ok(ModelParams { dim, entity_emb, item_emb, relation_emb })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entity_count(&self) -> usize {
        self.entity_emb.len() / self.dim
    }

    pub fn item_count(&self) -> usize {
        self.item_emb.len() / self.dim
    }

    pub fn relation_count(&self) -> usize {
        self.relation_emb.len() / (self.dim * self.dim)
    }

    /// Embedding row of an entity.
    pub fn entity(&self, id: EntityId) -> Result<&[f64], ModelError> {
        if id >= self.entity_count() {
            return Err(ModelError::EntityOutOfRange { id, count: self.entity_count() });
        }
        Ok(&self.entity_emb[id * self.dim..(id + 1) * self.dim])
    }

    /// Embedding row of an item.
    pub fn item(&self, id: ItemId) -> Result<&[f64], ModelError> {
        if id >= self.item_count() {
            return Err(ModelError::ItemOutOfRange { id, count: self.item_count() });
        }
        Ok(&self.item_emb[id * self.dim..(id + 1) * self.dim])
    }

    /// Row-major `d x d` matrix of a relation.
    pub fn relation(&self, id: RelationId) -> Result<&[f64], ModelError> {
        if id >= self.relation_count() {
            return Err(ModelError::RelationOutOfRange { id, count: self.relation_count() });
        }
        let len = self.dim * self.dim;
        Ok(&self.relation_emb[id * len..(id + 1) * len])
    }

    /// Raw entity table (row-major, `entity_count * dim`).
    pub fn entity_table(&self) -> &[f64] {
        &self.entity_emb
    }

    /// Raw item table (row-major, `item_count * dim`).
    pub fn item_table(&self) -> &[f64] {
        &self.item_emb
    }

    /// Raw relation table (`relation_count * dim * dim`).
    pub fn relation_table(&self) -> &[f64] {
        &self.relation_emb
    }

    /// Plain SGD step: `theta -= learning_rate * gradient` for every entry in
    /// `grads`. Rows are visited in ascending id order, so the update is
    /// reproducible bit for bit.
    pub fn apply_gradients(&mut self, grads: &Gradients, learning_rate: f64) {
        let d = self.dim;
        for (&id, g) in &grads.entity {
            let row = &mut self.entity_emb[id * d..(id + 1) * d];
            for (w, &gi) in row.iter_mut().zip(g) {
                *w -= learning_rate * gi;
            }
        }
        for (&id, g) in &grads.item {
            let row = &mut self.item_emb[id * d..(id + 1) * d];
            for (w, &gi) in row.iter_mut().zip(g) {
                *w -= learning_rate * gi;
            }
        }
        for (&id, g) in &grads.relation {
            let mat = &mut self.relation_emb[id * d * d..(id + 1) * d * d];
            for (w, &gi) in mat.iter_mut().zip(g) {
                *w -= learning_rate * gi;
            }
        }
    }
}
