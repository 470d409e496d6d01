//! Knowledge-graph-aware click-through-rate prediction via multi-hop
//! preference propagation.
//!
//! A user's clicked items seed a wave that spreads along knowledge-graph
//! edges: each hop samples a fixed-size set of outgoing triples, scores them
//! against a probe vector (the candidate item at hop 1, the previous hop's
//! response afterwards), and averages tail embeddings under the resulting
//! softmax weights. The per-hop responses sum to a user embedding whose inner
//! product with the item embedding gives the click probability.
//!
//! Everything is framework-free: embeddings live in flat `f64` tables and all
//! gradients are derived by hand and checked against finite differences in
//! the test suites. Training, sampling, and initialization draw from a single
//! root seed (see [`rng`]), making every run reproducible bit for bit.

pub mod checkpoint;
pub mod dataset;
pub mod insight;
pub mod kg;
pub mod metrics;
pub mod model;
pub mod rng;
pub mod synthetic;
pub mod trainer;

/// Dense index of an interned knowledge-graph entity.
pub type EntityId = usize;
/// Dense index of an interned relation type.
pub type RelationId = usize;
/// Dense index of an interned catalog item.
pub type ItemId = usize;
/// Dense index of an interned user.
pub type UserId = usize;
