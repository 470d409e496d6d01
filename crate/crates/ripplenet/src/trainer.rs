//! Minibatch SGD training loop.
//!
//! A run proceeds in three phases:
//!
//! 1. **Ripple precomputation** — every user's train-split click history is
//!    expanded into per-hop triple samples once, up front. Users with no
//!    history, or whose history entities have no outgoing edges, are excluded
//!    (and counted).
//! 2. **Epochs** — the train split is reshuffled each epoch and walked in
//!    `ceil(n / batch_size)` chunks. Every chunk pairs an interaction
//!    minibatch with a fresh half-true/half-corrupted triple minibatch, takes
//!    one combined gradient, and applies a plain SGD step
//!    `theta <- theta - lr * grad`.
//! 3. **Bookkeeping** — after each epoch the full train split is re-scored
//!    for a comparable cross-entropy trace, and the eval split (when present
//!    and two-class) yields AUC and accuracy.
//!
//! All randomness — initialization, per-user sampling, shuffles, triple
//! corruption — derives from `hp.rng_seed` via [`rng`] sub-streams, so runs
//! are reproducible bit for bit. Wall-clock times are recorded per epoch but
//! deliberately excluded from serialized reports, which must be byte-stable
//! across reruns.

use std::time::Instant;

use rand::Rng;
use thiserror::Error;

use crate::dataset::{DatasetError, InteractionDataset};
use crate::kg::{KgError, KnowledgeGraph, RippleSets, Triple};
use crate::metrics::{self, PredictionRecord, RankedUser};
use crate::model::{
    Hyperparams, InteractionExample, LabeledTriple, LossParts, ModelError, ModelParams,
};
use crate::rng;
use crate::UserId;

/// Everything that can abort a training run.
#[derive(Debug, Error)]
pub enum TrainError {
    #[error("the train split is empty; call split() on the dataset first")]
    EmptyTrainSplit,
    #[error("every train example belongs to an excluded user (no history or no outgoing edges)")]
    NoTrainableUsers,
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Kg(#[from] KgError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
}

/// Precomputed per-user ripple sets; `None` marks an excluded user.
#[derive(Debug, Clone)]
pub struct RippleTable {
    per_user: Vec<Option<RippleSets>>,
    /// Users with no usable propagation seeds (empty history or dead-end
    /// history entities).
    pub excluded_users: usize,
}

impl RippleTable {
    pub fn get(&self, user: UserId) -> Option<&RippleSets> {
        self.per_user.get(user).and_then(Option::as_ref)
    }
}

/// One epoch's measurements. Wall time is kept for logs but never
/// serialized: reports must be byte-identical across identical runs.
#[derive(Debug, Clone, serde::Serialize)]
pub struct EpochStats {
    /// 1-based epoch number.
    pub epoch: usize,
    /// Loss parts summed over this epoch's minibatches — the objective the
    /// updates actually followed, measured mid-flight.
    pub minibatch: LossParts,
    /// Cross-entropy over the whole train split re-scored after the epoch.
    pub train_ctr: f64,
    /// AUC over the eval split; absent if the split is empty or one-class.
    pub eval_auc: Option<f64>,
    /// Accuracy (threshold 0.5) over the eval split; absent likewise.
    pub eval_acc: Option<f64>,
    #[serde(skip)]
    pub wall_secs: f64,
}

/// Full record of a training run.
#[derive(Debug, Clone, serde::Serialize)]
pub struct TrainReport {
    /// The exact configuration the run used.
    pub hyperparams: Hyperparams,
    pub excluded_users: usize,
    /// Cross-entropy of the freshly initialized model over the train split —
    /// the epoch-0 baseline for loss-decrease checks.
    pub initial_train_ctr: f64,
    pub epochs: Vec<EpochStats>,
    /// Where the trained model was saved, if the caller checkpointed it.
    pub checkpoint: Option<String>,
}

/// Expands every user's history into ripple sets. Users without history or
/// whose seeds have no outgoing edges become `None` and are counted.
pub fn build_ripple_table(
    ds: &InteractionDataset,
    kg: &KnowledgeGraph,
    hp: &Hyperparams,
) -> Result<RippleTable, TrainError> {
    let mut per_user = Vec::with_capacity(ds.user_count);
    let mut excluded = 0;
    for user in 0..ds.user_count {
        let history = ds.user_history(user)?;
        if history.is_empty() {
            per_user.push(None);
            excluded += 1;
            continue;
        }
        let seed = rng::sub_seed_at(hp.rng_seed, "ripple", user as u64);
        match kg.build_ripple_sets(user, &history, hp.hops, hp.ripple_size, seed) {
            Ok(ripple) => per_user.push(Some(ripple)),
            Err(KgError::NoOutgoingTriples { .. }) => {
                log::warn!("user {user}: history entities have no outgoing edges; excluded");
                per_user.push(None);
                excluded += 1;
            }
            Err(e) => return Err(e.into()),
        }
    }
    Ok(RippleTable { per_user, excluded_users: excluded })
}

/// Draws `batch_size - batch_size/2` true triples uniformly (with
/// replacement) and `batch_size/2` corrupted ones: a uniform anchor triple
/// with its tail replaced by a random entity, rejecting replacements that
/// form a real edge. If rejection keeps colliding, an ordered scan finds a
/// non-edge tail; an anchor whose head/relation connects to *every* entity
/// is skipped (nothing about it can be corrupted).
pub fn sample_triple_batch(
    kg: &KnowledgeGraph,
    batch_size: usize,
    rng: &mut impl Rng,
) -> Vec<LabeledTriple> {
    let triples = kg.triples();
    let entities = kg.entity_count();
    let mut batch = Vec::with_capacity(batch_size);
    for _ in 0..batch_size - batch_size / 2 {
        let triple = triples[rng.gen_range(0..triples.len())];
        batch.push(LabeledTriple { triple, observed: true });
    }
    'negatives: for _ in 0..batch_size / 2 {
        let anchor = triples[rng.gen_range(0..triples.len())];
        for _ in 0..64 {
            let candidate = Triple { tail: rng.gen_range(0..entities), ..anchor };
            if !kg.contains_triple(&candidate) {
                batch.push(LabeledTriple { triple: candidate, observed: false });
                continue 'negatives;
            }
        }
        let start = rng.gen_range(0..entities);
        for offset in 0..entities {
            let candidate = Triple { tail: (start + offset) % entities, ..anchor };
            if !kg.contains_triple(&candidate) {
                batch.push(LabeledTriple { triple: candidate, observed: false });
                continue 'negatives;
            }
        }
    }
    batch
}

/// Scores the examples at `indices`, skipping (and counting) those whose
/// user has no ripple sets.
pub fn score_examples(
    params: &ModelParams,
    ds: &InteractionDataset,
    table: &RippleTable,
    indices: &[usize],
) -> Result<(Vec<PredictionRecord>, usize), TrainError> {
    let mut records = Vec::with_capacity(indices.len());
    let mut skipped = 0;
    for &idx in indices {
        let ex = &ds.examples[idx];
        match table.get(ex.user) {
            Some(ripple) => records.push(PredictionRecord {
                user: ex.user,
                item: ex.item,
                clicked: ex.label == 1,
                score: params.score_pair(ripple, ex.item)?,
            }),
            None => skipped += 1,
        }
    }
    Ok((records, skipped))
}

/// Builds top-K inputs for every user that has ripple sets and at least one
/// positive among `held_out`: candidates are all items the user did not
/// click in train, each scored by the model.
pub fn ranked_users(
    params: &ModelParams,
    ds: &InteractionDataset,
    table: &RippleTable,
    held_out: &[usize],
) -> Result<Vec<RankedUser>, TrainError> {
    let positives = ds.positive_items_by_user(held_out);
    let train_positives = ds.positive_items_by_user(&ds.splits.train);
    let mut users = Vec::new();
    for user in 0..ds.user_count {
        let Some(ripple) = table.get(user) else { continue };
        if positives[user].is_empty() {
            continue;
        }
        let mut candidates = Vec::with_capacity(ds.item_count());
        for item in 0..ds.item_count() {
            if train_positives[user].contains(&item) {
                continue;
            }
            candidates.push((item, params.score_pair(ripple, item)?));
        }
        users.push(RankedUser { candidates, positives: positives[user].clone() });
    }
    Ok(users)
}

/// Summed cross-entropy over examples whose users all have ripple sets.
fn cross_entropy_sum(
    params: &ModelParams,
    ds: &InteractionDataset,
    table: &RippleTable,
    indices: &[usize],
) -> Result<f64, TrainError> {
    let mut sum = 0.0;
    for &idx in indices {
        let ex = &ds.examples[idx];
        let ripple = table.get(ex.user).expect("indices pre-filtered to users with ripples");
        let p = params.score_pair(ripple, ex.item)?;
        sum -= if ex.label == 1 { p.ln() } else { (1.0 - p).ln() };
    }
    Ok(sum)
}

/// Runs the full training loop described in the module docs and returns the
/// trained parameters plus a per-epoch report.
pub fn train(
    ds: &InteractionDataset,
    kg: &KnowledgeGraph,
    hp: &Hyperparams,
) -> Result<(ModelParams, TrainReport), TrainError> {
    hp.validate()?;
    if ds.splits.train.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    let table = build_ripple_table(ds, kg, hp)?;
    let usable: Vec<usize> = ds
        .splits
        .train
        .iter()
        .copied()
        .filter(|&idx| table.get(ds.examples[idx].user).is_some())
        .collect();
    if usable.is_empty() {
        return Err(TrainError::NoTrainableUsers);
    }
    log::info!(
        "training on {} of {} train examples ({} users excluded)",
        usable.len(),
        ds.splits.train.len(),
        table.excluded_users
    );

    let mut params = ModelParams::init(
        kg.entity_count(),
        ds.item_count(),
        kg.relation_count(),
        hp.dim,
        rng::sub_seed(hp.rng_seed, "init"),
    );
    let initial_train_ctr = cross_entropy_sum(&params, ds, &table, &usable)?;
    let mut triple_rng = rng::stream(hp.rng_seed, "triples");
    let mut order = usable.clone();
    let mut epochs = Vec::with_capacity(hp.epochs);

    for epoch in 1..=hp.epochs {
        let tick = Instant::now();
        rng::shuffle(&mut order, &mut rng::stream_at(hp.rng_seed, "shuffle", epoch as u64));
        let mut minibatch = LossParts { ctr: 0.0, kge: 0.0, reg: 0.0 };
        for chunk in order.chunks(hp.batch_size) {
            let interactions: Vec<InteractionExample> = chunk
                .iter()
                .map(|&idx| {
                    let ex = &ds.examples[idx];
                    InteractionExample {
                        ripple: table.get(ex.user).expect("usable indices have ripples"),
                        item: ex.item,
                        clicked: ex.label == 1,
                    }
                })
                .collect();
            let triples = sample_triple_batch(kg, hp.batch_size, &mut triple_rng);
            let (parts, grads) = params.loss_and_gradients(&interactions, &triples, hp)?;
            minibatch.ctr += parts.ctr;
            minibatch.kge += parts.kge;
            minibatch.reg += parts.reg;
            params.apply_gradients(&grads, hp.learning_rate);
        }

        let train_ctr = cross_entropy_sum(&params, ds, &table, &usable)?;
        let (eval_auc, eval_acc) = if ds.splits.eval.is_empty() {
            (None, None)
        } else {
            let (records, _) = score_examples(&params, ds, &table, &ds.splits.eval)?;
            (metrics::auc(&records).ok(), metrics::accuracy(&records, 0.5).ok())
        };
        let wall_secs = tick.elapsed().as_secs_f64();
        log::info!(
            "epoch {epoch}: train ctr {train_ctr:.4}, eval auc {eval_auc:?} ({wall_secs:.2}s)"
        );
        epochs.push(EpochStats { epoch, minibatch, train_ctr, eval_auc, eval_acc, wall_secs });
    }

    let report = TrainReport {
        hyperparams: hp.clone(),
        excluded_users: table.excluded_users,
        initial_train_ctr,
        epochs,
        checkpoint: None,
    };
    Ok((params, report))
}
