//! Implicit-feedback interaction dataset: ingestion, negative sampling, and
//! train/eval/test splitting.
//!
//! Explicit ratings are reduced to binary click labels: a rating at or above
//! the threshold (or any rating, when no threshold is set) becomes a label-1
//! example, and for each user an equal number of label-0 examples is drawn
//! uniformly without replacement from the items the user never rated. Items
//! rated *below* the threshold are neither positives nor negative candidates.
//!
//! The split is a uniform random partition at the example level, so one user
//! may contribute to several splits. User histories — the seed entities of
//! ripple propagation — are always derived from train-split positives only,
//! which keeps eval/test interactions invisible to the model.

use std::collections::{BTreeSet, HashMap};
use std::io::BufRead;

use rand::Rng;

use crate::kg::{parse_tsv3, KnowledgeGraph};
use crate::{rng, EntityId, ItemId, UserId};

/// Errors from dataset ingestion and transformation.
#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("io error reading dataset: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed record at line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("split ratios must be positive and sum to 1")]
    BadRatios,
    #[error("unknown user id {0}")]
    UnknownUser(UserId),
    #[error("item id {id} out of range (item count {count})")]
    InvalidItem { id: ItemId, count: usize },
    #[error("no usable ratings after ingestion")]
    NoRatings,
}

/// One labeled interaction.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Example {
    pub user: UserId,
    pub item: ItemId,
    /// 1 for an observed (or sampled-positive) interaction, 0 for a sampled
    /// non-interaction.
    pub label: u8,
}

/// Index partition of `examples` into the three evaluation roles. Each vec is
/// sorted ascending; empty until [`InteractionDataset::split`] runs.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Splits {
    pub train: Vec<usize>,
    pub eval: Vec<usize>,
    pub test: Vec<usize>,
}

/// Labeled interactions over dense user/item ids, plus the item-to-entity
/// anchoring used to seed propagation.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionDataset {
    pub user_count: usize,
    pub examples: Vec<Example>,
    pub splits: Splits,
    /// `item_to_entity[i]` is the knowledge-graph entity anchoring item `i`.
    /// Every catalog item is anchored; unmatched items are dropped upstream.
    pub item_to_entity: Vec<EntityId>,
}

impl InteractionDataset {
    pub fn item_count(&self) -> usize {
        self.item_to_entity.len()
    }

    /// Partitions examples uniformly at random into train/eval/test with the
    /// given proportions. Sizes are fixed by largest-remainder rounding, so
    /// e.g. 10 examples at (0.6, 0.2, 0.2) always split 6/2/2. Fewer than 3
    /// examples all go to train (with a warning).
    pub fn split(&mut self, ratios: (f64, f64, f64), rng_seed: u64) -> Result<(), DatasetError> {
        let (a, b, c) = ratios;
        if !(a > 0.0 && b > 0.0 && c > 0.0) || (a + b + c - 1.0).abs() > 1e-9 {
            return Err(DatasetError::BadRatios);
        }
        let n = self.examples.len();
        if n < 3 {
            log::warn!("only {n} examples; assigning all of them to the train split");
            self.splits = Splits { train: (0..n).collect(), ..Splits::default() };
            return Ok(());
        }
        let sizes = apportion(n, &[a, b, c]);
        let mut order: Vec<usize> = (0..n).collect();
        rng::shuffle(&mut order, &mut rng::stream(rng_seed, "split"));
        let take = |count: usize, rest: &mut std::vec::IntoIter<usize>| {
            let mut part: Vec<usize> = rest.by_ref().take(count).collect();
            part.sort_unstable();
            part
        };
        let mut rest = order.into_iter();
        self.splits = Splits {
            train: take(sizes[0], &mut rest),
            eval: take(sizes[1], &mut rest),
            test: take(sizes[2], &mut rest),
        };
        Ok(())
    }

    /// The knowledge-graph entities of the user's train-split positives —
    /// the seeds of ripple propagation. Eval/test interactions never leak in.
    pub fn user_history(&self, user: UserId) -> Result<BTreeSet<EntityId>, DatasetError> {
        if user >= self.user_count {
            return Err(DatasetError::UnknownUser(user));
        }
        let mut history = BTreeSet::new();
        for &idx in &self.splits.train {
            let ex = &self.examples[idx];
            if ex.user == user && ex.label == 1 {
                history.insert(self.item_to_entity[ex.item]);
            }
        }
        Ok(history)
    }

    /// Per-user sets of label-1 items among the given example indices.
    /// Handy for building histories and top-K ground truth in one pass.
    pub fn positive_items_by_user(&self, indices: &[usize]) -> Vec<BTreeSet<ItemId>> {
        let mut per_user = vec![BTreeSet::new(); self.user_count];
        for &idx in indices {
            let ex = &self.examples[idx];
            if ex.label == 1 {
                per_user[ex.user].insert(ex.item);
            }
        }
        per_user
    }
}

/// Largest-remainder apportionment of `n` slots to the given proportions.
/// Ties in fractional part go to the earlier bucket.
fn apportion(n: usize, ratios: &[f64]) -> Vec<usize> {
    let exact: Vec<f64> = ratios.iter().map(|r| r * n as f64).collect();
    let mut sizes: Vec<usize> = exact.iter().map(|&x| x.floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut by_frac: Vec<usize> = (0..ratios.len()).collect();
    by_frac.sort_by(|&i, &j| {
        let fi = exact[i] - exact[i].floor();
        let fj = exact[j] - exact[j].floor();
        fj.partial_cmp(&fi).unwrap().then(i.cmp(&j))
    });
    for &i in by_frac.iter().take(n - assigned) {
        sizes[i] += 1;
    }
    sizes
}


/// Converts explicit ratings over dense ids into a balanced click dataset.
///
/// Per user: ratings at or above `threshold` (all ratings, if `None`) become
/// label-1 examples, in rating order; then an equally sized label-0 sample is
/// drawn uniformly without replacement from the user's never-rated items. If
/// too few unrated items exist the negative set is capped at availability and
/// a warning is logged. A `(user, item)` pair rated more than once keeps its
/// first rating.
pub fn implicit_transform(
    ratings: &[(UserId, ItemId, f64)],
    user_count: usize,
    item_to_entity: Vec<EntityId>,
    threshold: Option<f64>,
    rng_seed: u64,
) -> Result<InteractionDataset, DatasetError> {
    let item_count = item_to_entity.len();
    let mut interacted: Vec<BTreeSet<ItemId>> = vec![BTreeSet::new(); user_count];
    let mut positives: Vec<Vec<ItemId>> = vec![Vec::new(); user_count];
    for &(user, item, rating) in ratings {
        if user >= user_count {
            return Err(DatasetError::UnknownUser(user));
        }
        if item >= item_count {
            return Err(DatasetError::InvalidItem { id: item, count: item_count });
        }
        if !interacted[user].insert(item) {
            continue; // duplicate (user, item): first rating wins
        }
        if threshold.map_or(true, |t| rating >= t) {
            positives[user].push(item);
        }
    }

    let mut examples = Vec::new();
    let mut capped_users = 0usize;
    for user in 0..user_count {
        for &item in &positives[user] {
            examples.push(Example { user, item, label: 1 });
        }
        let wanted = positives[user].len();
        if wanted == 0 {
            continue;
        }
        let mut unrated: Vec<ItemId> =
            (0..item_count).filter(|i| !interacted[user].contains(i)).collect();
        if unrated.len() < wanted {
            capped_users += 1;
            log::warn!(
                "user {user}: only {} unrated items for {} positives; capping negatives",
                unrated.len(),
                wanted
            );
        }
        let take = wanted.min(unrated.len());
        let mut rng = rng::stream_at(rng_seed, "negatives", user as u64);
        for i in 0..take {
            let j = rng.gen_range(i..unrated.len());
            unrated.swap(i, j);
            examples.push(Example { user, item: unrated[i], label: 0 });
        }
    }
    if capped_users > 0 {
        log::warn!("{capped_users} user(s) had their negative samples capped by availability");
    }

    Ok(InteractionDataset {
        user_count,
        examples,
        splits: Splits::default(),
        item_to_entity,
    })
}

/// Name-level dataset vocabulary produced by [`ingest`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Vocab {
    /// User names by dense id, in first appearance order over usable ratings.
    pub users: Vec<String>,
    /// Item names by dense id, in item-map order (unmatched items dropped).
    pub items: Vec<String>,
}

impl Vocab {
    pub fn user_id(&self, name: &str) -> Option<UserId> {
        self.users.iter().position(|u| u == name)
    }

    pub fn item_id(&self, name: &str) -> Option<ItemId> {
        self.items.iter().position(|i| i == name)
    }
}

/// Counts of records discarded during [`ingest`].
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct IngestReport {
    /// Item-map rows whose entity is absent from the knowledge graph.
    pub items_without_entity: usize,
    /// Ratings whose item is not in the (surviving) item map.
    pub ratings_without_item: usize,
}

/// Assembles a dataset from name-level records: interns users and items,
/// anchors each item to its knowledge-graph entity (dropping items whose
/// entity is unknown, and ratings of dropped items, with counts reported),
/// then applies [`implicit_transform`].
pub fn ingest(
    ratings: &[(String, String, f64)],
    item_map: &[(String, String)],
    kg: &KnowledgeGraph,
    threshold: Option<f64>,
    rng_seed: u64,
) -> Result<(InteractionDataset, Vocab, IngestReport), DatasetError> {
    let mut report = IngestReport::default();
    let mut item_names: Vec<String> = Vec::new();
    let mut item_ids: HashMap<&str, ItemId> = HashMap::new();
    let mut item_to_entity: Vec<EntityId> = Vec::new();
    for (item, entity) in item_map {
        if item_ids.contains_key(item.as_str()) {
            continue; // duplicate map row: first anchoring wins
        }
        match kg.entity_id(entity) {
            Some(eid) => {
                item_ids.insert(item, item_names.len());
                item_names.push(item.clone());
                item_to_entity.push(eid);
            }
            None => report.items_without_entity += 1,
        }
    }

    let mut user_names: Vec<String> = Vec::new();
    let mut user_ids: HashMap<&str, UserId> = HashMap::new();
    let mut dense: Vec<(UserId, ItemId, f64)> = Vec::new();
    for (user, item, rating) in ratings {
        let Some(&item_id) = item_ids.get(item.as_str()) else {
            report.ratings_without_item += 1;
            continue;
        };
        let user_id = *user_ids.entry(user).or_insert_with(|| {
            user_names.push(user.clone());
            user_names.len() - 1
        });
        dense.push((user_id, item_id, *rating));
    }
    if dense.is_empty() {
        return Err(DatasetError::NoRatings);
    }

    let ds = implicit_transform(&dense, user_names.len(), item_to_entity, threshold, rng_seed)?;
    Ok((ds, Vocab { users: user_names, items: item_names }, report))
}

/// Reads `user<TAB>item<TAB>rating` records; empty and `#` lines skipped.
pub fn read_ratings<R: BufRead>(reader: R) -> Result<Vec<(String, String, f64)>, DatasetError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let Some((user, item, rating)) = parse_tsv3(&line, idx + 1).map_err(lift_parse)? else {
            continue;
        };
        let rating: f64 = rating.parse().map_err(|_| DatasetError::Parse {
            line: idx + 1,
            message: format!("rating {rating:?} is not a number"),
        })?;
        out.push((user, item, rating));
    }
    Ok(out)
}

/// Reads `item<TAB>entity` records; empty and `#` lines skipped.
pub fn read_item_map<R: BufRead>(reader: R) -> Result<Vec<(String, String)>, DatasetError> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let trimmed = line.trim_end_matches(['\r', '\n']);
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = trimmed.split('\t').collect();
        if fields.len() != 2 || fields.iter().any(|f| f.is_empty()) {
            return Err(DatasetError::Parse {
                line: idx + 1,
                message: "expected 2 tab-separated fields".into(),
            });
        }
        out.push((fields[0].to_owned(), fields[1].to_owned()));
    }
    Ok(out)
}

fn lift_parse(err: crate::kg::KgError) -> DatasetError {
    match err {
        crate::kg::KgError::Parse { line, message } => DatasetError::Parse {
            line,
            message: format!("expected 3 tab-separated fields, {message}"),
        },
        crate::kg::KgError::Io(e) => DatasetError::Io(e),
        other => DatasetError::Parse { line: 0, message: other.to_string() },
    }
}
