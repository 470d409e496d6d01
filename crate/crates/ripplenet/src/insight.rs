//! Introspection tools for trained models and graphs.
//!
//! * [`explain`] turns one user-item prediction into a subgraph: every
//!   sampled propagation edge is scored by its raw (unnormalized, log-space)
//!   relevance logit, edges below a threshold are dropped, and the survivors
//!   are assembled into hop-increasing chains from the user's history toward
//!   the deepest reached entities.
//! * [`superposition`] aggregates the per-hop relevance probabilities by tail
//!   entity, exposing where attention mass concentrates when several
//!   propagation paths converge on the same entity.
//! * [`neighbor_overlap_study`] samples item pairs and compares the k-hop
//!   common-neighbor counts of pairs that share a rater against pairs that
//!   do not — a structural sanity check that co-consumption shows up as
//!   graph proximity.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use thiserror::Error;

use crate::dataset::InteractionDataset;
use crate::kg::{KgError, KnowledgeGraph, RippleSets, Triple};
use crate::model::{ModelError, ModelParams};
use crate::{EntityId, ItemId, UserId};

/// Failures in the pair-sampling study.
#[derive(Debug, Error)]
pub enum InsightError {
    #[error("need at least two items to sample item pairs")]
    NotEnoughItems,
    #[error("pair count must be positive")]
    ZeroPairs,
    #[error(transparent)]
    Kg(#[from] KgError),
}

/// One retained propagation edge: the sampled triple, the hop it was sampled
/// at (1-based), and its raw relevance logit for the explained item.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExplanationEdge {
    pub hop: usize,
    pub triple: Triple,
    pub score: f64,
}

/// Why a prediction came out the way it did, as a scored subgraph.
///
/// Nodes are `(entity, level)` pairs — level 0 holds the history seeds, level
/// `k` the entities reached at hop `k` — because the same entity can appear
/// at several depths. Duplicate samples of one triple within a hop collapse
/// into a single edge. Paths are the maximal hop-increasing chains through
/// the retained edges: consecutive edges deepen by exactly one hop and join
/// tail to head, and no retained edge extends the chain on either side.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplanationGraph {
    pub user: UserId,
    pub item: ItemId,
    /// Score cutoff the graph was built with.
    pub threshold: f64,
    pub nodes: BTreeSet<(EntityId, usize)>,
    pub edges: Vec<ExplanationEdge>,
    pub paths: Vec<Vec<ExplanationEdge>>,
}

/// Per-entity attention mass: how much relevance probability lands on each
/// tail entity, per hop and summed over hops.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpositionReport {
    pub user: UserId,
    pub item: ItemId,
    /// `per_hop[k]` maps tail entity -> summed hop-(k+1) probability.
    pub per_hop: Vec<BTreeMap<EntityId, f64>>,
    pub total: BTreeMap<EntityId, f64>,
}

impl SuperpositionReport {
    /// Total attention mass on `entity` across all hops (0 if never a tail).
    pub fn mass(&self, entity: EntityId) -> f64 {
        self.total.get(&entity).copied().unwrap_or(0.0)
    }
}

/// Scores every sampled propagation edge for `(ripple.user, item)` and keeps
/// those with raw relevance logit `>= threshold`. Works on any parameters —
/// an untrained model simply yields uninformative scores.
pub fn explain(
    params: &ModelParams,
    ripple: &RippleSets,
    item: ItemId,
    threshold: f64,
) -> Result<ExplanationGraph, ModelError> {
    let trace = params.propagate(ripple, item)?;
    let mut nodes: BTreeSet<(EntityId, usize)> =
        ripple.seeds.iter().map(|&seed| (seed, 0)).collect();
    let mut edges: Vec<ExplanationEdge> = Vec::new();
    let mut seen: BTreeSet<(usize, Triple)> = BTreeSet::new();
    for (level, (hop, hop_trace)) in ripple.hops.iter().zip(&trace.hops).enumerate() {
        let hop_no = level + 1;
        for (triple, &score) in hop.iter().zip(&hop_trace.logits) {
            if score < threshold || !seen.insert((hop_no, *triple)) {
                continue;
            }
            nodes.insert((triple.head, hop_no - 1));
            nodes.insert((triple.tail, hop_no));
            edges.push(ExplanationEdge { hop: hop_no, triple: *triple, score });
        }
    }
    let paths = maximal_chains(&edges, ripple.hop_count());
    Ok(ExplanationGraph { user: ripple.user, item, threshold, nodes, edges, paths })
}

/// All maximal chains of edges with strictly increasing hop levels, where
/// each edge starts at the previous edge's tail.
fn maximal_chains(edges: &[ExplanationEdge], hop_count: usize) -> Vec<Vec<ExplanationEdge>> {
    let mut by_hop: Vec<Vec<&ExplanationEdge>> = vec![Vec::new(); hop_count];
    for edge in edges {
        by_hop[edge.hop - 1].push(edge);
    }
    let mut paths = Vec::new();
    for edge in edges {
        // A chain starts where no retained edge one hop up feeds this one.
        let has_parent = edge.hop >= 2
            && by_hop[edge.hop - 2].iter().any(|e| e.triple.tail == edge.triple.head);
        if !has_parent {
            extend_chain(&by_hop, vec![*edge], &mut paths);
        }
    }
    paths
}

fn extend_chain(
    by_hop: &[Vec<&ExplanationEdge>],
    chain: Vec<ExplanationEdge>,
    out: &mut Vec<Vec<ExplanationEdge>>,
) {
    let last = chain.last().expect("chains are never empty");
    let next: Vec<&&ExplanationEdge> = if last.hop < by_hop.len() {
        by_hop[last.hop]
            .iter()
            .filter(|e| e.triple.head == last.triple.tail)
            .collect()
    } else {
        Vec::new()
    };
    if next.is_empty() {
        out.push(chain);
        return;
    }
    for edge in next {
        let mut longer = chain.clone();
        longer.push(**edge);
        extend_chain(by_hop, longer, out);
    }
}

impl ExplanationGraph {
    /// Renders the graph in DOT syntax, one node per (entity, level) with
    /// names resolved through the graph's vocabulary.
    pub fn to_dot(&self, kg: &KnowledgeGraph) -> String {
        let mut out = String::from("digraph explanation {\n  rankdir=LR;\n");
        for &(entity, level) in &self.nodes {
            let name = kg.entity_name(entity);
            out.push_str(&format!(
                "  \"n{entity}_h{level}\" [label=\"{name}\\nhop {level}\"];\n"
            ));
        }
        for edge in &self.edges {
            let rel = kg.relation_name(edge.triple.relation);
            out.push_str(&format!(
                "  \"n{}_h{}\" -> \"n{}_h{}\" [label=\"{} {:+.3}\"];\n",
                edge.triple.head,
                edge.hop - 1,
                edge.triple.tail,
                edge.hop,
                rel,
                edge.score
            ));
        }
        out.push_str("}\n");
        out
    }

    /// One line per path: `seed -[relation +score]-> ... -> entity`.
    pub fn path_lines(&self, kg: &KnowledgeGraph) -> Vec<String> {
        self.paths
            .iter()
            .map(|path| {
                let mut line = String::new();
                for (i, edge) in path.iter().enumerate() {
                    if i == 0 {
                        line.push_str(kg.entity_name(edge.triple.head));
                    }
                    line.push_str(&format!(
                        " -[{} {:+.3}]-> {}",
                        kg.relation_name(edge.triple.relation),
                        edge.score,
                        kg.entity_name(edge.triple.tail)
                    ));
                }
                line
            })
            .collect()
    }
}

/// Sums each hop's relevance probabilities by tail entity. Per hop the
/// masses add up to 1 (softmax conservation), so an entity's mass measures
/// how much of that hop's attention its incoming samples captured.
pub fn superposition(
    params: &ModelParams,
    ripple: &RippleSets,
    item: ItemId,
) -> Result<SuperpositionReport, ModelError> {
    let trace = params.propagate(ripple, item)?;
    let mut per_hop = Vec::with_capacity(ripple.hop_count());
    let mut total: BTreeMap<EntityId, f64> = BTreeMap::new();
    for (hop, hop_trace) in ripple.hops.iter().zip(&trace.hops) {
        let mut mass: BTreeMap<EntityId, f64> = BTreeMap::new();
        for (triple, &p) in hop.iter().zip(&hop_trace.probs) {
            *mass.entry(triple.tail).or_insert(0.0) += p;
            *total.entry(triple.tail).or_insert(0.0) += p;
        }
        per_hop.push(mass);
    }
    Ok(SuperpositionReport { user: ripple.user, item, per_hop, total })
}

/// Mean common-neighbor counts at each hop, split by co-rating.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize)]
pub struct OverlapRow {
    pub hop: usize,
    /// Mean over pairs some user rated both of; absent if no such pair.
    pub co_rated_mean: Option<f64>,
    /// Mean over pairs no user rated both of; absent if no such pair.
    pub non_co_rated_mean: Option<f64>,
    /// `co_rated_mean / non_co_rated_mean`; absent when undefined.
    pub ratio: Option<f64>,
}

/// Result of [`neighbor_overlap_study`].
#[derive(Debug, Clone, PartialEq, serde::Serialize)]
pub struct OverlapStudy {
    pub rows: Vec<OverlapRow>,
    pub co_rated_pairs: usize,
    pub non_co_rated_pairs: usize,
}

/// Samples `pair_count` unordered pairs of distinct items, classifies each
/// by whether any user's train positives contain both, and averages the
/// items' k-hop common-neighbor counts per class for `k = 1..=max_hop`.
pub fn neighbor_overlap_study(
    kg: &KnowledgeGraph,
    ds: &InteractionDataset,
    pair_count: usize,
    max_hop: usize,
    rng_seed: u64,
) -> Result<OverlapStudy, InsightError> {
    if pair_count == 0 {
        return Err(InsightError::ZeroPairs);
    }
    if ds.item_count() < 2 {
        return Err(InsightError::NotEnoughItems);
    }
    if max_hop == 0 {
        return Err(InsightError::Kg(KgError::ZeroHops));
    }

    let mut raters: Vec<BTreeSet<UserId>> = vec![BTreeSet::new(); ds.item_count()];
    for &idx in &ds.splits.train {
        let ex = &ds.examples[idx];
        if ex.label == 1 {
            raters[ex.item].insert(ex.user);
        }
    }

    let mut rng = crate::rng::stream(rng_seed, "overlap-pairs");
    let mut sums = vec![[0.0f64; 2]; max_hop]; // [hop][class]; class 0 = co-rated
    let mut counts = [0usize; 2];
    for _ in 0..pair_count {
        let a = rng.gen_range(0..ds.item_count());
        let b = loop {
            let b = rng.gen_range(0..ds.item_count());
            if b != a {
                break b;
            }
        };
        let co_rated = !raters[a].is_disjoint(&raters[b]);
        let class = usize::from(!co_rated);
        counts[class] += 1;
        for hop in 1..=max_hop {
            let common =
                kg.common_khop_neighbors(ds.item_to_entity[a], ds.item_to_entity[b], hop)?;
            sums[hop - 1][class] += common as f64;
        }
    }

    let mean = |hop: usize, class: usize| -> Option<f64> {
        (counts[class] > 0).then(|| sums[hop][class] / counts[class] as f64)
    };
    let rows = (0..max_hop)
        .map(|hop| {
            let co = mean(hop, 0);
            let non = mean(hop, 1);
            let ratio = match (co, non) {
                (Some(c), Some(n)) if n > 0.0 => Some(c / n),
                _ => None,
            };
            OverlapRow { hop: hop + 1, co_rated_mean: co, non_co_rated_mean: non, ratio }
        })
        .collect();
    Ok(OverlapStudy { rows, co_rated_pairs: counts[0], non_co_rated_pairs: counts[1] })
}
