//! Knowledge-graph store: triple ingestion, multi-hop neighborhoods, and
//! per-user ripple-set sampling.
//!
//! The graph is a directed multigraph of `(head, relation, tail)` triples over
//! interned entity and relation ids. Two query families are provided:
//!
//! * **Exact** k-hop neighborhoods ([`KnowledgeGraph::relevant_entities`]):
//!   the set reached by following exactly `k` directed edges from a seed set.
//!   Level sets are images, not frontiers — an entity may reappear at a later
//!   level (e.g. in a 2-cycle), and no visited-set pruning is applied.
//! * **Sampled** ripple sets ([`KnowledgeGraph::build_ripple_sets`]): per user,
//!   a fixed-size uniform sample (with replacement) of the outgoing triples at
//!   each hop, seeded by the user's clicked-item entities. These are the
//!   model's per-user memory slots and are built once, before training.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::BufRead;
use std::path::Path;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{EntityId, RelationId, UserId};

/// One directed, labeled edge.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// Errors from graph ingestion and neighborhood queries.
#[derive(Debug, thiserror::Error)]
pub enum KgError {
    #[error("io error reading knowledge graph: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed triple at line {line}: expected 3 tab-separated fields, {message}")]
    Parse { line: usize, message: String },
    #[error("knowledge graph has no triples")]
    Empty,
    #[error("entity id {id} out of range (entity count {count})")]
    InvalidEntity { id: EntityId, count: usize },
    #[error("hop count must be at least 1")]
    ZeroHops,
    #[error("sample size must be at least 1")]
    ZeroSampleSize,
    #[error("seed entity set is empty")]
    EmptySeeds,
    #[error("user {user}: no seed entity has an outgoing triple; cannot propagate")]
    NoOutgoingTriples { user: UserId },
}

/// Immutable triple store with a by-head adjacency index.
///
/// Entity and relation names are interned to dense ids in first-appearance
/// order (head before tail within a record). Duplicate triples are dropped at
/// ingestion; self-loops are kept. After construction the graph is never
/// mutated, so shared references may be used freely across threads.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entity_names: Vec<String>,
    relation_names: Vec<String>,
    entity_ids: HashMap<String, EntityId>,
    relation_ids: HashMap<String, RelationId>,
    triples: Vec<Triple>,
    /// `adjacency[e]` lists the `(relation, tail)` pairs of triples with head
    /// `e`, in ingestion order. Sink entities have an empty list.
    adjacency: Vec<Vec<(RelationId, EntityId)>>,
    /// Membership index used for dedup and for rejecting corrupted triples
    /// that happen to be true. Never iterated, so hashing order is harmless.
    triple_set: HashSet<Triple>,
}

impl KnowledgeGraph {
    /// Builds a graph from name triples, interning ids in first-appearance
    /// order. Errors if the record stream holds no triples at all.
    pub fn from_records<I, S>(records: I) -> Result<Self, KgError>
    where
        I: IntoIterator<Item = (S, S, S)>,
        S: AsRef<str>,
    {
        let mut kg = KnowledgeGraph {
            entity_names: Vec::new(),
            relation_names: Vec::new(),
            entity_ids: HashMap::new(),
            relation_ids: HashMap::new(),
            triples: Vec::new(),
            adjacency: Vec::new(),
            triple_set: HashSet::new(),
        };
        for (h, r, t) in records {
            let head = kg.intern_entity(h.as_ref());
            let relation = kg.intern_relation(r.as_ref());
            let tail = kg.intern_entity(t.as_ref());
            let triple = Triple { head, relation, tail };
            if kg.triple_set.insert(triple) {
                kg.triples.push(triple);
                kg.adjacency[head].push((relation, tail));
            }
        }
        if kg.triples.is_empty() {
            return Err(KgError::Empty);
        }
        Ok(kg)
    }

    /// Reads tab-separated `head<TAB>relation<TAB>tail` records. Lines that
    /// are empty or start with `#` are skipped; any other line with a field
    /// count other than 3 (or an empty field) is a parse error carrying its
    /// 1-based line number.
    pub fn from_reader<R: BufRead>(reader: R) -> Result<Self, KgError> {
        let mut records = Vec::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if let Some(rec) = parse_tsv3(&line, idx + 1)? {
                records.push(rec);
            }
        }
        Self::from_records(records)
    }

    /// Reads a TSV file of triples; see [`KnowledgeGraph::from_reader`].
    pub fn load_tsv(path: &Path) -> Result<Self, KgError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(std::io::BufReader::new(file))
    }

    fn intern_entity(&mut self, name: &str) -> EntityId {
        if let Some(&id) = self.entity_ids.get(name) {
            return id;
        }
        let id = self.entity_names.len();
        self.entity_names.push(name.to_owned());
        self.entity_ids.insert(name.to_owned(), id);
        self.adjacency.push(Vec::new());
        id
    }

    fn intern_relation(&mut self, name: &str) -> RelationId {
        if let Some(&id) = self.relation_ids.get(name) {
            return id;
        }
        let id = self.relation_names.len();
        self.relation_names.push(name.to_owned());
        self.relation_ids.insert(name.to_owned(), id);
        id
    }

    pub fn entity_count(&self) -> usize {
        self.entity_names.len()
    }

    pub fn relation_count(&self) -> usize {
        self.relation_names.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn contains_triple(&self, triple: &Triple) -> bool {
        self.triple_set.contains(triple)
    }

    pub fn entity_id(&self, name: &str) -> Option<EntityId> {
        self.entity_ids.get(name).copied()
    }

    pub fn relation_id(&self, name: &str) -> Option<RelationId> {
        self.relation_ids.get(name).copied()
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        &self.entity_names[id]
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        &self.relation_names[id]
    }

    /// Outgoing `(relation, tail)` pairs of `entity`, in ingestion order.
    pub fn out_edges(&self, entity: EntityId) -> &[(RelationId, EntityId)] {
        &self.adjacency[entity]
    }

    fn check_entity(&self, id: EntityId) -> Result<(), KgError> {
        if id >= self.entity_count() {
            return Err(KgError::InvalidEntity { id, count: self.entity_count() });
        }
        Ok(())
    }

    /// Exact set of entities reached by exactly `k` directed steps from
    /// `seeds`: level 0 is the seed set, and level `i` is the image of level
    /// `i-1` under the triple relation. No sampling, no visited-set pruning.
    pub fn relevant_entities(
        &self,
        seeds: &BTreeSet<EntityId>,
        k: usize,
    ) -> Result<BTreeSet<EntityId>, KgError> {
        if k == 0 {
            return Err(KgError::ZeroHops);
        }
        if seeds.is_empty() {
            return Err(KgError::EmptySeeds);
        }
        for &s in seeds {
            self.check_entity(s)?;
        }
        let mut level: BTreeSet<EntityId> = seeds.clone();
        for _ in 0..k {
            let mut next = BTreeSet::new();
            for &e in &level {
                for &(_, tail) in &self.adjacency[e] {
                    next.insert(tail);
                }
            }
            level = next;
        }
        Ok(level)
    }

    /// Number of entities reachable in exactly `k` steps from both `a` and
    /// `b` — the size of the intersection of their `k`-hop neighborhoods.
    pub fn common_khop_neighbors(
        &self,
        a: EntityId,
        b: EntityId,
        k: usize,
    ) -> Result<usize, KgError> {
        let from_a = self.relevant_entities(&BTreeSet::from([a]), k)?;
        let from_b = self.relevant_entities(&BTreeSet::from([b]), k)?;
        Ok(from_a.intersection(&from_b).count())
    }

    /// Samples the user's ripple sets: for each hop `1..=max_hop`, exactly
    /// `sample_size` triples drawn uniformly **with replacement** from the
    /// hop's candidate pool. The hop-1 pool holds every triple whose head is
    /// a seed; the hop-k pool holds every triple whose head is a tail of the
    /// hop-(k-1) *sample*. A hop whose pool is empty copies the previous
    /// hop's sample verbatim and is flagged in [`RippleSets::fallback`];
    /// an empty pool at hop 1 is an error (the caller should drop the user).
    pub fn build_ripple_sets(
        &self,
        user: UserId,
        seeds: &BTreeSet<EntityId>,
        max_hop: usize,
        sample_size: usize,
        rng_seed: u64,
    ) -> Result<RippleSets, KgError> {
        if max_hop == 0 {
            return Err(KgError::ZeroHops);
        }
        if sample_size == 0 {
            return Err(KgError::ZeroSampleSize);
        }
        if seeds.is_empty() {
            return Err(KgError::EmptySeeds);
        }
        for &s in seeds {
            self.check_entity(s)?;
        }

        let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
        let mut hops: Vec<Vec<Triple>> = Vec::with_capacity(max_hop);
        let mut fallback = vec![false; max_hop];
        let mut frontier: Vec<EntityId> = seeds.iter().copied().collect();
        for hop in 0..max_hop {
            let mut pool: Vec<Triple> = Vec::new();
            for &e in &frontier {
                for &(relation, tail) in &self.adjacency[e] {
                    pool.push(Triple { head: e, relation, tail });
                }
            }
            let sample = if pool.is_empty() {
                match hops.last() {
                    Some(prev) => {
                        fallback[hop] = true;
                        prev.clone()
                    }
                    None => return Err(KgError::NoOutgoingTriples { user }),
                }
            } else {
                (0..sample_size).map(|_| pool[rng.gen_range(0..pool.len())]).collect()
            };
            // Next hop expands from the tails actually sampled, not from the
            // exact neighborhood, so memory stays bounded by sample_size.
            let tails: BTreeSet<EntityId> = sample.iter().map(|t| t.tail).collect();
            frontier = tails.into_iter().collect();
            hops.push(sample);
        }
        Ok(RippleSets { user, seeds: seeds.iter().copied().collect(), hops, fallback })
    }
}

/// Per-user sampled propagation memory: one fixed-size triple sample per hop.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RippleSets {
    pub user: UserId,
    /// The user's clicked-item entities (hop-0 set), sorted ascending.
    pub seeds: Vec<EntityId>,
    /// `hops[k]` is the hop-(k+1) sample; every inner vec has the same length.
    pub hops: Vec<Vec<Triple>>,
    /// `fallback[k]` marks hops whose pool was empty and whose sample is a
    /// verbatim copy of the previous hop's.
    pub fallback: Vec<bool>,
}

impl RippleSets {
    pub fn hop_count(&self) -> usize {
        self.hops.len()
    }

    pub fn sample_size(&self) -> usize {
        self.hops.first().map_or(0, Vec::len)
    }
}

/// Splits one TSV line into exactly three non-empty fields. Returns `None`
/// for empty and `#`-comment lines.
pub(crate) fn parse_tsv3(line: &str, line_no: usize) -> Result<Option<(String, String, String)>, KgError> {
    let trimmed = line.trim_end_matches(['\r', '\n']);
    if trimmed.is_empty() || trimmed.starts_with('#') {
        return Ok(None);
    }
    let fields: Vec<&str> = trimmed.split('\t').collect();
    if fields.len() != 3 {
        return Err(KgError::Parse {
            line: line_no,
            message: format!("found {}", fields.len()),
        });
    }
    if fields.iter().any(|f| f.is_empty()) {
        return Err(KgError::Parse { line: line_no, message: "found an empty field".into() });
    }
    Ok(Some((fields[0].to_owned(), fields[1].to_owned(), fields[2].to_owned())))
}
