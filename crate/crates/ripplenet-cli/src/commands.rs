//! The six subcommands. Each one loads what it needs from raw inputs plus
//! the run configuration, does its work through the library, writes its
//! artifacts under `out_dir`, and prints a tab-separated summary to stdout.
//!
//! Determinism contract: every command's outputs are a pure function of its
//! inputs and configuration (the root seed included). Commands that need the
//! per-user propagation samples rebuild them from the seed rather than
//! parsing `prepare`'s cache file — the derivation is deterministic, so the
//! rebuilt sets are identical to the cached ones by construction.

use std::fmt::Write as _;
use std::fs;
use std::io::ErrorKind;
use std::path::PathBuf;

use ripplenet::checkpoint::{self, CheckpointError};
use ripplenet::dataset::{self, IngestReport, InteractionDataset, Vocab};
use ripplenet::insight;
use ripplenet::kg::{KgError, KnowledgeGraph, RippleSets};
use ripplenet::metrics;
use ripplenet::model::{Hyperparams, ModelParams};
use ripplenet::rng;
use ripplenet::trainer::{self, build_ripple_table, RippleTable};
use ripplenet::UserId;

use crate::config::{RunConfig, SplitChoice};
use crate::error::CliError;
use crate::io;

/// Everything derived from the three raw input files.
struct Bundle {
    kg: KnowledgeGraph,
    ds: InteractionDataset,
    vocab: Vocab,
    ingest: IngestReport,
}

/// Reads, interns, ingests, and splits. Deterministic in the config.
fn load_bundle(cfg: &RunConfig) -> Result<Bundle, CliError> {
    let kg_path = RunConfig::require(&cfg.paths.kg, "knowledge-graph", "--kg")?;
    let ratings_path = RunConfig::require(&cfg.paths.ratings, "ratings", "--ratings")?;
    let map_path = RunConfig::require(&cfg.paths.item_map, "item-entity map", "--item-map")?;
    let triples = io::read_kg(&kg_path)?;
    let ratings = io::read_ratings(&ratings_path)?;
    let item_map = io::read_item_map(&map_path)?;
    let kg =
        KnowledgeGraph::from_records(triples.iter().map(|(h, r, t)| (h.as_str(), r.as_str(), t.as_str())))?;
    let seed = cfg.hyperparams.rng_seed;
    let (mut ds, vocab, ingest) =
        dataset::ingest(&ratings, &item_map, &kg, cfg.data.rating_threshold, seed)?;
    let [a, b, c] = cfg.data.split_ratios;
    ds.split((a, b, c), seed)?;
    Ok(Bundle { kg, ds, vocab, ingest })
}

fn checkpoint_path(cfg: &RunConfig) -> PathBuf {
    cfg.paths.out_dir.join("checkpoint.bin")
}

fn load_checkpoint(cfg: &RunConfig) -> Result<ModelParams, CliError> {
    let path = checkpoint_path(cfg);
    match checkpoint::load(&path) {
        Ok(params) => Ok(params),
        Err(CheckpointError::Io(e)) if e.kind() == ErrorKind::NotFound => {
            Err(CliError::MissingCheckpoint(path))
        }
        Err(e) => Err(e.into()),
    }
}

/// A checkpoint is only usable with the vocabulary it was trained on.
fn check_shapes(
    params: &ModelParams,
    kg: &KnowledgeGraph,
    ds: &InteractionDataset,
) -> Result<(), CliError> {
    if params.entity_count() != kg.entity_count()
        || params.item_count() != ds.item_count()
        || params.relation_count() != kg.relation_count()
    {
        return Err(CliError::Config(format!(
            "checkpoint shape ({} entities, {} items, {} relations) does not match the \
             loaded data ({}, {}, {}); was it trained on different inputs?",
            params.entity_count(),
            params.item_count(),
            params.relation_count(),
            kg.entity_count(),
            ds.item_count(),
            kg.relation_count()
        )));
    }
    Ok(())
}

/// One user's propagation samples, rebuilt exactly as training built them.
fn user_ripple(
    kg: &KnowledgeGraph,
    ds: &InteractionDataset,
    hp: &Hyperparams,
    user: UserId,
    name: &str,
) -> Result<RippleSets, CliError> {
    let history = ds.user_history(user)?;
    if history.is_empty() {
        return Err(CliError::Config(format!(
            "user {name:?} has no positive interactions in the train split to propagate from"
        )));
    }
    let seed = rng::sub_seed_at(hp.rng_seed, "ripple", user as u64);
    kg.build_ripple_sets(user, &history, hp.hops, hp.ripple_size, seed).map_err(|e| match e {
        KgError::NoOutgoingTriples { .. } => CliError::Config(format!(
            "user {name:?}: history entities have no outgoing edges; nothing to propagate"
        )),
        other => other.into(),
    })
}

/// Shortest round-trip decimal form; stable across runs.
fn num(v: f64) -> String {
    format!("{v}")
}

fn opt_num(v: Option<f64>) -> String {
    v.map(num).unwrap_or_else(|| "NA".into())
}

fn ensure_out_dir(cfg: &RunConfig) -> Result<(), CliError> {
    fs::create_dir_all(&cfg.paths.out_dir)?;
    Ok(())
}

/// Ingests the raw files and writes the interned dataset, the split
/// assignment, and the sampled ripple cache as inspectable TSVs.
pub fn prepare(cfg: &RunConfig) -> Result<(), CliError> {
    let Bundle { kg, ds, vocab, ingest } = load_bundle(cfg)?;
    let table = build_ripple_table(&ds, &kg, &cfg.hyperparams)?;
    ensure_out_dir(cfg)?;
    let out = &cfg.paths.out_dir;

    let mut entities = String::from("entity\tname\n");
    for id in 0..kg.entity_count() {
        writeln!(entities, "{id}\t{}", kg.entity_name(id)).unwrap();
    }
    io::write_artifact(&out.join("entities.tsv"), &entities)?;

    let mut relations = String::from("relation\tname\n");
    for id in 0..kg.relation_count() {
        writeln!(relations, "{id}\t{}", kg.relation_name(id)).unwrap();
    }
    io::write_artifact(&out.join("relations.tsv"), &relations)?;

    let mut users = String::from("user\tname\n");
    for (id, name) in vocab.users.iter().enumerate() {
        writeln!(users, "{id}\t{name}").unwrap();
    }
    io::write_artifact(&out.join("users.tsv"), &users)?;

    let mut items = String::from("item\tname\tentity\n");
    for (id, name) in vocab.items.iter().enumerate() {
        writeln!(items, "{id}\t{name}\t{}", ds.item_to_entity[id]).unwrap();
    }
    io::write_artifact(&out.join("items.tsv"), &items)?;

    let mut split_of = vec!["none"; ds.examples.len()];
    for &i in &ds.splits.train {
        split_of[i] = "train";
    }
    for &i in &ds.splits.eval {
        split_of[i] = "eval";
    }
    for &i in &ds.splits.test {
        split_of[i] = "test";
    }
    let mut examples = String::from("example\tuser\titem\tlabel\tsplit\n");
    for (i, ex) in ds.examples.iter().enumerate() {
        writeln!(examples, "{i}\t{}\t{}\t{}\t{}", ex.user, ex.item, ex.label, split_of[i])
            .unwrap();
    }
    io::write_artifact(&out.join("examples.tsv"), &examples)?;

    let mut ripples = String::from("user\thop\thead\trelation\ttail\tfallback\n");
    for user in 0..ds.user_count {
        let Some(ripple) = table.get(user) else { continue };
        for (k, hop) in ripple.hops.iter().enumerate() {
            for t in hop {
                writeln!(
                    ripples,
                    "{user}\t{}\t{}\t{}\t{}\t{}",
                    k + 1,
                    t.head,
                    t.relation,
                    t.tail,
                    u8::from(ripple.fallback[k])
                )
                .unwrap();
            }
        }
    }
    io::write_artifact(&out.join("ripples.tsv"), &ripples)?;

    println!("entities\t{}", kg.entity_count());
    println!("relations\t{}", kg.relation_count());
    println!("triples\t{}", kg.triples().len());
    println!("users\t{}", ds.user_count);
    println!("items\t{}", ds.item_count());
    println!("examples\t{}", ds.examples.len());
    println!("train\t{}", ds.splits.train.len());
    println!("eval\t{}", ds.splits.eval.len());
    println!("test\t{}", ds.splits.test.len());
    println!("items_without_entity\t{}", ingest.items_without_entity);
    println!("ratings_without_item\t{}", ingest.ratings_without_item);
    println!("excluded_users\t{}", table.excluded_users);
    println!("out_dir\t{}", out.display());
    Ok(())
}

/// First line of the training log: the run's identity and baseline.
#[derive(serde::Serialize)]
struct RunMeta<'a> {
    hyperparams: &'a Hyperparams,
    excluded_users: usize,
    initial_train_ctr: f64,
    checkpoint: &'a str,
}

/// Trains from scratch, checkpoints the model, and logs one JSON record per
/// epoch. Reruns with an identical config write identical bytes.
pub fn train(cfg: &RunConfig) -> Result<(), CliError> {
    let Bundle { kg, ds, .. } = load_bundle(cfg)?;
    let (params, report) = trainer::train(&ds, &kg, &cfg.hyperparams)?;
    ensure_out_dir(cfg)?;
    let ckpt = checkpoint_path(cfg);
    checkpoint::save(&params, &ckpt)?;

    let meta = RunMeta {
        hyperparams: &report.hyperparams,
        excluded_users: report.excluded_users,
        initial_train_ctr: report.initial_train_ctr,
        checkpoint: "checkpoint.bin",
    };
    let mut log = serde_json::to_string(&meta).expect("report types serialize infallibly");
    log.push('\n');
    for epoch in &report.epochs {
        log.push_str(&serde_json::to_string(epoch).expect("report types serialize infallibly"));
        log.push('\n');
    }
    let log_path = cfg.paths.out_dir.join("train_log.jsonl");
    io::write_artifact(&log_path, &log)?;

    println!("initial_train_ctr\t{}", num(report.initial_train_ctr));
    for epoch in &report.epochs {
        println!(
            "epoch\t{}\ttrain_ctr\t{}\teval_auc\t{}",
            epoch.epoch,
            num(epoch.train_ctr),
            opt_num(epoch.eval_auc)
        );
    }
    println!("checkpoint\t{}", ckpt.display());
    println!("train_log\t{}", log_path.display());
    Ok(())
}

impl SplitChoice {
    fn name(self) -> &'static str {
        match self {
            SplitChoice::Train => "train",
            SplitChoice::Eval => "eval",
            SplitChoice::Test => "test",
        }
    }
}

/// Scores one split with the checkpointed model and reports ranking and
/// classification metrics, one line per metric.
pub fn eval(cfg: &RunConfig) -> Result<(), CliError> {
    let Bundle { kg, ds, .. } = load_bundle(cfg)?;
    let params = load_checkpoint(cfg)?;
    check_shapes(&params, &kg, &ds)?;
    let table = build_ripple_table(&ds, &kg, &cfg.hyperparams)?;
    let split = cfg.eval.split;
    let indices = match split {
        SplitChoice::Train => &ds.splits.train,
        SplitChoice::Eval => &ds.splits.eval,
        SplitChoice::Test => &ds.splits.test,
    };
    if indices.is_empty() {
        return Err(CliError::Config(format!(
            "the {} split is empty; check split_ratios",
            split.name()
        )));
    }
    let (records, skipped) = score_or_train_err(&params, &ds, &table, indices)?;

    let mut rows: Vec<(String, String)> = vec![
        ("split".into(), split.name().into()),
        ("scored".into(), records.len().to_string()),
        ("skipped".into(), skipped.to_string()),
        ("auc".into(), opt_num(metrics::auc(&records).ok())),
        ("accuracy".into(), opt_num(metrics::accuracy(&records, 0.5).ok())),
    ];
    if !cfg.eval.top_k.is_empty() {
        let ranked = trainer::ranked_users(&params, &ds, &table, indices)?;
        match metrics::top_k_metrics(&ranked, &cfg.eval.top_k) {
            Ok(reports) => {
                rows.push(("topk_users".into(), reports[0].users.to_string()));
                for r in &reports {
                    rows.push((format!("precision@{}", r.k), num(r.precision)));
                    rows.push((format!("recall@{}", r.k), num(r.recall)));
                    rows.push((format!("f1@{}", r.k), num(r.f1)));
                }
            }
            Err(metrics::MetricsError::NoEligibleUsers) => {
                rows.push(("topk_users".into(), "0".into()));
            }
            Err(e) => return Err(e.into()),
        }
    }

    ensure_out_dir(cfg)?;
    let mut table_text = String::from("metric\tvalue\n");
    for (name, value) in &rows {
        writeln!(table_text, "{name}\t{value}").unwrap();
        println!("{name}\t{value}");
    }
    io::write_artifact(&cfg.paths.out_dir.join("metrics.tsv"), &table_text)?;
    Ok(())
}

fn score_or_train_err(
    params: &ModelParams,
    ds: &InteractionDataset,
    table: &RippleTable,
    indices: &[usize],
) -> Result<(Vec<metrics::PredictionRecord>, usize), CliError> {
    Ok(trainer::score_examples(params, ds, table, indices)?)
}

/// Prints the user's top-K unseen items, best first.
pub fn recommend(cfg: &RunConfig, user_name: &str, k: usize) -> Result<(), CliError> {
    if k == 0 {
        return Err(CliError::Config("k must be at least 1".into()));
    }
    let Bundle { kg, ds, vocab, .. } = load_bundle(cfg)?;
    let params = load_checkpoint(cfg)?;
    check_shapes(&params, &kg, &ds)?;
    let user = vocab
        .user_id(user_name)
        .ok_or_else(|| CliError::UnknownUser(user_name.to_string()))?;
    let ripple = user_ripple(&kg, &ds, &cfg.hyperparams, user, user_name)?;
    let seen = &ds.positive_items_by_user(&ds.splits.train)[user];
    let mut scored = Vec::with_capacity(ds.item_count());
    for item in 0..ds.item_count() {
        if seen.contains(&item) {
            continue;
        }
        scored.push((item, params.score_pair(&ripple, item)?));
    }
    scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    for (rank, (item, score)) in scored.iter().take(k).enumerate() {
        println!("{}\t{}\t{}", rank + 1, vocab.items[*item], num(*score));
    }
    Ok(())
}

/// Writes the scored propagation subgraph behind one (user, item) prediction
/// as a DOT file plus a plain-text path list.
pub fn explain(cfg: &RunConfig) -> Result<(), CliError> {
    let user_name = cfg.explain.user.as_deref().ok_or_else(|| {
        CliError::Config("no user to explain; pass --user or set explain.user".into())
    })?;
    let item_name = cfg.explain.item.as_deref().ok_or_else(|| {
        CliError::Config("no item to explain; pass --item or set explain.item".into())
    })?;
    let Bundle { kg, ds, vocab, .. } = load_bundle(cfg)?;
    let params = load_checkpoint(cfg)?;
    check_shapes(&params, &kg, &ds)?;
    let user = vocab
        .user_id(user_name)
        .ok_or_else(|| CliError::UnknownUser(user_name.to_string()))?;
    let item = vocab
        .item_id(item_name)
        .ok_or_else(|| CliError::UnknownItem(item_name.to_string()))?;
    let ripple = user_ripple(&kg, &ds, &cfg.hyperparams, user, user_name)?;
    let graph = insight::explain(&params, &ripple, item, cfg.explain.threshold)?;

    ensure_out_dir(cfg)?;
    let dot_path = cfg.paths.out_dir.join("explain.dot");
    io::write_artifact(&dot_path, &graph.to_dot(&kg))?;
    let lines = graph.path_lines(&kg);
    let paths_path = cfg.paths.out_dir.join("explain_paths.txt");
    let mut text = lines.join("\n");
    if !text.is_empty() {
        text.push('\n');
    }
    io::write_artifact(&paths_path, &text)?;

    println!("user\t{user_name}");
    println!("item\t{item_name}");
    println!("threshold\t{}", num(cfg.explain.threshold));
    println!("edges\t{}", graph.edges.len());
    println!("paths\t{}", graph.paths.len());
    println!("dot\t{}", dot_path.display());
    println!("path_list\t{}", paths_path.display());
    Ok(())
}

/// Samples item pairs and compares k-hop common-neighbor counts between
/// co-rated pairs and the rest. Pure graph structure; no checkpoint needed.
pub fn analyze(cfg: &RunConfig) -> Result<(), CliError> {
    let Bundle { kg, ds, .. } = load_bundle(cfg)?;
    let study = insight::neighbor_overlap_study(
        &kg,
        &ds,
        cfg.analyze.pair_count,
        cfg.analyze.max_hop,
        cfg.hyperparams.rng_seed,
    )?;

    ensure_out_dir(cfg)?;
    let mut table = String::from("hop\tmean_with\tmean_without\tratio\n");
    for row in &study.rows {
        writeln!(
            table,
            "{}\t{}\t{}\t{}",
            row.hop,
            opt_num(row.co_rated_mean),
            opt_num(row.non_co_rated_mean),
            opt_num(row.ratio)
        )
        .unwrap();
    }
    io::write_artifact(&cfg.paths.out_dir.join("overlap.tsv"), &table)?;

    println!("co_rated_pairs\t{}", study.co_rated_pairs);
    println!("non_co_rated_pairs\t{}", study.non_co_rated_pairs);
    print!("{table}");
    Ok(())
}
