//! Writes a planted two-community corpus as the three TSV files the `ripple`
//! CLI ingests: a knowledge graph, ratings, and an item-entity map.
//!
//! Usage: `cargo run --example make_planted -- [out_dir]` (default `planted`).

use std::fs;
use std::path::PathBuf;

use ripplenet::synthetic::{self, PlantedConfig};

fn main() {
    let out: PathBuf = std::env::args().nth(1).unwrap_or_else(|| "planted".into()).into();
    let config = PlantedConfig::default();
    let data = synthetic::generate(&config).expect("default config is valid");

    fs::create_dir_all(&out).expect("create output directory");

    let mut kg = String::from("# planted two-community knowledge graph\n");
    for (h, r, t) in &data.kg_records {
        kg.push_str(&format!("{h}\t{r}\t{t}\n"));
    }
    fs::write(out.join("kg.tsv"), kg).expect("write kg.tsv");

    let mut ratings = String::new();
    for (user, item, rating) in &data.ratings {
        ratings.push_str(&format!("{user}\t{item}\t{rating}\n"));
    }
    fs::write(out.join("ratings.tsv"), ratings).expect("write ratings.tsv");

    let mut items = String::new();
    for (item, entity) in &data.item_map {
        items.push_str(&format!("{item}\t{entity}\n"));
    }
    fs::write(out.join("items.tsv"), items).expect("write items.tsv");

    println!(
        "wrote {} triples, {} ratings, {} items to {}",
        data.kg_records.len(),
        data.ratings.len(),
        data.item_map.len(),
        out.display()
    );
}
