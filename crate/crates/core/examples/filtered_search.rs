//! End-to-end search: extract filters, preselect ids, then rank with the
//! IVF index. Runs each query with and without filtering.
//!
//! ```text
//! cargo run --example filtered_search -- "samsung phone under $150 with 4+ stars"
//! ```

use std::io::BufReader;

use facetsearch::catalog::{load_catalog, AccessoryLexicon};
use facetsearch::embedder::{embed_catalog, DEFAULT_DIM, HASH_SCHEME_VERSION};
use facetsearch::engine::SearchEngine;
use facetsearch::index::IvfIndex;
use facetsearch::queryfilter::{filters_to_text, RuleExtractor, ThresholdTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let queries: Vec<String> = match std::env::args().nth(1) {
        Some(q) => vec![q],
        None => vec!["cheap iphone case with 4+ stars".into(), "motorola phone over $300".into()],
    };
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_catalog.jsonl");
    let catalog = load_catalog(BufReader::new(std::fs::File::open(path)?), &AccessoryLexicon::default())?;
    let vectors = embed_catalog(&catalog, DEFAULT_DIM, None)?;
    let index = IvfIndex::train_and_build(&vectors, None, 7, HASH_SCHEME_VERSION)?;
    println!("{} products in {} lists", index.len(), index.nlist());

    let (thresholds, extractor) = (ThresholdTable::default(), RuleExtractor::default());
    let engine = SearchEngine::new(&index, &catalog, &thresholds, &extractor)?;
    let unfiltered = SearchEngine::new(&index, &catalog, &thresholds, &extractor)?.with_filters(false);

    for q in &queries {
        for (label, e) in [("filtered", &engine), ("unfiltered", &unfiltered)] {
            let out = e.run_query(q, 5, None)?;
            println!("\n{q} ({label})");
            if label == "filtered" {
                println!("  filters {}", filters_to_text(&out.filters));
                println!("  {} products pass", out.allowed.unwrap_or(0));
            }
            for h in &out.result.hits {
                let r = catalog.get(h.id).unwrap();
                let price = r.price.map_or("-".to_string(), |p| format!("${p:.2}"));
                println!("  {:.3}  {price:>8}  {:.1}*  {:>5}  {}", h.score, r.average_rating, r.review_count, r.title);
            }
        }
    }
    Ok(())
}
