//! Precision@k and recall@k on the bundled decoy benchmark, with and
//! without structured filtering.
//!
//! ```text
//! cargo run --example evaluate
//! ```

use std::fs::File;
use std::io::BufReader;

use facetsearch::catalog::{load_catalog, AccessoryLexicon};
use facetsearch::embedder::{embed_catalog, DEFAULT_DIM, HASH_SCHEME_VERSION};
use facetsearch::engine::{run_benchmark, Judgments, SearchEngine};
use facetsearch::index::IvfIndex;
use facetsearch::queryfilter::{RuleExtractor, ThresholdTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let data = concat!(env!("CARGO_MANIFEST_DIR"), "/data");
    let catalog = load_catalog(
        BufReader::new(File::open(format!("{data}/bench_catalog.jsonl"))?),
        &AccessoryLexicon::default(),
    )?;
    let judgments = Judgments::read(BufReader::new(File::open(format!("{data}/bench_judgments.tsv"))?))?;
    judgments.check_against(&catalog)?;

    let vectors = embed_catalog(&catalog, DEFAULT_DIM, None)?;
    let index = IvfIndex::train_and_build(&vectors, None, 1, HASH_SCHEME_VERSION)?;
    let (thresholds, extractor) = (ThresholdTable::default(), RuleExtractor::default());
    let ks = [1, 3, 5, 10];
    for filters in [true, false] {
        let engine = SearchEngine::new(&index, &catalog, &thresholds, &extractor)?.with_filters(filters);
        let report = run_benchmark(&engine, &judgments, &ks, None)?;
        println!("filters {}:\n{}", if filters { "on" } else { "off" }, report.to_table());
    }
    Ok(())
}
