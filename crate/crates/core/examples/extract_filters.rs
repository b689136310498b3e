//! Structured filters for a few conversational queries, or for each line
//! of a file given as the first argument.
//!
//! ```text
//! cargo run --example extract_filters
//! cargo run --example extract_filters -- queries.txt
//! ```

use facetsearch::catalog::Subcategory;
use facetsearch::queryfilter::{extract_filters, filters_to_text, resolve_thresholds, ThresholdTable};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let queries: Vec<String> = match std::env::args().nth(1) {
        Some(path) => std::fs::read_to_string(path)?.lines().map(String::from).collect(),
        None => [
            "AT&T prepaid phones under $200 with 4+ stars.",
            "Anker 4-port USB charger averagely priced",
            "I need a cheap and big iPhone SE case.",
            "smartphone with good battery life, plenty of reviews and priced under $300",
        ]
        .map(String::from)
        .to_vec(),
    };
    let table = ThresholdTable::default();
    for q in queries.iter().filter(|q| !q.trim().is_empty()) {
        let f = extract_filters(q);
        println!("{q}\n  {}", filters_to_text(&f));
        let sub = f.subcategory.unwrap_or(Subcategory::CellPhones);
        match resolve_thresholds(&f, &table, sub) {
            Ok(r) => println!("  price {:?}\n  reviews {:?}\n  rating {:?}", r.price, r.review_count, r.average_rating),
            Err(e) => println!("  unresolvable: {e}"),
        }
    }
    Ok(())
}
