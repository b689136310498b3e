//! Clean a raw JSONL catalog and show what cleaning and subcategory
//! classification did to a few records.
//!
//! ```text
//! cargo run --example ingest_catalog -- data/sample_catalog.jsonl
//! ```

use std::io::BufReader;

use facetsearch::catalog::{clean_text, load_catalog, merge_product_text, AccessoryLexicon, Subcategory};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let path = std::env::args()
        .nth(1)
        .unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_catalog.jsonl").into());
    let catalog = load_catalog(BufReader::new(std::fs::File::open(&path)?), &AccessoryLexicon::default())?;

    let phones = catalog.iter().filter(|(_, r)| r.subcategory == Subcategory::CellPhones).count();
    let no_price = catalog.iter().filter(|(_, r)| r.price.is_none()).count();
    println!("{} products: {phones} phones, {} accessories, {no_price} without price", catalog.len(), catalog.len() - phones);

    for (id, r) in catalog.iter().take(3) {
        println!("\n#{id} {} [{}]", r.asin, r.subcategory.as_str());
        println!("  {}", merge_product_text(r));
    }

    let raw = "<b>Slim Case</b>™ for Pixel 8 – see https://example.com <ul><li>MagSafe</li></ul>";
    println!("\n{raw:?}\n  -> {:?}", clean_text(raw));
    Ok(())
}
