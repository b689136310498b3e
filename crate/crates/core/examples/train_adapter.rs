//! Fit the linear adapter on synthesized queries and compare held-out
//! recall@5 against the untrained (identity) embedding.
//!
//! ```text
//! cargo run --release --example train_adapter -- [epochs]
//! ```

use std::io::BufReader;

use facetsearch::catalog::{load_catalog, AccessoryLexicon, CatalogTable};
use facetsearch::embedder::{adapt, embed_catalog, hash_embed, AdapterParams};
use facetsearch::index::exact_search;
use facetsearch::trainer::{synth_queries, train_adapter, TrainConfig, TrainingPair};

fn recall_at_5(catalog: &CatalogTable, pairs: &[TrainingPair], adapter: &AdapterParams) -> f64 {
    let products = embed_catalog(catalog, adapter.dim(), Some(adapter)).unwrap();
    let found = pairs
        .iter()
        .filter(|p| {
            let q = adapt(&hash_embed(&p.query, adapter.dim()), adapter).unwrap();
            let top = exact_search(&products.vectors, &products.ids, &q, 5, None).unwrap();
            top.ids().contains(&p.product_id)
        })
        .count();
    found as f64 / pairs.len() as f64
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let epochs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(10);
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/data/sample_catalog.jsonl");
    let catalog = load_catalog(BufReader::new(std::fs::File::open(path)?), &AccessoryLexicon::default())?;

    let (mut train, mut held_out) = (Vec::new(), Vec::new());
    for (id, r) in catalog.iter() {
        let mut qs = synth_queries(r, 4, id);
        held_out.push(TrainingPair::new(qs.pop().unwrap(), id));
        train.extend(qs.into_iter().map(|q| TrainingPair::new(q, id)));
    }
    println!("{} training pairs, {} held out; e.g. {:?}", train.len(), held_out.len(), train[0].query);

    let config = TrainConfig { epochs, seed: 1, ..TrainConfig::default() };
    let outcome = train_adapter(&catalog, &train, &config)?;
    for (e, loss) in outcome.epoch_losses.iter().enumerate() {
        println!("epoch {:>2}  loss {loss:.4}", e + 1);
    }
    let before = recall_at_5(&catalog, &held_out, &AdapterParams::identity(config.dim));
    let after = recall_at_5(&catalog, &held_out, &outcome.params);
    println!("held-out recall@5: identity {before:.3}, adapter {after:.3}");
    Ok(())
}
