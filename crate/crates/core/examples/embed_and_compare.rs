//! Hashed embeddings: similar phrasings share n-gram features and score
//! higher than unrelated text.
//!
//! ```text
//! cargo run --example embed_and_compare
//! ```

use facetsearch::embedder::{hash_embed, similarity, tokenize, DEFAULT_DIM};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let anchor = "shockproof case for iphone 13 pro";
    let others = [
        "iphone 13 pro shockproof protective case",
        "rugged case for iphone 13",
        "usb c fast charger 20w",
        "unlocked android phone 128gb",
    ];
    println!("tokens: {:?}", tokenize(anchor));
    let a = hash_embed(anchor, DEFAULT_DIM);
    for text in others {
        let s = similarity(&a, &hash_embed(text, DEFAULT_DIM))?;
        println!("{s:>7.4}  {text}");
    }
    Ok(())
}
