//! Constraint-filtered semantic search over product catalogs.
//!
//! A conversational query is turned into structured filters (price,
//! rating, review count, subcategory), the filters are evaluated over
//! catalog metadata to get an allowed-ID set, and an IVF-Flat index ranks
//! the allowed products by inner product against the query embedding.
//!
//! ```no_run
//! use facetsearch::catalog::{load_catalog, AccessoryLexicon};
//! use facetsearch::embedder::{embed_catalog, DEFAULT_DIM, HASH_SCHEME_VERSION};
//! use facetsearch::engine::SearchEngine;
//! use facetsearch::index::IvfIndex;
//! use facetsearch::queryfilter::{RuleExtractor, ThresholdTable};
//!
//! let file = std::io::BufReader::new(std::fs::File::open("catalog.jsonl")?);
//! let catalog = load_catalog(file, &AccessoryLexicon::default())?;
//! let vectors = embed_catalog(&catalog, DEFAULT_DIM, None)?;
//! let index = IvfIndex::train_and_build(&vectors, None, 7, HASH_SCHEME_VERSION)?;
//! let (thresholds, extractor) = (ThresholdTable::default(), RuleExtractor::default());
//! let engine = SearchEngine::new(&index, &catalog, &thresholds, &extractor)?;
//! let hits = engine.run_query("cheap iphone se case with 4+ stars", 10, None)?;
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

mod binio;
pub mod catalog;
pub mod config;
pub mod embedder;
pub mod engine;
pub mod index;
pub mod queryfilter;
pub mod trainer;

pub use catalog::{CatalogTable, ProductRecord, Subcategory};
pub use embedder::{AdapterParams, EmbeddingVector, VectorSet};
pub use engine::{MetricsReport, SearchEngine};
pub use index::{IvfIndex, QueryResult};
pub use queryfilter::{StructuredFilters, ThresholdTable};
