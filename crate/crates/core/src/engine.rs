//! End-to-end query pipeline and top-k evaluation.
//!
//! [`SearchEngine::run_query`] chains cleaning, filter extraction, threshold
//! resolution, ID preselection, embedding and filtered index search.
//! [`run_benchmark`] runs it over a judged query set and averages
//! precision@k and recall@k over queries.

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fmt::{self, Write as _};
use std::hash::Hash;
use std::io::BufRead;

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::catalog::{clean_text, CatalogTable, Subcategory};
use crate::embedder::{adapt, hash_embed, AdapterParams, EmbedError, HASH_SCHEME_VERSION};
use crate::index::{default_nprobe, IdSet, IndexError, IvfIndex, QueryResult, SearchRequest};
use crate::queryfilter::{
    preselect_ids, resolve_thresholds, FilterError, FilterExtractor, ResolvedFilters, StructuredFilters,
    ThresholdTable,
};

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("relevant set is empty")]
    EmptyRelevantSet,
    #[error("judged asin {0:?} is not in the catalog")]
    MissingAsin(String),
    #[error("judgments line {line}: {reason}")]
    MalformedJudgments { line: usize, reason: String },
    #[error("index id {0} has no catalog row")]
    UnknownId(u64),
    #[error(transparent)]
    Filter(#[from] FilterError),
    #[error(transparent)]
    Index(#[from] IndexError),
    #[error(transparent)]
    Embed(#[from] EmbedError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `|top-k ∩ relevant| / k`. The denominator stays `k` when fewer than `k`
/// items were returned.
///
/// # Panics
/// If `k == 0`.
pub fn precision_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> f64 {
    assert!(k >= 1, "precision@k needs k >= 1");
    let found = ranked.iter().take(k).filter(|id| relevant.contains(id)).count();
    found as f64 / k as f64
}

/// `|top-k ∩ relevant| / |relevant|`.
pub fn recall_at_k<T: Eq + Hash>(ranked: &[T], relevant: &HashSet<T>, k: usize) -> Result<f64, EngineError> {
    if relevant.is_empty() {
        return Err(EngineError::EmptyRelevantSet);
    }
    let found = ranked.iter().take(k).filter(|id| relevant.contains(id)).count();
    Ok(found as f64 / relevant.len() as f64)
}

/// Query text mapped to its exact-match asins, in file order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Judgments {
    entries: Vec<(String, BTreeSet<String>)>,
}

impl Judgments {
    /// Builds judgments from `(query, relevant)` entries. Repeated queries are
    /// merged.
    pub fn new(entries: impl IntoIterator<Item = (String, BTreeSet<String>)>) -> Result<Self, EngineError> {
        let mut out = Judgments::default();
        let mut pos: BTreeMap<String, usize> = BTreeMap::new();
        for (query, relevant) in entries {
            if relevant.is_empty() {
                return Err(EngineError::EmptyRelevantSet);
            }
            match pos.get(&query) {
                Some(&i) => out.entries[i].1.extend(relevant),
                None => {
                    pos.insert(query.clone(), out.entries.len());
                    out.entries.push((query, relevant));
                }
            }
        }
        Ok(out)
    }

    /// Reads `query<TAB>asin<TAB>asin...` lines. Blank lines and lines
    /// starting with `#` are skipped.
    pub fn read<R: BufRead>(input: R) -> Result<Self, EngineError> {
        let mut entries = Vec::new();
        for (idx, line) in input.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let query = fields.next().unwrap_or_default().trim().to_string();
            let relevant: BTreeSet<String> =
                fields.map(str::trim).filter(|a| !a.is_empty()).map(String::from).collect();
            if query.is_empty() || relevant.is_empty() {
                return Err(EngineError::MalformedJudgments {
                    line: idx + 1,
                    reason: "expected a query followed by at least one asin".into(),
                });
            }
            entries.push((query, relevant));
        }
        Self::new(entries)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &BTreeSet<String>)> {
        self.entries.iter().map(|(q, r)| (q.as_str(), r))
    }

    /// Every judged asin must exist in `catalog`.
    pub fn check_against(&self, catalog: &CatalogTable) -> Result<(), EngineError> {
        for (_, relevant) in &self.entries {
            if let Some(missing) = relevant.iter().find(|a| catalog.id_of(a).is_none()) {
                return Err(EngineError::MissingAsin(missing.clone()));
            }
        }
        Ok(())
    }
}

/// What one query went through and what it returned.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub filters: StructuredFilters,
    /// `None` when filtering is disabled.
    pub resolved: Option<ResolvedFilters>,
    /// Size of the allowed-ID set, `None` when unrestricted.
    pub allowed: Option<usize>,
    pub result: QueryResult,
}

/// Borrowed view of everything a query needs. Cheap to share across
/// threads.
pub struct SearchEngine<'a> {
    index: &'a IvfIndex,
    catalog: &'a CatalogTable,
    thresholds: &'a ThresholdTable,
    extractor: &'a dyn FilterExtractor,
    adapter: Option<&'a AdapterParams>,
    use_filters: bool,
}

impl fmt::Debug for SearchEngine<'_> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SearchEngine")
            .field("index_len", &self.index.len())
            .field("catalog_len", &self.catalog.len())
            .field("adapter", &self.adapter.is_some())
            .field("use_filters", &self.use_filters)
            .finish()
    }
}

impl<'a> SearchEngine<'a> {
    /// Checks that the index holds hashed embeddings over the catalog's ID
    /// space and that the adapter (if any) matches its dimension.
    pub fn new(
        index: &'a IvfIndex,
        catalog: &'a CatalogTable,
        thresholds: &'a ThresholdTable,
        extractor: &'a dyn FilterExtractor,
    ) -> Result<Self, EngineError> {
        if index.scheme_version() != HASH_SCHEME_VERSION {
            return Err(IndexError::SchemeMismatch {
                index: index.scheme_version(),
                query: HASH_SCHEME_VERSION,
            }
            .into());
        }
        for list in 0..index.nlist() {
            if let Some(&id) = index.list_ids(list).iter().find(|&&id| catalog.get(id).is_none()) {
                return Err(EngineError::UnknownId(id));
            }
        }
        Ok(Self {
            index,
            catalog,
            thresholds,
            extractor,
            adapter: None,
            use_filters: true,
        })
    }

    pub fn with_adapter(mut self, adapter: Option<&'a AdapterParams>) -> Result<Self, EngineError> {
        if let Some(a) = adapter {
            if a.dim() != self.index.dim() {
                return Err(EmbedError::DimensionMismatch {
                    expected: self.index.dim(),
                    got: a.dim(),
                }
                .into());
            }
        }
        self.adapter = adapter;
        Ok(self)
    }

    /// With filters off, queries search the whole index.
    pub fn with_filters(mut self, on: bool) -> Self {
        self.use_filters = on;
        self
    }

    pub fn index(&self) -> &IvfIndex {
        self.index
    }

    pub fn catalog(&self) -> &CatalogTable {
        self.catalog
    }

    /// `nprobe = None` uses the index default.
    pub fn run_query(&self, text: &str, k: usize, nprobe: Option<usize>) -> Result<QueryOutcome, EngineError> {
        let cleaned = clean_text(text);
        let nprobe = nprobe.unwrap_or_else(|| default_nprobe(self.index.nlist()));
        let (filters, resolved, allowed) = if self.use_filters {
            let filters = self.extractor.extract(&cleaned)?;
            let sub = filters.subcategory.unwrap_or(Subcategory::CellPhones);
            let resolved = resolve_thresholds(&filters, self.thresholds, sub)?;
            let allowed: IdSet = preselect_ids(&resolved, self.catalog);
            (filters, Some(resolved), Some(allowed))
        } else {
            (StructuredFilters::default(), None, None)
        };

        let mut query = hash_embed(&cleaned, self.index.dim());
        if let Some(a) = self.adapter {
            query = adapt(&query, a)?;
        }
        let result = self.index.search(&SearchRequest {
            query: &query,
            k,
            nprobe,
            allowed_ids: allowed.as_ref(),
        })?;
        Ok(QueryOutcome {
            filters,
            resolved,
            allowed: allowed.map(|a| a.len()),
            result,
        })
    }

    pub fn asins(&self, result: &QueryResult) -> Vec<String> {
        result
            .hits
            .iter()
            .filter_map(|h| self.catalog.get(h.id))
            .map(|r| r.asin.clone())
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QueryMetrics {
    pub query: String,
    pub relevant: usize,
    pub retrieved: Vec<String>,
    pub precision: Vec<f64>,
    pub recall: Vec<f64>,
}

/// Mean precision@k and recall@k per requested `k`, macro-averaged over
/// queries, plus the per-query rows they came from.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ks: Vec<usize>,
    pub mean_precision: Vec<f64>,
    pub mean_recall: Vec<f64>,
    pub queries: Vec<QueryMetrics>,
}

impl MetricsReport {
    pub fn from_queries(ks: &[usize], queries: Vec<QueryMetrics>) -> Self {
        let n = queries.len().max(1) as f64;
        let mean = |pick: fn(&QueryMetrics) -> &[f64], i: usize| queries.iter().map(|q| pick(q)[i]).sum::<f64>() / n;
        let mean_precision = (0..ks.len()).map(|i| mean(|q| &q.precision, i)).collect();
        let mean_recall = (0..ks.len()).map(|i| mean(|q| &q.recall, i)).collect();
        Self {
            ks: ks.to_vec(),
            mean_precision,
            mean_recall,
            queries,
        }
    }

    pub fn precision_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean_precision[i])
    }

    pub fn recall_at(&self, k: usize) -> Option<f64> {
        self.ks.iter().position(|&x| x == k).map(|i| self.mean_recall[i])
    }

    /// One row per `k`.
    pub fn to_table(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "{:>4}  {:>9}  {:>9}", "k", "precision", "recall");
        for (i, k) in self.ks.iter().enumerate() {
            let _ = writeln!(out, "{k:>4}  {:>9.4}  {:>9.4}", self.mean_precision[i], self.mean_recall[i]);
        }
        let _ = writeln!(out, "({} queries)", self.queries.len());
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }
}

/// Runs every judged query through `engine` and scores the top
/// `max(ks)` hits. Queries run in parallel; the report keeps judgment order.
pub fn run_benchmark(
    engine: &SearchEngine<'_>,
    judgments: &Judgments,
    ks: &[usize],
    nprobe: Option<usize>,
) -> Result<MetricsReport, EngineError> {
    judgments.check_against(engine.catalog())?;
    if ks.contains(&0) || ks.is_empty() {
        return Err(IndexError::InvalidK.into());
    }
    let depth = *ks.iter().max().expect("ks is non-empty");
    let rows: Vec<QueryMetrics> = judgments
        .entries
        .par_iter()
        .map(|(query, relevant)| {
            let outcome = engine.run_query(query, depth, nprobe)?;
            let retrieved = engine.asins(&outcome.result);
            let relevant: HashSet<String> = relevant.iter().cloned().collect();
            let precision = ks.iter().map(|&k| precision_at_k(&retrieved, &relevant, k)).collect();
            let recall = ks
                .iter()
                .map(|&k| recall_at_k(&retrieved, &relevant, k))
                .collect::<Result<_, _>>()?;
            Ok(QueryMetrics {
                query: query.clone(),
                relevant: relevant.len(),
                retrieved,
                precision,
                recall,
            })
        })
        .collect::<Result<_, EngineError>>()?;
    Ok(MetricsReport::from_queries(ks, rows))
}
