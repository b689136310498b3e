//! IVF-Flat vector index.
//!
//! Vectors are routed to the inverted list of their best coarse centroid and
//! stored uncompressed. A query visits the `nprobe` lists whose centroids
//! score highest against it and scores every (allowed) vector inside them by
//! inner product. Restricting by an ID set happens inside the list scan, so a
//! filter never truncates the top-k after the fact.

mod kmeans;
mod persist;

use std::cmp::Ordering;
use std::collections::{BTreeSet, BinaryHeap, HashSet};

use thiserror::Error;

pub use kmeans::{train_centroids, DEFAULT_MAX_ITERS};
pub use persist::{INDEX_MAGIC, INDEX_VERSION};

use crate::embedder::{dot, EmbeddingVector, VectorSet};

/// Allowed-ID restriction for a search.
pub type IdSet = BTreeSet<u64>;

#[derive(Debug, Error)]
pub enum IndexError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("duplicate id {0}")]
    DuplicateId(u64),
    #[error("need at least {need} training vectors, have {have}")]
    TooFewVectors { have: usize, need: usize },
    #[error("nprobe {nprobe} outside 1..={nlist}")]
    NprobeOutOfRange { nprobe: usize, nlist: usize },
    #[error("k must be at least 1")]
    InvalidK,
    #[error("{ids} ids for {vectors} vectors")]
    LengthMismatch { ids: usize, vectors: usize },
    #[error("centroids must be finite and non-empty")]
    InvalidCentroids,
    #[error("index built with embedding scheme {index}, query uses scheme {query}")]
    SchemeMismatch { index: u32, query: u32 },
    #[error("corrupt index file: {0}")]
    CorruptFile(String),
    #[error("unsupported index version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// `ceil(sqrt(n))`, clamped to `[1, 4096]`.
pub fn default_nlist(n: usize) -> usize {
    ((n as f64).sqrt().ceil() as usize).clamp(1, 4096)
}

/// `ceil(nlist / 8)`.
pub fn default_nprobe(nlist: usize) -> usize {
    nlist.div_ceil(8).max(1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Centroids {
    dim: usize,
    rows: Vec<Vec<f32>>,
}

impl Centroids {
    pub fn new(dim: usize, rows: Vec<Vec<f32>>) -> Result<Self, IndexError> {
        if rows.is_empty() {
            return Err(IndexError::InvalidCentroids);
        }
        for r in &rows {
            if r.len() != dim {
                return Err(IndexError::DimensionMismatch {
                    expected: dim,
                    got: r.len(),
                });
            }
            if r.iter().any(|x| !x.is_finite()) {
                return Err(IndexError::InvalidCentroids);
            }
        }
        Ok(Self { dim, rows })
    }

    pub fn nlist(&self) -> usize {
        self.rows.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn get(&self, i: usize) -> &[f32] {
        &self.rows[i]
    }

    pub fn rows(&self) -> &[Vec<f32>] {
        &self.rows
    }

    /// List index with the highest inner product; lowest index wins ties.
    fn route(&self, v: &[f32]) -> usize {
        let mut best = (0, f32::NEG_INFINITY);
        for (i, c) in self.rows.iter().enumerate() {
            let s = dot(v, c);
            if s > best.1 {
                best = (i, s);
            }
        }
        best.0
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub(crate) struct InvertedList {
    ids: Vec<u64>,
    /// `ids.len() * dim` values, row-major.
    vectors: Vec<f32>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Hit {
    pub id: u64,
    pub score: f32,
}

impl Hit {
    /// Higher score first, then lower id.
    fn rank_cmp(&self, other: &Self) -> Ordering {
        other.score.total_cmp(&self.score).then(self.id.cmp(&other.id))
    }
}

/// Heap entry whose maximum is the worst hit retained.
struct Worst(Hit);

impl PartialEq for Worst {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Worst {}
impl PartialOrd for Worst {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Worst {
    fn cmp(&self, other: &Self) -> Ordering {
        self.0.rank_cmp(&other.0)
    }
}

struct TopK {
    k: usize,
    heap: BinaryHeap<Worst>,
}

impl TopK {
    fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    fn offer(&mut self, hit: Hit) {
        if self.heap.len() < self.k {
            self.heap.push(Worst(hit));
        } else if let Some(worst) = self.heap.peek() {
            if hit.rank_cmp(&worst.0) == Ordering::Less {
                self.heap.pop();
                self.heap.push(Worst(hit));
            }
        }
    }

    fn finish(self) -> QueryResult {
        let mut hits: Vec<Hit> = self.heap.into_iter().map(|w| w.0).collect();
        hits.sort_by(Hit::rank_cmp);
        QueryResult { hits }
    }
}

/// Ranked hits: descending score, ascending id on ties.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct QueryResult {
    pub hits: Vec<Hit>,
}

impl QueryResult {
    pub fn ids(&self) -> Vec<u64> {
        self.hits.iter().map(|h| h.id).collect()
    }

    pub fn len(&self) -> usize {
        self.hits.len()
    }

    pub fn is_empty(&self) -> bool {
        self.hits.is_empty()
    }
}

#[derive(Debug, Clone, Copy)]
pub struct SearchRequest<'a> {
    pub query: &'a EmbeddingVector,
    pub k: usize,
    pub nprobe: usize,
    pub allowed_ids: Option<&'a IdSet>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IvfIndex {
    dim: usize,
    scheme_version: u32,
    centroids: Centroids,
    lists: Vec<InvertedList>,
    total_count: usize,
}

impl IvfIndex {
    /// Routes every vector to its best centroid (by inner product).
    pub fn build(
        vectors: &[EmbeddingVector],
        ids: &[u64],
        centroids: Centroids,
        scheme_version: u32,
    ) -> Result<Self, IndexError> {
        if vectors.len() != ids.len() {
            return Err(IndexError::LengthMismatch {
                ids: ids.len(),
                vectors: vectors.len(),
            });
        }
        let dim = centroids.dim();
        let mut seen = HashSet::with_capacity(ids.len());
        let mut lists = vec![InvertedList::default(); centroids.nlist()];
        for (v, &id) in vectors.iter().zip(ids) {
            if v.dim() != dim {
                return Err(IndexError::DimensionMismatch {
                    expected: dim,
                    got: v.dim(),
                });
            }
            if !seen.insert(id) {
                return Err(IndexError::DuplicateId(id));
            }
            let list = &mut lists[centroids.route(v.as_slice())];
            list.ids.push(id);
            list.vectors.extend_from_slice(v.as_slice());
        }
        Ok(Self {
            dim,
            scheme_version,
            centroids,
            lists,
            total_count: ids.len(),
        })
    }

    /// Trains centroids on a seeded random sample of `set` and builds the
    /// index. `nlist` defaults to [`default_nlist`]; an empty set yields an
    /// empty single-list index.
    pub fn train_and_build(
        set: &VectorSet,
        nlist: Option<usize>,
        seed: u64,
        scheme_version: u32,
    ) -> Result<Self, IndexError> {
        if set.is_empty() {
            let centroids = Centroids::new(set.dim, vec![vec![0.0; set.dim]])?;
            return Self::build(&[], &[], centroids, scheme_version);
        }
        let nlist = nlist.unwrap_or_else(|| default_nlist(set.len()));
        let sample = training_sample(&set.vectors, nlist, seed);
        let centroids = train_centroids(&sample, nlist, seed, DEFAULT_MAX_ITERS)?;
        Self::build(&set.vectors, &set.ids, centroids, scheme_version)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nlist(&self) -> usize {
        self.centroids.nlist()
    }

    pub fn scheme_version(&self) -> u32 {
        self.scheme_version
    }

    pub fn len(&self) -> usize {
        self.total_count
    }

    pub fn is_empty(&self) -> bool {
        self.total_count == 0
    }

    pub fn centroids(&self) -> &Centroids {
        &self.centroids
    }

    pub fn list_sizes(&self) -> Vec<usize> {
        self.lists.iter().map(|l| l.ids.len()).collect()
    }

    pub fn list_ids(&self, list: usize) -> &[u64] {
        &self.lists[list].ids
    }

    /// Looks up the stored vector for `id` (linear scan).
    pub fn vector(&self, id: u64) -> Option<&[f32]> {
        self.lists.iter().find_map(|l| {
            l.ids
                .iter()
                .position(|&x| x == id)
                .map(|p| &l.vectors[p * self.dim..(p + 1) * self.dim])
        })
    }

    /// Lists to visit for `query`, best first.
    fn probe_order(&self, query: &[f32], nprobe: usize) -> Vec<usize> {
        let mut scored: Vec<(usize, f32)> = self
            .centroids
            .rows()
            .iter()
            .enumerate()
            .map(|(i, c)| (i, dot(query, c)))
            .collect();
        scored.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        scored.truncate(nprobe);
        scored.into_iter().map(|(i, _)| i).collect()
    }

    pub fn search(&self, req: &SearchRequest<'_>) -> Result<QueryResult, IndexError> {
        if req.query.dim() != self.dim {
            return Err(IndexError::DimensionMismatch {
                expected: self.dim,
                got: req.query.dim(),
            });
        }
        if req.k == 0 {
            return Err(IndexError::InvalidK);
        }
        if req.nprobe == 0 || req.nprobe > self.nlist() {
            return Err(IndexError::NprobeOutOfRange {
                nprobe: req.nprobe,
                nlist: self.nlist(),
            });
        }
        if req.allowed_ids.is_some_and(|a| a.is_empty()) {
            return Ok(QueryResult::default());
        }
        let q = req.query.as_slice();
        let mut top = TopK::new(req.k);
        for list in self.probe_order(q, req.nprobe) {
            let list = &self.lists[list];
            for (pos, &id) in list.ids.iter().enumerate() {
                if req.allowed_ids.is_some_and(|a| !a.contains(&id)) {
                    continue;
                }
                let v = &list.vectors[pos * self.dim..(pos + 1) * self.dim];
                top.offer(Hit { id, score: dot(q, v) });
            }
        }
        Ok(top.finish())
    }
}

fn training_sample(vectors: &[EmbeddingVector], nlist: usize, seed: u64) -> Vec<EmbeddingVector> {
    use rand::seq::index::sample;
    use rand::SeedableRng;
    // Enough points per list for stable means without clustering the whole corpus.
    let cap = (64 * nlist).max(nlist);
    if vectors.len() <= cap {
        return vectors.to_vec();
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed.wrapping_add(1));
    let mut picked = sample(&mut rng, vectors.len(), cap).into_vec();
    picked.sort_unstable();
    picked.into_iter().map(|i| vectors[i].clone()).collect()
}

/// Brute-force scan with the same scoring and ordering as
/// [`IvfIndex::search`].
pub fn exact_search(
    vectors: &[EmbeddingVector],
    ids: &[u64],
    query: &EmbeddingVector,
    k: usize,
    allowed_ids: Option<&IdSet>,
) -> Result<QueryResult, IndexError> {
    if vectors.len() != ids.len() {
        return Err(IndexError::LengthMismatch {
            ids: ids.len(),
            vectors: vectors.len(),
        });
    }
    if k == 0 {
        return Err(IndexError::InvalidK);
    }
    let mut top = TopK::new(k);
    for (v, &id) in vectors.iter().zip(ids) {
        if v.dim() != query.dim() {
            return Err(IndexError::DimensionMismatch {
                expected: query.dim(),
                got: v.dim(),
            });
        }
        if allowed_ids.is_some_and(|a| !a.contains(&id)) {
            continue;
        }
        top.offer(Hit {
            id,
            score: dot(query.as_slice(), v.as_slice()),
        });
    }
    Ok(top.finish())
}

#[cfg(test)]
mod tests;
