//! Contrastive training of the embedding adapter with in-batch negatives.
//!
//! Each batch holds `K` (query, product) pairs. Row `i` of the score matrix
//! compares query `i` with every product in the batch; the matching product
//! sits on the diagonal and the other `K - 1` act as negatives. The loss is
//! the mean softmax cross-entropy of the diagonal:
//!
//! ```text
//! J = -(1/K) * sum_i [ S_ii - log sum_j exp(S_ij) ]
//! ```

use std::collections::{HashSet, VecDeque};
use std::io::BufRead;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::catalog::{clean_text, merge_product_text, CatalogTable, ProductRecord};
use crate::embedder::{hash_embed, tokenize, AdapterParams, EmbeddingVector, DEFAULT_DIM};

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("score matrix is not square: row {row} has {len} entries, expected {expected}")]
    NonSquare { row: usize, len: usize, expected: usize },
    #[error("no training pairs")]
    EmptyTrainingSet,
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error("training pair refers to unknown product id {0}")]
    UnknownProduct(u64),
    #[error("pairs file line {line}: {reason}")]
    MalformedPairs { line: usize, reason: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TrainingPair {
    pub query: String,
    pub product_id: u64,
}

impl TrainingPair {
    pub fn new(query: impl AsRef<str>, product_id: u64) -> Self {
        Self {
            query: clean_text(query.as_ref()),
            product_id,
        }
    }
}

/// Pairs with pairwise-distinct products and pairwise-distinct queries.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingBatch {
    pub pairs: Vec<TrainingPair>,
}

impl TrainingBatch {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn is_conflict_free(&self) -> bool {
        let mut products = HashSet::new();
        let mut queries = HashSet::new();
        self.pairs
            .iter()
            .all(|p| products.insert(p.product_id) && queries.insert(p.query.as_str()))
    }
}

/// Square matrix of query/product scores, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreMatrix {
    k: usize,
    values: Vec<f64>,
}

impl ScoreMatrix {
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self, TrainError> {
        let k = rows.len();
        let mut values = Vec::with_capacity(k * k);
        for (row, r) in rows.into_iter().enumerate() {
            if r.len() != k {
                return Err(TrainError::NonSquare {
                    row,
                    len: r.len(),
                    expected: k,
                });
            }
            values.extend(r);
        }
        Ok(Self { k, values })
    }

    fn from_flat(k: usize, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), k * k);
        Self { k, values }
    }

    pub fn size(&self) -> usize {
        self.k
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.k + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.k..(i + 1) * self.k]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self::from_flat(self.k, self.values.iter().map(|&v| f(v)).collect())
    }
}

fn log_sum_exp(row: &[f64]) -> f64 {
    let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + row.iter().map(|v| (v - max).exp()).sum::<f64>().ln()
}

/// Mean negative log-likelihood of the diagonal under row-wise softmax.
pub fn mnrl_loss(s: &ScoreMatrix) -> f64 {
    let k = s.size();
    if k == 0 {
        return 0.0;
    }
    let total: f64 = (0..k).map(|i| s.get(i, i) - log_sum_exp(s.row(i))).sum();
    -total / k as f64
}

/// Gradient of [`mnrl_loss`] with respect to every score:
/// `(softmax(S_i)_j - [i == j]) / K`.
pub fn mnrl_grad(s: &ScoreMatrix) -> ScoreMatrix {
    let k = s.size();
    let mut out = Vec::with_capacity(k * k);
    for i in 0..k {
        let row = s.row(i);
        let lse = log_sum_exp(row);
        for (j, &v) in row.iter().enumerate() {
            let p = (v - lse).exp();
            let target = if i == j { 1.0 } else { 0.0 };
            out.push((p - target) / k as f64);
        }
    }
    ScoreMatrix::from_flat(k, out)
}

/// Shuffles `pairs` and packs them into batches of `k` with no repeated
/// product or query inside a batch.
///
/// A pair that conflicts with the batch being filled is deferred to a later
/// batch. Short batches of at least two pairs are kept; a lone leftover pair
/// is dropped (it would carry no negatives).
pub fn make_batches(pairs: &[TrainingPair], k: usize, seed: u64) -> Vec<TrainingBatch> {
    assert!(k >= 2, "batch size must be at least 2");
    let mut order: Vec<&TrainingPair> = pairs.iter().collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let mut pending: VecDeque<&TrainingPair> = order.into();
    let mut batches = Vec::new();

    while !pending.is_empty() {
        let mut batch: Vec<TrainingPair> = Vec::with_capacity(k);
        let mut products = HashSet::new();
        let mut queries: HashSet<&str> = HashSet::new();
        let mut deferred = VecDeque::new();
        while let Some(p) = pending.pop_front() {
            if !products.contains(&p.product_id) && !queries.contains(p.query.as_str()) {
                products.insert(p.product_id);
                queries.insert(p.query.as_str());
                batch.push(p.clone());
                if batch.len() == k {
                    break;
                }
            } else {
                deferred.push_back(p);
            }
        }
        deferred.extend(pending.drain(..));
        pending = deferred;
        if batch.len() >= 2 {
            batches.push(TrainingBatch { pairs: batch });
        }
    }
    batches
}

const STOPWORDS: &[&str] = &[
    "a", "an", "the", "for", "with", "and", "of", "to", "in", "on", "by", "or", "is", "this",
    "that", "from", "your", "you", "it", "its", "as", "at", "be", "are",
];

fn content_tokens(text: &str) -> Vec<String> {
    tokenize(text)
        .into_iter()
        .filter(|t| !STOPWORDS.contains(t))
        .map(str::to_string)
        .collect()
}

fn random_span(tokens: &[String], rng: &mut ChaCha8Rng, min: usize, max: usize) -> String {
    if tokens.is_empty() {
        return String::new();
    }
    let len = rng.gen_range(min..=max).min(tokens.len()).max(1);
    let start = rng.gen_range(0..=tokens.len() - len);
    tokens[start..start + len].join(" ")
}

/// Generates `n` distinct constraint-free queries for a product from its
/// own wording.
///
/// Four template families are used: a title lookup, "i am looking for a
/// {noun} with {feature}", "best {noun} for {use}" and a brand/feature
/// shorthand. `{noun}` always comes from the title, so every query shares
/// at least one content word with it.
pub fn synth_queries(record: &ProductRecord, n: usize, seed: u64) -> Vec<String> {
    assert!(n >= 1, "need at least one query");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut title = content_tokens(&clean_text(&record.title));
    if title.is_empty() {
        title = content_tokens(&merge_product_text(record));
    }
    let features = {
        let f = content_tokens(&clean_text(&record.features));
        if f.is_empty() { title.clone() } else { f }
    };
    let uses = {
        let d = content_tokens(&clean_text(&record.description));
        if d.is_empty() { features.clone() } else { d }
    };
    // Head noun: last alphabetic title word, else last title word.
    let nouns: Vec<&String> = title
        .iter()
        .filter(|t| t.chars().all(|c| c.is_ascii_alphabetic()) && t.len() > 2)
        .collect();

    let mut out: Vec<String> = Vec::with_capacity(n);
    let mut attempts = 0;
    while out.len() < n && attempts < 64 * n && !title.is_empty() {
        attempts += 1;
        let noun = if nouns.is_empty() || rng.gen_bool(0.2) {
            title[rng.gen_range(0..title.len())].clone()
        } else if rng.gen_bool(0.6) {
            nouns[nouns.len() - 1].clone()
        } else {
            nouns[rng.gen_range(0..nouns.len())].clone()
        };
        let q = match rng.gen_range(0..4) {
            0 => random_span(&title, &mut rng, 2, 6),
            1 => format!(
                "i am looking for a {noun} with {}",
                random_span(&features, &mut rng, 1, 4)
            ),
            2 => format!("best {noun} for {}", random_span(&uses, &mut rng, 1, 3)),
            _ => format!("{} {noun} {}", title[0], random_span(&features, &mut rng, 1, 3)),
        };
        let q = clean_text(&q);
        if !q.is_empty() && !out.contains(&q) {
            out.push(q);
        }
    }
    let base = if title.is_empty() { "product".to_string() } else { title.join(" ") };
    let mut i = 1;
    while out.len() < n {
        let q = format!("{base} option {i}");
        if !out.contains(&q) {
            out.push(q);
        }
        i += 1;
    }
    out
}

/// Reads `query<TAB>asin` lines into pairs, resolving asins against the
/// catalog.
pub fn read_pairs<R: BufRead>(input: R, catalog: &CatalogTable) -> Result<Vec<TrainingPair>, TrainError> {
    let mut pairs = Vec::new();
    for (idx, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (query, asin) = line.split_once('\t').ok_or_else(|| TrainError::MalformedPairs {
            line: idx + 1,
            reason: "expected query<TAB>asin".into(),
        })?;
        let id = catalog.id_of(asin.trim()).ok_or_else(|| TrainError::MalformedPairs {
            line: idx + 1,
            reason: format!("unknown asin {:?}", asin.trim()),
        })?;
        pairs.push(TrainingPair::new(query, id));
    }
    Ok(pairs)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub epochs: usize,
    pub seed: u64,
    /// Multiplies similarities before the loss.
    pub temperature: f64,
    pub dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            batch_size: 32,
            learning_rate: 0.5,
            epochs: 10,
            seed: 0,
            temperature: 20.0,
            dim: DEFAULT_DIM,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::InvalidConfig(m.to_string()));
        if self.batch_size < 2 {
            return bad("batch size must be >= 2");
        }
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be finite and non-negative");
        }
        if !(self.temperature > 0.0 && self.temperature.is_finite()) {
            return bad("temperature must be positive");
        }
        if self.dim < 8 {
            return bad("dimension must be >= 8");
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub params: AdapterParams,
    /// Mean batch loss per epoch.
    pub epoch_losses: Vec<f64>,
}

fn to_f64(v: &EmbeddingVector) -> Vec<f64> {
    v.as_slice().iter().map(|&x| f64::from(x)).collect()
}

/// Forward pass of one side: `z = M x`, `u = z / |z|`.
struct Projected {
    unit: Vec<f64>,
    norm: f64,
}

fn project(m: &[f64], d: usize, x: &[f64]) -> Projected {
    let z: Vec<f64> = m
        .chunks_exact(d)
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect();
    let norm = z.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Projected { unit: x.to_vec(), norm: 0.0 };
    }
    Projected {
        unit: z.iter().map(|v| v / norm).collect(),
        norm,
    }
}

/// Adds `d(loss)/dM` for one projected vector given `d(loss)/du` into `grad`.
fn backprop_into(grad: &mut [f64], d: usize, p: &Projected, x: &[f64], gu: &[f64]) {
    if p.norm == 0.0 {
        return;
    }
    let ug: f64 = p.unit.iter().zip(gu).map(|(a, b)| a * b).sum();
    for r in 0..d {
        let dz = (gu[r] - p.unit[r] * ug) / p.norm;
        if dz != 0.0 {
            let row = &mut grad[r * d..(r + 1) * d];
            for (g, xc) in row.iter_mut().zip(x) {
                *g += dz * xc;
            }
        }
    }
}

/// Loss of one batch and its gradient with respect to the adapter matrix.
pub(crate) fn batch_loss_and_grad(
    m: &[f64],
    d: usize,
    queries: &[&[f64]],
    products: &[&[f64]],
    temperature: f64,
) -> (f64, Vec<f64>) {
    let k = queries.len();
    let uq: Vec<Projected> = queries.iter().map(|x| project(m, d, x)).collect();
    let up: Vec<Projected> = products.iter().map(|x| project(m, d, x)).collect();
    let mut scores = Vec::with_capacity(k * k);
    for q in &uq {
        for p in &up {
            let s: f64 = q.unit.iter().zip(&p.unit).map(|(a, b)| a * b).sum();
            scores.push(temperature * s);
        }
    }
    let s = ScoreMatrix::from_flat(k, scores);
    let loss = mnrl_loss(&s);
    let g = mnrl_grad(&s);

    let mut grad = vec![0.0; d * d];
    for i in 0..k {
        let mut gu = vec![0.0; d];
        for j in 0..k {
            let c = temperature * g.get(i, j);
            for (a, b) in gu.iter_mut().zip(&up[j].unit) {
                *a += c * b;
            }
        }
        backprop_into(&mut grad, d, &uq[i], queries[i], &gu);
    }
    for j in 0..k {
        let mut gw = vec![0.0; d];
        for i in 0..k {
            let c = temperature * g.get(i, j);
            for (a, b) in gw.iter_mut().zip(&uq[i].unit) {
                *a += c * b;
            }
        }
        backprop_into(&mut grad, d, &up[j], products[j], &gw);
    }
    (loss, grad)
}

/// Fits the adapter matrix by plain gradient descent, starting from the
/// identity.
///
/// Epoch `e` batches with seed `config.seed + e`, so pairs dropped as a
/// remainder in one epoch are reshuffled into the next.
pub fn train_adapter(
    catalog: &CatalogTable,
    pairs: &[TrainingPair],
    config: &TrainConfig,
) -> Result<TrainOutcome, TrainError> {
    config.validate()?;
    if pairs.is_empty() {
        return Err(TrainError::EmptyTrainingSet);
    }
    let d = config.dim;
    let mut product_vecs = std::collections::HashMap::new();
    for p in pairs {
        if let std::collections::hash_map::Entry::Vacant(slot) = product_vecs.entry(p.product_id) {
            let rec = catalog.get(p.product_id).ok_or(TrainError::UnknownProduct(p.product_id))?;
            slot.insert(to_f64(&hash_embed(&merge_product_text(rec), d)));
        }
    }
    let mut query_vecs = std::collections::HashMap::new();
    for p in pairs {
        query_vecs
            .entry(p.query.as_str())
            .or_insert_with(|| to_f64(&hash_embed(&p.query, d)));
    }

    let mut m: Vec<f64> = AdapterParams::identity(d)
        .as_row_major()
        .iter()
        .map(|&v| f64::from(v))
        .collect();
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    for epoch in 0..config.epochs {
        let batches = make_batches(pairs, config.batch_size, config.seed.wrapping_add(epoch as u64));
        let mut total = 0.0;
        for batch in &batches {
            let qs: Vec<&[f64]> = batch.pairs.iter().map(|p| query_vecs[p.query.as_str()].as_slice()).collect();
            let ps: Vec<&[f64]> = batch.pairs.iter().map(|p| product_vecs[&p.product_id].as_slice()).collect();
            let (loss, grad) = batch_loss_and_grad(&m, d, &qs, &ps, config.temperature);
            total += loss;
            if config.learning_rate > 0.0 {
                for (w, g) in m.iter_mut().zip(&grad) {
                    *w -= config.learning_rate * g;
                }
            }
        }
        let mean = if batches.is_empty() { 0.0 } else { total / batches.len() as f64 };
        log::debug!("epoch {epoch}: mean loss {mean:.6} over {} batches", batches.len());
        epoch_losses.push(mean);
    }
    let params = AdapterParams::from_row_major(d, m.iter().map(|&v| v as f32).collect())
        .map_err(|e| TrainError::InvalidConfig(format!("training diverged: {e}")))?;
    Ok(TrainOutcome { params, epoch_losses })
}
