//! Deterministic text embeddings and the trainable linear adapter.
//!
//! Texts are embedded with signed feature hashing over whitespace tokens and
//! adjacent-token bigrams. Vectors are unit-norm, so inner product is cosine
//! similarity. [`AdapterParams`] is a square matrix applied on top of the
//! hashed vectors; it is the part the contrastive trainer fits.

use std::hash::Hasher;
use std::io::{Read, Write};

use fnv::FnvHasher;
use thiserror::Error;

use crate::binio::{put_f32s, LeReader, ReadFail};
use crate::catalog::{merge_product_text, CatalogTable};

pub const DEFAULT_DIM: usize = 256;

/// Identifies the hashing scheme below. Stored with every index so vectors
/// produced by different schemes are never compared.
pub const HASH_SCHEME_VERSION: u32 = 1;

/// Scheme tag for vectors imported from an external model.
pub const EXTERNAL_SCHEME_VERSION: u32 = 0;

const UNIGRAM_WEIGHT: f64 = 1.0;
const BIGRAM_WEIGHT: f64 = 0.5;

pub const VECTORS_MAGIC: [u8; 8] = *b"FSEMBVEC";
pub const VECTORS_VERSION: u32 = 1;
pub const ADAPTER_MAGIC: [u8; 8] = *b"FSADAPTR";
pub const ADAPTER_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum EmbedError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("corrupt file: {0}")]
    CorruptFile(String),
    #[error("unsupported file version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl From<ReadFail> for EmbedError {
    fn from(f: ReadFail) -> Self {
        match f {
            ReadFail::Truncated(what) => EmbedError::CorruptFile(format!("truncated {what}")),
            ReadFail::Io(e) => EmbedError::Io(e),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingVector(Vec<f32>);

impl EmbeddingVector {
    /// Wraps raw values, L2-normalizing them. Zero or non-finite input
    /// yields `None`.
    pub fn normalized(values: Vec<f32>) -> Option<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let norm = values.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt();
        if norm < 1e-12 {
            return None;
        }
        Some(Self(values.iter().map(|&v| (f64::from(v) / norm) as f32).collect()))
    }

    /// Standard basis vector `e_i` of dimension `d`.
    pub fn basis(d: usize, i: usize) -> Self {
        let mut v = vec![0.0; d];
        v[i] = 1.0;
        Self(v)
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f32> {
        self.0
    }

    pub fn norm(&self) -> f64 {
        self.0.iter().map(|&v| f64::from(v) * f64::from(v)).sum::<f64>().sqrt()
    }
}

/// Inner product accumulated left to right in `f32`.
///
/// Every scoring path in the crate goes through this function so that
/// exact and partitioned search produce bit-identical scores.
#[inline]
pub fn dot(a: &[f32], b: &[f32]) -> f32 {
    a.iter().zip(b).fold(0.0f32, |acc, (x, y)| acc + x * y)
}

pub fn similarity(a: &EmbeddingVector, b: &EmbeddingVector) -> Result<f32, EmbedError> {
    if a.dim() != b.dim() {
        return Err(EmbedError::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(dot(a.as_slice(), b.as_slice()))
}

fn feature_hash(kind: u8, parts: &[&str]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(&[kind]);
    for (i, p) in parts.iter().enumerate() {
        if i > 0 {
            h.write(b" ");
        }
        h.write(p.as_bytes());
    }
    h.finish()
}

/// Splits on whitespace and trims punctuation from token edges.
pub fn tokenize(text: &str) -> Vec<&str> {
    text.split_whitespace()
        .map(|t| t.trim_matches(|c: char| !c.is_ascii_alphanumeric()))
        .filter(|t| !t.is_empty())
        .collect()
}

/// Signed feature-hashing embedding of already-cleaned text.
///
/// Each token and each adjacent token pair selects a coordinate (`hash % d`)
/// and a sign (top hash bit). Empty text, or text whose features cancel out,
/// maps to `e_0`.
///
/// Panics if `d < 8`.
pub fn hash_embed(text: &str, d: usize) -> EmbeddingVector {
    assert!(d >= 8, "embedding dimension must be at least 8, got {d}");
    let tokens = tokenize(text);
    let mut acc = vec![0.0f64; d];
    let mut add = |h: u64, w: f64| {
        let idx = (h % d as u64) as usize;
        let sign = if h >> 63 == 0 { 1.0 } else { -1.0 };
        acc[idx] += sign * w;
    };
    for t in &tokens {
        add(feature_hash(b'u', &[t]), UNIGRAM_WEIGHT);
    }
    for pair in tokens.windows(2) {
        add(feature_hash(b'b', pair), BIGRAM_WEIGHT);
    }
    let norm = acc.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return EmbeddingVector::basis(d, 0);
    }
    EmbeddingVector(acc.iter().map(|v| (v / norm) as f32).collect())
}

/// Square `d x d` matrix, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct AdapterParams {
    dim: usize,
    matrix: Vec<f32>,
}

impl AdapterParams {
    pub fn identity(d: usize) -> Self {
        let mut matrix = vec![0.0; d * d];
        for i in 0..d {
            matrix[i * d + i] = 1.0;
        }
        Self { dim: d, matrix }
    }

    /// Row-major matrix. Fails unless `matrix.len() == d * d` and all entries
    /// are finite.
    pub fn from_row_major(d: usize, matrix: Vec<f32>) -> Result<Self, EmbedError> {
        if matrix.len() != d * d {
            return Err(EmbedError::DimensionMismatch {
                expected: d * d,
                got: matrix.len(),
            });
        }
        if matrix.iter().any(|v| !v.is_finite()) {
            return Err(EmbedError::CorruptFile("non-finite adapter entry".into()));
        }
        Ok(Self { dim: d, matrix })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_row_major(&self) -> &[f32] {
        &self.matrix
    }

    pub fn is_identity(&self) -> bool {
        *self == Self::identity(self.dim)
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), EmbedError> {
        out.write_all(&ADAPTER_MAGIC)?;
        out.write_all(&ADAPTER_VERSION.to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        put_f32s(&mut out, &self.matrix)?;
        Ok(())
    }

    pub fn read_from<R: Read>(input: R) -> Result<Self, EmbedError> {
        let mut r = LeReader::new(input);
        if r.bytes::<8>("magic")? != ADAPTER_MAGIC {
            return Err(EmbedError::CorruptFile("bad adapter magic".into()));
        }
        let version = r.u32("version")?;
        if version != ADAPTER_VERSION {
            return Err(EmbedError::VersionMismatch {
                expected: ADAPTER_VERSION,
                found: version,
            });
        }
        let d = r.u32("dimension")? as usize;
        if d == 0 || d > 1 << 14 {
            return Err(EmbedError::CorruptFile(format!("implausible dimension {d}")));
        }
        let matrix = r.f32s(d * d, "matrix")?;
        if !r.at_eof()? {
            return Err(EmbedError::CorruptFile("trailing bytes after matrix".into()));
        }
        Self::from_row_major(d, matrix)
    }
}

/// `normalize(M v)`, or `v` itself when `M v` is (numerically) zero.
pub fn adapt(v: &EmbeddingVector, p: &AdapterParams) -> Result<EmbeddingVector, EmbedError> {
    let d = p.dim;
    if v.dim() != d {
        return Err(EmbedError::DimensionMismatch {
            expected: d,
            got: v.dim(),
        });
    }
    let x = v.as_slice();
    let w: Vec<f64> = p
        .matrix
        .chunks_exact(d)
        .map(|row| row.iter().zip(x).map(|(&m, &xi)| f64::from(m) * f64::from(xi)).sum())
        .collect();
    let norm = w.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm < 1e-12 {
        return Ok(v.clone());
    }
    Ok(EmbeddingVector(w.iter().map(|v| (v / norm) as f32).collect()))
}

/// Id-tagged vectors as stored in an embeddings file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct VectorSet {
    pub dim: usize,
    pub ids: Vec<u64>,
    pub vectors: Vec<EmbeddingVector>,
}

impl VectorSet {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Self::default()
        }
    }

    pub fn push(&mut self, id: u64, v: EmbeddingVector) -> Result<(), EmbedError> {
        if v.dim() != self.dim {
            return Err(EmbedError::DimensionMismatch {
                expected: self.dim,
                got: v.dim(),
            });
        }
        self.ids.push(id);
        self.vectors.push(v);
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    /// Header `(magic, version, d, count)` then `count` records of
    /// `(u64 id, d x f32)`, all little-endian.
    pub fn write_to<W: Write>(&self, mut out: W) -> Result<(), EmbedError> {
        out.write_all(&VECTORS_MAGIC)?;
        out.write_all(&VECTORS_VERSION.to_le_bytes())?;
        out.write_all(&(self.dim as u32).to_le_bytes())?;
        out.write_all(&(self.ids.len() as u64).to_le_bytes())?;
        for (id, v) in self.ids.iter().zip(&self.vectors) {
            out.write_all(&id.to_le_bytes())?;
            put_f32s(&mut out, v.as_slice())?;
        }
        Ok(())
    }

    /// Reads an embeddings file, normalizing every vector on load.
    pub fn read_from<R: Read>(input: R) -> Result<Self, EmbedError> {
        let mut r = LeReader::new(input);
        if r.bytes::<8>("magic")? != VECTORS_MAGIC {
            return Err(EmbedError::CorruptFile("bad embeddings magic".into()));
        }
        let version = r.u32("version")?;
        if version != VECTORS_VERSION {
            return Err(EmbedError::VersionMismatch {
                expected: VECTORS_VERSION,
                found: version,
            });
        }
        let dim = r.u32("dimension")? as usize;
        if dim == 0 {
            return Err(EmbedError::CorruptFile("zero dimension".into()));
        }
        let count = r.u64("count")?;
        let mut set = VectorSet::new(dim);
        for i in 0..count {
            let id = r.u64("record id")?;
            let raw = r.f32s(dim, "record vector")?;
            let v = EmbeddingVector::normalized(raw).ok_or_else(|| {
                EmbedError::CorruptFile(format!("record {i} (id {id}) is zero or non-finite"))
            })?;
            set.push(id, v)?;
        }
        if !r.at_eof()? {
            return Err(EmbedError::CorruptFile("trailing bytes after records".into()));
        }
        Ok(set)
    }
}

/// Hash-embeds every catalog row's merged text (and applies `adapter` when
/// given). Ids are catalog row ids.
pub fn embed_catalog(
    catalog: &CatalogTable,
    d: usize,
    adapter: Option<&AdapterParams>,
) -> Result<VectorSet, EmbedError> {
    use rayon::prelude::*;
    let vectors = catalog
        .records()
        .par_iter()
        .map(|r| {
            let v = hash_embed(&merge_product_text(r), d);
            match adapter {
                Some(a) => adapt(&v, a),
                None => Ok(v),
            }
        })
        .collect::<Result<Vec<_>, _>>()?;
    let mut set = VectorSet::new(d);
    for (id, v) in vectors.into_iter().enumerate() {
        set.push(id as u64, v)?;
    }
    Ok(set)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn unit(seed: u64, d: usize) -> EmbeddingVector {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        EmbeddingVector::normalized((0..d).map(|_| rng.gen_range(-1.0f32..1.0)).collect()).unwrap()
    }

    #[test]
    fn hash_embed_basics() {
        let a = hash_embed("usb c cable", 64);
        assert_eq!(a, hash_embed("usb c cable", 64));
        assert!((a.norm() - 1.0).abs() < 1e-6);
        assert_eq!(hash_embed("", 256), EmbeddingVector::basis(256, 0));
        assert_eq!(hash_embed("  ... ", 256), EmbeddingVector::basis(256, 0));
    }

    #[test]
    fn word_order_only_moves_bigrams() {
        // Oracle: rebuild the unnormalized feature vectors by hand and
        // compare against the embeddings.
        fn raw(text: &str, d: usize) -> Vec<f64> {
            let toks: Vec<&str> = text.split(' ').collect();
            let mut v = vec![0.0; d];
            for t in &toks {
                let h = feature_hash(b'u', &[t]);
                v[(h % d as u64) as usize] += if h >> 63 == 0 { 1.0 } else { -1.0 };
            }
            for p in toks.windows(2) {
                let h = feature_hash(b'b', p);
                v[(h % d as u64) as usize] += if h >> 63 == 0 { 0.5 } else { -0.5 };
            }
            v
        }
        let d = 256;
        let cos = |a: &[f64], b: &[f64]| {
            let n = |x: &[f64]| x.iter().map(|v| v * v).sum::<f64>().sqrt();
            a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() / (n(a) * n(b))
        };
        let rc = raw("red case", d);
        let cr = raw("case red", d);
        let bc = raw("blue cable", d);
        let same = cos(&rc, &cr);
        let diff = cos(&rc, &bc);
        assert!(same >= diff, "{same} vs {diff}");

        let e = |t| hash_embed(t, d);
        let s1 = similarity(&e("red case"), &e("case red")).unwrap();
        let s2 = similarity(&e("red case"), &e("blue cable")).unwrap();
        assert!((f64::from(s1) - same).abs() < 1e-6);
        assert!((f64::from(s2) - diff).abs() < 1e-6);
        assert!(s1 >= s2);
    }

    #[test]
    fn adapt_examples() {
        let v = unit(1, 16);
        assert_eq!(adapt(&v, &AdapterParams::identity(16)).unwrap(), v);
        let two = AdapterParams::from_row_major(
            16,
            AdapterParams::identity(16).as_row_major().iter().map(|x| 2.0 * x).collect(),
        )
        .unwrap();
        let out = adapt(&v, &two).unwrap();
        for (a, b) in out.as_slice().iter().zip(v.as_slice()) {
            assert!((a - b).abs() < 1e-6);
        }
        let zero = AdapterParams::from_row_major(16, vec![0.0; 256]).unwrap();
        assert_eq!(adapt(&v, &zero).unwrap(), v);
        assert!(matches!(
            adapt(&unit(1, 8), &AdapterParams::identity(16)),
            Err(EmbedError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn similarity_examples() {
        let v = unit(3, 32);
        assert!((similarity(&v, &v).unwrap() - 1.0).abs() < 1e-6);
        let e0 = EmbeddingVector::basis(32, 0);
        let e1 = EmbeddingVector::basis(32, 1);
        assert_eq!(similarity(&e0, &e1).unwrap(), 0.0);
        assert!(similarity(&e0, &EmbeddingVector::basis(8, 0)).is_err());
    }

    #[test]
    fn vector_file_round_trip_and_corruption() {
        let mut set = VectorSet::new(8);
        for i in 0..5 {
            set.push(i * 3, unit(i, 8)).unwrap();
        }
        let mut buf = Vec::new();
        set.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 8 + 4 + 4 + 8 + 5 * (8 + 32));
        assert_eq!(VectorSet::read_from(buf.as_slice()).unwrap(), set);

        assert!(matches!(
            VectorSet::read_from(&buf[..buf.len() - 3]),
            Err(EmbedError::CorruptFile(_))
        ));
        let mut bad = buf.clone();
        bad[0] = b'X';
        assert!(matches!(VectorSet::read_from(bad.as_slice()), Err(EmbedError::CorruptFile(_))));
        let mut ver = buf.clone();
        ver[8] = 9;
        assert!(matches!(
            VectorSet::read_from(ver.as_slice()),
            Err(EmbedError::VersionMismatch { .. })
        ));
    }

    #[test]
    fn imported_vectors_are_normalized() {
        let mut buf = Vec::new();
        buf.extend_from_slice(&VECTORS_MAGIC);
        buf.extend_from_slice(&1u32.to_le_bytes());
        buf.extend_from_slice(&8u32.to_le_bytes());
        buf.extend_from_slice(&1u64.to_le_bytes());
        buf.extend_from_slice(&42u64.to_le_bytes());
        for x in [3.0f32, 4.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0] {
            buf.extend_from_slice(&x.to_le_bytes());
        }
        let set = VectorSet::read_from(buf.as_slice()).unwrap();
        assert_eq!(set.ids, vec![42]);
        assert!((set.vectors[0].as_slice()[0] - 0.6).abs() < 1e-7);
    }

    #[test]
    fn adapter_file_round_trip() {
        let p = AdapterParams::from_row_major(8, (0..64).map(|i| i as f32 * 0.25).collect()).unwrap();
        let mut buf = Vec::new();
        p.write_to(&mut buf).unwrap();
        assert_eq!(buf.len(), 16 + 64 * 4);
        assert_eq!(AdapterParams::read_from(buf.as_slice()).unwrap(), p);
        assert!(AdapterParams::read_from(&buf[..20]).is_err());
    }

    proptest! {
        #[test]
        fn embeddings_are_unit(text in "[a-z ]{0,60}", d in 8usize..300) {
            let v = hash_embed(&text, d);
            prop_assert_eq!(v.dim(), d);
            prop_assert!((v.norm() - 1.0).abs() < 1e-6);
        }

        #[test]
        fn similarity_symmetric_and_bounded(s1 in 0u64..1000, s2 in 0u64..1000) {
            let a = unit(s1, 64);
            let b = unit(s2, 64);
            let ab = similarity(&a, &b).unwrap();
            prop_assert!((ab - similarity(&b, &a).unwrap()).abs() < 1e-6);
            prop_assert!(ab.abs() <= 1.0 + 1e-6);
        }

        #[test]
        fn adapt_keeps_unit_norm(seed in 0u64..500, m in proptest::collection::vec(-1.0f32..1.0, 64)) {
            let p = AdapterParams::from_row_major(8, m).unwrap();
            let out = adapt(&unit(seed, 8), &p).unwrap();
            prop_assert!((out.norm() - 1.0).abs() < 1e-6);
        }
    }
}
