//! Binary index file.
//!
//! Layout, all little-endian:
//!
//! ```text
//! magic       8 bytes  "FSIVFIDX"
//! version     u32
//! dim         u32
//! nlist       u32
//! scheme      u32      embedding scheme version
//! total       u64      number of stored vectors
//! list sizes  nlist x u64
//! centroids   nlist x dim x f32
//! lists       per list: size x u64 ids, then size x dim x f32 vectors
//! checksum    u64      FNV-1a over every preceding byte
//! ```

use std::collections::HashSet;
use std::fs::File;
use std::hash::Hasher;
use std::io::{BufWriter, Read, Write};
use std::path::Path;

use fnv::FnvHasher;

use super::{Centroids, IndexError, InvertedList, IvfIndex};
use crate::binio::{put_f32s, LeReader, ReadFail};

pub const INDEX_MAGIC: [u8; 8] = *b"FSIVFIDX";
pub const INDEX_VERSION: u32 = 1;

impl From<ReadFail> for IndexError {
    fn from(f: ReadFail) -> Self {
        match f {
            ReadFail::Truncated(what) => IndexError::CorruptFile(format!("truncated {what}")),
            ReadFail::Io(e) => IndexError::Io(e),
        }
    }
}

fn checksum(bytes: &[u8]) -> u64 {
    let mut h = FnvHasher::default();
    h.write(bytes);
    h.finish()
}

impl IvfIndex {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(&INDEX_MAGIC);
        out.extend_from_slice(&INDEX_VERSION.to_le_bytes());
        out.extend_from_slice(&(self.dim as u32).to_le_bytes());
        out.extend_from_slice(&(self.nlist() as u32).to_le_bytes());
        out.extend_from_slice(&self.scheme_version.to_le_bytes());
        out.extend_from_slice(&(self.total_count as u64).to_le_bytes());
        for l in &self.lists {
            out.extend_from_slice(&(l.ids.len() as u64).to_le_bytes());
        }
        for c in self.centroids.rows() {
            put_f32s(&mut out, c).expect("writing to a Vec cannot fail");
        }
        for l in &self.lists {
            for id in &l.ids {
                out.extend_from_slice(&id.to_le_bytes());
            }
            put_f32s(&mut out, &l.vectors).expect("writing to a Vec cannot fail");
        }
        let sum = checksum(&out);
        out.extend_from_slice(&sum.to_le_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, IndexError> {
        if bytes.len() < INDEX_MAGIC.len() || bytes[..8] != INDEX_MAGIC {
            return Err(IndexError::CorruptFile("bad magic".into()));
        }
        if bytes.len() < 8 + 4 + 8 {
            return Err(IndexError::CorruptFile("truncated header".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != INDEX_VERSION {
            return Err(IndexError::VersionMismatch {
                expected: INDEX_VERSION,
                found: version,
            });
        }
        let (body, tail) = bytes.split_at(bytes.len() - 8);
        let stored = u64::from_le_bytes(tail.try_into().expect("8 bytes"));
        if checksum(body) != stored {
            return Err(IndexError::CorruptFile("checksum mismatch (truncated or altered)".into()));
        }

        let mut r = LeReader::new(&body[12..]);
        let dim = r.u32("dim")? as usize;
        let nlist = r.u32("nlist")? as usize;
        let scheme_version = r.u32("scheme")?;
        let total = r.u64("total")?;
        if dim == 0 || nlist == 0 {
            return Err(IndexError::CorruptFile(format!("dim {dim}, nlist {nlist}")));
        }
        let mut sizes = Vec::with_capacity(nlist.min(1 << 16));
        for _ in 0..nlist {
            sizes.push(r.u64("list sizes")? as usize);
        }
        if sizes.iter().map(|&s| s as u64).sum::<u64>() != total {
            return Err(IndexError::CorruptFile("list sizes do not sum to total".into()));
        }
        let mut rows = Vec::with_capacity(nlist);
        for _ in 0..nlist {
            rows.push(r.f32s(dim, "centroids")?);
        }
        let centroids = Centroids::new(dim, rows)
            .map_err(|e| IndexError::CorruptFile(format!("centroids: {e}")))?;
        let mut seen = HashSet::new();
        let mut lists = Vec::with_capacity(nlist);
        for &size in &sizes {
            let mut ids = Vec::with_capacity(size.min(1 << 20));
            for _ in 0..size {
                let id = r.u64("list ids")?;
                if !seen.insert(id) {
                    return Err(IndexError::CorruptFile(format!("id {id} stored twice")));
                }
                ids.push(id);
            }
            let vectors = r.f32s(size * dim, "list vectors")?;
            if vectors.iter().any(|v| !v.is_finite()) {
                return Err(IndexError::CorruptFile("non-finite vector entry".into()));
            }
            lists.push(InvertedList { ids, vectors });
        }
        if !r.at_eof()? {
            return Err(IndexError::CorruptFile("trailing bytes".into()));
        }
        Ok(Self {
            dim,
            scheme_version,
            centroids,
            lists,
            total_count: total as usize,
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), IndexError> {
        let mut out = BufWriter::new(File::create(path)?);
        out.write_all(&self.to_bytes())?;
        out.flush()?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, IndexError> {
        let mut bytes = Vec::new();
        File::open(path)?.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }
}
