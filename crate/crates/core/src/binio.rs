//! Little-endian helpers shared by the binary file formats.

use std::io::{self, Read, Write};

/// Reader wrapper that turns short reads into a descriptive error string.
pub(crate) struct LeReader<R> {
    inner: R,
}

#[derive(Debug)]
pub(crate) enum ReadFail {
    Truncated(&'static str),
    Io(io::Error),
}

impl<R: Read> LeReader<R> {
    pub(crate) fn new(inner: R) -> Self {
        Self { inner }
    }

    pub(crate) fn bytes<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N], ReadFail> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => ReadFail::Truncated(what),
            _ => ReadFail::Io(e),
        })?;
        Ok(buf)
    }

    pub(crate) fn u32(&mut self, what: &'static str) -> Result<u32, ReadFail> {
        self.bytes::<4>(what).map(u32::from_le_bytes)
    }

    pub(crate) fn u64(&mut self, what: &'static str) -> Result<u64, ReadFail> {
        self.bytes::<8>(what).map(u64::from_le_bytes)
    }

    pub(crate) fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f32>, ReadFail> {
        let mut raw = vec![0u8; n * 4];
        self.inner.read_exact(&mut raw).map_err(|e| match e.kind() {
            io::ErrorKind::UnexpectedEof => ReadFail::Truncated(what),
            _ => ReadFail::Io(e),
        })?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    /// True when no bytes remain.
    pub(crate) fn at_eof(&mut self) -> Result<bool, ReadFail> {
        let mut probe = [0u8; 1];
        loop {
            match self.inner.read(&mut probe) {
                Ok(0) => return Ok(true),
                Ok(_) => return Ok(false),
                Err(e) if e.kind() == io::ErrorKind::Interrupted => continue,
                Err(e) => return Err(ReadFail::Io(e)),
            }
        }
    }
}

pub(crate) fn put_f32s<W: Write>(out: &mut W, values: &[f32]) -> io::Result<()> {
    let mut buf = Vec::with_capacity(values.len() * 4);
    for v in values {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    out.write_all(&buf)
}
