//! Little-endian primitives shared by the dataset and checkpoint formats.

use std::io::{self, Read, Write};

use crate::{Error, Result};

pub(crate) struct LeWriter<W> {
    inner: W,
}

impl<W: Write> LeWriter<W> {
    pub fn new(inner: W) -> Self {
        Self { inner }
    }

    pub fn bytes(&mut self, b: &[u8]) -> Result<()> {
        self.inner.write_all(b)?;
        Ok(())
    }

    pub fn u16(&mut self, v: u16) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u32(&mut self, v: u32) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn u64(&mut self, v: u64) -> Result<()> {
        self.bytes(&v.to_le_bytes())
    }

    pub fn f32s(&mut self, vs: &[f32]) -> Result<()> {
        let mut buf = Vec::with_capacity(vs.len() * 4);
        for v in vs {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.bytes(&buf)
    }

    /// Element count as u64, then the values.
    pub fn counted_f32s(&mut self, vs: &[f32]) -> Result<()> {
        self.u64(vs.len() as u64)?;
        self.f32s(vs)
    }

    pub fn finish(mut self) -> Result<W> {
        self.inner.flush()?;
        Ok(self.inner)
    }
}

pub(crate) struct LeReader<R> {
    inner: R,
}

impl<R: Read> LeReader<R> {
    pub fn new(inner: R) -> Self {
        Self { inner }
    }

    pub fn exact<const N: usize>(&mut self, what: &'static str) -> Result<[u8; N]> {
        let mut buf = [0u8; N];
        self.inner.read_exact(&mut buf).map_err(|e| eof(e, what))?;
        Ok(buf)
    }

    pub fn magic(&mut self, expected: [u8; 4]) -> Result<()> {
        let found = self.exact::<4>("magic")?;
        if found != expected {
            return Err(Error::BadMagic { expected, found });
        }
        Ok(())
    }

    pub fn version(&mut self, expected: u16) -> Result<()> {
        let found = self.u16("format version")?;
        if found != expected {
            return Err(Error::UnsupportedVersion { expected, found });
        }
        Ok(())
    }

    pub fn u16(&mut self, what: &'static str) -> Result<u16> {
        Ok(u16::from_le_bytes(self.exact(what)?))
    }

    pub fn u32(&mut self, what: &'static str) -> Result<u32> {
        Ok(u32::from_le_bytes(self.exact(what)?))
    }

    pub fn u64(&mut self, what: &'static str) -> Result<u64> {
        Ok(u64::from_le_bytes(self.exact(what)?))
    }

    pub fn f32s(&mut self, n: usize, what: &'static str) -> Result<Vec<f32>> {
        let mut buf = vec![0u8; n * 4];
        self.inner.read_exact(&mut buf).map_err(|e| eof(e, what))?;
        let values: Vec<f32> = buf
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        if !values.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite(what.to_string()));
        }
        Ok(values)
    }

    /// Reads a u64 element count, checks it, then the values.
    pub fn counted_f32s(&mut self, expected: usize, what: &'static str) -> Result<Vec<f32>> {
        let n = self.u64(what)? as usize;
        if n != expected {
            return Err(Error::DimensionMismatch {
                what,
                file: n,
                expected,
            });
        }
        self.f32s(n, what)
    }

    /// Fails unless the stream is exhausted.
    pub fn expect_end(&mut self) -> Result<()> {
        let mut probe = [0u8; 1];
        match self.inner.read(&mut probe)? {
            0 => Ok(()),
            _ => Err(Error::InvalidInput("trailing bytes after end of data".into())),
        }
    }
}

fn eof(e: io::Error, what: &'static str) -> Error {
    if e.kind() == io::ErrorKind::UnexpectedEof {
        Error::Truncated(what)
    } else {
        Error::Io(e)
    }
}
