//! Little-endian byte helpers shared by the EEGX, EEGS, EEGW and EEGF
//! containers. Every container ends with a CRC32 (IEEE) of all bytes that
//! precede it.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("BadMagic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: String, found: String },
    #[error("VersionMismatch: expected {expected}, found {found}")]
    VersionMismatch { expected: u32, found: u32 },
    #[error("ChecksumMismatch: stored {stored:#010x}, computed {computed:#010x}")]
    ChecksumMismatch { stored: u32, computed: u32 },
    #[error("TruncatedFile: needed {needed} more bytes at offset {offset}")]
    TruncatedFile { offset: usize, needed: usize },
    #[error("malformed container: {0}")]
    Malformed(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub fn crc32(bytes: &[u8]) -> u32 {
    crc32fast::hash(bytes)
}

#[derive(Default)]
pub struct ByteWriter {
    buf: Vec<u8>,
}

impl ByteWriter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn bytes(&mut self, b: &[u8]) {
        self.buf.extend_from_slice(b);
    }

    pub fn u8(&mut self, v: u8) {
        self.buf.push(v);
    }

    pub fn u16(&mut self, v: u16) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u32(&mut self, v: u32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn u64(&mut self, v: u64) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn i32(&mut self, v: i32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32(&mut self, v: f32) {
        self.buf.extend_from_slice(&v.to_le_bytes());
    }

    pub fn f32_slice(&mut self, vs: &[f32]) {
        self.buf.reserve(vs.len() * 4);
        for v in vs {
            self.buf.extend_from_slice(&v.to_le_bytes());
        }
    }

    /// `u16` length prefix followed by the UTF-8 bytes.
    pub fn short_str(&mut self, s: &str) -> Result<(), FormatError> {
        let len = u16::try_from(s.len())
            .map_err(|_| FormatError::Malformed(format!("string too long ({} bytes)", s.len())))?;
        self.u16(len);
        self.bytes(s.as_bytes());
        Ok(())
    }

    /// Appends the CRC32 footer and returns the finished buffer.
    pub fn finish(mut self) -> Vec<u8> {
        let crc = crc32(&self.buf);
        self.u32(crc);
        self.buf
    }
}

pub struct ByteReader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> ByteReader<'a> {
    pub fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub fn position(&self) -> usize {
        self.pos
    }

    pub fn remaining(&self) -> usize {
        self.buf.len() - self.pos
    }

    pub fn take(&mut self, n: usize) -> Result<&'a [u8], FormatError> {
        if self.remaining() < n {
            return Err(FormatError::TruncatedFile {
                offset: self.pos,
                needed: n - self.remaining(),
            });
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], FormatError> {
        let mut out = [0u8; N];
        out.copy_from_slice(self.take(N)?);
        Ok(out)
    }

    pub fn u8(&mut self) -> Result<u8, FormatError> {
        Ok(self.take(1)?[0])
    }

    pub fn u16(&mut self) -> Result<u16, FormatError> {
        Ok(u16::from_le_bytes(self.array()?))
    }

    pub fn u32(&mut self) -> Result<u32, FormatError> {
        Ok(u32::from_le_bytes(self.array()?))
    }

    pub fn u64(&mut self) -> Result<u64, FormatError> {
        Ok(u64::from_le_bytes(self.array()?))
    }

    pub fn i32(&mut self) -> Result<i32, FormatError> {
        Ok(i32::from_le_bytes(self.array()?))
    }

    pub fn f32(&mut self) -> Result<f32, FormatError> {
        Ok(f32::from_le_bytes(self.array()?))
    }

    pub fn f32_vec(&mut self, n: usize) -> Result<Vec<f32>, FormatError> {
        let nbytes = n
            .checked_mul(4)
            .ok_or_else(|| FormatError::Malformed("payload size overflow".into()))?;
        let raw = self.take(nbytes)?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect())
    }

    pub fn short_str(&mut self) -> Result<String, FormatError> {
        let len = self.u16()? as usize;
        let raw = self.take(len)?;
        String::from_utf8(raw.to_vec())
            .map_err(|e| FormatError::Malformed(format!("invalid UTF-8 string: {e}")))
    }

    pub fn expect_magic(&mut self, magic: &[u8; 4]) -> Result<(), FormatError> {
        let found = self.take(4)?;
        if found != magic {
            return Err(FormatError::BadMagic {
                expected: String::from_utf8_lossy(magic).into_owned(),
                found: String::from_utf8_lossy(found).into_owned(),
            });
        }
        Ok(())
    }

    pub fn expect_version(&mut self, version: u32) -> Result<(), FormatError> {
        let found = self.u32()?;
        if found != version {
            return Err(FormatError::VersionMismatch {
                expected: version,
                found,
            });
        }
        Ok(())
    }

    /// Consumes the trailing CRC32 and checks it against everything read so
    /// far. The footer must be the last four bytes of the buffer.
    pub fn finish(mut self) -> Result<(), FormatError> {
        let body_end = self.pos;
        let stored = self.u32()?;
        if self.remaining() != 0 {
            return Err(FormatError::Malformed(format!(
                "{} unexpected trailing bytes",
                self.remaining()
            )));
        }
        let computed = crc32(&self.buf[..body_end]);
        if stored != computed {
            return Err(FormatError::ChecksumMismatch { stored, computed });
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn crc_matches_reference_value() {
        // Standard CRC-32/ISO-HDLC check value.
        assert_eq!(crc32(b"123456789"), 0xCBF4_3926);
    }

    #[test]
    fn reader_reports_truncation() {
        let mut r = ByteReader::new(&[1, 2, 3]);
        assert!(matches!(
            r.u32(),
            Err(FormatError::TruncatedFile { offset: 0, needed: 1 })
        ));
    }

    #[test]
    fn footer_round_trip() {
        let mut w = ByteWriter::new();
        w.u32(7);
        w.short_str("abc").unwrap();
        let bytes = w.finish();
        let mut r = ByteReader::new(&bytes);
        assert_eq!(r.u32().unwrap(), 7);
        assert_eq!(r.short_str().unwrap(), "abc");
        r.finish().unwrap();
    }
}
