//! Named-tensor containers.
//!
//! ```text
//! EEGW: "EEGW" | version u32 = 1 | count u32 | count x record | CRC32
//! EEGF: "EEGF" | seed u64 | input record | count u32 | count x record | CRC32
//! record: name (u16 len + UTF-8) | ndim u8 | ndim x u32 dims | prod(dims) x f32
//! ```

use std::collections::HashMap;
use std::path::Path;

use super::{NnError, TensorF32};
use crate::codec::{ByteReader, ByteWriter, FormatError};

pub const EEGW_MAGIC: &[u8; 4] = b"EEGW";
pub const EEGF_MAGIC: &[u8; 4] = b"EEGF";
const VERSION: u32 = 1;

/// Ordered collection of uniquely named tensors.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct WeightArchive {
    entries: Vec<(String, TensorF32)>,
    index: HashMap<String, usize>,
}

impl WeightArchive {
    /// Inserts or replaces `name`, returning the previous tensor.
    pub fn insert(&mut self, name: impl Into<String>, tensor: TensorF32) -> Option<TensorF32> {
        let name = name.into();
        match self.index.get(&name) {
            Some(&i) => Some(std::mem::replace(&mut self.entries[i].1, tensor)),
            None => {
                self.index.insert(name.clone(), self.entries.len());
                self.entries.push((name, tensor));
                None
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<&TensorF32> {
        self.index.get(name).map(|&i| &self.entries[i].1)
    }

    pub fn contains(&self, name: &str) -> bool {
        self.index.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.entries.iter().map(|(n, _)| n.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &TensorF32)> {
        self.entries.iter().map(|(n, t)| (n.as_str(), t))
    }

    /// Keeps only the tensors whose names satisfy `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.entries.retain(|(n, _)| keep(n));
        self.index = self.entries.iter().enumerate().map(|(i, (n, _))| (n.clone(), i)).collect();
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>, NnError> {
        let mut w = ByteWriter::new();
        w.bytes(EEGW_MAGIC);
        w.u32(VERSION);
        w.u32(count_u32(self.entries.len())?);
        for (name, t) in &self.entries {
            write_record(&mut w, name, t)?;
        }
        Ok(w.finish())
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, NnError> {
        let mut r = ByteReader::new(bytes);
        r.expect_magic(EEGW_MAGIC)?;
        r.expect_version(VERSION)?;
        let n = r.u32()? as usize;
        let archive = read_records(&mut r, n)?;
        r.finish()?;
        Ok(archive)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        std::fs::write(path, self.to_bytes()?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

impl FromIterator<(String, TensorF32)> for WeightArchive {
    fn from_iter<I: IntoIterator<Item = (String, TensorF32)>>(iter: I) -> Self {
        let mut a = Self::default();
        for (n, t) in iter {
            a.insert(n, t);
        }
        a
    }
}

fn count_u32(n: usize) -> Result<u32, NnError> {
    u32::try_from(n).map_err(|_| FormatError::Malformed(format!("{n} tensors exceed u32")).into())
}

fn write_record(w: &mut ByteWriter, name: &str, t: &TensorF32) -> Result<(), NnError> {
    w.short_str(name)?;
    let ndim = u8::try_from(t.ndim())
        .map_err(|_| FormatError::Malformed(format!("tensor {name} has {} dims", t.ndim())))?;
    w.u8(ndim);
    for &d in t.dims() {
        w.u32(u32::try_from(d).map_err(|_| FormatError::Malformed(format!("dim {d} of {name} exceeds u32")))?);
    }
    w.f32_slice(t.data());
    Ok(())
}

fn read_record(r: &mut ByteReader) -> Result<(String, TensorF32), NnError> {
    let name = r.short_str()?;
    let ndim = r.u8()? as usize;
    if ndim == 0 {
        return Err(FormatError::Malformed(format!("tensor {name} has zero dims")).into());
    }
    let mut dims = Vec::with_capacity(ndim);
    for _ in 0..ndim {
        dims.push(r.u32()? as usize);
    }
    let numel = dims
        .iter()
        .try_fold(1usize, |acc, &d| acc.checked_mul(d))
        .ok_or_else(|| FormatError::Malformed(format!("tensor {name} size overflows")))?;
    let data = r.f32_vec(numel)?;
    let t = TensorF32::new(dims, data)
        .map_err(|e| FormatError::Malformed(format!("tensor {name}: {e}")))?;
    Ok((name, t))
}

fn read_records(r: &mut ByteReader, n: usize) -> Result<WeightArchive, NnError> {
    let mut a = WeightArchive::default();
    for _ in 0..n {
        let (name, t) = read_record(r)?;
        if a.insert(name.clone(), t).is_some() {
            return Err(FormatError::Malformed(format!("duplicate tensor name {name}")).into());
        }
    }
    Ok(a)
}

/// Reference input and activations from an independent forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct Fixture {
    pub seed: u64,
    pub input: TensorF32,
    pub activations: WeightArchive,
}

pub fn encode_fixture(f: &Fixture) -> Result<Vec<u8>, NnError> {
    let mut w = ByteWriter::new();
    w.bytes(EEGF_MAGIC);
    w.u64(f.seed);
    write_record(&mut w, "input", &f.input)?;
    w.u32(count_u32(f.activations.len())?);
    for (name, t) in f.activations.iter() {
        write_record(&mut w, name, t)?;
    }
    Ok(w.finish())
}

pub fn decode_fixture(bytes: &[u8]) -> Result<Fixture, NnError> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(EEGF_MAGIC)?;
    let seed = r.u64()?;
    let (_, input) = read_record(&mut r)?;
    let n = r.u32()? as usize;
    let activations = read_records(&mut r, n)?;
    r.finish()?;
    Ok(Fixture {
        seed,
        input,
        activations,
    })
}

impl Fixture {
    pub fn save(&self, path: impl AsRef<Path>) -> Result<(), NnError> {
        std::fs::write(path, encode_fixture(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self, NnError> {
        decode_fixture(&std::fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> WeightArchive {
        let mut a = WeightArchive::default();
        a.insert("head.w", TensorF32::new(vec![2, 3], vec![1.0, -2.0, 3.5, f32::MIN_POSITIVE, 0.0, -0.0]).unwrap());
        a.insert("head.b", TensorF32::full(vec![2], 0.25));
        a
    }

    #[test]
    fn round_trip_is_bitwise() {
        let a = sample();
        let bytes = a.to_bytes().unwrap();
        let b = WeightArchive::from_bytes(&bytes).unwrap();
        assert_eq!(b.names().collect::<Vec<_>>(), vec!["head.w", "head.b"]);
        for ((_, x), (_, y)) in a.iter().zip(b.iter()) {
            let xb: Vec<u32> = x.data().iter().map(|v| v.to_bits()).collect();
            let yb: Vec<u32> = y.data().iter().map(|v| v.to_bits()).collect();
            assert_eq!(xb, yb);
        }
        assert_eq!(b.to_bytes().unwrap(), bytes);
    }

    #[test]
    fn corruption_and_magic() {
        let mut bytes = sample().to_bytes().unwrap();
        let mid = bytes.len() / 2;
        bytes[mid] ^= 0x01;
        assert!(matches!(
            WeightArchive::from_bytes(&bytes),
            Err(NnError::Format(FormatError::ChecksumMismatch { .. }))
        ));
        let mut bytes = sample().to_bytes().unwrap();
        bytes[..4].copy_from_slice(b"EEGX");
        assert!(matches!(
            WeightArchive::from_bytes(&bytes),
            Err(NnError::Format(FormatError::BadMagic { .. }))
        ));
        let bytes = sample().to_bytes().unwrap();
        assert!(matches!(
            WeightArchive::from_bytes(&bytes[..bytes.len() - 7]),
            Err(NnError::Format(_))
        ));
    }

    #[test]
    fn duplicate_names_rejected() {
        let t = TensorF32::full(vec![1], 1.0);
        let mut w = ByteWriter::new();
        w.bytes(EEGW_MAGIC);
        w.u32(VERSION);
        w.u32(2);
        write_record(&mut w, "x", &t).unwrap();
        write_record(&mut w, "x", &t).unwrap();
        assert!(matches!(
            WeightArchive::from_bytes(&w.finish()),
            Err(NnError::Format(FormatError::Malformed(_)))
        ));
    }

    #[test]
    fn empty_archive_layout() {
        let bytes = WeightArchive::default().to_bytes().unwrap();
        assert_eq!(bytes.len(), 16);
        assert_eq!(&bytes[..4], b"EEGW");
        assert_eq!(&bytes[4..12], &[1, 0, 0, 0, 0, 0, 0, 0]);
    }

    #[test]
    fn fixture_round_trip() {
        let f = Fixture {
            seed: 42,
            input: TensorF32::full(vec![1, 3, 2, 2], 0.5),
            activations: sample(),
        };
        let bytes = encode_fixture(&f).unwrap();
        assert_eq!(&bytes[..4], b"EEGF");
        assert_eq!(u64::from_le_bytes(bytes[4..12].try_into().unwrap()), 42);
        assert_eq!(decode_fixture(&bytes).unwrap(), f);
    }
}
