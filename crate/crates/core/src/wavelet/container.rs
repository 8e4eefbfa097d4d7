//! EEGS scalogram container.
//!
//! ```text
//! "EEGS" | version u32 = 1 | n u32 | C u32 | S u32 | T u32 | fs f32 | S x f32 scales
//! per item: subject_id (u16 len + UTF-8) | label i32 | C*S*T f32
//! CRC32 of everything above
//! ```

use std::path::Path;

use super::{ScaleSet, Scalogram, WaveletError};
use crate::codec::{ByteReader, ByteWriter, FormatError};

pub const EEGS_MAGIC: &[u8; 4] = b"EEGS";
const VERSION: u32 = 1;

fn shape_err(msg: String) -> WaveletError {
    WaveletError::ShapeMismatch(msg)
}

pub fn encode_scalograms(items: &[Scalogram]) -> Result<Vec<u8>, WaveletError> {
    let (c, s, t, fs, scales) = match items.first() {
        Some(f) => (f.n_channels, f.n_scales(), f.n_samples, f.fs, f.scales.scales.clone()),
        None => (0, 0, 0, 0.0, Vec::new()),
    };
    for it in items {
        if it.dims() != [c, s, t] || it.fs.to_bits() != fs.to_bits() || it.scales.scales != scales {
            return Err(shape_err(format!(
                "scalogram {:?} has dims {:?} @ {} Hz; container is [{c}, {s}, {t}] @ {fs} Hz",
                it.subject_id,
                it.dims(),
                it.fs
            )));
        }
        if it.data.len() != c * s * t {
            return Err(shape_err(format!("data length {} != {}", it.data.len(), c * s * t)));
        }
    }
    let u = |v: usize| u32::try_from(v).map_err(|_| shape_err(format!("{v} exceeds u32")));
    let mut w = ByteWriter::new();
    w.bytes(EEGS_MAGIC);
    w.u32(VERSION);
    w.u32(u(items.len())?);
    w.u32(u(c)?);
    w.u32(u(s)?);
    w.u32(u(t)?);
    w.f32(fs);
    for a in &scales {
        w.f32(*a as f32);
    }
    for it in items {
        w.short_str(&it.subject_id)?;
        w.i32(i32::try_from(it.label).map_err(|_| shape_err(format!("label {} too large", it.label)))?);
        w.f32_slice(&it.data);
    }
    Ok(w.finish())
}

pub fn decode_scalograms(bytes: &[u8]) -> Result<Vec<Scalogram>, WaveletError> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(EEGS_MAGIC)?;
    r.expect_version(VERSION)?;
    let n = r.u32()? as usize;
    let c = r.u32()? as usize;
    let s = r.u32()? as usize;
    let t = r.u32()? as usize;
    let fs = r.f32()?;
    let scales: Vec<f64> = (0..s).map(|_| r.f32().map(f64::from)).collect::<Result<_, _>>()?;
    let scale_set = if n == 0 && s == 0 {
        ScaleSet {
            mode: Default::default(),
            max_a: 0.0,
            voices: 0,
            scales,
        }
    } else {
        ScaleSet::from_list(scales)?
    };
    let mut items = Vec::with_capacity(n.min(r.remaining() / 6 + 1));
    for _ in 0..n {
        let subject_id = r.short_str()?;
        let label = r.i32()?;
        if label < 0 {
            return Err(FormatError::Malformed(format!("negative label {label}")).into());
        }
        let data = r.f32_vec(c * s * t)?;
        items.push(Scalogram {
            data,
            n_channels: c,
            n_samples: t,
            scales: scale_set.clone(),
            fs,
            label: label as usize,
            subject_id,
        });
    }
    r.finish()?;
    Ok(items)
}

pub fn write_scalograms(items: &[Scalogram], path: impl AsRef<Path>) -> Result<(), WaveletError> {
    std::fs::write(path, encode_scalograms(items)?)?;
    Ok(())
}

pub fn read_scalograms(path: impl AsRef<Path>) -> Result<Vec<Scalogram>, WaveletError> {
    decode_scalograms(&std::fs::read(path)?)
}
