//! EEGX trial container.
//!
//! ```text
//! "EEGX" | version u32 = 1 | n_trials u32 | C u32 | T u32 | fs f32 | L u32
//! per trial: subject_id (u16 len + UTF-8) | trial_index u32 | label i32 | C*T f32
//! CRC32 of everything above
//! ```
//!
//! Channel names are not stored; decoded trials carry `ch0..ch{C-1}`.

use std::path::Path;

use super::{IngestError, Trial};
use crate::codec::{ByteReader, ByteWriter, FormatError};

pub const EEGX_MAGIC: &[u8; 4] = b"EEGX";
const VERSION: u32 = 1;

pub fn default_channel_names(c: usize) -> Vec<String> {
    (0..c).map(|i| format!("ch{i}")).collect()
}

pub fn encode_trials(trials: &[Trial]) -> Result<Vec<u8>, IngestError> {
    let (c, t, fs) = match trials.first() {
        Some(first) => (first.n_channels(), first.n_samples, first.fs),
        None => (0, 0, 0.0),
    };
    for tr in trials {
        tr.validate(None)?;
        if tr.n_channels() != c || tr.n_samples != t || tr.fs.to_bits() != fs.to_bits() {
            return Err(IngestError::InvalidTrial(format!(
                "trial {} of {:?} has shape {}x{} @ {} Hz, container is {c}x{t} @ {fs} Hz",
                tr.trial_index,
                tr.subject_id,
                tr.n_channels(),
                tr.n_samples,
                tr.fs
            )));
        }
    }
    let n_labels = trials.iter().map(|t| t.label + 1).max().unwrap_or(0);
    let mut w = ByteWriter::new();
    w.bytes(EEGX_MAGIC);
    w.u32(VERSION);
    w.u32(to_u32(trials.len())?);
    w.u32(to_u32(c)?);
    w.u32(to_u32(t)?);
    w.f32(fs);
    w.u32(to_u32(n_labels)?);
    for tr in trials {
        w.short_str(&tr.subject_id)?;
        w.u32(tr.trial_index);
        w.i32(i32::try_from(tr.label).map_err(|_| {
            IngestError::InvalidTrial(format!("label {} does not fit i32", tr.label))
        })?);
        w.f32_slice(&tr.data);
    }
    Ok(w.finish())
}

fn to_u32(v: usize) -> Result<u32, IngestError> {
    u32::try_from(v).map_err(|_| IngestError::InvalidTrial(format!("{v} exceeds u32")))
}

pub fn decode_trials(bytes: &[u8]) -> Result<Vec<Trial>, IngestError> {
    let mut r = ByteReader::new(bytes);
    r.expect_magic(EEGX_MAGIC)?;
    r.expect_version(VERSION)?;
    let n = r.u32()? as usize;
    let c = r.u32()? as usize;
    let t = r.u32()? as usize;
    let fs = r.f32()?;
    let n_labels = r.u32()? as usize;
    let channels = default_channel_names(c);
    // Cap the preallocation by what the buffer could possibly hold.
    let mut trials = Vec::with_capacity(n.min(r.remaining() / 10 + 1));
    for _ in 0..n {
        let subject_id = r.short_str()?;
        let trial_index = r.u32()?;
        let label = r.i32()?;
        let data = r.f32_vec(c * t)?;
        if label < 0 || label as usize >= n_labels {
            return Err(FormatError::Malformed(format!(
                "label {label} outside [0, {n_labels})"
            ))
            .into());
        }
        trials.push(Trial {
            subject_id,
            channels: channels.clone(),
            data,
            n_samples: t,
            fs,
            label: label as usize,
            trial_index,
        });
    }
    r.finish()?;
    Ok(trials)
}

pub fn write_trialset(trials: &[Trial], path: impl AsRef<Path>) -> Result<(), IngestError> {
    std::fs::write(path, encode_trials(trials)?)?;
    Ok(())
}

pub fn read_trialset(path: impl AsRef<Path>) -> Result<Vec<Trial>, IngestError> {
    decode_trials(&std::fs::read(path)?)
}
