//! EEG trial ingestion: EDF parsing, epoching, label sidecars, dataset
//! manifests, the EEGX trial container and verified downloads.

mod container;
pub mod edf;
mod fetch;
mod manifest;

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::codec::FormatError;

pub use container::{decode_trials, encode_trials, read_trialset, write_trialset, EEGX_MAGIC};
pub use edf::{parse_edf_header, read_edf_signals, EdfFile, EdfHeader, EdfSignal};
pub use fetch::{fetch_file, sha256_file};
pub use manifest::{load_manifest_trials, Manifest, ManifestEntry};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("TruncatedHeader: need {needed} bytes, have {available}")]
    TruncatedHeader { needed: usize, available: usize },
    #[error("MalformedNumeric: field {field} holds {value:?}")]
    MalformedNumeric { field: &'static str, value: String },
    #[error("InconsistentHeader: {0}")]
    InconsistentHeader(String),
    #[error("UnknownChannel: {0:?}")]
    UnknownChannel(String),
    #[error("TruncatedRecord: data ends inside record {record} of {n_records}")]
    TruncatedRecord { record: usize, n_records: usize },
    #[error("RateMismatch: {first:?} and {other:?} have different samples per record")]
    RateMismatch { first: String, other: String },
    #[error("LabelCountMismatch: {windows} windows but {labels} labels")]
    LabelCountMismatch { windows: usize, labels: usize },
    #[error("BadWindow: window of {window_s} s at {fs} Hz is not a positive whole number of samples")]
    BadWindow { window_s: f64, fs: f64 },
    #[error("InvalidTrial: {0}")]
    InvalidTrial(String),
    #[error("LabelFile: {0}")]
    LabelFile(String),
    #[error("Manifest: {0}")]
    Manifest(String),
    #[error("MissingFile: {}", .0.display())]
    MissingFile(PathBuf),
    #[error("NetworkError: {0}")]
    Network(String),
    #[error("DigestMismatch: expected {expected}, got {actual}")]
    DigestMismatch { expected: String, actual: String },
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// One epoched multichannel recording.
#[derive(Debug, Clone, PartialEq)]
pub struct Trial {
    pub subject_id: String,
    pub channels: Vec<String>,
    /// `C x T` samples in microvolts, row-major.
    pub data: Vec<f32>,
    pub n_samples: usize,
    pub fs: f32,
    pub label: usize,
    pub trial_index: u32,
}

impl Trial {
    pub fn n_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn row(&self, c: usize) -> &[f32] {
        &self.data[c * self.n_samples..(c + 1) * self.n_samples]
    }

    /// Checks the shape, finiteness and label-range invariants. Pass
    /// `n_labels = None` to skip the label check.
    pub fn validate(&self, n_labels: Option<usize>) -> Result<(), IngestError> {
        if self.channels.is_empty() || self.n_samples == 0 {
            return Err(IngestError::InvalidTrial("empty trial".into()));
        }
        if self.data.len() != self.channels.len() * self.n_samples {
            return Err(IngestError::InvalidTrial(format!(
                "data holds {} values, expected {}x{}",
                self.data.len(),
                self.channels.len(),
                self.n_samples
            )));
        }
        if !(self.fs > 0.0 && self.fs.is_finite()) {
            return Err(IngestError::InvalidTrial(format!("bad sampling rate {}", self.fs)));
        }
        if self.data.iter().any(|v| !v.is_finite()) {
            return Err(IngestError::InvalidTrial("non-finite sample".into()));
        }
        if let Some(l) = n_labels {
            if self.label >= l {
                return Err(IngestError::InvalidTrial(format!(
                    "label {} outside [0, {l})",
                    self.label
                )));
            }
        }
        Ok(())
    }
}

/// A continuous recording before epoching.
#[derive(Debug, Clone)]
pub struct Recording {
    pub subject_id: String,
    pub channels: Vec<String>,
    pub fs: f32,
    /// One series per channel, all the same length.
    pub series: Vec<Vec<f32>>,
}

/// Cuts a recording into consecutive non-overlapping windows of
/// `window_s * fs` samples, dropping the trailing partial window.
pub fn epoch_series(
    rec: &Recording,
    window_s: f64,
    labels: &[usize],
) -> Result<Vec<Trial>, IngestError> {
    let fs = f64::from(rec.fs);
    let exact = window_s * fs;
    let window = exact.round();
    if !(window >= 1.0) || (exact - window).abs() > 1e-6 {
        return Err(IngestError::BadWindow { window_s, fs });
    }
    let window = window as usize;
    if rec.series.len() != rec.channels.len() {
        return Err(IngestError::InvalidTrial(format!(
            "{} series for {} channel names",
            rec.series.len(),
            rec.channels.len()
        )));
    }
    let n = rec.series.first().map_or(0, Vec::len);
    if rec.series.iter().any(|s| s.len() != n) {
        return Err(IngestError::InvalidTrial("channels differ in length".into()));
    }
    let n_windows = n / window;
    if labels.len() != n_windows {
        return Err(IngestError::LabelCountMismatch {
            windows: n_windows,
            labels: labels.len(),
        });
    }
    Ok(labels
        .iter()
        .enumerate()
        .map(|(i, &label)| {
            let mut data = Vec::with_capacity(rec.series.len() * window);
            for s in &rec.series {
                data.extend_from_slice(&s[i * window..(i + 1) * window]);
            }
            Trial {
                subject_id: rec.subject_id.clone(),
                channels: rec.channels.clone(),
                data,
                n_samples: window,
                fs: rec.fs,
                label,
                trial_index: i as u32,
            }
        })
        .collect())
}

#[derive(Deserialize)]
struct LabelRow {
    trial_index: usize,
    label: i64,
}

/// Reads a `trial_index,label` CSV sidecar. Rows must enumerate
/// `0..n` in order.
pub fn read_label_file(path: impl AsRef<Path>) -> Result<Vec<usize>, IngestError> {
    let path = path.as_ref();
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| IngestError::LabelFile(format!("{}: {e}", path.display())))?;
    let headers = rdr
        .headers()
        .map_err(|e| IngestError::LabelFile(e.to_string()))?
        .clone();
    if headers.iter().collect::<Vec<_>>() != ["trial_index", "label"] {
        return Err(IngestError::LabelFile(format!(
            "{}: header must be `trial_index,label`",
            path.display()
        )));
    }
    let mut labels = Vec::new();
    for row in rdr.deserialize::<LabelRow>() {
        let row = row.map_err(|e| IngestError::LabelFile(format!("{}: {e}", path.display())))?;
        if row.trial_index != labels.len() {
            return Err(IngestError::LabelFile(format!(
                "{}: expected trial_index {}, found {}",
                path.display(),
                labels.len(),
                row.trial_index
            )));
        }
        if row.label < 0 {
            return Err(IngestError::LabelFile(format!(
                "{}: negative label {}",
                path.display(),
                row.label
            )));
        }
        labels.push(row.label as usize);
    }
    Ok(labels)
}

pub fn write_label_file(path: impl AsRef<Path>, labels: &[usize]) -> Result<(), IngestError> {
    let mut out = String::from("trial_index,label\n");
    for (i, l) in labels.iter().enumerate() {
        out.push_str(&format!("{i},{l}\n"));
    }
    std::fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(n: usize, fs: f32) -> Recording {
        Recording {
            subject_id: "s1".into(),
            channels: vec!["Fpz-Cz".into(), "Pz-Oz".into()],
            fs,
            series: vec![(0..n).map(|i| i as f32).collect(), vec![0.5; n]],
        }
    }

    #[test]
    fn sleep_cassette_window() {
        let t = epoch_series(&rec(3000, 100.0), 30.0, &[3]).unwrap();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].n_samples, 3000);
        assert_eq!(t[0].label, 3);
        assert_eq!(t[0].row(0)[2999], 2999.0);
    }

    #[test]
    fn motor_imagery_window() {
        let t = epoch_series(&rec(2048, 256.0), 4.0, &[0, 1]).unwrap();
        assert_eq!(t.len(), 2);
        assert!(t.iter().all(|t| t.n_samples == 1024));
        assert_eq!(t[1].trial_index, 1);
        assert_eq!(t[1].row(0)[0], 1024.0);
    }

    #[test]
    fn partial_window_dropped() {
        assert!(epoch_series(&rec(2999, 100.0), 30.0, &[]).unwrap().is_empty());
    }

    #[test]
    fn label_count_checked() {
        assert!(matches!(
            epoch_series(&rec(3000, 100.0), 30.0, &[0, 1]),
            Err(IngestError::LabelCountMismatch { windows: 1, labels: 2 })
        ));
    }

    #[test]
    fn fractional_window_rejected() {
        assert!(matches!(
            epoch_series(&rec(3000, 100.0), 0.005, &[]),
            Err(IngestError::BadWindow { .. })
        ));
    }

    #[test]
    fn label_file_round_trip_and_errors() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("labels.csv");
        write_label_file(&p, &[0, 2, 1]).unwrap();
        assert_eq!(read_label_file(&p).unwrap(), vec![0, 2, 1]);

        std::fs::write(&p, "trial_index,label\n0,1\n2,0\n").unwrap();
        assert!(matches!(read_label_file(&p), Err(IngestError::LabelFile(_))));
        std::fs::write(&p, "idx,label\n0,1\n").unwrap();
        assert!(matches!(read_label_file(&p), Err(IngestError::LabelFile(_))));
    }

    #[test]
    fn validate_catches_nan() {
        let mut t = epoch_series(&rec(100, 100.0), 1.0, &[0]).unwrap().remove(0);
        assert!(t.validate(Some(1)).is_ok());
        assert!(t.validate(Some(0)).is_err());
        t.data[3] = f32::NAN;
        assert!(t.validate(None).is_err());
    }
}
