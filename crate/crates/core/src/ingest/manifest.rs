use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::edf::EdfFile;
use super::{epoch_series, read_label_file, IngestError, Recording, Trial};

fn default_window_s() -> f64 {
    30.0
}

/// Dataset description. Relative paths resolve against the directory of the
/// manifest file.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub dataset_name: String,
    pub label_names: Vec<String>,
    /// Trial duration in seconds.
    #[serde(default = "default_window_s")]
    pub window_s: f64,
    pub entries: Vec<ManifestEntry>,
    #[serde(skip)]
    pub base_dir: PathBuf,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ManifestEntry {
    pub subject_id: String,
    pub file_path: PathBuf,
    pub label_file: PathBuf,
    pub fs: f64,
    pub n_channels: usize,
    /// EDF signal labels to read; defaults to the first `n_channels` signals.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channels: Option<Vec<String>>,
}

impl Manifest {
    pub fn load(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path)
            .map_err(|e| IngestError::Manifest(format!("{}: {e}", path.display())))?;
        let mut m: Manifest = serde_json::from_str(&text)
            .map_err(|e| IngestError::Manifest(format!("{}: {e}", path.display())))?;
        m.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        m.validate()?;
        Ok(m)
    }

    pub fn n_labels(&self) -> usize {
        self.label_names.len()
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }

    pub fn validate(&self) -> Result<(), IngestError> {
        if self.label_names.is_empty() {
            return Err(IngestError::Manifest("label_names is empty".into()));
        }
        for e in &self.entries {
            for p in [&e.file_path, &e.label_file] {
                let full = self.resolve(p);
                if !full.is_file() {
                    return Err(IngestError::MissingFile(full));
                }
            }
            if let Some(ch) = &e.channels {
                if ch.len() != e.n_channels {
                    return Err(IngestError::Manifest(format!(
                        "{}: {} channel names for n_channels={}",
                        e.subject_id,
                        ch.len(),
                        e.n_channels
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Parses every entry's EDF file and label sidecar into trials.
pub fn load_manifest_trials(m: &Manifest) -> Result<Vec<Trial>, IngestError> {
    let mut trials = Vec::new();
    for e in &m.entries {
        let edf = EdfFile::open(m.resolve(&e.file_path))?;
        let names: Vec<String> = match &e.channels {
            Some(c) => c.clone(),
            None => edf.header.labels().take(e.n_channels).map(str::to_string).collect(),
        };
        if names.len() != e.n_channels {
            return Err(IngestError::Manifest(format!(
                "{}: file has {} signals, manifest expects {}",
                e.subject_id,
                names.len(),
                e.n_channels
            )));
        }
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        let series = edf.signals(&refs)?;
        let idx = edf.header.signal_index(&names[0]).expect("validated by signals()");
        let fs = edf.header.sample_rate(idx);
        if (fs - e.fs).abs() > 1e-9 * fs.max(1.0) {
            return Err(IngestError::Manifest(format!(
                "{}: manifest fs {} Hz but file has {} Hz",
                e.subject_id, e.fs, fs
            )));
        }
        let labels = read_label_file(m.resolve(&e.label_file))?;
        if let Some(&bad) = labels.iter().find(|&&l| l >= m.n_labels()) {
            return Err(IngestError::Manifest(format!(
                "{}: label {bad} outside [0, {})",
                e.subject_id,
                m.n_labels()
            )));
        }
        let rec = Recording {
            subject_id: e.subject_id.clone(),
            channels: names,
            fs: fs as f32,
            series: series
                .into_iter()
                .map(|s| s.into_iter().map(|v| v as f32).collect())
                .collect(),
        };
        trials.extend(epoch_series(&rec, m.window_s, &labels)?);
    }
    Ok(trials)
}
