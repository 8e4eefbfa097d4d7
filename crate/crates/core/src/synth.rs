//! Synthetic multi-subject EEG with class-dependent oscillations, for smoke
//! tests, benchmarks and demos.
//!
//! Each trial carries one sinusoid whose frequency is set by its class, plus
//! white noise; each subject mixes its sources through its own random gain
//! matrix, which is what per-subject alignment is meant to undo.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::ingest::edf::{eeg_header, encode_edf};
use crate::ingest::{epoch_series, write_label_file, IngestError, Manifest, ManifestEntry, Recording, Trial};

#[derive(Debug, Clone, PartialEq)]
pub struct SynthConfig {
    pub n_subjects: usize,
    pub trials_per_subject: usize,
    pub n_channels: usize,
    /// Integer sampling rate in Hz (EDF stores samples per 1 s record).
    pub fs: usize,
    /// Whole seconds per trial.
    pub window_s: usize,
    /// Oscillation frequency of each class in Hz.
    pub class_freqs: Vec<f64>,
    /// Peak amplitude of the class oscillation in microvolts.
    pub amplitude: f64,
    /// Standard deviation of the additive noise in microvolts.
    pub noise: f64,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            n_subjects: 10,
            trials_per_subject: 10,
            n_channels: 2,
            fs: 100,
            window_s: 6,
            class_freqs: vec![6.0, 20.0],
            amplitude: 20.0,
            noise: 5.0,
            seed: 0,
        }
    }
}

impl SynthConfig {
    pub fn n_labels(&self) -> usize {
        self.class_freqs.len()
    }

    pub fn n_samples(&self) -> usize {
        self.fs * self.window_s
    }

    pub fn subject_id(&self, i: usize) -> String {
        format!("S{:03}", i + 1)
    }
}

/// Continuous recordings (trials back to back) with their per-window labels.
pub fn synth_recordings(cfg: &SynthConfig) -> Vec<(Recording, Vec<usize>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let noise = Normal::new(0.0, cfg.noise.max(f64::MIN_POSITIVE)).expect("finite noise");
    let (c, t, fs) = (cfg.n_channels, cfg.n_samples(), cfg.fs as f64);
    (0..cfg.n_subjects)
        .map(|si| {
            let mut labels: Vec<usize> = (0..cfg.trials_per_subject).map(|i| i % cfg.n_labels()).collect();
            labels.shuffle(&mut rng);
            // Per-subject mixing: random gains around a random overall scale.
            let scale = rng.gen_range(0.5..2.0);
            let mix: Vec<f64> = (0..c * c)
                .map(|k| {
                    let diag = if k % (c + 1) == 0 { 1.0 } else { 0.0 };
                    scale * (diag + rng.gen_range(-0.3..0.3))
                })
                .collect();
            let mut series = vec![Vec::with_capacity(labels.len() * t); c];
            for &label in &labels {
                let f = cfg.class_freqs[label] + rng.gen_range(-0.5..0.5);
                let phase = rng.gen_range(0.0..2.0 * PI);
                let amp = cfg.amplitude * rng.gen_range(0.8..1.2);
                let sources: Vec<Vec<f64>> = (0..c)
                    .map(|k| {
                        (0..t)
                            .map(|n| {
                                let osc = if k == 0 {
                                    amp * (2.0 * PI * f * n as f64 / fs + phase).sin()
                                } else {
                                    0.0
                                };
                                osc + noise.sample(&mut rng)
                            })
                            .collect()
                    })
                    .collect();
                for (i, out) in series.iter_mut().enumerate() {
                    for n in 0..t {
                        let v: f64 = (0..c).map(|k| mix[i * c + k] * sources[k][n]).sum();
                        out.push(v as f32);
                    }
                }
            }
            let rec = Recording {
                subject_id: cfg.subject_id(si),
                channels: (0..c).map(|k| format!("EEG {k}")).collect(),
                fs: cfg.fs as f32,
                series,
            };
            (rec, labels)
        })
        .collect()
}

/// All trials of all subjects, subject by subject.
pub fn synth_trials(cfg: &SynthConfig) -> Vec<Trial> {
    synth_recordings(cfg)
        .iter()
        .flat_map(|(rec, labels)| epoch_series(rec, cfg.window_s as f64, labels).expect("consistent synthetic data"))
        .collect()
}

/// Writes one EDF file and one label sidecar per subject plus
/// `manifest.json` into `dir`, and returns the manifest path.
pub fn write_edf_dataset(cfg: &SynthConfig, dir: impl AsRef<Path>) -> Result<PathBuf, IngestError> {
    let dir = dir.as_ref();
    std::fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (rec, labels) in synth_recordings(cfg) {
        let peak = rec
            .series
            .iter()
            .flatten()
            .fold(0.0f64, |m, &v| m.max(f64::from(v).abs()));
        let range = (peak * 1.05).ceil().max(1.0);
        let names: Vec<&str> = rec.channels.iter().map(String::as_str).collect();
        let n_records = labels.len() * cfg.window_s;
        let header = eeg_header(&names, cfg.fs, 1, n_records, (-range, range));
        let digital: Vec<Vec<i16>> = rec
            .series
            .iter()
            .zip(&header.signals)
            .map(|(s, sig)| s.iter().map(|&v| sig.to_digital(f64::from(v))).collect())
            .collect();
        let edf_name = format!("{}.edf", rec.subject_id);
        let label_name = format!("{}_labels.csv", rec.subject_id);
        std::fs::write(dir.join(&edf_name), encode_edf(&header, &digital)?)?;
        write_label_file(dir.join(&label_name), &labels)?;
        entries.push(ManifestEntry {
            subject_id: rec.subject_id.clone(),
            file_path: edf_name.into(),
            label_file: label_name.into(),
            fs: cfg.fs as f64,
            n_channels: cfg.n_channels,
            channels: None,
        });
    }
    let manifest = Manifest {
        dataset_name: "synthetic-oscillations".into(),
        label_names: cfg.class_freqs.iter().map(|f| format!("{f} Hz")).collect(),
        window_s: cfg.window_s as f64,
        entries,
        base_dir: dir.to_path_buf(),
    };
    let path = dir.join("manifest.json");
    let json = serde_json::to_string_pretty(&manifest).map_err(|e| IngestError::Manifest(e.to_string()))?;
    std::fs::write(&path, json)?;
    Ok(path)
}
