//! Minimal reader and writer for continuous EDF files.
//!
//! Layout: a 256-byte fixed ASCII header, then 256 bytes per signal stored
//! field-major (all labels, then all transducers, ...), then `n_records`
//! data records. Each record holds `samples_per_record[i]` little-endian
//! `i16` samples for every signal in order. See
//! <https://www.edfplus.info/specs/edf.html>.

use std::io::Read;
use std::path::Path;

use super::IngestError;

pub const FIXED_HEADER_BYTES: usize = 256;
pub const SIGNAL_HEADER_BYTES: usize = 256;

#[derive(Debug, Clone, PartialEq)]
pub struct EdfSignal {
    pub label: String,
    pub transducer: String,
    pub phys_dim: String,
    pub phys_min: f64,
    pub phys_max: f64,
    pub dig_min: f64,
    pub dig_max: f64,
    pub prefiltering: String,
    pub samples_per_record: usize,
}

impl EdfSignal {
    /// Maps a stored digital value onto the physical range.
    pub fn to_physical(&self, digital: i16) -> f64 {
        self.phys_min
            + (f64::from(digital) - self.dig_min) * (self.phys_max - self.phys_min)
                / (self.dig_max - self.dig_min)
    }

    /// Inverse of [`to_physical`](Self::to_physical), rounded and clamped to
    /// the digital range.
    pub fn to_digital(&self, physical: f64) -> i16 {
        let d = self.dig_min
            + (physical - self.phys_min) * (self.dig_max - self.dig_min)
                / (self.phys_max - self.phys_min);
        d.round().clamp(self.dig_min, self.dig_max) as i16
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EdfHeader {
    pub version: String,
    pub patient_id: String,
    pub recording_id: String,
    pub start_date: String,
    pub start_time: String,
    pub header_bytes: usize,
    pub n_records: usize,
    pub record_duration_s: f64,
    pub signals: Vec<EdfSignal>,
}

impl EdfHeader {
    pub fn n_signals(&self) -> usize {
        self.signals.len()
    }

    pub fn labels(&self) -> impl Iterator<Item = &str> {
        self.signals.iter().map(|s| s.label.as_str())
    }

    pub fn signal_index(&self, label: &str) -> Option<usize> {
        self.signals.iter().position(|s| s.label == label)
    }

    /// Sampling rate in Hz of signal `i`.
    pub fn sample_rate(&self, i: usize) -> f64 {
        self.signals[i].samples_per_record as f64 / self.record_duration_s
    }

    pub fn record_bytes(&self) -> usize {
        self.signals.iter().map(|s| s.samples_per_record * 2).sum()
    }

    /// Number of bytes in the data section.
    pub fn data_bytes(&self) -> usize {
        self.n_records * self.record_bytes()
    }

    pub fn total_bytes(&self) -> usize {
        self.header_bytes + self.data_bytes()
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let ns = self.signals.len();
        let mut out = Vec::with_capacity(FIXED_HEADER_BYTES + ns * SIGNAL_HEADER_BYTES);
        put_ascii(&mut out, &self.version, 8);
        put_ascii(&mut out, &self.patient_id, 80);
        put_ascii(&mut out, &self.recording_id, 80);
        put_ascii(&mut out, &self.start_date, 8);
        put_ascii(&mut out, &self.start_time, 8);
        put_ascii(&mut out, &self.header_bytes.to_string(), 8);
        put_ascii(&mut out, "", 44);
        put_ascii(&mut out, &self.n_records.to_string(), 8);
        put_ascii(&mut out, &format_decimal(self.record_duration_s), 8);
        put_ascii(&mut out, &ns.to_string(), 4);
        for s in &self.signals {
            put_ascii(&mut out, &s.label, 16);
        }
        for s in &self.signals {
            put_ascii(&mut out, &s.transducer, 80);
        }
        for s in &self.signals {
            put_ascii(&mut out, &s.phys_dim, 8);
        }
        for s in &self.signals {
            put_ascii(&mut out, &format_decimal(s.phys_min), 8);
        }
        for s in &self.signals {
            put_ascii(&mut out, &format_decimal(s.phys_max), 8);
        }
        for s in &self.signals {
            put_ascii(&mut out, &format_decimal(s.dig_min), 8);
        }
        for s in &self.signals {
            put_ascii(&mut out, &format_decimal(s.dig_max), 8);
        }
        for s in &self.signals {
            put_ascii(&mut out, &s.prefiltering, 80);
        }
        for s in &self.signals {
            put_ascii(&mut out, &s.samples_per_record.to_string(), 8);
        }
        for _ in &self.signals {
            put_ascii(&mut out, "", 32);
        }
        out
    }
}

fn put_ascii(out: &mut Vec<u8>, s: &str, width: usize) {
    let bytes = s.as_bytes();
    let n = bytes.len().min(width);
    out.extend_from_slice(&bytes[..n]);
    out.extend(std::iter::repeat(b' ').take(width - n));
}

fn format_decimal(v: f64) -> String {
    if v.fract() == 0.0 && v.abs() < 1e7 {
        return format!("{}", v as i64);
    }
    let mut s = format!("{v}");
    s.truncate(8);
    s
}

struct FieldCursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> FieldCursor<'a> {
    fn text(&mut self, width: usize) -> String {
        let raw = &self.bytes[self.pos..self.pos + width];
        self.pos += width;
        String::from_utf8_lossy(raw).trim().to_string()
    }

    fn integer(&mut self, field: &'static str, width: usize) -> Result<i64, IngestError> {
        let s = self.text(width);
        s.parse::<i64>()
            .map_err(|_| IngestError::MalformedNumeric { field, value: s })
    }

    fn decimal(&mut self, field: &'static str, width: usize) -> Result<f64, IngestError> {
        let s = self.text(width);
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            _ => Err(IngestError::MalformedNumeric { field, value: s }),
        }
    }
}

/// Parses the fixed header and all per-signal header blocks.
///
/// `bytes` may extend past the header (e.g. a whole file); only the first
/// `header_bytes` are read.
pub fn parse_edf_header(bytes: &[u8]) -> Result<EdfHeader, IngestError> {
    if bytes.len() < FIXED_HEADER_BYTES {
        return Err(IngestError::TruncatedHeader {
            needed: FIXED_HEADER_BYTES,
            available: bytes.len(),
        });
    }
    let mut cur = FieldCursor { bytes, pos: 0 };
    let version = cur.text(8);
    let patient_id = cur.text(80);
    let recording_id = cur.text(80);
    let start_date = cur.text(8);
    let start_time = cur.text(8);
    let header_bytes = cur.integer("header_bytes", 8)?;
    cur.pos += 44;
    let n_records = cur.integer("n_records", 8)?;
    let record_duration_s = cur.decimal("record_duration", 8)?;
    let n_signals = cur.integer("n_signals", 4)?;

    if n_signals < 1 {
        return Err(IngestError::InconsistentHeader(format!(
            "n_signals must be >= 1, found {n_signals}"
        )));
    }
    let n_signals = n_signals as usize;
    let expected = FIXED_HEADER_BYTES + SIGNAL_HEADER_BYTES * n_signals;
    if header_bytes < 0 || header_bytes as usize != expected {
        return Err(IngestError::InconsistentHeader(format!(
            "header_bytes {header_bytes} != 256 + 256*{n_signals}"
        )));
    }
    if n_records < 0 {
        return Err(IngestError::InconsistentHeader(format!(
            "n_records must be >= 0, found {n_records}"
        )));
    }
    if record_duration_s <= 0.0 {
        return Err(IngestError::InconsistentHeader(format!(
            "record duration must be positive, found {record_duration_s}"
        )));
    }
    if bytes.len() < expected {
        return Err(IngestError::TruncatedHeader {
            needed: expected,
            available: bytes.len(),
        });
    }

    let ns = n_signals;
    let texts = |cur: &mut FieldCursor, w| (0..ns).map(|_| cur.text(w)).collect::<Vec<_>>();
    let labels = texts(&mut cur, 16);
    let transducers = texts(&mut cur, 80);
    let phys_dims = texts(&mut cur, 8);
    let decimals = |cur: &mut FieldCursor, field| {
        (0..ns)
            .map(|_| cur.decimal(field, 8))
            .collect::<Result<Vec<_>, _>>()
    };
    let phys_min = decimals(&mut cur, "phys_min")?;
    let phys_max = decimals(&mut cur, "phys_max")?;
    let dig_min = decimals(&mut cur, "dig_min")?;
    let dig_max = decimals(&mut cur, "dig_max")?;
    let prefiltering = texts(&mut cur, 80);
    let spr = (0..ns)
        .map(|_| cur.integer("samples_per_record", 8))
        .collect::<Result<Vec<_>, _>>()?;
    cur.pos += 32 * ns;
    debug_assert_eq!(cur.pos, expected);

    let mut signals = Vec::with_capacity(ns);
    for i in 0..ns {
        if dig_min[i] >= dig_max[i] {
            return Err(IngestError::InconsistentHeader(format!(
                "signal {:?}: dig_min {} >= dig_max {}",
                labels[i], dig_min[i], dig_max[i]
            )));
        }
        if phys_min[i] == phys_max[i] {
            return Err(IngestError::InconsistentHeader(format!(
                "signal {:?}: phys_min == phys_max",
                labels[i]
            )));
        }
        if spr[i] < 1 {
            return Err(IngestError::InconsistentHeader(format!(
                "signal {:?}: samples_per_record must be >= 1",
                labels[i]
            )));
        }
        signals.push(EdfSignal {
            label: labels[i].clone(),
            transducer: transducers[i].clone(),
            phys_dim: phys_dims[i].clone(),
            phys_min: phys_min[i],
            phys_max: phys_max[i],
            dig_min: dig_min[i],
            dig_max: dig_max[i],
            prefiltering: prefiltering[i].clone(),
            samples_per_record: spr[i] as usize,
        });
    }

    Ok(EdfHeader {
        version,
        patient_id,
        recording_id,
        start_date,
        start_time,
        header_bytes: expected,
        n_records: n_records as usize,
        record_duration_s,
        signals,
    })
}

/// Reads the data records that follow the header and returns the requested
/// channels, in the requested order, as physical values.
///
/// `reader` must be positioned at the start of the data section.
pub fn read_edf_signals<R: Read>(
    mut reader: R,
    header: &EdfHeader,
    channel_names: &[&str],
) -> Result<Vec<Vec<f64>>, IngestError> {
    let selected = channel_names
        .iter()
        .map(|name| {
            header
                .signal_index(name)
                .ok_or_else(|| IngestError::UnknownChannel(name.to_string()))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(&first) = selected.first() {
        let spr = header.signals[first].samples_per_record;
        for &i in &selected {
            if header.signals[i].samples_per_record != spr {
                return Err(IngestError::RateMismatch {
                    first: header.signals[first].label.clone(),
                    other: header.signals[i].label.clone(),
                });
            }
        }
    }

    let offsets: Vec<usize> = header
        .signals
        .iter()
        .scan(0usize, |acc, s| {
            let start = *acc;
            *acc += s.samples_per_record * 2;
            Some(start)
        })
        .collect();
    let mut out: Vec<Vec<f64>> = selected
        .iter()
        .map(|&i| Vec::with_capacity(header.n_records * header.signals[i].samples_per_record))
        .collect();
    let mut record = vec![0u8; header.record_bytes()];
    for r in 0..header.n_records {
        read_full(&mut reader, &mut record).map_err(|e| match e {
            ReadFull::Short => IngestError::TruncatedRecord {
                record: r,
                n_records: header.n_records,
            },
            ReadFull::Io(e) => IngestError::Io(e),
        })?;
        for (dst, &i) in out.iter_mut().zip(&selected) {
            let sig = &header.signals[i];
            let raw = &record[offsets[i]..offsets[i] + sig.samples_per_record * 2];
            dst.extend(
                raw.chunks_exact(2)
                    .map(|c| sig.to_physical(i16::from_le_bytes([c[0], c[1]]))),
            );
        }
    }
    Ok(out)
}

enum ReadFull {
    Short,
    Io(std::io::Error),
}

fn read_full<R: Read>(reader: &mut R, buf: &mut [u8]) -> Result<(), ReadFull> {
    let mut filled = 0;
    while filled < buf.len() {
        match reader.read(&mut buf[filled..]) {
            Ok(0) => return Err(ReadFull::Short),
            Ok(n) => filled += n,
            Err(e) if e.kind() == std::io::ErrorKind::Interrupted => {}
            Err(e) => return Err(ReadFull::Io(e)),
        }
    }
    Ok(())
}

/// An EDF file loaded fully into memory.
pub struct EdfFile {
    pub header: EdfHeader,
    bytes: Vec<u8>,
}

impl EdfFile {
    pub fn open(path: impl AsRef<Path>) -> Result<Self, IngestError> {
        Self::from_bytes(std::fs::read(path)?)
    }

    pub fn from_bytes(bytes: Vec<u8>) -> Result<Self, IngestError> {
        let header = parse_edf_header(&bytes)?;
        Ok(Self { header, bytes })
    }

    pub fn signals(&self, channel_names: &[&str]) -> Result<Vec<Vec<f64>>, IngestError> {
        read_edf_signals(&self.bytes[self.header.header_bytes..], &self.header, channel_names)
    }
}

/// Serializes a header and per-signal digital samples into an EDF byte
/// stream. `digital[i]` must hold `n_records * samples_per_record` values.
pub fn encode_edf(header: &EdfHeader, digital: &[Vec<i16>]) -> Result<Vec<u8>, IngestError> {
    if digital.len() != header.n_signals() {
        return Err(IngestError::InconsistentHeader(format!(
            "{} sample vectors for {} signals",
            digital.len(),
            header.n_signals()
        )));
    }
    for (sig, d) in header.signals.iter().zip(digital) {
        if d.len() != header.n_records * sig.samples_per_record {
            return Err(IngestError::InconsistentHeader(format!(
                "signal {:?}: {} samples, expected {}",
                sig.label,
                d.len(),
                header.n_records * sig.samples_per_record
            )));
        }
    }
    let mut out = header.to_bytes();
    out.reserve(header.data_bytes());
    for r in 0..header.n_records {
        for (sig, d) in header.signals.iter().zip(digital) {
            let spr = sig.samples_per_record;
            for v in &d[r * spr..(r + 1) * spr] {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    Ok(out)
}

/// Convenience builder for EEG-style headers with one shared calibration.
pub fn eeg_header(
    labels: &[&str],
    fs: usize,
    record_duration_s: usize,
    n_records: usize,
    phys_range: (f64, f64),
) -> EdfHeader {
    let signals = labels
        .iter()
        .map(|l| EdfSignal {
            label: l.to_string(),
            transducer: "AgAgCl electrode".into(),
            phys_dim: "uV".into(),
            phys_min: phys_range.0,
            phys_max: phys_range.1,
            dig_min: -32768.0,
            dig_max: 32767.0,
            prefiltering: String::new(),
            samples_per_record: fs * record_duration_s,
        })
        .collect::<Vec<_>>();
    EdfHeader {
        version: "0".into(),
        patient_id: "X X X X".into(),
        recording_id: "Startdate X X X X".into(),
        start_date: "01.01.00".into(),
        start_time: "00.00.00".into(),
        header_bytes: FIXED_HEADER_BYTES + SIGNAL_HEADER_BYTES * labels.len(),
        n_records,
        record_duration_s: record_duration_s as f64,
        signals,
    }
}
