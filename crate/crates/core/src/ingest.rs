//! Recording input and Butterworth preprocessing.
//!
//! Two on-disk formats are understood:
//!
//! * CSV: first line `fs=<float>`, second line the channel labels, then one
//!   row per sample with one column per channel.
//! * raw binary: little-endian header `"EEGR"`, `u32` channel count, `f64`
//!   sample rate, `u64` samples per channel, then channel-major `f64` data.
//!
//! Either may be accompanied by a sidecar `<name>.annot` with lines
//! `onset_s,end_s,label` marking seizure intervals.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

pub const RAW_MAGIC: &[u8; 4] = b"EEGR";
const RAW_HEADER_LEN: usize = 4 + 4 + 8 + 8;

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: missing sampling rate header `fs=<hz>`")]
    MissingSampleRate { line: usize },
    #[error("line {line}: malformed header: {reason}")]
    MalformedHeader { line: usize, reason: String },
    #[error("line {line}: inconsistent channel lengths (expected {expected} columns, found {found})")]
    InconsistentChannelLengths { line: usize, expected: usize, found: usize },
    #[error("line {line}, column {column}: non-numeric sample `{value}`")]
    NonNumeric { line: usize, column: usize, value: String },
    #[error("byte offset {offset}: {reason}")]
    MalformedBinary { offset: usize, reason: String },
    #[error("annotation line {line}: {reason}")]
    BadAnnotation { line: usize, reason: String },
    #[error("invalid record: {0}")]
    InvalidRecord(String),
    #[error("filter design: {0}")]
    FilterDomain(String),
}

pub type Result<T> = std::result::Result<T, IngestError>;

/// A seizure marker in seconds from the start of the record.
#[derive(Debug, Clone, PartialEq)]
pub struct Annotation {
    pub onset_s: f64,
    pub end_s: f64,
    pub label: String,
}

/// Multichannel recording, channel-major, samples in microvolts.
#[derive(Debug, Clone, PartialEq)]
pub struct EegRecord {
    channels: Vec<Vec<f64>>,
    sample_rate_hz: f64,
    channel_labels: Vec<String>,
    annotations: Vec<Annotation>,
}

impl EegRecord {
    pub fn new(
        channels: Vec<Vec<f64>>,
        sample_rate_hz: f64,
        channel_labels: Vec<String>,
        annotations: Vec<Annotation>,
    ) -> Result<Self> {
        if !(sample_rate_hz > 0.0 && sample_rate_hz.is_finite()) {
            return Err(IngestError::InvalidRecord(format!(
                "sample rate must be positive, got {sample_rate_hz}"
            )));
        }
        let Some(first) = channels.first() else {
            return Err(IngestError::InvalidRecord("record has no channels".into()));
        };
        let len = first.len();
        if len == 0 {
            return Err(IngestError::InvalidRecord("channels are empty".into()));
        }
        if let Some((i, c)) = channels.iter().enumerate().find(|(_, c)| c.len() != len) {
            return Err(IngestError::InvalidRecord(format!(
                "inconsistent channel lengths: channel {i} has {} samples, channel 0 has {len}",
                c.len()
            )));
        }
        if channel_labels.len() != channels.len() {
            return Err(IngestError::InvalidRecord(format!(
                "{} labels for {} channels",
                channel_labels.len(),
                channels.len()
            )));
        }
        let duration = len as f64 / sample_rate_hz;
        for a in &annotations {
            if !(a.onset_s >= 0.0 && a.onset_s < a.end_s && a.end_s <= duration) {
                return Err(IngestError::InvalidRecord(format!(
                    "annotation [{}, {}] outside 0 <= onset < end <= {duration}",
                    a.onset_s, a.end_s
                )));
            }
        }
        Ok(Self {
            channels,
            sample_rate_hz,
            channel_labels,
            annotations,
        })
    }

    /// Builds a record with labels `ch0`, `ch1`, ... and no annotations.
    pub fn from_channels(channels: Vec<Vec<f64>>, sample_rate_hz: f64) -> Result<Self> {
        let labels = (0..channels.len()).map(|i| format!("ch{i}")).collect();
        Self::new(channels, sample_rate_hz, labels, Vec::new())
    }

    pub fn channels(&self) -> &[Vec<f64>] {
        &self.channels
    }

    pub fn channel_labels(&self) -> &[String] {
        &self.channel_labels
    }

    pub fn annotations(&self) -> &[Annotation] {
        &self.annotations
    }

    pub fn sample_rate_hz(&self) -> f64 {
        self.sample_rate_hz
    }

    /// Samples per channel.
    pub fn len(&self) -> usize {
        self.channels[0].len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn num_channels(&self) -> usize {
        self.channels.len()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz
    }

    pub fn with_annotations(mut self, annotations: Vec<Annotation>) -> Result<Self> {
        let channels = std::mem::take(&mut self.channels);
        Self::new(channels, self.sample_rate_hz, self.channel_labels, annotations)
    }

    fn map_channels(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> EegRecord {
        EegRecord {
            channels: self.channels.iter().map(|c| f(c)).collect(),
            sample_rate_hz: self.sample_rate_hz,
            channel_labels: self.channel_labels.clone(),
            annotations: self.annotations.clone(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RecordFormat {
    Csv,
    RawBinary,
}

impl RecordFormat {
    /// `.csv` is CSV; `.eegr`, `.bin` and `.raw` are raw binary.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "eegr" | "bin" | "raw" => Some(Self::RawBinary),
            _ => None,
        }
    }
}

pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("annot")
}

/// Reads a record and, if present, its `.annot` sidecar.
pub fn read_record(path: &Path, format: RecordFormat) -> Result<EegRecord> {
    let io_err = |source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    };
    let record = match format {
        RecordFormat::Csv => parse_csv(&fs::read_to_string(path).map_err(io_err)?)?,
        RecordFormat::RawBinary => parse_raw_binary(&fs::read(path).map_err(io_err)?)?,
    };
    let sidecar = sidecar_path(path);
    if sidecar.is_file() {
        let text = fs::read_to_string(&sidecar).map_err(|source| IngestError::Io {
            path: sidecar.clone(),
            source,
        })?;
        record.with_annotations(parse_annotations(&text)?)
    } else {
        Ok(record)
    }
}

pub fn parse_csv(text: &str) -> Result<EegRecord> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l));

    let (line_no, header) = lines.next().ok_or(IngestError::MissingSampleRate { line: 1 })?;
    let fs = parse_fs_header(line_no, header)?;

    let (label_line, labels) = lines.next().ok_or(IngestError::MalformedHeader {
        line: 2,
        reason: "missing channel label line".into(),
    })?;
    let labels: Vec<String> = labels.split(',').map(|s| s.trim().to_string()).collect();
    if labels.iter().any(String::is_empty) {
        return Err(IngestError::MalformedHeader {
            line: label_line,
            reason: "empty channel label".into(),
        });
    }

    let mut channels = vec![Vec::new(); labels.len()];
    for (line, row) in lines {
        if row.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != labels.len() {
            return Err(IngestError::InconsistentChannelLengths {
                line,
                expected: labels.len(),
                found: fields.len(),
            });
        }
        for (column, (field, channel)) in fields.iter().zip(channels.iter_mut()).enumerate() {
            let field = field.trim();
            let value: f64 = field.parse().map_err(|_| IngestError::NonNumeric {
                line,
                column: column + 1,
                value: field.to_string(),
            })?;
            if !value.is_finite() {
                return Err(IngestError::NonNumeric {
                    line,
                    column: column + 1,
                    value: field.to_string(),
                });
            }
            channel.push(value);
        }
    }
    EegRecord::new(channels, fs, labels, Vec::new())
}

fn parse_fs_header(line: usize, header: &str) -> Result<f64> {
    let header = header.trim();
    let Some(value) = header.strip_prefix("fs=") else {
        return Err(IngestError::MissingSampleRate { line });
    };
    let fs: f64 = value.trim().parse().map_err(|_| IngestError::MalformedHeader {
        line,
        reason: format!("sampling rate `{value}` is not a number"),
    })?;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(IngestError::MalformedHeader {
            line,
            reason: format!("sampling rate must be positive, got {fs}"),
        });
    }
    Ok(fs)
}

pub fn parse_raw_binary(bytes: &[u8]) -> Result<EegRecord> {
    if bytes.len() < RAW_HEADER_LEN {
        return Err(IngestError::MalformedBinary {
            offset: bytes.len(),
            reason: format!("truncated header ({} of {RAW_HEADER_LEN} bytes)", bytes.len()),
        });
    }
    if &bytes[0..4] != RAW_MAGIC {
        return Err(IngestError::MalformedBinary {
            offset: 0,
            reason: "bad magic, expected `EEGR`".into(),
        });
    }
    let channels = u32::from_le_bytes(bytes[4..8].try_into().unwrap()) as usize;
    let fs = f64::from_le_bytes(bytes[8..16].try_into().unwrap());
    let samples = u64::from_le_bytes(bytes[16..24].try_into().unwrap()) as usize;
    if !(fs > 0.0 && fs.is_finite()) {
        return Err(IngestError::MalformedBinary {
            offset: 8,
            reason: format!("missing or invalid sampling rate {fs}"),
        });
    }
    if channels == 0 || samples == 0 {
        return Err(IngestError::MalformedBinary {
            offset: 4,
            reason: format!("{channels} channels x {samples} samples is empty"),
        });
    }
    let expected = channels
        .checked_mul(samples)
        .and_then(|n| n.checked_mul(8))
        .and_then(|n| n.checked_add(RAW_HEADER_LEN))
        .ok_or(IngestError::MalformedBinary {
            offset: 4,
            reason: "header sizes overflow".into(),
        })?;
    if bytes.len() != expected {
        return Err(IngestError::MalformedBinary {
            offset: bytes.len().min(expected),
            reason: format!(
                "inconsistent channel lengths: payload is {} bytes, header implies {expected}",
                bytes.len()
            ),
        });
    }
    let mut data = Vec::with_capacity(channels);
    for c in 0..channels {
        let base = RAW_HEADER_LEN + c * samples * 8;
        let mut channel = Vec::with_capacity(samples);
        for s in 0..samples {
            let off = base + s * 8;
            let v = f64::from_le_bytes(bytes[off..off + 8].try_into().unwrap());
            if !v.is_finite() {
                return Err(IngestError::MalformedBinary {
                    offset: off,
                    reason: format!("non-finite sample {v}"),
                });
            }
            channel.push(v);
        }
        data.push(channel);
    }
    EegRecord::from_channels(data, fs)
}

pub fn parse_annotations(text: &str) -> Result<Vec<Annotation>> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let mut parts = line.splitn(3, ',');
        let mut num = |what: &str| -> Result<f64> {
            let raw = parts.next().unwrap_or("").trim();
            raw.parse().map_err(|_| IngestError::BadAnnotation {
                line: line_no,
                reason: format!("{what} `{raw}` is not a number"),
            })
        };
        let onset_s = num("onset")?;
        let end_s = num("end")?;
        let label = parts.next().unwrap_or("seizure").trim().to_string();
        if !(onset_s >= 0.0 && onset_s < end_s) {
            return Err(IngestError::BadAnnotation {
                line: line_no,
                reason: format!("need 0 <= onset < end, got {onset_s},{end_s}"),
            });
        }
        out.push(Annotation { onset_s, end_s, label });
    }
    Ok(out)
}

/// Writes `record` in the CSV format `parse_csv` reads. Annotations are not
/// written; see [`write_annotations`].
pub fn write_csv(record: &EegRecord, mut out: impl Write) -> std::io::Result<()> {
    writeln!(out, "fs={}", record.sample_rate_hz)?;
    writeln!(out, "{}", record.channel_labels.join(","))?;
    let mut row = String::new();
    for s in 0..record.len() {
        row.clear();
        for (c, ch) in record.channels.iter().enumerate() {
            if c > 0 {
                row.push(',');
            }
            row.push_str(&ch[s].to_string());
        }
        writeln!(out, "{row}")?;
    }
    Ok(())
}

pub fn write_raw_binary(record: &EegRecord, mut out: impl Write) -> std::io::Result<()> {
    out.write_all(RAW_MAGIC)?;
    out.write_all(&(record.num_channels() as u32).to_le_bytes())?;
    out.write_all(&record.sample_rate_hz.to_le_bytes())?;
    out.write_all(&(record.len() as u64).to_le_bytes())?;
    for ch in &record.channels {
        for v in ch {
            out.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn write_annotations(annotations: &[Annotation], mut out: impl Write) -> std::io::Result<()> {
    for a in annotations {
        writeln!(out, "{},{},{}", a.onset_s, a.end_s, a.label)?;
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FilterKind {
    LowPass,
    HighPass,
}

impl fmt::Display for FilterKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FilterKind::LowPass => "low_pass",
            FilterKind::HighPass => "high_pass",
        })
    }
}

impl FromStr for FilterKind {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, Self::Err> {
        match s {
            "low_pass" | "lowpass" => Ok(Self::LowPass),
            "high_pass" | "highpass" => Ok(Self::HighPass),
            _ => Err(format!("unknown filter kind `{s}`")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct IirFilterSpec {
    pub kind: FilterKind,
    pub order: usize,
    pub cutoff_hz: f64,
}

impl IirFilterSpec {
    pub fn low_pass(order: usize, cutoff_hz: f64) -> Self {
        Self {
            kind: FilterKind::LowPass,
            order,
            cutoff_hz,
        }
    }

    pub fn high_pass(order: usize, cutoff_hz: f64) -> Self {
        Self {
            kind: FilterKind::HighPass,
            order,
            cutoff_hz,
        }
    }

    /// Second-order low-pass at 100 Hz followed by first-order high-pass at 30 Hz.
    ///
    /// Note the 30 Hz high-pass removes most delta..beta energy; override it
    /// (e.g. 0.5 Hz) when those rhythms matter.
    pub fn default_cascade() -> Vec<Self> {
        vec![Self::low_pass(2, 100.0), Self::high_pass(1, 30.0)]
    }

    pub fn validate(&self, sample_rate_hz: f64) -> Result<()> {
        if self.order == 0 {
            return Err(IngestError::FilterDomain("order must be >= 1".into()));
        }
        let nyquist = sample_rate_hz / 2.0;
        if !(self.cutoff_hz > 0.0 && self.cutoff_hz < nyquist) {
            return Err(IngestError::FilterDomain(format!(
                "{} cutoff {} Hz must lie in (0, {nyquist}) for fs = {sample_rate_hz} Hz",
                self.kind, self.cutoff_hz
            )));
        }
        Ok(())
    }
}

/// One second-order section, `a0` normalized to 1.
///
/// A first-order section has `b2 = a2 = 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Biquad {
    pub b0: f64,
    pub b1: f64,
    pub b2: f64,
    pub a1: f64,
    pub a2: f64,
}

impl Biquad {
    pub const IDENTITY: Biquad = Biquad {
        b0: 1.0,
        b1: 0.0,
        b2: 0.0,
        a1: 0.0,
        a2: 0.0,
    };

    /// Roots of `z² + a1 z + a2` as (re, im) pairs.
    pub fn poles(&self) -> [(f64, f64); 2] {
        let disc = self.a1 * self.a1 - 4.0 * self.a2;
        if disc >= 0.0 {
            let s = disc.sqrt();
            [(0.5 * (-self.a1 + s), 0.0), (0.5 * (-self.a1 - s), 0.0)]
        } else {
            let s = (-disc).sqrt();
            [(-0.5 * self.a1, 0.5 * s), (-0.5 * self.a1, -0.5 * s)]
        }
    }

    pub fn is_stable(&self) -> bool {
        self.poles().iter().all(|&(re, im)| re.hypot(im) < 1.0)
    }

    /// `|H(e^{jω})|` with `ω = 2π f / fs`.
    pub fn magnitude(&self, omega: f64) -> f64 {
        let (c1, s1) = (omega.cos(), -omega.sin());
        let (c2, s2) = ((2.0 * omega).cos(), -(2.0 * omega).sin());
        let num = (self.b0 + self.b1 * c1 + self.b2 * c2, self.b1 * s1 + self.b2 * s2);
        let den = (1.0 + self.a1 * c1 + self.a2 * c2, self.a1 * s1 + self.a2 * s2);
        num.0.hypot(num.1) / den.0.hypot(den.1)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiquadCascade {
    pub sections: Vec<Biquad>,
}

impl BiquadCascade {
    pub fn identity() -> Self {
        Self {
            sections: vec![Biquad::IDENTITY],
        }
    }

    pub fn is_stable(&self) -> bool {
        self.sections.iter().all(Biquad::is_stable)
    }

    pub fn magnitude_at(&self, freq_hz: f64, sample_rate_hz: f64) -> f64 {
        let omega = 2.0 * std::f64::consts::PI * freq_hz / sample_rate_hz;
        self.sections.iter().map(|s| s.magnitude(omega)).product()
    }

    /// Filters one channel, zero initial state, transposed direct form II.
    pub fn filter(&self, input: &[f64]) -> Vec<f64> {
        let mut out = input.to_vec();
        for s in &self.sections {
            let (mut z1, mut z2) = (0.0, 0.0);
            for v in out.iter_mut() {
                let x = *v;
                let y = s.b0 * x + z1;
                z1 = s.b1 * x - s.a1 * y + z2;
                z2 = s.b2 * x - s.a2 * y;
                *v = y;
            }
        }
        out
    }
}

/// Digital Butterworth design by bilinear transform with pre-warping, so the
/// -3.01 dB point lands exactly on `cutoff_hz`.
pub fn design_butterworth(spec: &IirFilterSpec, sample_rate_hz: f64) -> Result<BiquadCascade> {
    spec.validate(sample_rate_hz)?;
    let n = spec.order;
    let k = (std::f64::consts::PI * spec.cutoff_hz / sample_rate_hz).tan();
    let k2 = k * k;
    let mut sections = Vec::with_capacity(n.div_ceil(2));

    // conjugate pole pairs of the analog prototype, Q = 1 / (2 sin θ)
    for i in 0..n / 2 {
        let theta = std::f64::consts::PI * (2 * i + 1) as f64 / (2 * n) as f64;
        let inv_q = 2.0 * theta.sin();
        let norm = 1.0 / (1.0 + k * inv_q + k2);
        let a1 = 2.0 * (k2 - 1.0) * norm;
        let a2 = (1.0 - k * inv_q + k2) * norm;
        let section = match spec.kind {
            FilterKind::LowPass => Biquad {
                b0: k2 * norm,
                b1: 2.0 * k2 * norm,
                b2: k2 * norm,
                a1,
                a2,
            },
            FilterKind::HighPass => Biquad {
                b0: norm,
                b1: -2.0 * norm,
                b2: norm,
                a1,
                a2,
            },
        };
        sections.push(section);
    }
    if n % 2 == 1 {
        let norm = 1.0 / (1.0 + k);
        let a1 = (k - 1.0) * norm;
        let section = match spec.kind {
            FilterKind::LowPass => Biquad {
                b0: k * norm,
                b1: k * norm,
                b2: 0.0,
                a1,
                a2: 0.0,
            },
            FilterKind::HighPass => Biquad {
                b0: norm,
                b1: -norm,
                b2: 0.0,
                a1,
                a2: 0.0,
            },
        };
        sections.push(section);
    }
    Ok(BiquadCascade { sections })
}

/// Filters every channel independently. Output lengths equal input lengths.
pub fn apply_filter(record: &EegRecord, cascade: &BiquadCascade) -> EegRecord {
    record.map_channels(|c| cascade.filter(c))
}

/// Applies each filter in order, then removes each channel's mean.
pub fn preprocess(record: &EegRecord, specs: &[IirFilterSpec]) -> Result<EegRecord> {
    let cascades = specs
        .iter()
        .map(|s| design_butterworth(s, record.sample_rate_hz))
        .collect::<Result<Vec<_>>>()?;
    let mut out = record.clone();
    for cascade in &cascades {
        out = apply_filter(&out, cascade);
    }
    Ok(out.map_channels(subtract_mean))
}

fn subtract_mean(channel: &[f64]) -> Vec<f64> {
    let mean = channel.iter().sum::<f64>() / channel.len() as f64;
    let centered: Vec<f64> = channel.iter().map(|v| v - mean).collect();
    // one correction pass absorbs the rounding left by the first
    let residual = centered.iter().sum::<f64>() / channel.len() as f64;
    centered.into_iter().map(|v| v - residual).collect()
}
