//! Segment-level feature extraction and the `.features.csv` file format.

use std::fmt::Write as _;

use anyhow::{anyhow, bail, Context, Result};

use seizure_core::class::Class;
use seizure_core::evaluate::{aggregate_segments, Aggregation, EventFeatures};
use seizure_core::ggd::{features_for_segment, BandFeatures, GgdParams};
use seizure_core::ingest::{preprocess, EegRecord};
use seizure_core::rhythms::{segment_bands, Band, BandMap, Wavelet};
use seizure_core::segmentation::{extract_segments, label_segment};

use crate::config::Settings;

pub const FORMAT_TAG: &str = "seizure-features/1";

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow {
    pub segment_index: usize,
    pub start_s: f64,
    pub params: [GgdParams; 5],
    pub label: Class,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureFile {
    pub source: String,
    pub sample_rate_hz: f64,
    pub rows: Vec<FeatureRow>,
}

/// Filters, segments, decomposes and fits every segment of `record`.
pub fn extract_features(record: &EegRecord, settings: &Settings) -> Result<Vec<FeatureRow>> {
    let fs = record.sample_rate_hz();
    let clean = preprocess(record, &settings.filters)?;
    let wavelet = Wavelet::db4();
    let band_fs = settings.band_sample_rate_hz.unwrap_or(fs);
    // fail once per record rather than once per segment
    BandMap::new(band_fs, settings.levels)?;
    extract_segments(&clean, &settings.plan)?
        .iter()
        .map(|seg| {
            let stack = segment_bands(seg, &wavelet, settings.levels, band_fs)
                .with_context(|| format!("segment {}", seg.index))?;
            let bf = features_for_segment(&stack, seg.index, &settings.estimator)
                .with_context(|| format!("segment {}", seg.index))?;
            Ok(FeatureRow {
                segment_index: seg.index,
                start_s: seg.start_sample as f64 / fs,
                params: bf.params,
                label: label_segment(seg, record.annotations(), fs, settings.label_overlap),
            })
        })
        .collect()
}

fn column_names() -> Vec<String> {
    let mut cols = vec!["segment_index".to_string(), "start_s".to_string()];
    for b in Band::ALL {
        cols.push(format!("{}_A", b.name()));
        cols.push(format!("{}_B", b.name()));
    }
    cols.push("label".into());
    cols
}

/// Values are written with shortest round-trip precision.
pub fn render_feature_file(file: &FeatureFile) -> String {
    let mut s = String::new();
    writeln!(s, "# format = {FORMAT_TAG}").unwrap();
    writeln!(s, "# source = {}", file.source).unwrap();
    writeln!(s, "# sample_rate_hz = {}", file.sample_rate_hz).unwrap();
    writeln!(
        s,
        "# units: start_s seconds; <band>_A scale in input units; <band>_B shape, dimensionless"
    )
    .unwrap();
    writeln!(s, "{}", column_names().join(",")).unwrap();
    for r in &file.rows {
        write!(s, "{},{}", r.segment_index, r.start_s).unwrap();
        for p in &r.params {
            write!(s, ",{},{}", p.scale_a, p.shape_b).unwrap();
        }
        writeln!(s, ",{}", r.label).unwrap();
    }
    s
}

pub fn parse_feature_file(text: &str) -> Result<FeatureFile> {
    let mut source = String::new();
    let mut fs = None;
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (i, line) in text.lines().enumerate() {
        let lineno = i + 1;
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            if let Some((k, v)) = meta.split_once('=') {
                match k.trim() {
                    "source" => source = v.trim().to_string(),
                    "sample_rate_hz" => {
                        fs = Some(
                            v.trim()
                                .parse::<f64>()
                                .with_context(|| format!("line {lineno}: sample rate"))?,
                        )
                    }
                    "format" if v.trim() != FORMAT_TAG => bail!("line {lineno}: unsupported format `{}`", v.trim()),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            if line
                .split(',')
                .map(str::trim)
                .ne(column_names().iter().map(String::as_str))
            {
                bail!("line {lineno}: unexpected column header");
            }
            header_seen = true;
            continue;
        }
        let f: Vec<&str> = line.split(',').map(str::trim).collect();
        if f.len() != 13 {
            bail!("line {lineno}: expected 13 fields, found {}", f.len());
        }
        let num = |j: usize| -> Result<f64> {
            f[j].parse::<f64>()
                .map_err(|_| anyhow!("line {lineno}: field {} is not a number: `{}`", j + 1, f[j]))
        };
        let mut params = [GgdParams {
            scale_a: 0.0,
            shape_b: 0.0,
        }; 5];
        for (b, p) in params.iter_mut().enumerate() {
            *p = GgdParams::new(num(2 + 2 * b)?, num(3 + 2 * b)?).with_context(|| format!("line {lineno}"))?;
        }
        rows.push(FeatureRow {
            segment_index: f[0]
                .parse()
                .map_err(|_| anyhow!("line {lineno}: bad segment index `{}`", f[0]))?,
            start_s: num(1)?,
            params,
            label: f[12].parse().with_context(|| format!("line {lineno}"))?,
        });
    }
    if !header_seen {
        bail!("no column header");
    }
    Ok(FeatureFile {
        source,
        sample_rate_hz: fs.ok_or_else(|| anyhow!("missing `# sample_rate_hz` line"))?,
        rows,
    })
}

/// A record counts as a seizure event when any of its segments is labeled
/// seizure; only segments carrying the event's label are aggregated.
pub fn event_from_file(name: &str, file: &FeatureFile, how: Aggregation) -> Result<EventFeatures> {
    if file.rows.is_empty() {
        bail!("{name}: no segments");
    }
    let class = if file.rows.iter().any(|r| r.label == Class::Seizure) {
        Class::Seizure
    } else {
        Class::NonSeizure
    };
    let segs: Vec<BandFeatures> = file
        .rows
        .iter()
        .filter(|r| r.label == class)
        .map(|r| BandFeatures {
            segment_index: r.segment_index,
            class_label: Some(r.label),
            params: r.params,
        })
        .collect();
    Ok(EventFeatures {
        name: name.to_string(),
        class,
        params: aggregate_segments(&segs, how)?,
    })
}
