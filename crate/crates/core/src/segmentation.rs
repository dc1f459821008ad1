//! Rectangular, overlapping windows over a record.

use thiserror::Error;

use crate::class::Class;
use crate::ingest::{Annotation, EegRecord};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SegmentError {
    #[error("invalid segment plan: {0}")]
    InvalidPlan(String),
    #[error("record too short: {length} samples, one window needs {window}")]
    RecordTooShort { length: usize, window: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPlan {
    pub window_seconds: f64,
    pub overlap_fraction: f64,
}

impl Default for SegmentPlan {
    fn default() -> Self {
        Self {
            window_seconds: 2.0,
            overlap_fraction: 0.5,
        }
    }
}

/// Window and hop in samples, and how many full windows fit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SegmentLayout {
    pub count: usize,
    pub window: usize,
    pub hop: usize,
}

impl SegmentPlan {
    /// `(W, hop)` in samples at `fs`.
    pub fn window_and_hop(&self, fs: f64) -> Result<(usize, usize), SegmentError> {
        if !(self.window_seconds > 0.0 && self.window_seconds.is_finite()) {
            return Err(SegmentError::InvalidPlan(format!(
                "window_seconds must be positive, got {}",
                self.window_seconds
            )));
        }
        if !(0.0..1.0).contains(&self.overlap_fraction) {
            return Err(SegmentError::InvalidPlan(format!(
                "overlap_fraction must lie in [0, 1), got {}",
                self.overlap_fraction
            )));
        }
        let window = (self.window_seconds * fs).round();
        if window < 2.0 {
            return Err(SegmentError::InvalidPlan(format!(
                "window of {window} samples at {fs} Hz, need at least 2"
            )));
        }
        let window = window as usize;
        let hop = (window as f64 * (1.0 - self.overlap_fraction)).round() as usize;
        if hop < 1 {
            return Err(SegmentError::InvalidPlan(format!(
                "overlap {} leaves a hop of 0 samples",
                self.overlap_fraction
            )));
        }
        Ok((window, hop))
    }
}

/// One window `X^(i)`: `data[c]` holds the `W` samples of channel `c`.
#[derive(Debug, Clone, PartialEq)]
pub struct Segment {
    pub index: usize,
    pub start_sample: usize,
    pub data: Vec<Vec<f64>>,
}

impl Segment {
    pub fn window_len(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }
}

/// Trailing samples that do not fill a window are dropped.
pub fn plan_segments(record_length: usize, fs: f64, plan: &SegmentPlan) -> Result<SegmentLayout, SegmentError> {
    let (window, hop) = plan.window_and_hop(fs)?;
    if record_length < window {
        return Err(SegmentError::RecordTooShort {
            length: record_length,
            window,
        });
    }
    Ok(SegmentLayout {
        count: (record_length - window) / hop + 1,
        window,
        hop,
    })
}

pub fn extract_segments(record: &EegRecord, plan: &SegmentPlan) -> Result<Vec<Segment>, SegmentError> {
    let layout = plan_segments(record.len(), record.sample_rate_hz(), plan)?;
    Ok((0..layout.count)
        .map(|index| {
            let start = index * layout.hop;
            Segment {
                index,
                start_sample: start,
                data: record
                    .channels()
                    .iter()
                    .map(|c| c[start..start + layout.window].to_vec())
                    .collect(),
            }
        })
        .collect())
}

/// Seizure iff the segment overlaps a single annotation by at least
/// `min_overlap_fraction` of the window duration (0.5 by default).
pub fn label_segment(segment: &Segment, annotations: &[Annotation], fs: f64, min_overlap_fraction: f64) -> Class {
    let start = segment.start_sample as f64 / fs;
    let duration = segment.window_len() as f64 / fs;
    let end = start + duration;
    let needed = min_overlap_fraction * duration;
    let hit = annotations.iter().any(|a| {
        let overlap = end.min(a.end_s) - start.max(a.onset_s);
        overlap > 0.0 && overlap >= needed
    });
    if hit {
        Class::Seizure
    } else {
        Class::NonSeizure
    }
}

pub const DEFAULT_LABEL_OVERLAP: f64 = 0.5;
