//! Daubechies-4 multiresolution analysis and the wavelet-scale to
//! brain-rhythm mapping.
//!
//! The transform is orthogonal with periodic extension. An odd-length level
//! input is first extended by repeating its last sample, so reconstruction is
//! still exact but energy is only preserved when every level input is even
//! (any length divisible by `2^levels`).

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::segmentation::Segment;

/// Daubechies scaling filter with four vanishing moments (8 taps).
#[allow(clippy::excessive_precision)]
pub const DB4_SCALING: [f64; 8] = [
    0.230_377_813_308_896_500_86,
    0.714_846_570_552_915_647_09,
    0.630_880_767_929_858_907_88,
    -0.027_983_769_416_859_854_21,
    -0.187_034_811_719_093_084_08,
    0.030_841_381_835_560_763_63,
    0.032_883_011_666_885_199_74,
    -0.010_597_401_785_069_032_10,
];

pub const DEFAULT_LEVELS: usize = 6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RhythmError {
    #[error("signal of length {length} supports at most {max_depth} levels, {requested} requested")]
    TooShort {
        length: usize,
        requested: usize,
        max_depth: usize,
    },
    #[error("decomposition depth must be at least 1")]
    ZeroDepth,
    #[error("inconsistent decomposition: {0}")]
    Structure(String),
    #[error("at {fs} Hz with {levels} levels no wavelet scale falls in: {}", .missing.iter().map(|b| b.name()).collect::<Vec<_>>().join(", "))]
    BandGap { fs: f64, levels: usize, missing: Vec<Band> },
    #[error("no channels to pool")]
    NoChannels,
}

/// An orthogonal two-channel filter bank defined by its scaling filter.
#[derive(Debug, Clone, PartialEq)]
pub struct Wavelet {
    lowpass: Vec<f64>,
    highpass: Vec<f64>,
}

impl Wavelet {
    pub fn db4() -> Self {
        Self::from_scaling(DB4_SCALING.to_vec())
    }

    /// `g[n] = (-1)^n h[L-1-n]`. No orthogonality check is made, which
    /// lets a self-test feed in damaged taps.
    pub fn from_scaling(lowpass: Vec<f64>) -> Self {
        let len = lowpass.len();
        let highpass = (0..len)
            .map(|n| {
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                sign * lowpass[len - 1 - n]
            })
            .collect();
        Self { lowpass, highpass }
    }

    pub fn lowpass(&self) -> &[f64] {
        &self.lowpass
    }

    pub fn highpass(&self) -> &[f64] {
        &self.highpass
    }

    pub fn filter_len(&self) -> usize {
        self.lowpass.len()
    }

    /// Deepest decomposition for which every level input has at least
    /// `filter_len` samples.
    pub fn max_depth(&self, length: usize) -> usize {
        let mut depth = 0;
        let mut n = length;
        while n >= self.filter_len() {
            depth += 1;
            n = n.div_ceil(2);
        }
        depth
    }

    fn analyze_level(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let ext = even_extension(x);
        let n = ext.len();
        let half = n / 2;
        let mut approx = vec![0.0; half];
        let mut detail = vec![0.0; half];
        for k in 0..half {
            let (mut a, mut d) = (0.0, 0.0);
            for (t, (&h, &g)) in self.lowpass.iter().zip(&self.highpass).enumerate() {
                let v = ext[(2 * k + t) % n];
                a += h * v;
                d += g * v;
            }
            approx[k] = a;
            detail[k] = d;
        }
        (approx, detail)
    }

    fn synthesize_level(&self, approx: &[f64], detail: &[f64], out_len: usize) -> Vec<f64> {
        let n = 2 * approx.len();
        let mut out = vec![0.0; n];
        for (k, (&a, &d)) in approx.iter().zip(detail).enumerate() {
            for (t, (&h, &g)) in self.lowpass.iter().zip(&self.highpass).enumerate() {
                out[(2 * k + t) % n] += a * h + d * g;
            }
        }
        out.truncate(out_len);
        out
    }

    pub fn decompose(&self, signal: &[f64], levels: usize) -> Result<WaveletDecomposition, RhythmError> {
        if levels == 0 {
            return Err(RhythmError::ZeroDepth);
        }
        let max_depth = self.max_depth(signal.len());
        if levels > max_depth {
            return Err(RhythmError::TooShort {
                length: signal.len(),
                requested: levels,
                max_depth,
            });
        }
        let mut details = Vec::with_capacity(levels);
        let mut input_lengths = Vec::with_capacity(levels);
        let mut current = signal.to_vec();
        for _ in 0..levels {
            input_lengths.push(current.len());
            let (a, d) = self.analyze_level(&current);
            details.push(d);
            current = a;
        }
        Ok(WaveletDecomposition {
            details,
            approx: current,
            input_lengths,
        })
    }

    pub fn reconstruct(&self, decomp: &WaveletDecomposition) -> Result<Vec<f64>, RhythmError> {
        decomp.check_structure()?;
        let mut current = decomp.approx.clone();
        for level in (0..decomp.levels()).rev() {
            current = self.synthesize_level(&current, &decomp.details[level], decomp.input_lengths[level]);
        }
        Ok(current)
    }
}

fn even_extension(x: &[f64]) -> Vec<f64> {
    let mut ext = x.to_vec();
    if ext.len() % 2 == 1 {
        ext.push(*x.last().expect("non-empty level input"));
    }
    ext
}

/// Detail coefficients per level (index 0 = level 1, the finest) plus the
/// coarsest approximation.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletDecomposition {
    pub details: Vec<Vec<f64>>,
    pub approx: Vec<f64>,
    /// Length of the signal entering each level; needed to undo the
    /// odd-length extension.
    pub input_lengths: Vec<usize>,
}

impl WaveletDecomposition {
    pub fn levels(&self) -> usize {
        self.details.len()
    }

    pub fn energy(&self) -> f64 {
        self.details.iter().flatten().chain(&self.approx).map(|v| v * v).sum()
    }

    fn check_structure(&self) -> Result<(), RhythmError> {
        if self.details.is_empty() {
            return Err(RhythmError::Structure("no detail levels".into()));
        }
        if self.input_lengths.len() != self.details.len() {
            return Err(RhythmError::Structure(format!(
                "{} input lengths for {} levels",
                self.input_lengths.len(),
                self.details.len()
            )));
        }
        for (level, (d, &n)) in self.details.iter().zip(&self.input_lengths).enumerate() {
            if d.len() != n.div_ceil(2) {
                return Err(RhythmError::Structure(format!(
                    "level {} has {} coefficients, expected {}",
                    level + 1,
                    d.len(),
                    n.div_ceil(2)
                )));
            }
            if let Some(&next) = self.input_lengths.get(level + 1) {
                if next != d.len() {
                    return Err(RhythmError::Structure(format!(
                        "level {} input length {next} does not follow from {n}",
                        level + 2
                    )));
                }
            }
        }
        if self.approx.len() != self.details.last().map_or(0, Vec::len) {
            return Err(RhythmError::Structure(format!(
                "approximation has {} coefficients, coarsest detail has {}",
                self.approx.len(),
                self.details.last().map_or(0, Vec::len)
            )));
        }
        Ok(())
    }
}

pub fn dwt_db4(signal: &[f64], levels: usize) -> Result<WaveletDecomposition, RhythmError> {
    Wavelet::db4().decompose(signal, levels)
}

pub fn idwt_db4(decomp: &WaveletDecomposition) -> Result<Vec<f64>, RhythmError> {
    Wavelet::db4().reconstruct(decomp)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Band {
    Delta,
    Theta,
    Alpha,
    Beta,
    Gamma,
}

impl Band {
    pub const ALL: [Band; 5] = [Band::Delta, Band::Theta, Band::Alpha, Band::Beta, Band::Gamma];

    pub fn name(self) -> &'static str {
        match self {
            Band::Delta => "delta",
            Band::Theta => "theta",
            Band::Alpha => "alpha",
            Band::Beta => "beta",
            Band::Gamma => "gamma",
        }
    }

    pub fn index(self) -> usize {
        self as usize
    }

    /// Clinical edges in Hz; gamma is open above.
    pub fn edges_hz(self) -> (f64, f64) {
        match self {
            Band::Delta => (0.5, 4.0),
            Band::Theta => (4.0, 8.0),
            Band::Alpha => (8.0, 13.0),
            Band::Beta => (13.0, 30.0),
            Band::Gamma => (30.0, f64::INFINITY),
        }
    }

    /// The rhythm containing `freq_hz`; everything below 4 Hz is delta.
    pub fn for_frequency(freq_hz: f64) -> Band {
        Band::ALL
            .into_iter()
            .find(|b| freq_hz < b.edges_hz().1)
            .unwrap_or(Band::Gamma)
    }
}

impl fmt::Display for Band {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Band {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "delta" => Ok(Band::Delta),
            "theta" => Ok(Band::Theta),
            "alpha" | "alfa" => Ok(Band::Alpha),
            "beta" => Ok(Band::Beta),
            "gamma" => Ok(Band::Gamma),
            other => Err(format!("unknown band `{other}`")),
        }
    }
}

/// Which wavelet scale feeds which rhythm.
///
/// Detail level `ℓ` spans `fs/2^(ℓ+1) .. fs/2^ℓ` and the approximation
/// `0 .. fs/2^(L+1)`; each goes to the rhythm containing its mid-frequency.
/// At 256 Hz and 6 levels this gives gamma = {1, 2}, beta = 3, alpha = 4,
/// theta = 5, delta = {6, approximation}.
#[derive(Debug, Clone, PartialEq)]
pub struct BandMap {
    pub detail_bands: Vec<Band>,
    pub approx_band: Band,
}

impl BandMap {
    pub fn new(fs: f64, levels: usize) -> Result<Self, RhythmError> {
        if levels == 0 {
            return Err(RhythmError::ZeroDepth);
        }
        let detail_bands: Vec<Band> = (1..=levels)
            .map(|l| Band::for_frequency(0.75 * fs / 2f64.powi(l as i32)))
            .collect();
        let approx_band = Band::for_frequency(0.5 * fs / 2f64.powi(levels as i32 + 1));
        let missing: Vec<Band> = Band::ALL
            .into_iter()
            .filter(|b| *b != approx_band && !detail_bands.contains(b))
            .collect();
        if !missing.is_empty() {
            return Err(RhythmError::BandGap { fs, levels, missing });
        }
        Ok(Self {
            detail_bands,
            approx_band,
        })
    }

    pub fn levels(&self) -> usize {
        self.detail_bands.len()
    }

    /// Detail levels (1-based) assigned to `band`.
    pub fn levels_for(&self, band: Band) -> Vec<usize> {
        self.detail_bands
            .iter()
            .enumerate()
            .filter(|(_, b)| **b == band)
            .map(|(i, _)| i + 1)
            .collect()
    }
}

/// Per-rhythm wavelet coefficients of one segment, pooled over channels.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BandStack {
    pub bands: [Vec<f64>; 5],
}

impl BandStack {
    pub fn get(&self, band: Band) -> &[f64] {
        &self.bands[band.index()]
    }
}

/// Pools the coefficients of every channel's decomposition into rhythms.
pub fn map_bands(decomps: &[WaveletDecomposition], fs: f64) -> Result<BandStack, RhythmError> {
    let levels = decomps.first().ok_or(RhythmError::NoChannels)?.levels();
    if let Some(d) = decomps.iter().find(|d| d.levels() != levels) {
        return Err(RhythmError::Structure(format!(
            "channels decomposed to different depths ({} vs {levels})",
            d.levels()
        )));
    }
    let map = BandMap::new(fs, levels)?;
    let mut stack = BandStack::default();
    for decomp in decomps {
        for (band_of_level, detail) in map.detail_bands.iter().zip(&decomp.details) {
            stack.bands[band_of_level.index()].extend_from_slice(detail);
        }
        stack.bands[map.approx_band.index()].extend_from_slice(&decomp.approx);
    }
    Ok(stack)
}

/// Decomposes every channel of `segment` and pools the result by rhythm.
pub fn segment_bands(segment: &Segment, wavelet: &Wavelet, levels: usize, fs: f64) -> Result<BandStack, RhythmError> {
    let decomps = segment
        .data
        .iter()
        .map(|c| wavelet.decompose(c, levels))
        .collect::<Result<Vec<_>, _>>()?;
    map_bands(&decomps, fs)
}
