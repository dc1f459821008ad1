//! Synthetic EEG-like records whose wavelet coefficients follow a known
//! generalized Gaussian law per rhythm.

#![allow(dead_code)]

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seizure_core::class::Class;
use seizure_core::ggd::{ggd_sample_with, GgdParams};
use seizure_core::ingest::{sidecar_path, write_annotations, write_csv, Annotation, EegRecord};
use seizure_core::rhythms::{idwt_db4, Band, BandMap, WaveletDecomposition};

pub const FS: f64 = 256.0;
pub const LEVELS: usize = 6;

/// Per-event shape for one rhythm: near-Gaussian outside seizures and
/// heavier-tailed during them, with event-to-event jitter.
fn event_shape(class: Class, band: Band, rng: &mut ChaCha8Rng) -> f64 {
    let (lo, hi) = match (class, band) {
        (Class::NonSeizure, _) => (1.8, 2.4),
        (Class::Seizure, Band::Delta | Band::Theta) => (0.8, 1.2),
        (Class::Seizure, _) => (1.0, 1.4),
    };
    rng.random_range(lo..hi)
}

/// Channel count of the CHB-MIT bipolar montage.
pub const MONTAGE_CHANNELS: usize = 23;

/// `seconds * FS` must be a multiple of 2^LEVELS.
pub fn synthetic_record(class: Class, seconds: usize, channels: usize, seed: u64) -> EegRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = seconds * FS as usize;
    assert_eq!(n % (1 << LEVELS), 0);
    let map = BandMap::new(FS, LEVELS).unwrap();
    let shapes: Vec<f64> = Band::ALL.iter().map(|b| event_shape(class, *b, &mut rng)).collect();
    let gain = rng.random_range(0.8..1.25);
    let draw = |len: usize, band: Band, level: usize, rng: &mut ChaCha8Rng| {
        // coarser levels carry more power, as in real EEG
        let p = GgdParams {
            scale_a: gain * 2f64.powf(level as f64 / 2.0),
            shape_b: shapes[band.index()],
        };
        ggd_sample_with(&p, len, rng).unwrap()
    };
    let data = (0..channels)
        .map(|_| {
            let details = (1..=LEVELS)
                .map(|l| draw(n >> l, map.detail_bands[l - 1], l, &mut rng))
                .collect();
            let approx = draw(n >> LEVELS, map.approx_band, LEVELS, &mut rng);
            let decomp = WaveletDecomposition {
                details,
                approx,
                input_lengths: (0..LEVELS).map(|l| n >> l).collect(),
            };
            idwt_db4(&decomp).unwrap()
        })
        .collect();
    let labels = (0..channels).map(|c| format!("ch{c}")).collect();
    let annotations = match class {
        Class::Seizure => vec![Annotation {
            onset_s: 0.0,
            end_s: seconds as f64,
            label: "seizure".into(),
        }],
        Class::NonSeizure => Vec::new(),
    };
    EegRecord::new(data, FS, labels, annotations).unwrap()
}

pub fn write_record(dir: &Path, name: &str, record: &EegRecord) -> PathBuf {
    let path = dir.join(format!("{name}.csv"));
    write_csv(record, BufWriter::new(File::create(&path).unwrap())).unwrap();
    if !record.annotations().is_empty() {
        let f = File::create(sidecar_path(&path)).unwrap();
        write_annotations(record.annotations(), BufWriter::new(f)).unwrap();
    }
    path
}

/// `per_class` seizure and non-seizure records in `dir`.
pub fn write_corpus(dir: &Path, per_class: usize, seconds: usize, seed: u64) -> Vec<PathBuf> {
    let mut paths = Vec::new();
    for i in 0..per_class {
        for (tag, class) in [("s", Class::Seizure), ("ns", Class::NonSeizure)] {
            let rec = synthetic_record(
                class,
                seconds,
                2,
                seed.wrapping_mul(1000)
                    .wrapping_add(2 * i as u64 + (class == Class::Seizure) as u64),
            );
            paths.push(write_record(dir, &format!("{tag}{i:02}"), &rec));
        }
    }
    paths
}

/// Config for synthetic records: no filtering, since the generator already
/// controls each rhythm directly.
pub const UNFILTERED_CONFIG: &str = "filters = []\n";
