//! Built-in numerical checks. The summary text depends only on the seed.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use seizure_core::class::Class;
use seizure_core::corrstat::{fisher_ci95, pearson_p};
use seizure_core::evaluate::confusion_metrics;
use seizure_core::ggd::{estimate_ggd, ggd_sample, EstimatorConfig, GgdParams};
use seizure_core::ingest::{design_butterworth, IirFilterSpec};
use seizure_core::rhythms::{Wavelet, DB4_SCALING};

use crate::numfmt::sig6;

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone, Default)]
pub struct SelftestOptions {
    pub seed: u64,
    /// Perturbs one db4 tap so the reconstruction check must fail.
    pub corrupt_taps: bool,
}

/// At 10^5 draws the shape estimate for B = 4 has a standard deviation of
/// about 0.036 (the Cramer-Rao bound), so a 0.05 tolerance would fail on
/// roughly one seed in six. 10^6 draws put both tolerances beyond 3.5 sd.
const SAMPLES: usize = 1_000_000;

fn estimator_recovery(seed: u64) -> Check {
    let cfg = EstimatorConfig::default();
    let mut worst_a = 0.0f64;
    let mut worst_b = 0.0f64;
    let mut ok = true;
    for (i, (a, b)) in [(1.0, 2.0), (0.5, 0.8), (2.0, 1.0), (1.0, 4.0)].into_iter().enumerate() {
        let truth = GgdParams { scale_a: a, shape_b: b };
        let est = ggd_sample(&truth, SAMPLES, seed.wrapping_add(i as u64)).and_then(|x| estimate_ggd(&x, &cfg));
        match est {
            Ok(e) => {
                let da = (e.params.scale_a - a).abs();
                let db = (e.params.shape_b - b).abs();
                worst_a = worst_a.max(da);
                worst_b = worst_b.max(db);
                ok &= e.converged && e.iterations <= cfg.max_iterations && da <= 0.02 && db <= 0.05;
            }
            Err(_) => ok = false,
        }
    }
    Check {
        name: "ggd_estimator_recovery",
        passed: ok,
        detail: format!("max |dA| = {}, max |dB| = {}", sig6(worst_a), sig6(worst_b)),
    }
}

fn dwt_reconstruction(seed: u64, wavelet: &Wavelet) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_rt = 0.0f64;
    let mut worst_energy = 0.0f64;
    for _ in 0..100 {
        let x: Vec<f64> = (0..512).map(|_| rng.random_range(-1.0..1.0)).collect();
        let ex: f64 = x.iter().map(|v| v * v).sum();
        let Ok(d) = wavelet.decompose(&x, 6) else {
            worst_rt = f64::INFINITY;
            break;
        };
        let back = wavelet.reconstruct(&d).unwrap_or_default();
        let err: f64 = if back.len() == x.len() {
            x.iter().zip(&back).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        } else {
            f64::INFINITY
        };
        worst_rt = worst_rt.max(err / ex.sqrt());
        worst_energy = worst_energy.max((d.energy() - ex).abs() / ex);
    }
    Check {
        name: "dwt_reconstruction",
        passed: worst_rt <= 1e-10 && worst_energy <= 1e-9,
        detail: format!(
            "max relative round-trip error = {}, max relative energy gap = {}",
            sig6(worst_rt),
            sig6(worst_energy)
        ),
    }
}

fn filter_response(seed: u64) -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst_db = 0.0f64;
    let mut all_stable = true;
    for _ in 0..1000 {
        let fs = rng.random_range(100.0..2000.0);
        let cutoff = rng.random_range(0.01..0.45) * fs;
        let order = rng.random_range(1..=8);
        let spec = if rng.random_bool(0.5) {
            IirFilterSpec::low_pass(order, cutoff)
        } else {
            IirFilterSpec::high_pass(order, cutoff)
        };
        match design_butterworth(&spec, fs) {
            Ok(c) => {
                all_stable &= c.is_stable();
                let db = 20.0 * c.magnitude_at(cutoff, fs).log10();
                worst_db = worst_db.max((db + 3.0103).abs());
            }
            Err(_) => all_stable = false,
        }
    }
    Check {
        name: "butterworth_response",
        passed: all_stable && worst_db <= 0.1,
        detail: format!("max |gain at cutoff + 3.01 dB| = {} dB over 1000 specs", sig6(worst_db)),
    }
}

fn statistics_oracle() -> Check {
    let mut ok = true;
    let mut cases = Vec::new();
    match (
        pearson_p(0.88, 18),
        fisher_ci95(0.88, 18),
        pearson_p(0.39, 18),
        fisher_ci95(0.81, 18),
    ) {
        (Ok(p88), Ok(ci88), Ok(p39), Ok(ci81)) => {
            ok &= p88.p < 0.001;
            cases = vec![
                ("ci(0.88).low", ci88.low, 0.70),
                ("ci(0.88).high", ci88.high, 0.95),
                ("p(0.39)", p39.p, 0.11),
                ("ci(0.81).low", ci81.low, 0.55),
                ("ci(0.81).high", ci81.high, 0.92),
            ];
        }
        _ => ok = false,
    }
    let mut notes = Vec::new();
    for (label, got, want) in cases {
        ok &= (got - want).abs() <= 0.01;
        notes.push(format!("{label} = {}", sig6(got)));
    }
    // 18 seizure events all detected, 3 of 18 non-seizure events missed
    let truth: Vec<Class> = [Class::Seizure; 18]
        .into_iter()
        .chain([Class::NonSeizure; 18])
        .collect();
    let mut pred = truth.clone();
    for p in pred.iter_mut().skip(18).take(3) {
        *p = Class::Seizure;
    }
    match confusion_metrics(&pred, &truth) {
        Ok(m) => ok &= m.acc_count == 33 && m.counts.fp == 3 && m.tpr == Some(1.0),
        Err(_) => ok = false,
    }
    Check {
        name: "statistics_oracle",
        passed: ok,
        detail: notes.join(", "),
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> Vec<Check> {
    let wavelet = if opts.corrupt_taps {
        let mut taps = DB4_SCALING.to_vec();
        taps[3] += 1e-3;
        Wavelet::from_scaling(taps)
    } else {
        Wavelet::db4()
    };
    vec![
        estimator_recovery(opts.seed),
        dwt_reconstruction(opts.seed, &wavelet),
        filter_response(opts.seed),
        statistics_oracle(),
    ]
}

pub fn summary(checks: &[Check]) -> String {
    let mut s = String::new();
    for c in checks {
        s.push_str(&format!(
            "{} {}: {}\n",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.detail
        ));
    }
    let failed = checks.iter().filter(|c| !c.passed).count();
    s.push_str(&format!(
        "{} of {} checks passed\n",
        checks.len() - failed,
        checks.len()
    ));
    s
}
