//! Pearson product-moment correlation, its t-test p-value and the Fisher-z
//! 95% confidence interval.

use std::collections::BTreeMap;

use thiserror::Error;

use crate::class::Class;
use crate::rhythms::Band;
use crate::special::student_t_two_sided;

/// Two-sided 97.5% standard normal quantile.
pub const Z_975: f64 = 1.959_963_984_540_054;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CorrError {
    #[error("sequences differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least {need} pairs, got {got}")]
    TooShort { need: usize, got: usize },
    #[error("zero variance in {0}")]
    ZeroVariance(&'static str),
    #[error("correlation {0} outside [-1, 1]")]
    OutOfRange(f64),
    #[error("{band}/{class}: {reason}")]
    Pairing { band: Band, class: Class, reason: String },
}

/// Sample correlation with mean-centred accumulation.
pub fn pearson_r(x: &[f64], y: &[f64]) -> Result<f64, CorrError> {
    if x.len() != y.len() {
        return Err(CorrError::LengthMismatch(x.len(), y.len()));
    }
    if x.len() < 2 {
        return Err(CorrError::TooShort { need: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 {
        return Err(CorrError::ZeroVariance("x"));
    }
    if syy == 0.0 {
        return Err(CorrError::ZeroVariance("y"));
    }
    // one sqrt of the product keeps r(x, x) exactly 1
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PValue {
    pub p: f64,
    /// `|r| = 1`: the t statistic is infinite and `p` is reported as 0.
    pub boundary: bool,
}

/// Two-sided p-value of `H0: ρ = 0` via `t = r √(n−2) / √(1−r²)` on `n − 2`
/// degrees of freedom.
pub fn pearson_p(r: f64, n: usize) -> Result<PValue, CorrError> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(CorrError::OutOfRange(r));
    }
    if n < 3 {
        return Err(CorrError::TooShort { need: 3, got: n });
    }
    if r.abs() == 1.0 {
        return Ok(PValue { p: 0.0, boundary: true });
    }
    let df = (n - 2) as f64;
    let t = r * df.sqrt() / (1.0 - r * r).sqrt();
    Ok(PValue {
        p: student_t_two_sided(t, df).clamp(0.0, 1.0),
        boundary: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceInterval {
    pub low: f64,
    pub high: f64,
    /// `|r| = 1` collapses the interval onto `r`.
    pub degenerate: bool,
}

/// `tanh(atanh(r) ± 1.959964 / √(n−3))`.
pub fn fisher_ci95(r: f64, n: usize) -> Result<ConfidenceInterval, CorrError> {
    if !(-1.0..=1.0).contains(&r) {
        return Err(CorrError::OutOfRange(r));
    }
    if n < 4 {
        return Err(CorrError::TooShort { need: 4, got: n });
    }
    if r.abs() == 1.0 {
        return Ok(ConfidenceInterval {
            low: r,
            high: r,
            degenerate: true,
        });
    }
    let z = r.atanh();
    let hw = Z_975 / ((n - 3) as f64).sqrt();
    Ok(ConfidenceInterval {
        low: (z - hw).tanh(),
        high: (z + hw).tanh(),
        degenerate: false,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorrelationReport {
    pub band: Band,
    pub class: Class,
    pub r: f64,
    pub p_value: f64,
    pub ci_low: f64,
    pub ci_high: f64,
    pub n: usize,
    /// `|r| = 1`; p and CI are limiting values.
    pub boundary: bool,
}

/// Statistics for an already-known `r` and `n`.
pub fn report_from_r(band: Band, class: Class, r: f64, n: usize) -> Result<CorrelationReport, CorrError> {
    let p = pearson_p(r, n)?;
    let ci = fisher_ci95(r, n)?;
    Ok(CorrelationReport {
        band,
        class,
        r,
        p_value: p.p,
        ci_low: ci.low,
        ci_high: ci.high,
        n,
        boundary: p.boundary,
    })
}

pub fn correlation_report(band: Band, class: Class, x: &[f64], y: &[f64]) -> Result<CorrelationReport, CorrError> {
    let r = pearson_r(x, y)?;
    report_from_r(band, class, r, x.len())
}

/// Event-level scalar per (rhythm, class), index-aligned across feature sets.
pub type EventValues = BTreeMap<(Band, Class), Vec<f64>>;

#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationRow {
    pub band: Band,
    pub class: Class,
    pub outcome: Result<CorrelationReport, CorrError>,
}

/// One row per (rhythm, class) in delta..gamma order, non-seizure before
/// seizure. Cells that cannot be computed carry their error instead of
/// aborting the table.
pub fn class_correlation_table(primary: &EventValues, reference: &EventValues) -> Vec<CorrelationRow> {
    let mut rows = Vec::with_capacity(10);
    for band in Band::ALL {
        for class in [Class::NonSeizure, Class::Seizure] {
            let pairing = |reason: String| CorrError::Pairing { band, class, reason };
            let outcome = match (primary.get(&(band, class)), reference.get(&(band, class))) {
                (Some(x), Some(y)) if x.len() != y.len() => Err(pairing(format!(
                    "{} primary values vs {} reference values",
                    x.len(),
                    y.len()
                ))),
                (Some(x), Some(y)) => correlation_report(band, class, x, y).map_err(|e| pairing(e.to_string())),
                _ => Err(pairing("missing from one of the feature sets".into())),
            };
            rows.push(CorrelationRow { band, class, outcome });
        }
    }
    rows
}

/// Both class correlations of one rhythm side by side. Thresholds are left
/// to the caller.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PredictionScale {
    pub band: Band,
    pub r_non_seizure: f64,
    pub r_seizure: f64,
    /// `r_ns − r_s`.
    pub separation: f64,
    pub ci_non_seizure: (f64, f64),
    pub ci_seizure: (f64, f64),
}

pub fn prediction_scale(report_ns: &CorrelationReport, report_s: &CorrelationReport) -> PredictionScale {
    PredictionScale {
        band: report_ns.band,
        r_non_seizure: report_ns.r,
        r_seizure: report_s.r,
        separation: report_ns.r - report_s.r,
        ci_non_seizure: (report_ns.ci_low, report_ns.ci_high),
        ci_seizure: (report_s.ci_low, report_s.ci_high),
    }
}
