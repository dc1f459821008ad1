//! Two-class Gaussian discriminant over (scale, shape) feature vectors.
//!
//! Each class is modelled as `N(μ_c, Σ_c)`. The decision statistic is
//!
//! ```text
//! (x−μ_s)ᵀ Σ_s⁻¹ (x−μ_s) + ln|Σ_s| − (x−μ_ns)ᵀ Σ_ns⁻¹ (x−μ_ns) − ln|Σ_ns|
//! ```
//!
//! which is `−2 (ln p(x|s) − ln p(x|ns))`. Negative scores favour seizure.
//! With class-specific covariances the boundary is quadratic; the pooled
//! mode shares one covariance and gives a linear boundary.

use std::fmt;
use std::fmt::Write as _;
use std::str::FromStr;

use thiserror::Error;

use crate::class::Class;
use crate::ggd::BandFeatures;
use crate::linalg::{Cholesky, Matrix};
use crate::rhythms::Band;

const CHOLESKY_REL_EPS: f64 = 1e-13;
const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ClassifyError {
    #[error("class {0} has no training samples")]
    MissingClass(Class),
    #[error("class {class} has {got} samples, need at least {need} for dimension {dim}")]
    TooFewSamples {
        class: Class,
        got: usize,
        need: usize,
        dim: usize,
    },
    #[error("covariance of class {0} is singular after shrinkage")]
    Conditioning(Class),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("feature vector contains a non-finite value")]
    NonFinite,
    #[error("model text line {line}: {reason}")]
    Parse { line: usize, reason: String },
}

/// Which rhythms a feature vector covers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BandScope {
    /// `(A, B)` of one rhythm, k = 2.
    Single(Band),
    /// `(A, B)` of all five rhythms in delta..gamma order, k = 10.
    AllBands,
}

impl BandScope {
    pub fn dim(self) -> usize {
        match self {
            BandScope::Single(_) => 2,
            BandScope::AllBands => 10,
        }
    }
}

impl fmt::Display for BandScope {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BandScope::Single(b) => write!(f, "{b}"),
            BandScope::AllBands => f.write_str("all"),
        }
    }
}

impl FromStr for BandScope {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim() == "all" {
            Ok(BandScope::AllBands)
        } else {
            s.parse().map(BandScope::Single)
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureVector {
    values: Vec<f64>,
    scope: BandScope,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, scope: BandScope) -> Result<Self, ClassifyError> {
        if values.len() != scope.dim() {
            return Err(ClassifyError::Dimension(format!(
                "scope {scope} needs {} values, got {}",
                scope.dim(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(ClassifyError::NonFinite);
        }
        Ok(Self { values, scope })
    }

    /// Picks the `(A, B)` pairs named by `scope` out of a feature row.
    pub fn from_band_features(features: &BandFeatures, scope: BandScope) -> Result<Self, ClassifyError> {
        let values = match scope {
            BandScope::Single(b) => {
                let p = features.get(b);
                vec![p.scale_a, p.shape_b]
            }
            BandScope::AllBands => features.params.iter().flat_map(|p| [p.scale_a, p.shape_b]).collect(),
        };
        Self::new(values, scope)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn scope(&self) -> BandScope {
        self.scope
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ClassifierMode {
    /// Class-specific covariances.
    #[default]
    Eq6,
    /// One pooled covariance for both classes (classical LDA).
    Pooled,
}

impl fmt::Display for ClassifierMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ClassifierMode::Eq6 => "eq6",
            ClassifierMode::Pooled => "pooled",
        })
    }
}

impl FromStr for ClassifierMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "eq6" => Ok(Self::Eq6),
            "pooled" => Ok(Self::Pooled),
            other => Err(format!("unknown classifier mode `{other}` (eq6 or pooled)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ClassifierConfig {
    pub mode: ClassifierMode,
    /// `Σ ← Σ + λ·tr(Σ)/k·I`.
    pub shrinkage: f64,
    /// Predict seizure when the score is strictly below this. A log-prior
    /// ratio `ln(P(s)/P(ns))` corresponds to a threshold of twice that value.
    pub decision_threshold: f64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self {
            mode: ClassifierMode::Eq6,
            shrinkage: 1e-6,
            decision_threshold: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassStats {
    pub mean: Vec<f64>,
    pub cov: Matrix,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DiscriminantModel {
    scope: BandScope,
    mode: ClassifierMode,
    regularization_lambda: f64,
    decision_threshold: f64,
    seizure: ClassStats,
    non_seizure: ClassStats,
    chol_seizure: Cholesky,
    chol_non_seizure: Cholesky,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prediction {
    pub class: Class,
    pub score: f64,
}

fn sorted_class_rows(samples: &[(FeatureVector, Class)], class: Class) -> Vec<&[f64]> {
    let mut rows: Vec<&[f64]> = samples
        .iter()
        .filter(|(_, c)| *c == class)
        .map(|(x, _)| x.values())
        .collect();
    // fixed accumulation order, so the fit does not depend on input order
    rows.sort_by(|a, b| {
        a.iter()
            .zip(b.iter())
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    rows
}

fn mean_and_scatter(rows: &[&[f64]], k: usize) -> (Vec<f64>, Matrix) {
    let n = rows.len() as f64;
    let mut mean = vec![0.0; k];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r.iter()) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut scatter = Matrix::zeros(k);
    for r in rows {
        for i in 0..k {
            let di = r[i] - mean[i];
            for j in 0..=i {
                scatter[(i, j)] += di * (r[j] - mean[j]);
            }
        }
    }
    for i in 0..k {
        for j in 0..i {
            scatter[(j, i)] = scatter[(i, j)];
        }
    }
    (mean, scatter)
}

fn shrink(cov: &mut Matrix, lambda: f64) {
    let k = cov.dim();
    let add = lambda * cov.trace() / k as f64;
    for i in 0..k {
        cov[(i, i)] += add;
    }
}

/// Fits class means and (shrunk) covariances. Both classes need at least
/// `k + 1` samples.
pub fn fit(samples: &[(FeatureVector, Class)], config: &ClassifierConfig) -> Result<DiscriminantModel, ClassifyError> {
    let first = samples.first().ok_or(ClassifyError::MissingClass(Class::Seizure))?;
    let scope = first.0.scope();
    let k = scope.dim();
    if let Some((x, _)) = samples.iter().find(|(x, _)| x.scope() != scope) {
        return Err(ClassifyError::Dimension(format!(
            "mixed feature scopes {scope} and {}",
            x.scope()
        )));
    }
    if !(config.shrinkage >= 0.0 && config.shrinkage.is_finite()) {
        return Err(ClassifyError::Dimension(format!(
            "shrinkage must be non-negative, got {}",
            config.shrinkage
        )));
    }

    let mut stats = Vec::with_capacity(2);
    for class in [Class::Seizure, Class::NonSeizure] {
        let rows = sorted_class_rows(samples, class);
        if rows.is_empty() {
            return Err(ClassifyError::MissingClass(class));
        }
        if rows.len() < k + 1 {
            return Err(ClassifyError::TooFewSamples {
                class,
                got: rows.len(),
                need: k + 1,
                dim: k,
            });
        }
        let (mean, scatter) = mean_and_scatter(&rows, k);
        stats.push((mean, scatter, rows.len()));
    }
    let (ns_stats, s_stats) = (stats.pop().unwrap(), stats.pop().unwrap());

    let (cov_s, cov_ns) = match config.mode {
        ClassifierMode::Eq6 => {
            let mut cs = s_stats.1.clone();
            cs.scale(1.0 / (s_stats.2 - 1) as f64);
            let mut cns = ns_stats.1.clone();
            cns.scale(1.0 / (ns_stats.2 - 1) as f64);
            (cs, cns)
        }
        ClassifierMode::Pooled => {
            let mut pooled = s_stats.1.clone();
            pooled.add_scaled(&ns_stats.1, 1.0);
            pooled.scale(1.0 / (s_stats.2 + ns_stats.2 - 2) as f64);
            (pooled.clone(), pooled)
        }
    };

    let finish = |mean: Vec<f64>, mut cov: Matrix, count: usize, class: Class| {
        shrink(&mut cov, config.shrinkage);
        let chol = Cholesky::new(&cov, CHOLESKY_REL_EPS).ok_or(ClassifyError::Conditioning(class))?;
        Ok::<_, ClassifyError>((ClassStats { mean, cov, count }, chol))
    };
    let (seizure, chol_seizure) = finish(s_stats.0, cov_s, s_stats.2, Class::Seizure)?;
    let (non_seizure, chol_non_seizure) = finish(ns_stats.0, cov_ns, ns_stats.2, Class::NonSeizure)?;

    Ok(DiscriminantModel {
        scope,
        mode: config.mode,
        regularization_lambda: config.shrinkage,
        decision_threshold: config.decision_threshold,
        seizure,
        non_seizure,
        chol_seizure,
        chol_non_seizure,
    })
}

fn diff(x: &[f64], mean: &[f64]) -> Vec<f64> {
    x.iter().zip(mean).map(|(a, b)| a - b).collect()
}

/// Log multivariate normal density through a Cholesky factor of `cov`.
pub fn log_likelihood(x: &[f64], mean: &[f64], cov: &Matrix) -> Result<f64, ClassifyError> {
    if x.len() != mean.len() || cov.dim() != x.len() {
        return Err(ClassifyError::Dimension(format!(
            "x has {} entries, mean {}, covariance {}x{}",
            x.len(),
            mean.len(),
            cov.dim(),
            cov.dim()
        )));
    }
    let chol = Cholesky::new(cov, CHOLESKY_REL_EPS).ok_or(ClassifyError::Conditioning(Class::Seizure))?;
    Ok(ln_normal(&chol, x, mean))
}

fn ln_normal(chol: &Cholesky, x: &[f64], mean: &[f64]) -> f64 {
    let k = x.len() as f64;
    -0.5 * (k * LN_2PI + chol.ln_det() + chol.mahalanobis(&diff(x, mean)))
}

impl DiscriminantModel {
    pub fn scope(&self) -> BandScope {
        self.scope
    }

    pub fn mode(&self) -> ClassifierMode {
        self.mode
    }

    pub fn dim(&self) -> usize {
        self.scope.dim()
    }

    pub fn regularization_lambda(&self) -> f64 {
        self.regularization_lambda
    }

    pub fn decision_threshold(&self) -> f64 {
        self.decision_threshold
    }

    pub fn stats(&self, class: Class) -> &ClassStats {
        match class {
            Class::Seizure => &self.seizure,
            Class::NonSeizure => &self.non_seizure,
        }
    }

    fn chol(&self, class: Class) -> &Cholesky {
        match class {
            Class::Seizure => &self.chol_seizure,
            Class::NonSeizure => &self.chol_non_seizure,
        }
    }

    fn check(&self, x: &FeatureVector) -> Result<(), ClassifyError> {
        if x.scope() != self.scope {
            return Err(ClassifyError::Dimension(format!(
                "model is for {}, feature vector for {}",
                self.scope,
                x.scope()
            )));
        }
        Ok(())
    }

    pub fn log_likelihood(&self, x: &FeatureVector, class: Class) -> Result<f64, ClassifyError> {
        self.check(x)?;
        Ok(ln_normal(self.chol(class), x.values(), &self.stats(class).mean))
    }

    fn penalty(&self, x: &[f64], class: Class) -> f64 {
        let chol = self.chol(class);
        chol.mahalanobis(&diff(x, &self.stats(class).mean)) + chol.ln_det()
    }

    /// Mahalanobis-plus-log-determinant penalty of seizure minus that of
    /// non-seizure.
    pub fn discriminant_score(&self, x: &FeatureVector) -> Result<f64, ClassifyError> {
        self.check(x)?;
        Ok(self.penalty(x.values(), Class::Seizure) - self.penalty(x.values(), Class::NonSeizure))
    }

    /// Seizure iff the score is strictly below the decision threshold; a tie
    /// goes to non-seizure.
    pub fn predict(&self, x: &FeatureVector) -> Result<Prediction, ClassifyError> {
        let score = self.discriminant_score(x)?;
        let class = if score < self.decision_threshold {
            Class::Seizure
        } else {
            Class::NonSeizure
        };
        Ok(Prediction { class, score })
    }

    /// The same model with the class roles exchanged.
    pub fn swapped(&self) -> Self {
        Self {
            seizure: self.non_seizure.clone(),
            non_seizure: self.seizure.clone(),
            chol_seizure: self.chol_non_seizure.clone(),
            chol_non_seizure: self.chol_seizure.clone(),
            ..self.clone()
        }
    }

    /// Line-oriented `key = value` text, covariances as row-major blocks.
    /// Floats use the shortest representation that round-trips exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let join = |v: &[f64]| v.iter().map(f64::to_string).collect::<Vec<_>>().join(" ");
        writeln!(s, "# two-class Gaussian discriminant").unwrap();
        writeln!(s, "format = discriminant-model/1").unwrap();
        writeln!(s, "scope = {}", self.scope).unwrap();
        writeln!(s, "dimension = {}", self.dim()).unwrap();
        writeln!(s, "mode = {}", self.mode).unwrap();
        writeln!(s, "regularization_lambda = {}", self.regularization_lambda).unwrap();
        writeln!(s, "decision_threshold = {}", self.decision_threshold).unwrap();
        for class in [Class::Seizure, Class::NonSeizure] {
            let st = self.stats(class);
            writeln!(s, "count.{class} = {}", st.count).unwrap();
            writeln!(s, "mean.{class} = {}", join(&st.mean)).unwrap();
            writeln!(s, "[cov.{class}]").unwrap();
            for row in st.cov.rows() {
                writeln!(s, "{}", join(&row)).unwrap();
            }
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ClassifyError> {
        let err = |line: usize, reason: String| ClassifyError::Parse { line, reason };
        let mut keys = std::collections::HashMap::new();
        let mut blocks: std::collections::HashMap<String, Vec<Vec<f64>>> = Default::default();
        let mut current_block: Option<String> = None;
        let floats = |line: usize, s: &str| -> Result<Vec<f64>, ClassifyError> {
            s.split_whitespace()
                .map(|t| {
                    t.parse::<f64>()
                        .map_err(|_| err(line, format!("`{t}` is not a number")))
                })
                .collect()
        };
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let t = raw.trim();
            if t.is_empty() || t.starts_with('#') {
                continue;
            }
            if let Some(name) = t.strip_prefix('[').and_then(|r| r.strip_suffix(']')) {
                blocks.insert(name.to_string(), Vec::new());
                current_block = Some(name.to_string());
            } else if let Some((k, v)) = t.split_once('=') {
                current_block = None;
                keys.insert(k.trim().to_string(), (line, v.trim().to_string()));
            } else if let Some(b) = &current_block {
                let row = floats(line, t)?;
                blocks.get_mut(b).unwrap().push(row);
            } else {
                return Err(err(line, format!("unexpected line `{t}`")));
            }
        }
        let get = |k: &str| -> Result<&(usize, String), ClassifyError> {
            keys.get(k).ok_or_else(|| err(0, format!("missing key `{k}`")))
        };
        let (l, format) = get("format")?;
        if format != "discriminant-model/1" {
            return Err(err(*l, format!("unsupported format `{format}`")));
        }
        let (l, scope) = get("scope")?;
        let scope: BandScope = scope.parse().map_err(|e| err(*l, e))?;
        let (l, mode) = get("mode")?;
        let mode: ClassifierMode = mode.parse().map_err(|e| err(*l, e))?;
        let num = |k: &str| -> Result<f64, ClassifyError> {
            let (l, v) = get(k)?;
            v.parse().map_err(|_| err(*l, format!("`{v}` is not a number")))
        };
        let lambda = num("regularization_lambda")?;
        let threshold = num("decision_threshold")?;
        let k = scope.dim();
        let mut parts = Vec::new();
        for class in [Class::Seizure, Class::NonSeizure] {
            let (l, count) = get(&format!("count.{class}"))?;
            let count: usize = count.parse().map_err(|_| err(*l, "bad count".into()))?;
            let (l, mean) = get(&format!("mean.{class}"))?;
            let mean = floats(*l, mean)?;
            if mean.len() != k {
                return Err(err(*l, format!("mean has {} entries, expected {k}", mean.len())));
            }
            let rows = blocks
                .get(&format!("cov.{class}"))
                .ok_or_else(|| err(0, format!("missing block [cov.{class}]")))?;
            let cov = Matrix::from_rows(rows)
                .filter(|m| m.dim() == k)
                .ok_or_else(|| err(0, format!("[cov.{class}] is not {k}x{k}")))?;
            let chol = Cholesky::new(&cov, CHOLESKY_REL_EPS).ok_or(ClassifyError::Conditioning(class))?;
            parts.push((ClassStats { mean, cov, count }, chol));
        }
        let (non_seizure, chol_non_seizure) = parts.pop().unwrap();
        let (seizure, chol_seizure) = parts.pop().unwrap();
        Ok(Self {
            scope,
            mode,
            regularization_lambda: lambda,
            decision_threshold: threshold,
            seizure,
            non_seizure,
            chol_seizure,
            chol_non_seizure,
        })
    }
}

pub fn discriminant_score(x: &FeatureVector, model: &DiscriminantModel) -> Result<f64, ClassifyError> {
    model.discriminant_score(x)
}

pub fn predict(x: &FeatureVector, model: &DiscriminantModel) -> Result<Prediction, ClassifyError> {
    model.predict(x)
}
