//! Declarative run configuration (TOML) with flag overrides.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};

use seizure_core::classify::{BandScope, ClassifierConfig, ClassifierMode};
use seizure_core::evaluate::Aggregation;
use seizure_core::ggd::EstimatorConfig;
use seizure_core::ingest::{FilterKind, IirFilterSpec};
use seizure_core::rhythms::{Band, DEFAULT_LEVELS};
use seizure_core::segmentation::{SegmentPlan, DEFAULT_LABEL_OVERLAP};

pub const CONFIG_ENV: &str = "SEIZURE_CONFIG";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FilterEntry {
    pub kind: String,
    pub order: usize,
    pub cutoff_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SegmentSection {
    pub window_seconds: f64,
    pub overlap_fraction: f64,
    /// Fraction of a window an annotation must cover to label it seizure.
    pub label_overlap: f64,
}

impl Default for SegmentSection {
    fn default() -> Self {
        let plan = SegmentPlan::default();
        Self {
            window_seconds: plan.window_seconds,
            overlap_fraction: plan.overlap_fraction,
            label_overlap: DEFAULT_LABEL_OVERLAP,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WaveletSection {
    pub levels: usize,
    /// Sample rate used to assign levels to rhythms; the record's own
    /// rate when absent.
    pub band_sample_rate_hz: Option<f64>,
}

impl Default for WaveletSection {
    fn default() -> Self {
        Self {
            levels: DEFAULT_LEVELS,
            band_sample_rate_hz: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EstimatorSection {
    pub min_samples: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub shape_min: f64,
    pub shape_max: f64,
}

impl Default for EstimatorSection {
    fn default() -> Self {
        let d = EstimatorConfig::default();
        Self {
            min_samples: d.min_samples,
            tolerance: d.tolerance,
            max_iterations: d.max_iterations,
            shape_min: d.shape_min,
            shape_max: d.shape_max,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ClassifierSection {
    pub mode: String,
    pub shrinkage: f64,
    pub decision_threshold: f64,
}

impl Default for ClassifierSection {
    fn default() -> Self {
        let d = ClassifierConfig::default();
        Self {
            mode: d.mode.to_string(),
            shrinkage: d.shrinkage,
            decision_threshold: d.decision_threshold,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub filters: Vec<FilterEntry>,
    pub segment: SegmentSection,
    pub wavelet: WaveletSection,
    pub estimator: EstimatorSection,
    pub classifier: ClassifierSection,
    pub aggregate: String,
    /// A rhythm name, `all` for the joint 10-feature model, or absent for
    /// one model per rhythm.
    pub band: Option<String>,
    /// Event scalar paired across feature sets by `correlate --reference`:
    /// `shape` (B) or `scale` (A).
    pub correlate_feature: String,
    pub seed: u64,
    /// Not part of the manifest snapshot: it names where a run writes,
    /// not what it computes.
    #[serde(skip_serializing)]
    pub out: Option<PathBuf>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            filters: IirFilterSpec::default_cascade()
                .iter()
                .map(|s| FilterEntry {
                    kind: s.kind.to_string(),
                    order: s.order,
                    cutoff_hz: s.cutoff_hz,
                })
                .collect(),
            segment: SegmentSection::default(),
            wavelet: WaveletSection::default(),
            estimator: EstimatorSection::default(),
            classifier: ClassifierSection::default(),
            aggregate: Aggregation::default().to_string(),
            band: None,
            correlate_feature: CorrelateFeature::Shape.to_string(),
            seed: 0,
            out: None,
        }
    }
}

/// Flag values that override the file, one per config key.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub band: Option<String>,
    pub classifier: Option<String>,
    pub aggregate: Option<String>,
    pub correlate_feature: Option<String>,
}

impl PipelineConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        Ok(toml::from_str(text)?)
    }

    /// `explicit`, else the env var, else defaults.
    pub fn load(explicit: Option<&Path>) -> Result<Self> {
        let env_path = std::env::var_os(CONFIG_ENV).map(PathBuf::from);
        let Some(path) = explicit.map(Path::to_path_buf).or(env_path) else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(&path).with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("parsing config {}", path.display()))
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(v) = &o.out {
            self.out = Some(v.clone());
        }
        if let Some(v) = o.seed {
            self.seed = v;
        }
        if let Some(v) = &o.band {
            self.band = Some(v.clone());
        }
        if let Some(v) = &o.classifier {
            self.classifier.mode = v.clone();
        }
        if let Some(v) = &o.aggregate {
            self.aggregate = v.clone();
        }
        if let Some(v) = &o.correlate_feature {
            self.correlate_feature = v.clone();
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<Settings> {
        let filters = self
            .filters
            .iter()
            .map(|f| {
                let kind: FilterKind = f.kind.parse().map_err(anyhow::Error::msg)?;
                if f.order == 0 || !(f.cutoff_hz > 0.0 && f.cutoff_hz.is_finite()) {
                    bail!("filter {}: order and cutoff must be positive", f.kind);
                }
                Ok(IirFilterSpec {
                    kind,
                    order: f.order,
                    cutoff_hz: f.cutoff_hz,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let plan = SegmentPlan {
            window_seconds: self.segment.window_seconds,
            overlap_fraction: self.segment.overlap_fraction,
        };
        // any positive rate exercises the window/overlap checks
        plan.window_and_hop(256.0)?;
        if !(0.0..=1.0).contains(&self.segment.label_overlap) {
            bail!("segment.label_overlap must lie in [0, 1]");
        }
        if self.wavelet.levels == 0 {
            bail!("wavelet.levels must be at least 1");
        }
        if let Some(fs) = self.wavelet.band_sample_rate_hz {
            if !(fs > 0.0 && fs.is_finite()) {
                bail!("wavelet.band_sample_rate_hz must be positive");
            }
        }
        let estimator = EstimatorConfig {
            min_samples: self.estimator.min_samples,
            tolerance: self.estimator.tolerance,
            max_iterations: self.estimator.max_iterations,
            shape_min: self.estimator.shape_min,
            shape_max: self.estimator.shape_max,
        };
        estimator.validate()?;
        let mode: ClassifierMode = self.classifier.mode.parse().map_err(anyhow::Error::msg)?;
        if !(self.classifier.shrinkage >= 0.0 && self.classifier.shrinkage.is_finite()) {
            bail!("classifier.shrinkage must be a non-negative number");
        }
        if !self.classifier.decision_threshold.is_finite() {
            bail!("classifier.decision_threshold must be finite");
        }
        let aggregation: Aggregation = self.aggregate.parse().map_err(anyhow::Error::msg)?;
        let scopes = match self.band.as_deref() {
            None => Band::ALL.iter().map(|b| BandScope::Single(*b)).collect(),
            Some(name) => vec![name.parse::<BandScope>().map_err(anyhow::Error::msg)?],
        };
        let correlate_feature = self.correlate_feature.parse()?;
        Ok(Settings {
            filters,
            plan,
            label_overlap: self.segment.label_overlap,
            levels: self.wavelet.levels,
            band_sample_rate_hz: self.wavelet.band_sample_rate_hz,
            estimator,
            classifier: ClassifierConfig {
                mode,
                shrinkage: self.classifier.shrinkage,
                decision_threshold: self.classifier.decision_threshold,
            },
            aggregation,
            scopes,
            correlate_feature,
            seed: self.seed,
        })
    }
}

/// Validated, typed view of [`PipelineConfig`].
#[derive(Debug, Clone)]
pub struct Settings {
    pub filters: Vec<IirFilterSpec>,
    pub plan: SegmentPlan,
    pub label_overlap: f64,
    pub levels: usize,
    pub band_sample_rate_hz: Option<f64>,
    pub estimator: EstimatorConfig,
    pub classifier: ClassifierConfig,
    pub aggregation: Aggregation,
    pub scopes: Vec<BandScope>,
    pub correlate_feature: CorrelateFeature,
    pub seed: u64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CorrelateFeature {
    Scale,
    Shape,
}

impl std::fmt::Display for CorrelateFeature {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            CorrelateFeature::Scale => "scale",
            CorrelateFeature::Shape => "shape",
        })
    }
}

impl std::str::FromStr for CorrelateFeature {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim() {
            "scale" | "A" => Ok(Self::Scale),
            "shape" | "B" => Ok(Self::Shape),
            other => bail!("unknown correlate_feature `{other}` (scale or shape)"),
        }
    }
}
