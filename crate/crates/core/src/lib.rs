//! Seizure / non-seizure classification of multichannel EEG.
//!
//! The pipeline runs in five stages:
//!
//! 1. [`segmentation`]: 2 s rectangular windows with 50% overlap.
//! 2. [`rhythms`]: 6-level Daubechies-4 decomposition, scales mapped to the
//!    delta, theta, alpha, beta and gamma rhythms.
//! 3. [`ggd`]: maximum-likelihood generalized Gaussian scale/shape per rhythm.
//! 4. [`classify`]: two-class Gaussian discriminant on the (scale, shape) features.
//! 5. [`corrstat`]: Pearson correlation with p-values and Fisher intervals.
//!
//! [`ingest`] reads recordings and applies the Butterworth preprocessing, and
//! [`evaluate`] runs leave-one-out validation and confusion metrics.

pub mod class;
pub mod classify;
pub mod corrstat;
pub mod evaluate;
pub mod ggd;
pub mod ingest;
pub mod linalg;
pub mod rhythms;
pub mod segmentation;
pub mod special;

pub use class::Class;
pub use classify::{BandScope, ClassifierConfig, ClassifierMode, DiscriminantModel, FeatureVector};
pub use corrstat::CorrelationReport;
pub use evaluate::{ConfusionCounts, ConfusionMetrics, EvalReport};
pub use ggd::{BandFeatures, EstimatorConfig, GgdParams};
pub use ingest::{EegRecord, IirFilterSpec};
pub use rhythms::{Band, BandStack, WaveletDecomposition};
pub use segmentation::{Segment, SegmentPlan};
