//! Leave-one-out validation, resubstitution error and confusion metrics.
//!
//! An event is one whole seizure or non-seizure record. Its feature row is
//! the per-rhythm median (or mean) of its segment-level `(A, B)` estimates.

use std::fmt;
use std::str::FromStr;

use thiserror::Error;

use crate::class::Class;
use crate::classify::{fit, BandScope, ClassifierConfig, ClassifyError, FeatureVector};
use crate::ggd::{BandFeatures, GgdParams};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("fold {fold}: {source}")]
    Fold {
        fold: usize,
        #[source]
        source: ClassifyError,
    },
    #[error(transparent)]
    Classify(#[from] ClassifyError),
    #[error("{predictions} predictions for {truths} truths")]
    LengthMismatch { predictions: usize, truths: usize },
    #[error("nothing to aggregate")]
    Empty,
    #[error("need at least {need} events per class for dimension {dim}, {class} has {got}")]
    TooFewEvents {
        class: Class,
        got: usize,
        need: usize,
        dim: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ConfusionCounts {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
}

impl ConfusionCounts {
    pub fn total(&self) -> usize {
        self.tp + self.fp + self.tn + self.fn_
    }
}

/// Rates are `None` when their denominator is zero.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfusionMetrics {
    pub counts: ConfusionCounts,
    pub tpr: Option<f64>,
    pub fpr: Option<f64>,
    pub tnr: Option<f64>,
    /// Correctly classified events, `tp + tn`.
    pub acc_count: usize,
}

impl ConfusionMetrics {
    pub fn from_counts(counts: ConfusionCounts) -> Self {
        let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
        let negatives = counts.tn + counts.fp;
        Self {
            counts,
            tpr: ratio(counts.tp, counts.tp + counts.fn_),
            fpr: ratio(counts.fp, negatives),
            tnr: ratio(counts.tn, negatives),
            acc_count: counts.tp + counts.tn,
        }
    }
}

/// Seizure is the positive class.
pub fn confusion_metrics(predictions: &[Class], truths: &[Class]) -> Result<ConfusionMetrics, EvalError> {
    if predictions.len() != truths.len() {
        return Err(EvalError::LengthMismatch {
            predictions: predictions.len(),
            truths: truths.len(),
        });
    }
    let mut c = ConfusionCounts::default();
    for (p, t) in predictions.iter().zip(truths) {
        match (p, t) {
            (Class::Seizure, Class::Seizure) => c.tp += 1,
            (Class::Seizure, Class::NonSeizure) => c.fp += 1,
            (Class::NonSeizure, Class::NonSeizure) => c.tn += 1,
            (Class::NonSeizure, Class::Seizure) => c.fn_ += 1,
        }
    }
    Ok(ConfusionMetrics::from_counts(c))
}

/// Cuts (not rounds) `value` to `decimals` places, the way rates such as
/// 3/18 = 0.1666… are usually printed as 0.16 in published tables.
pub fn truncate_decimals(value: f64, decimals: u32) -> f64 {
    let f = 10f64.powi(decimals as i32);
    // nudge so values like 0.29 (stored as 0.28999…) are not cut a step low
    (value * f + 1e-9).floor() / f
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FoldPrediction {
    /// Position of the held-out event in the input.
    pub index: usize,
    pub truth: Class,
    pub predicted: Class,
    pub score: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LooResult {
    pub predictions: Vec<FoldPrediction>,
    pub misclassified: usize,
    /// 0-1 loss over the held-out predictions.
    pub loss_value: f64,
}

fn check_counts(events: &[(FeatureVector, Class)]) -> Result<(), EvalError> {
    let Some((first, _)) = events.first() else {
        return Err(EvalError::Empty);
    };
    let k = first.dim();
    for class in [Class::Seizure, Class::NonSeizure] {
        let got = events.iter().filter(|(_, c)| *c == class).count();
        if got < k + 2 {
            return Err(EvalError::TooFewEvents {
                class,
                got,
                need: k + 2,
                dim: k,
            });
        }
    }
    Ok(())
}

/// Minimum events per class for leave-one-out at feature dimension `k`.
pub fn min_events_per_class(scope: BandScope) -> usize {
    scope.dim() + 2
}

pub fn leave_one_out(events: &[(FeatureVector, Class)], config: &ClassifierConfig) -> Result<LooResult, EvalError> {
    check_counts(events)?;
    let mut predictions = Vec::with_capacity(events.len());
    let mut training = Vec::with_capacity(events.len() - 1);
    for (fold, (x, truth)) in events.iter().enumerate() {
        training.clear();
        training.extend(
            events
                .iter()
                .enumerate()
                .filter(|(j, _)| *j != fold)
                .map(|(_, e)| e.clone()),
        );
        let model = fit(&training, config).map_err(|source| EvalError::Fold { fold, source })?;
        let p = model.predict(x).map_err(|source| EvalError::Fold { fold, source })?;
        predictions.push(FoldPrediction {
            index: fold,
            truth: *truth,
            predicted: p.class,
            score: p.score,
        });
    }
    let misclassified = predictions.iter().filter(|p| p.predicted != p.truth).count();
    Ok(LooResult {
        loss_value: misclassified as f64 / events.len() as f64,
        misclassified,
        predictions,
    })
}

/// Fit on every event, predict the same events, return the error fraction.
pub fn apparent_error(events: &[(FeatureVector, Class)], config: &ClassifierConfig) -> Result<f64, EvalError> {
    if events.is_empty() {
        return Err(EvalError::Empty);
    }
    let model = fit(events, config)?;
    let mut wrong = 0;
    for (x, truth) in events {
        if model.predict(x)?.class != *truth {
            wrong += 1;
        }
    }
    Ok(wrong as f64 / events.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Aggregation {
    #[default]
    Median,
    Mean,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Median => "median",
            Aggregation::Mean => "mean",
        })
    }
}

impl FromStr for Aggregation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "median" => Ok(Self::Median),
            "mean" => Ok(Self::Mean),
            other => Err(format!("unknown aggregation `{other}` (median or mean)")),
        }
    }
}

fn summarize(mut values: Vec<f64>, how: Aggregation) -> f64 {
    match how {
        Aggregation::Mean => values.iter().sum::<f64>() / values.len() as f64,
        Aggregation::Median => {
            values.sort_by(f64::total_cmp);
            let n = values.len();
            if n % 2 == 1 {
                values[n / 2]
            } else {
                0.5 * (values[n / 2 - 1] + values[n / 2])
            }
        }
    }
}

/// Per-rhythm summary of segment-level estimates; `A` and `B` are
/// summarized separately.
pub fn aggregate_segments(segments: &[BandFeatures], how: Aggregation) -> Result<[GgdParams; 5], EvalError> {
    if segments.is_empty() {
        return Err(EvalError::Empty);
    }
    let mut out = [GgdParams {
        scale_a: 0.0,
        shape_b: 0.0,
    }; 5];
    for (i, slot) in out.iter_mut().enumerate() {
        slot.scale_a = summarize(segments.iter().map(|s| s.params[i].scale_a).collect(), how);
        slot.shape_b = summarize(segments.iter().map(|s| s.params[i].shape_b).collect(), how);
    }
    Ok(out)
}

/// One event-level feature row.
#[derive(Debug, Clone, PartialEq)]
pub struct EventFeatures {
    pub name: String,
    pub class: Class,
    pub params: [GgdParams; 5],
}

impl EventFeatures {
    pub fn feature_vector(&self, scope: BandScope) -> Result<FeatureVector, ClassifyError> {
        let row = BandFeatures {
            segment_index: 0,
            class_label: Some(self.class),
            params: self.params,
        };
        FeatureVector::from_band_features(&row, scope)
    }
}

/// Event-level result for one rhythm (or for all rhythms jointly).
#[derive(Debug, Clone, PartialEq)]
pub struct BandEvaluation {
    pub scope: BandScope,
    /// From the held-out predictions.
    pub confusion: ConfusionMetrics,
    pub loss_value: f64,
    pub apparent_error: f64,
    pub fold_predictions: Vec<FoldPrediction>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub events: usize,
    pub bands: Vec<BandEvaluation>,
}

pub fn evaluate_scope(
    events: &[EventFeatures],
    scope: BandScope,
    config: &ClassifierConfig,
) -> Result<BandEvaluation, EvalError> {
    let samples = events
        .iter()
        .map(|e| Ok((e.feature_vector(scope)?, e.class)))
        .collect::<Result<Vec<_>, ClassifyError>>()?;
    let loo = leave_one_out(&samples, config)?;
    let predicted: Vec<Class> = loo.predictions.iter().map(|p| p.predicted).collect();
    let truths: Vec<Class> = samples.iter().map(|(_, c)| *c).collect();
    Ok(BandEvaluation {
        scope,
        confusion: confusion_metrics(&predicted, &truths)?,
        loss_value: loo.loss_value,
        apparent_error: apparent_error(&samples, config)?,
        fold_predictions: loo.predictions,
    })
}

pub fn evaluate_events(
    events: &[EventFeatures],
    scopes: &[BandScope],
    config: &ClassifierConfig,
) -> Result<EvalReport, EvalError> {
    Ok(EvalReport {
        events: events.len(),
        bands: scopes
            .iter()
            .map(|s| evaluate_scope(events, *s, config))
            .collect::<Result<_, _>>()?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rhythms::Band;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    const SCOPE: BandScope = BandScope::Single(Band::Theta);

    fn classes(seed: u64, per_class: usize, offset: f64) -> Vec<(FeatureVector, Class)> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::new();
        for class in [Class::Seizure, Class::NonSeizure] {
            let c = if class == Class::Seizure { offset } else { -offset };
            for _ in 0..per_class {
                let a: f64 = StandardNormal.sample(&mut rng);
                let b: f64 = StandardNormal.sample(&mut rng);
                out.push((FeatureVector::new(vec![c + a, c + b], SCOPE).unwrap(), class));
            }
        }
        out
    }

    fn metrics(tp: usize, fn_: usize, fp: usize, tn: usize) -> ConfusionMetrics {
        let mut preds = Vec::new();
        let mut truth = Vec::new();
        for (n, p, t) in [
            (tp, Class::Seizure, Class::Seizure),
            (fn_, Class::NonSeizure, Class::Seizure),
            (fp, Class::Seizure, Class::NonSeizure),
            (tn, Class::NonSeizure, Class::NonSeizure),
        ] {
            preds.extend(std::iter::repeat_n(p, n));
            truth.extend(std::iter::repeat_n(t, n));
        }
        confusion_metrics(&preds, &truth).unwrap()
    }

    #[test]
    fn confusion_examples() {
        let all = metrics(18, 0, 0, 18);
        assert_eq!((all.tpr, all.tnr, all.acc_count), (Some(1.0), Some(1.0), 36));

        let delta = metrics(18, 0, 3, 15);
        assert_eq!(delta.tpr, Some(1.0));
        assert_eq!(truncate_decimals(delta.fpr.unwrap(), 2), 0.16);
        assert_eq!(truncate_decimals(delta.tnr.unwrap(), 2), 0.83);
        assert_eq!(delta.acc_count, 33);
        assert!((delta.fpr.unwrap() - 0.166).abs() < 1e-3);

        let theta = metrics(18, 0, 1, 17);
        assert_eq!(truncate_decimals(theta.fpr.unwrap(), 2), 0.05);
        assert_eq!(truncate_decimals(theta.tnr.unwrap(), 2), 0.94);
        assert_eq!(theta.acc_count, 35);
        for m in [all, delta, theta] {
            assert!((m.fpr.unwrap() + m.tnr.unwrap() - 1.0).abs() <= 1e-12);
            assert_eq!(m.counts.total(), 36);
        }
        assert!(confusion_metrics(&[Class::Seizure], &[]).is_err());
        assert_eq!(metrics(0, 0, 2, 3).tpr, None);
    }

    #[test]
    fn separable_loo() {
        let ev = classes(1, 18, 10.0);
        let r = leave_one_out(&ev, &ClassifierConfig::default()).unwrap();
        assert_eq!(r.predictions.len(), 36);
        assert_eq!(r.loss_value, 0.0);
        assert_eq!(apparent_error(&ev, &ClassifierConfig::default()).unwrap(), 0.0);
    }

    #[test]
    fn random_labels_are_near_chance() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut losses = 0.0;
        let trials = 20;
        for t in 0..trials {
            let mut ev = classes(100 + t, 18, 0.0);
            // shuffle labels while keeping 18 per class
            for i in (1..ev.len()).rev() {
                let j = rng.random_range(0..=i);
                let (a, b) = (ev[i].1, ev[j].1);
                ev[i].1 = b;
                ev[j].1 = a;
            }
            let loss = leave_one_out(&ev, &ClassifierConfig::default()).unwrap().loss_value;
            assert!((loss - 0.5).abs() <= 0.3, "{loss}");
            losses += loss;
        }
        assert!((losses / trials as f64 - 0.5).abs() < 0.2);
    }

    #[test]
    fn one_mislabeled_point() {
        let mut ev = classes(3, 18, 10.0);
        ev[0].1 = Class::NonSeizure;
        let e = apparent_error(&ev, &ClassifierConfig::default()).unwrap();
        assert_eq!(e, 1.0 / 36.0);
        assert_eq!(truncate_decimals(e, 3), 0.027);
    }

    #[test]
    fn resubstitution_is_optimistic_on_average() {
        let cfg = ClassifierConfig::default();
        let (mut app, mut loo) = (0.0, 0.0);
        for seed in 0..100 {
            let ev = classes(1000 + seed, 18, 0.6);
            app += apparent_error(&ev, &cfg).unwrap();
            loo += leave_one_out(&ev, &cfg).unwrap().loss_value;
        }
        assert!(app <= loo, "apparent {app} vs loo {loo}");
    }

    #[test]
    fn order_does_not_matter() {
        let ev = classes(4, 18, 0.8);
        let cfg = ClassifierConfig::default();
        let base = leave_one_out(&ev, &cfg).unwrap();
        let mut rev = ev.clone();
        rev.reverse();
        let other = leave_one_out(&rev, &cfg).unwrap();
        let n = ev.len();
        for p in &other.predictions {
            let q = base.predictions[n - 1 - p.index];
            assert_eq!((p.predicted, p.score.to_bits()), (q.predicted, q.score.to_bits()));
        }
        assert_eq!(base.loss_value, other.loss_value);
    }

    #[test]
    fn too_few_events() {
        let ev = classes(5, 3, 1.0);
        assert!(matches!(
            leave_one_out(&ev, &ClassifierConfig::default()),
            Err(EvalError::TooFewEvents { need: 4, got: 3, .. })
        ));
    }

    #[test]
    fn median_and_mean() {
        let seg = |b: f64| BandFeatures {
            segment_index: 0,
            class_label: None,
            params: [GgdParams {
                scale_a: 2.0 * b,
                shape_b: b,
            }; 5],
        };
        let segs = [seg(1.0), seg(3.0), seg(2.0), seg(10.0)];
        let med = aggregate_segments(&segs, Aggregation::Median).unwrap();
        assert_eq!(med[0].shape_b, 2.5);
        assert_eq!(med[4].scale_a, 5.0);
        let mean = aggregate_segments(&segs, Aggregation::Mean).unwrap();
        assert_eq!(mean[2].shape_b, 4.0);
        assert!(aggregate_segments(&[], Aggregation::Mean).is_err());
    }
}
