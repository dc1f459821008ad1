//! Python bindings for the seizure feature pipeline.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use seizure_core::class::Class;
use seizure_core::classify::{fit, BandScope, ClassifierConfig, DiscriminantModel, FeatureVector};
use seizure_core::corrstat;
use seizure_core::evaluate;
use seizure_core::ggd::{self, EstimatorConfig};
use seizure_core::ingest::{design_butterworth, BiquadCascade, IirFilterSpec};
use seizure_core::rhythms::{dwt_db4, idwt_db4, WaveletDecomposition};

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn parse<T: std::str::FromStr>(s: &str) -> PyResult<T>
where
    T::Err: std::fmt::Display,
{
    s.parse().map_err(value_err)
}

#[pyclass(frozen, skip_from_py_object, name = "GgdParams")]
#[derive(Clone, Copy)]
struct PyGgdParams {
    inner: ggd::GgdParams,
}

#[pymethods]
impl PyGgdParams {
    #[new]
    fn new(scale_a: f64, shape_b: f64) -> PyResult<Self> {
        let inner = ggd::GgdParams::new(scale_a, shape_b).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn scale_a(&self) -> f64 {
        self.inner.scale_a
    }

    #[getter]
    fn shape_b(&self) -> f64 {
        self.inner.shape_b
    }

    fn variance(&self) -> f64 {
        self.inner.variance()
    }

    fn pdf(&self, x: f64) -> PyResult<f64> {
        ggd::ggd_pdf(x, &self.inner).map_err(value_err)
    }

    fn sample(&self, n: usize, seed: u64) -> PyResult<Vec<f64>> {
        ggd::ggd_sample(&self.inner, n, seed).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "GgdParams(scale_a={}, shape_b={})",
            self.inner.scale_a, self.inner.shape_b
        )
    }
}

#[pyclass(frozen, skip_from_py_object)]
#[derive(Clone)]
struct GgdEstimate {
    #[pyo3(get)]
    params: PyGgdParams,
    #[pyo3(get)]
    iterations: usize,
    #[pyo3(get)]
    converged: bool,
}

/// Maximum-likelihood scale and shape of zero-mean samples.
#[pyfunction]
#[pyo3(signature = (samples, tolerance = 1e-6, max_iterations = 200, min_samples = 16))]
fn estimate_ggd(samples: Vec<f64>, tolerance: f64, max_iterations: usize, min_samples: usize) -> PyResult<GgdEstimate> {
    let cfg = EstimatorConfig {
        tolerance,
        max_iterations,
        min_samples,
        ..EstimatorConfig::default()
    };
    let est = ggd::estimate_ggd(&samples, &cfg).map_err(value_err)?;
    Ok(GgdEstimate {
        params: PyGgdParams { inner: est.params },
        iterations: est.iterations,
        converged: est.converged,
    })
}

#[pyclass(frozen, skip_from_py_object)]
struct Decomposition {
    inner: WaveletDecomposition,
}

#[pymethods]
impl Decomposition {
    /// Detail coefficients, finest level first.
    #[getter]
    fn details(&self) -> Vec<Vec<f64>> {
        self.inner.details.clone()
    }

    #[getter]
    fn approx(&self) -> Vec<f64> {
        self.inner.approx.clone()
    }

    #[getter]
    fn levels(&self) -> usize {
        self.inner.levels()
    }

    fn energy(&self) -> f64 {
        self.inner.energy()
    }

    fn reconstruct(&self) -> PyResult<Vec<f64>> {
        idwt_db4(&self.inner).map_err(value_err)
    }
}

/// Daubechies-4 decomposition with periodic extension.
#[pyfunction]
fn dwt(signal: Vec<f64>, levels: usize) -> PyResult<Decomposition> {
    let inner = dwt_db4(&signal, levels).map_err(value_err)?;
    Ok(Decomposition { inner })
}

#[pyclass(frozen, skip_from_py_object)]
struct Butterworth {
    cascade: BiquadCascade,
    sample_rate_hz: f64,
}

#[pymethods]
impl Butterworth {
    /// `kind` is `low_pass` or `high_pass`.
    #[new]
    fn new(kind: &str, order: usize, cutoff_hz: f64, sample_rate_hz: f64) -> PyResult<Self> {
        let spec = match kind {
            "low_pass" => IirFilterSpec::low_pass(order, cutoff_hz),
            "high_pass" => IirFilterSpec::high_pass(order, cutoff_hz),
            other => return Err(PyValueError::new_err(format!("unknown filter kind `{other}`"))),
        };
        let cascade = design_butterworth(&spec, sample_rate_hz).map_err(value_err)?;
        Ok(Self {
            cascade,
            sample_rate_hz,
        })
    }

    fn filter(&self, signal: Vec<f64>) -> Vec<f64> {
        self.cascade.filter(&signal)
    }

    fn magnitude_at(&self, freq_hz: f64) -> f64 {
        self.cascade.magnitude_at(freq_hz, self.sample_rate_hz)
    }

    fn is_stable(&self) -> bool {
        self.cascade.is_stable()
    }
}

#[pyfunction]
fn pearson_r(x: Vec<f64>, y: Vec<f64>) -> PyResult<f64> {
    corrstat::pearson_r(&x, &y).map_err(value_err)
}

/// Two-sided p-value of `r` over `n` pairs.
#[pyfunction]
fn pearson_p(r: f64, n: usize) -> PyResult<f64> {
    corrstat::pearson_p(r, n).map(|p| p.p).map_err(value_err)
}

/// 95% Fisher-z interval of `r` over `n` pairs.
#[pyfunction]
fn fisher_ci95(r: f64, n: usize) -> PyResult<(f64, f64)> {
    corrstat::fisher_ci95(r, n)
        .map(|ci| (ci.low, ci.high))
        .map_err(value_err)
}

#[pyclass(frozen, skip_from_py_object)]
struct ConfusionMetrics {
    #[pyo3(get)]
    tp: usize,
    #[pyo3(get)]
    fp: usize,
    #[pyo3(get)]
    tn: usize,
    #[pyo3(get, name = "fn_")]
    fn_: usize,
    #[pyo3(get)]
    tpr: Option<f64>,
    #[pyo3(get)]
    fpr: Option<f64>,
    #[pyo3(get)]
    tnr: Option<f64>,
    #[pyo3(get)]
    acc: usize,
}

fn classes(labels: &[String]) -> PyResult<Vec<Class>> {
    labels.iter().map(|l| parse(l)).collect()
}

/// Labels are `seizure` or `non_seizure`.
#[pyfunction]
fn confusion_metrics(predicted: Vec<String>, truth: Vec<String>) -> PyResult<ConfusionMetrics> {
    let m = evaluate::confusion_metrics(&classes(&predicted)?, &classes(&truth)?).map_err(value_err)?;
    Ok(ConfusionMetrics {
        tp: m.counts.tp,
        fp: m.counts.fp,
        tn: m.counts.tn,
        fn_: m.counts.fn_,
        tpr: m.tpr,
        fpr: m.fpr,
        tnr: m.tnr,
        acc: m.acc_count,
    })
}

fn samples(features: &[Vec<f64>], labels: &[String], scope: &str) -> PyResult<Vec<(FeatureVector, Class)>> {
    if features.len() != labels.len() {
        return Err(PyValueError::new_err(format!(
            "{} feature rows but {} labels",
            features.len(),
            labels.len()
        )));
    }
    let scope: BandScope = parse(scope)?;
    features
        .iter()
        .zip(classes(labels)?)
        .map(|(f, c)| Ok((FeatureVector::new(f.clone(), scope).map_err(value_err)?, c)))
        .collect()
}

fn classifier_config(mode: &str, shrinkage: f64, threshold: f64) -> PyResult<ClassifierConfig> {
    Ok(ClassifierConfig {
        mode: parse(mode)?,
        shrinkage,
        decision_threshold: threshold,
    })
}

/// Two-class Gaussian discriminant. `scope` is a rhythm name (two features:
/// scale, shape) or `all` (ten features, delta..gamma).
#[pyclass(frozen, skip_from_py_object)]
struct Classifier {
    model: DiscriminantModel,
}

#[pymethods]
impl Classifier {
    #[new]
    #[pyo3(signature = (features, labels, scope, mode = "eq6", shrinkage = 1e-6, threshold = 0.0))]
    fn new(
        features: Vec<Vec<f64>>,
        labels: Vec<String>,
        scope: &str,
        mode: &str,
        shrinkage: f64,
        threshold: f64,
    ) -> PyResult<Self> {
        let data = samples(&features, &labels, scope)?;
        let model = fit(&data, &classifier_config(mode, shrinkage, threshold)?).map_err(value_err)?;
        Ok(Self { model })
    }

    /// Negative scores favour seizure.
    fn score(&self, x: Vec<f64>) -> PyResult<f64> {
        let v = FeatureVector::new(x, self.model.scope()).map_err(value_err)?;
        self.model.discriminant_score(&v).map_err(value_err)
    }

    fn predict(&self, x: Vec<f64>) -> PyResult<(String, f64)> {
        let v = FeatureVector::new(x, self.model.scope()).map_err(value_err)?;
        let p = self.model.predict(&v).map_err(value_err)?;
        Ok((p.class.to_string(), p.score))
    }

    fn to_text(&self) -> String {
        self.model.to_text()
    }
}

#[pyclass(frozen, skip_from_py_object)]
struct LooResult {
    #[pyo3(get)]
    predicted: Vec<String>,
    #[pyo3(get)]
    scores: Vec<f64>,
    #[pyo3(get)]
    misclassified: usize,
    #[pyo3(get)]
    loss_value: f64,
}

#[pyfunction]
#[pyo3(signature = (features, labels, scope, mode = "eq6", shrinkage = 1e-6, threshold = 0.0))]
fn leave_one_out(
    features: Vec<Vec<f64>>,
    labels: Vec<String>,
    scope: &str,
    mode: &str,
    shrinkage: f64,
    threshold: f64,
) -> PyResult<LooResult> {
    let data = samples(&features, &labels, scope)?;
    let r = evaluate::leave_one_out(&data, &classifier_config(mode, shrinkage, threshold)?).map_err(value_err)?;
    Ok(LooResult {
        predicted: r.predictions.iter().map(|p| p.predicted.to_string()).collect(),
        scores: r.predictions.iter().map(|p| p.score).collect(),
        misclassified: r.misclassified,
        loss_value: r.loss_value,
    })
}

#[pymodule]
fn seizure_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGgdParams>()?;
    m.add_class::<GgdEstimate>()?;
    m.add_class::<Decomposition>()?;
    m.add_class::<Butterworth>()?;
    m.add_class::<ConfusionMetrics>()?;
    m.add_class::<Classifier>()?;
    m.add_class::<LooResult>()?;
    m.add_function(wrap_pyfunction!(estimate_ggd, m)?)?;
    m.add_function(wrap_pyfunction!(dwt, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_r, m)?)?;
    m.add_function(wrap_pyfunction!(pearson_p, m)?)?;
    m.add_function(wrap_pyfunction!(fisher_ci95, m)?)?;
    m.add_function(wrap_pyfunction!(confusion_metrics, m)?)?;
    m.add_function(wrap_pyfunction!(leave_one_out, m)?)?;
    Ok(())
}
