//! Zero-mean generalized Gaussian density `B / (2 A Γ(1/B)) · exp(-|x/A|^B)`
//! and its maximum-likelihood fit.
//!
//! For a fixed shape `B` the likelihood is maximized in closed form by
//! `Â(B) = (B/n · Σ|xᵢ|^B)^(1/B)`. Substituting it leaves a one-dimensional
//! problem in `B` whose stationarity condition is
//!
//! ```text
//! g(B) = 1 + ψ(1/B)/B + ln(B/n · Σ|xᵢ|^B)/B − Σ|xᵢ|^B ln|xᵢ| / Σ|xᵢ|^B = 0
//! ```
//!
//! `g(B)` is `B/n` times the derivative of the profile log-likelihood, so it
//! is positive below the optimum and negative above it. The root is found by
//! an Illinois regula-falsi search in `ln B` that falls back to bisection,
//! starting from a bracket grown around the moment-ratio estimate.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Gamma};
use thiserror::Error;

use crate::class::Class;
use crate::rhythms::{Band, BandStack};
use crate::special::{digamma, ln_gamma};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GgdError {
    #[error("GGD parameters must be positive and finite (A = {scale_a}, B = {shape_b})")]
    Domain { scale_a: f64, shape_b: f64 },
    #[error("need at least {required} samples, got {got}")]
    TooFewSamples { required: usize, got: usize },
    #[error("degenerate samples: {0}")]
    Degenerate(String),
    #[error("{band}: {source}")]
    Band {
        band: Band,
        #[source]
        source: Box<GgdError>,
    },
    #[error("invalid estimator configuration: {0}")]
    Config(String),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdParams {
    pub scale_a: f64,
    pub shape_b: f64,
}

impl GgdParams {
    pub fn new(scale_a: f64, shape_b: f64) -> Result<Self, GgdError> {
        let p = Self { scale_a, shape_b };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), GgdError> {
        let ok = |v: f64| v > 0.0 && v.is_finite();
        if ok(self.scale_a) && ok(self.shape_b) {
            Ok(())
        } else {
            Err(GgdError::Domain {
                scale_a: self.scale_a,
                shape_b: self.shape_b,
            })
        }
    }

    /// `A² Γ(3/B) / Γ(1/B)`.
    pub fn variance(&self) -> f64 {
        self.scale_a.powi(2) * (ln_gamma(3.0 / self.shape_b) - ln_gamma(1.0 / self.shape_b)).exp()
    }
}

pub fn ggd_ln_pdf(x: f64, p: &GgdParams) -> Result<f64, GgdError> {
    p.validate()?;
    let GgdParams { scale_a, shape_b } = *p;
    Ok(shape_b.ln()
        - std::f64::consts::LN_2
        - scale_a.ln()
        - ln_gamma(1.0 / shape_b)
        - (x.abs() / scale_a).powf(shape_b))
}

pub fn ggd_pdf(x: f64, p: &GgdParams) -> Result<f64, GgdError> {
    ggd_ln_pdf(x, p).map(f64::exp)
}

/// `n` i.i.d. draws: `|x| = A·G^(1/B)` with `G ~ Gamma(1/B, 1)` and a fair sign.
pub fn ggd_sample(p: &GgdParams, n: usize, seed: u64) -> Result<Vec<f64>, GgdError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ggd_sample_with(p, n, &mut rng)
}

pub fn ggd_sample_with<R: Rng + ?Sized>(p: &GgdParams, n: usize, rng: &mut R) -> Result<Vec<f64>, GgdError> {
    p.validate()?;
    let gamma = Gamma::new(1.0 / p.shape_b, 1.0).map_err(|_| GgdError::Domain {
        scale_a: p.scale_a,
        shape_b: p.shape_b,
    })?;
    let inv_b = 1.0 / p.shape_b;
    Ok((0..n)
        .map(|_| {
            let g: f64 = gamma.sample(rng);
            let mag = p.scale_a * g.powf(inv_b);
            if rng.random::<bool>() {
                mag
            } else {
                -mag
            }
        })
        .collect())
}

/// Profile-ML scale for a fixed shape.
pub fn estimate_scale_given_shape(samples: &[f64], shape_b: f64) -> Result<f64, GgdError> {
    if !(shape_b > 0.0 && shape_b.is_finite()) {
        return Err(GgdError::Domain {
            scale_a: f64::NAN,
            shape_b,
        });
    }
    let mags = Magnitudes::new(samples)?;
    Ok(mags.scale_for(shape_b))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EstimatorConfig {
    pub min_samples: usize,
    /// Stop once the shape bracket is narrower than this.
    pub tolerance: f64,
    pub max_iterations: usize,
    pub shape_min: f64,
    pub shape_max: f64,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            min_samples: 16,
            tolerance: 1e-6,
            max_iterations: 200,
            shape_min: 0.05,
            shape_max: 20.0,
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<(), GgdError> {
        if !(self.shape_min > 0.0 && self.shape_min < self.shape_max && self.shape_max.is_finite()) {
            return Err(GgdError::Config(format!(
                "shape bracket [{}, {}] is not a positive interval",
                self.shape_min, self.shape_max
            )));
        }
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(self.tolerance > 0.0) || self.max_iterations == 0 {
            return Err(GgdError::Config("tolerance and max_iterations must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GgdEstimate {
    pub params: GgdParams,
    pub iterations: usize,
    pub converged: bool,
    /// Final shape bracket. When converged, `g` changes sign across it.
    pub bracket: (f64, f64),
    /// Moment-ratio starting point.
    pub initial_shape: f64,
}

/// Magnitudes rescaled by their maximum, so `Σ y^B` stays in `[1, n]` for
/// every `B` and the fit is exactly scale-equivariant.
struct Magnitudes {
    max: f64,
    n: f64,
    /// `ln yᵢ` for the non-zero magnitudes.
    logs: Vec<f64>,
}

impl Magnitudes {
    fn new(samples: &[f64]) -> Result<Self, GgdError> {
        if samples.is_empty() {
            return Err(GgdError::TooFewSamples { required: 1, got: 0 });
        }
        if samples.iter().any(|v| !v.is_finite()) {
            return Err(GgdError::Degenerate("non-finite sample".into()));
        }
        let max = samples.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if max == 0.0 {
            return Err(GgdError::Degenerate("all samples are zero".into()));
        }
        let logs = samples
            .iter()
            .filter(|v| **v != 0.0)
            .map(|v| (v.abs() / max).ln())
            .collect();
        Ok(Self {
            max,
            n: samples.len() as f64,
            logs,
        })
    }

    /// `(Σ y^B, Σ y^B ln y)`.
    fn power_sums(&self, b: f64) -> (f64, f64) {
        self.logs.iter().fold((0.0, 0.0), |(s, sl), &l| {
            let p = (b * l).exp();
            (s + p, sl + p * l)
        })
    }

    fn scale_for(&self, b: f64) -> f64 {
        let (s, _) = self.power_sums(b);
        self.max * ((b * s / self.n).ln() / b).exp()
    }

    fn score(&self, b: f64) -> f64 {
        let (s, sl) = self.power_sums(b);
        1.0 + digamma(1.0 / b) / b + (b * s / self.n).ln() / b - sl / s
    }

    /// `E|y| / sqrt(E y²)`.
    fn moment_ratio(&self) -> f64 {
        let (m1, m2) = self.logs.iter().fold((0.0, 0.0), |(a, b), &l| {
            let y = l.exp();
            (a + y, b + y * y)
        });
        (m1 / self.n) / (m2 / self.n).sqrt()
    }
}

/// `Γ(2/B) / sqrt(Γ(1/B) Γ(3/B))`, increasing in `B`.
pub fn moment_ratio(shape_b: f64) -> f64 {
    let u = 1.0 / shape_b;
    (ln_gamma(2.0 * u) - 0.5 * (ln_gamma(u) + ln_gamma(3.0 * u))).exp()
}

/// Inverts [`moment_ratio`] on `[lo, hi]` by bisection in `ln B`, clamping
/// ratios outside the attainable range.
pub fn invert_moment_ratio(ratio: f64, lo: f64, hi: f64) -> f64 {
    if ratio <= moment_ratio(lo) {
        return lo;
    }
    if ratio >= moment_ratio(hi) {
        return hi;
    }
    let (mut a, mut b) = (lo.ln(), hi.ln());
    for _ in 0..100 {
        let mid = 0.5 * (a + b);
        if moment_ratio(mid.exp()) < ratio {
            a = mid;
        } else {
            b = mid;
        }
    }
    (0.5 * (a + b)).exp()
}

/// The stationarity function `g(B)` from the module docs. Positive means the
/// profile likelihood still increases with `B`.
pub fn shape_score(samples: &[f64], shape_b: f64) -> Result<f64, GgdError> {
    Ok(Magnitudes::new(samples)?.score(shape_b))
}

pub fn estimate_ggd(samples: &[f64], config: &EstimatorConfig) -> Result<GgdEstimate, GgdError> {
    config.validate()?;
    if samples.len() < config.min_samples {
        return Err(GgdError::TooFewSamples {
            required: config.min_samples,
            got: samples.len(),
        });
    }
    let mags = Magnitudes::new(samples)?;
    let (b_min, b_max) = (config.shape_min, config.shape_max);
    let initial_shape = invert_moment_ratio(mags.moment_ratio(), b_min, b_max);

    let finish = |b: f64, iterations, converged, bracket| {
        let params = GgdParams {
            scale_a: mags.scale_for(b),
            shape_b: b,
        };
        GgdEstimate {
            params,
            iterations,
            converged,
            bracket,
            initial_shape,
        }
    };

    // grow a bracket geometrically from the starting point
    let mut iterations = 0;
    let g0 = mags.score(initial_shape);
    iterations += 1;
    if g0 == 0.0 {
        return Ok(finish(initial_shape, iterations, true, (initial_shape, initial_shape)));
    }
    let upward = g0 > 0.0;
    let (mut near, mut g_near) = (initial_shape, g0);
    let (far, g_far) = loop {
        let next = if upward {
            (near * 2.0).min(b_max)
        } else {
            (near * 0.5).max(b_min)
        };
        if next == near {
            // optimum lies at or beyond the edge of the admissible range
            return Ok(finish(near, iterations, false, (near, near)));
        }
        let g = mags.score(next);
        iterations += 1;
        if (g > 0.0) != upward || g == 0.0 {
            break (next, g);
        }
        near = next;
        g_near = g;
        if iterations >= config.max_iterations {
            return Ok(finish(near, iterations, false, (near, near)));
        }
    };

    // (lo, hi) with g(lo) > 0 > g(hi), searched in u = ln B
    let (mut lo, mut g_lo, mut hi, mut g_hi) = if upward {
        (near, g_near, far, g_far)
    } else {
        (far, g_far, near, g_near)
    };
    if g_lo == 0.0 {
        return Ok(finish(lo, iterations, true, (lo, lo)));
    }
    if g_hi == 0.0 {
        return Ok(finish(hi, iterations, true, (hi, hi)));
    }
    let mut last_side = 0i8;
    while hi - lo >= config.tolerance {
        if iterations >= config.max_iterations {
            return Ok(finish(0.5 * (lo + hi), iterations, false, (lo, hi)));
        }
        let (u_lo, u_hi) = (lo.ln(), hi.ln());
        let mut u = u_lo + g_lo * (u_hi - u_lo) / (g_lo - g_hi);
        let width = u_hi - u_lo;
        // keep the secant strictly inside; otherwise bisect
        if !(u > u_lo + 1e-3 * width && u < u_hi - 1e-3 * width) {
            u = 0.5 * (u_lo + u_hi);
        }
        let b = u.exp();
        let g = mags.score(b);
        iterations += 1;
        if g == 0.0 {
            return Ok(finish(b, iterations, true, (b, b)));
        }
        if g > 0.0 {
            lo = b;
            g_lo = g;
            if last_side == 1 {
                g_hi *= 0.5;
            }
            last_side = 1;
        } else {
            hi = b;
            g_hi = g;
            if last_side == -1 {
                g_lo *= 0.5;
            }
            last_side = -1;
        }
    }
    Ok(finish(0.5 * (lo + hi), iterations, true, (lo, hi)))
}

/// Scale/shape per rhythm for one segment (or one aggregated event).
#[derive(Debug, Clone, PartialEq)]
pub struct BandFeatures {
    pub segment_index: usize,
    pub class_label: Option<Class>,
    pub params: [GgdParams; 5],
}

impl BandFeatures {
    pub fn get(&self, band: Band) -> GgdParams {
        self.params[band.index()]
    }
}

pub fn features_for_segment(
    stack: &BandStack,
    segment_index: usize,
    config: &EstimatorConfig,
) -> Result<BandFeatures, GgdError> {
    let mut params = [GgdParams {
        scale_a: 1.0,
        shape_b: 2.0,
    }; 5];
    for band in Band::ALL {
        let coeffs = stack.get(band);
        let est = estimate_ggd(coeffs, config).map_err(|e| GgdError::Band {
            band,
            source: Box::new(e),
        })?;
        params[band.index()] = est.params;
    }
    Ok(BandFeatures {
        segment_index,
        class_label: None,
        params,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use std::f64::consts::PI;

    fn p(a: f64, b: f64) -> GgdParams {
        GgdParams::new(a, b).unwrap()
    }

    /// Composite Simpson on [lo, hi].
    fn simpson(f: impl Fn(f64) -> f64, lo: f64, hi: f64, n: usize) -> f64 {
        let h = (hi - lo) / n as f64;
        let mut acc = f(lo) + f(hi);
        for i in 1..n {
            let w = if i % 2 == 1 { 4.0 } else { 2.0 };
            acc += w * f(lo + i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn pdf_closed_forms() {
        assert_relative_eq!(
            ggd_pdf(0.0, &p(1.0, 2.0)).unwrap(),
            1.0 / PI.sqrt(),
            max_relative = 1e-12
        );
        assert_relative_eq!(ggd_pdf(0.0, &p(1.0, 1.0)).unwrap(), 0.5, max_relative = 1e-12);
        assert!(ggd_pdf(
            0.0,
            &GgdParams {
                scale_a: -1.0,
                shape_b: 2.0
            }
        )
        .is_err());
        assert!(ggd_pdf(
            0.0,
            &GgdParams {
                scale_a: 1.0,
                shape_b: 0.0
            }
        )
        .is_err());
    }

    #[test]
    fn pdf_special_cases() {
        let a = 1.7;
        let sigma = a / 2f64.sqrt();
        for i in -40..=40 {
            let x = i as f64 * 0.1;
            let normal = (-x * x / (2.0 * sigma * sigma)).exp() / (sigma * (2.0 * PI).sqrt());
            assert!((ggd_pdf(x, &p(a, 2.0)).unwrap() - normal).abs() < 1e-12);
            let laplace = (-x.abs() / a).exp() / (2.0 * a);
            assert!((ggd_pdf(x, &p(a, 1.0)).unwrap() - laplace).abs() < 1e-12);
        }
    }

    #[test]
    fn pdf_normalizes() {
        let f = |q: GgdParams| move |x: f64| ggd_pdf(x, &q).unwrap();
        // kink at 0 for small B: integrate each half separately
        let half = |q: GgdParams, hi: f64| simpson(f(q), 0.0, hi, 2_000_000);
        // A = 2, B = 0.8 leaves P(|X| > 50) = Q(1.25, 25^0.8) ≈ 4e-6 outside [-50, 50]
        let q = p(2.0, 0.8);
        let tail = statrs::function::gamma::gamma_ur(1.25, 25f64.powf(0.8));
        assert!((2.0 * half(q, 50.0) - (1.0 - tail)).abs() < 1e-7);
        assert!((2.0 * half(q, 400.0) - 1.0).abs() < 1e-6);
        for b in [1.0, 2.0, 4.0] {
            assert!((2.0 * half(p(1.0, b), 50.0) - 1.0).abs() < 1e-6, "B={b}");
        }
        // B = 0.5 has a cusp at 0; substitute x = t² to smooth it
        let q = p(1.0, 0.5);
        let smooth = simpson(|t| 2.0 * t * ggd_pdf(t * t, &q).unwrap(), 0.0, 40.0, 2_000_000);
        assert!((2.0 * smooth - 1.0).abs() < 1e-6);
    }

    #[test]
    fn sampling() {
        let q = p(2f64.sqrt(), 2.0);
        let x = ggd_sample(&q, 10_000, 7).unwrap();
        let mean = x.iter().sum::<f64>() / x.len() as f64;
        let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (x.len() - 1) as f64;
        assert!((var - 1.0).abs() < 0.05, "{var}");
        assert!(mean.abs() < 3.0 / 100.0);
        assert_relative_eq!(q.variance(), 1.0, max_relative = 1e-12);
        assert_eq!(x, ggd_sample(&q, 10_000, 7).unwrap());
        assert_ne!(x, ggd_sample(&q, 10_000, 8).unwrap());
    }

    #[test]
    fn scale_given_shape() {
        assert_relative_eq!(
            estimate_scale_given_shape(&[-1.0, 1.0], 2.0).unwrap(),
            2f64.sqrt(),
            max_relative = 1e-14
        );
        let x = [0.3, -1.2, 2.0, 0.01];
        let lam = 3.5;
        let y: Vec<f64> = x.iter().map(|v| v * lam).collect();
        assert_relative_eq!(
            estimate_scale_given_shape(&y, 1.3).unwrap(),
            lam * estimate_scale_given_shape(&x, 1.3).unwrap(),
            max_relative = 1e-13
        );
        let draws = ggd_sample(&p(1.5, 1.0), 100_000, 3).unwrap();
        assert!((estimate_scale_given_shape(&draws, 1.0).unwrap() - 1.5).abs() < 0.02);
        assert!(matches!(
            estimate_scale_given_shape(&[0.0, 0.0], 2.0),
            Err(GgdError::Degenerate(_))
        ));
    }

    #[test]
    fn recovers_parameters() {
        let cfg = EstimatorConfig::default();
        for (i, (a, b)) in [(1.0, 2.0), (0.5, 0.8)].into_iter().enumerate() {
            let x = ggd_sample(&p(a, b), 100_000, 100 + i as u64).unwrap();
            let est = estimate_ggd(&x, &cfg).unwrap();
            assert!(est.converged);
            assert!(est.iterations <= 200);
            assert!((est.params.shape_b - b).abs() < 0.05, "{est:?}");
            assert!((est.params.scale_a - a).abs() < 0.02, "{est:?}");
        }
    }

    #[test]
    fn score_matches_finite_difference_of_profile_likelihood() {
        let x = ggd_sample(&p(1.0, 1.3), 500, 5).unwrap();
        let n = x.len() as f64;
        let profile = |b: f64| {
            let a = estimate_scale_given_shape(&x, b).unwrap();
            x.iter().map(|v| ggd_ln_pdf(*v, &p(a, b)).unwrap()).sum::<f64>()
        };
        for b in [0.4, 1.0, 2.5, 6.0] {
            let h = 1e-5 * b;
            let fd = (profile(b + h) - profile(b - h)) / (2.0 * h);
            let g = shape_score(&x, b).unwrap();
            assert!((g - b * fd / n).abs() < 1e-6, "b={b}: {g} vs {}", b * fd / n);
        }
    }

    #[test]
    fn bracket_straddles_root() {
        let x = ggd_sample(&p(1.0, 1.5), 2_000, 9).unwrap();
        let est = estimate_ggd(&x, &EstimatorConfig::default()).unwrap();
        assert!(est.converged);
        let (lo, hi) = est.bracket;
        assert!(hi - lo < 1e-6);
        assert!(shape_score(&x, lo).unwrap() >= 0.0);
        assert!(shape_score(&x, hi).unwrap() <= 0.0);
    }

    #[test]
    fn equal_magnitudes_pin_the_upper_bracket() {
        let x: Vec<f64> = (0..32).map(|i| if i % 2 == 0 { 2.0 } else { -2.0 }).collect();
        let est = estimate_ggd(&x, &EstimatorConfig::default()).unwrap();
        assert!(!est.converged);
        assert_eq!(est.params.shape_b, 20.0);
    }

    #[test]
    fn rejects_bad_input() {
        let cfg = EstimatorConfig::default();
        assert!(matches!(
            estimate_ggd(&[1.0; 15], &cfg),
            Err(GgdError::TooFewSamples { required: 16, got: 15 })
        ));
        assert!(matches!(estimate_ggd(&[0.0; 20], &cfg), Err(GgdError::Degenerate(_))));
    }

    #[test]
    fn moment_ratio_inversion() {
        assert_relative_eq!(moment_ratio(2.0), (2.0 / PI).sqrt(), max_relative = 1e-12);
        assert_relative_eq!(moment_ratio(1.0), 1.0 / 2f64.sqrt(), max_relative = 1e-12);
        for b in [0.1, 0.7, 1.0, 3.3, 15.0] {
            assert_relative_eq!(invert_moment_ratio(moment_ratio(b), 0.05, 20.0), b, max_relative = 1e-9);
        }
    }

    #[test]
    fn band_errors_name_the_band() {
        let mut stack = BandStack::default();
        for band in Band::ALL {
            stack.bands[band.index()] = ggd_sample(&p(1.0, 2.0), 64, band.index() as u64).unwrap();
        }
        stack.bands[Band::Alpha.index()].clear();
        let err = features_for_segment(&stack, 0, &EstimatorConfig::default()).unwrap_err();
        assert!(err.to_string().starts_with("alpha"), "{err}");
    }

    #[test]
    fn laplacian_delta_band() {
        let mut stack = BandStack::default();
        for band in Band::ALL {
            let b = if band == Band::Delta { 1.0 } else { 2.0 };
            stack.bands[band.index()] = ggd_sample(&p(1.0, b), 20_000, 40 + band.index() as u64).unwrap();
        }
        let f = features_for_segment(&stack, 3, &EstimatorConfig::default()).unwrap();
        assert_eq!(f.segment_index, 3);
        assert!((f.get(Band::Delta).shape_b - 1.0).abs() < 0.1);
        for band in &Band::ALL[1..] {
            assert!((f.get(*band).shape_b - 2.0).abs() < 0.15);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn scale_and_sign_equivariance(seed in any::<u64>(), lam in 1e-3f64..1e3, b in 0.5f64..4.0) {
            let x = ggd_sample(&p(1.0, b), 400, seed).unwrap();
            let cfg = EstimatorConfig::default();
            let base = estimate_ggd(&x, &cfg).unwrap();
            let scaled: Vec<f64> = x.iter().map(|v| v * lam).collect();
            let s = estimate_ggd(&scaled, &cfg).unwrap();
            prop_assert!((s.params.shape_b - base.params.shape_b).abs() <= 1e-9);
            prop_assert!((s.params.scale_a / (lam * base.params.scale_a) - 1.0).abs() <= 1e-9);
            let neg: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert_eq!(estimate_ggd(&neg, &cfg).unwrap(), base);
        }
    }
}
