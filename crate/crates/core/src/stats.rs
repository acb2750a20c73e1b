//! Estimators and hypothesis tests that turn modes of convergence into
//! finite-sample decisions: a two-sample Kolmogorov–Smirnov test with
//! asymptotic p-values, normal-theory confidence intervals, empirical
//! characteristic functions, and per-path error sequences.
//!
//! Almost-sure convergence cannot be certified by a finite computation; the
//! falsifiable surrogate used throughout is the decay of per-path errors
//! along nested prefixes of a single i.i.d. stream, summarized over seeds by
//! medians. Convergence in distribution of complex-valued functionals is
//! tested on real and imaginary parts separately.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Quantile probes reported in every [`SampleSummary`].
pub const QUANTILE_PROBES: [f64; 5] = [0.05, 0.25, 0.5, 0.75, 0.95];

/// Result of a two-sample Kolmogorov–Smirnov test.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    /// `sup |ECDF_x - ECDF_y|` over the pooled sample.
    pub statistic: f64,
    pub n: usize,
    pub m: usize,
    /// Asymptotic p-value at effective size `nm/(n+m)`.
    pub p_value: f64,
}

/// Two-sample KS test. Both samples need at least 8 points; the p-value uses
/// the asymptotic Kolmogorov distribution, adequate for the sample sizes
/// (≥ 10³) used by the experiments.
pub fn ks_two_sample(xs: &[f64], ys: &[f64]) -> Result<KsResult> {
    const MIN: usize = 8;
    if xs.len() < MIN || ys.len() < MIN {
        return Err(Error::SampleTooSmall { min: MIN, got: xs.len().min(ys.len()) });
    }
    let mut x = xs.to_vec();
    let mut y = ys.to_vec();
    x.sort_by(|a, b| a.partial_cmp(b).unwrap());
    y.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let (n, m) = (x.len(), y.len());
    let mut d: f64 = 0.0;
    let (mut i, mut j) = (0usize, 0usize);
    // advance both ECDFs through the pooled sorted points, consuming ties
    // together so each ECDF is evaluated right-continuously; the ECDF values
    // come from integer counts, keeping D in [0, 1] exactly
    while i < n || j < m {
        let v = match (x.get(i), y.get(j)) {
            (Some(&a), Some(&b)) => a.min(b),
            (Some(&a), None) => a,
            (None, Some(&b)) => b,
            (None, None) => unreachable!(),
        };
        while i < n && x[i] == v {
            i += 1;
        }
        while j < m && y[j] == v {
            j += 1;
        }
        let fx = i as f64 / n as f64;
        let fy = j as f64 / m as f64;
        d = d.max((fx - fy).abs());
    }

    let effective = (n as f64 * m as f64) / (n as f64 + m as f64);
    let p_value = kolmogorov_sf(effective.sqrt() * d);
    Ok(KsResult { statistic: d, n, m, p_value })
}

/// Survival function of the Kolmogorov distribution,
/// `Q(λ) = 2 Σ_{k≥1} (-1)^{k-1} e^{-2k²λ²}`, with the theta-transformed
/// series below the crossover where the alternating form loses precision.
pub fn kolmogorov_sf(lambda: f64) -> f64 {
    if lambda <= 0.0 {
        return 1.0;
    }
    if lambda < 1.18 {
        let e = (-std::f64::consts::PI * std::f64::consts::PI / (8.0 * lambda * lambda)).exp();
        let cdf = (2.0 * std::f64::consts::PI).sqrt() / lambda
            * (e + e.powi(9) + e.powi(25) + e.powi(49));
        (1.0 - cdf).clamp(0.0, 1.0)
    } else {
        let mut sum = 0.0;
        let mut sign = 1.0;
        for k in 1..=100 {
            let term = (-2.0 * (k * k) as f64 * lambda * lambda).exp();
            sum += sign * term;
            sign = -sign;
            if term < 1e-16 {
                break;
            }
        }
        (2.0 * sum).clamp(0.0, 1.0)
    }
}

/// Closed interval `[lo, hi]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn contains(&self, x: f64) -> bool {
        self.lo <= x && x <= self.hi
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }
}

/// Moments, normal-theory confidence intervals and fixed quantile probes of
/// a (possibly complex) sample. Complex samples are summarized
/// componentwise; quantiles are those of the real part.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleSummary {
    pub n: usize,
    pub mean: Complex64,
    /// Euclidean combination of the componentwise standard errors.
    pub std_error: f64,
    pub ci_re: Interval,
    pub ci_im: Interval,
    /// Real-part quantiles at [`QUANTILE_PROBES`].
    pub quantiles: Vec<f64>,
    pub confidence: f64,
}

/// Mean with a two-sided normal CI at the given confidence for a complex
/// sample. Requires `n ≥ 2`.
pub fn mean_with_ci(samples: &[Complex64], confidence: f64) -> Result<SampleSummary> {
    if samples.len() < 2 {
        return Err(Error::SampleTooSmall { min: 2, got: samples.len() });
    }
    if !(0.0 < confidence && confidence < 1.0) {
        return Err(Error::InvalidConfig {
            field: "confidence".into(),
            message: format!("must be in (0,1), got {confidence}"),
        });
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<Complex64>() / n;
    let mut var_re = 0.0;
    let mut var_im = 0.0;
    for z in samples {
        var_re += (z.re - mean.re).powi(2);
        var_im += (z.im - mean.im).powi(2);
    }
    var_re /= n - 1.0;
    var_im /= n - 1.0;
    let se_re = (var_re / n).sqrt();
    let se_im = (var_im / n).sqrt();
    let z = normal_quantile(0.5 + confidence / 2.0);

    let mut reals: Vec<f64> = samples.iter().map(|s| s.re).collect();
    reals.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let quantiles = QUANTILE_PROBES.iter().map(|&p| quantile_of_sorted(&reals, p)).collect();

    Ok(SampleSummary {
        n: samples.len(),
        mean,
        std_error: (se_re * se_re + se_im * se_im).sqrt(),
        ci_re: Interval { lo: mean.re - z * se_re, hi: mean.re + z * se_re },
        ci_im: Interval { lo: mean.im - z * se_im, hi: mean.im + z * se_im },
        quantiles,
        confidence,
    })
}

/// Real-sample convenience wrapper around [`mean_with_ci`].
pub fn mean_with_ci_real(samples: &[f64], confidence: f64) -> Result<SampleSummary> {
    let complex: Vec<Complex64> = samples.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    mean_with_ci(&complex, confidence)
}

/// Linear-interpolation quantile of an ascending-sorted sample.
pub fn quantile_of_sorted(sorted: &[f64], p: f64) -> f64 {
    assert!(!sorted.is_empty());
    let pos = p.clamp(0.0, 1.0) * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

/// Median over an unsorted slice.
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    quantile_of_sorted(&v, 0.5)
}

/// Two-sample z-comparison of means with unpooled (Welch-style) standard
/// errors; returns the statistic and its two-sided normal p-value.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanComparison {
    pub z: f64,
    pub p_value: f64,
}

pub fn welch_mean_test(xs: &[f64], ys: &[f64]) -> Result<MeanComparison> {
    if xs.len() < 2 || ys.len() < 2 {
        return Err(Error::SampleTooSmall { min: 2, got: xs.len().min(ys.len()) });
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let var = |v: &[f64], m: f64| {
        v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64
    };
    let (mx, my) = (mean(xs), mean(ys));
    let se2 = var(xs, mx) / xs.len() as f64 + var(ys, my) / ys.len() as f64;
    if se2 == 0.0 {
        let z = if mx == my { 0.0 } else { f64::INFINITY };
        return Ok(MeanComparison { z, p_value: if mx == my { 1.0 } else { 0.0 } });
    }
    let z = (mx - my) / se2.sqrt();
    let p = 2.0 * (1.0 - normal_cdf(z.abs()));
    Ok(MeanComparison { z, p_value: p.clamp(0.0, 1.0) })
}

/// `(1/n) Σ e^{i (t, x_k)}`.
pub fn empirical_char_function(samples: &[Vec<f64>], t: &[f64]) -> Result<Complex64> {
    if samples.is_empty() {
        return Err(Error::SampleTooSmall { min: 1, got: 0 });
    }
    let mut acc = Complex64::new(0.0, 0.0);
    for x in samples {
        if x.len() != t.len() {
            return Err(Error::DimensionMismatch { expected: t.len(), got: x.len() });
        }
        let phase: f64 = t.iter().zip(x).map(|(a, b)| a * b).sum();
        acc += Complex64::from_polar(1.0, phase);
    }
    Ok(acc / samples.len() as f64)
}

/// Elementwise `|value_n - target|` along a path of functional values.
pub fn path_error_sequence(values: &[Complex64], target: Complex64) -> Vec<f64> {
    values.iter().map(|v| (v - target).norm()).collect()
}

/// Standard normal CDF via the Abramowitz–Stegun 7.1.26 rational
/// approximation of erf (absolute error below 1.5e-7, enough for test
/// decisions at the percent level).
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * (1.0 + erf(z / std::f64::consts::SQRT_2))
}

fn erf(x: f64) -> f64 {
    let sign = if x < 0.0 { -1.0 } else { 1.0 };
    let x = x.abs();
    let t = 1.0 / (1.0 + 0.3275911 * x);
    let poly = t
        * (0.254829592
            + t * (-0.284496736 + t * (1.421413741 + t * (-1.453152027 + t * 1.061405429))));
    sign * (1.0 - poly * (-x * x).exp())
}

/// Inverse standard normal CDF (Acklam's rational approximation, relative
/// error below 1.15e-9).
pub fn normal_quantile(p: f64) -> f64 {
    assert!(0.0 < p && p < 1.0, "quantile probability must be in (0,1), got {p}");

    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
