//! Discretized Hilbert space: a periodic box `[-L, L)^d` with `N` samples per
//! axis, complex sample arrays, and a unitary Fourier transform matched to the
//! continuum convention
//!
//! ```text
//! (Fu)(α) = (2π)^{-d/2} ∫ u(x) e^{-i(α,x)} dx
//! ```
//!
//! The forward kernel sign is fixed so that a spectral shift multiplies the
//! transform by `e^{+i(a,α)}`. Position samples live at `x_k = -L + k·h` with
//! `h = 2L/N`; frequency samples at `α_m = π·m/L` for `m = -N/2..N/2`, stored
//! in FFT order (`samples[j]` holds `α` with `m = j` for `j < N/2` and
//! `m = j - N` otherwise). With the quadrature weights `h^d` (position) and
//! `(π/L)^d` (frequency) the discrete transform is exactly unitary and
//! exactly invertible, so shifts implemented in the spectral domain are exact
//! unitaries for arbitrary real displacements.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which variable the samples of a [`WaveFunction`] are indexed by.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Domain {
    Position,
    Frequency,
}

/// Periodic cubic grid `[-L, L)^d` with an even, power-of-two number of
/// points per axis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGridSpec")]
pub struct GridSpec {
    dim: usize,
    half_width: f64,
    points: usize,
}

#[derive(Deserialize)]
struct RawGridSpec {
    dim: usize,
    half_width: f64,
    points: usize,
}

impl TryFrom<RawGridSpec> for GridSpec {
    type Error = Error;

    fn try_from(raw: RawGridSpec) -> Result<Self> {
        GridSpec::new(raw.dim, raw.half_width, raw.points)
    }
}

impl GridSpec {
    /// Build a grid, validating `d ≥ 1`, `L > 0` and `N ≥ 4` even.
    ///
    /// `N` is additionally restricted to powers of two so transforms stay on
    /// the fast radix path; this is not a semantic restriction.
    pub fn new(dim: usize, half_width: f64, points: usize) -> Result<Self> {
        if dim == 0 || dim > 4 {
            return Err(Error::InvalidGrid(format!("dim must be in 1..=4, got {dim}")));
        }
        if !(half_width.is_finite() && half_width > 0.0) {
            return Err(Error::InvalidGrid(format!("half_width must be positive, got {half_width}")));
        }
        if points < 4 || points % 2 != 0 {
            return Err(Error::InvalidGrid(format!("points must be even and >= 4, got {points}")));
        }
        if !points.is_power_of_two() {
            return Err(Error::InvalidGrid(format!("points must be a power of two, got {points}")));
        }
        if (points as f64).powi(dim as i32) > 1e8 {
            return Err(Error::InvalidGrid(format!("grid too large: {points}^{dim} samples")));
        }
        Ok(GridSpec { dim, half_width, points })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn points(&self) -> usize {
        self.points
    }

    /// Position spacing `h = 2L/N`.
    pub fn spacing(&self) -> f64 {
        2.0 * self.half_width / self.points as f64
    }

    /// Frequency spacing `Δα = π/L`.
    pub fn freq_spacing(&self) -> f64 {
        std::f64::consts::PI / self.half_width
    }

    /// Total number of samples `N^d`.
    pub fn len(&self) -> usize {
        self.points.pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Quadrature weight for one sample in the given domain.
    pub fn weight(&self, domain: Domain) -> f64 {
        match domain {
            Domain::Position => self.spacing().powi(self.dim as i32),
            Domain::Frequency => self.freq_spacing().powi(self.dim as i32),
        }
    }

    /// Position nodes `x_k = -L + k·h` for `k = 0..N-1` along `axis`.
    pub fn position_axis(&self, axis: usize) -> Result<Vec<f64>> {
        self.check_axis(axis)?;
        let h = self.spacing();
        Ok((0..self.points).map(|k| -self.half_width + k as f64 * h).collect())
    }

    /// Frequency nodes along `axis` in storage (FFT) order:
    /// `α_j = Δα·j` for `j < N/2` and `Δα·(j − N)` for `j ≥ N/2`.
    pub fn frequency_axis(&self, axis: usize) -> Result<Vec<f64>> {
        self.check_axis(axis)?;
        let da = self.freq_spacing();
        let n = self.points;
        Ok((0..n)
            .map(|j| {
                let m = if j < n / 2 { j as i64 } else { j as i64 - n as i64 };
                m as f64 * da
            })
            .collect())
    }

    /// Axis nodes in storage order for either domain.
    pub fn axis_values(&self, domain: Domain, axis: usize) -> Result<Vec<f64>> {
        match domain {
            Domain::Position => self.position_axis(axis),
            Domain::Frequency => self.frequency_axis(axis),
        }
    }

    /// Flat row-major index of an on-grid point; `1e-12` membership tolerance
    /// per axis.
    pub fn index_of(&self, domain: Domain, point: &[f64]) -> Result<usize> {
        if point.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, got: point.len() });
        }
        let n = self.points;
        let mut flat = 0usize;
        for (axis, &p) in point.iter().enumerate() {
            let j = match domain {
                Domain::Position => {
                    let k = ((p + self.half_width) / self.spacing()).round();
                    let on_grid = k >= 0.0
                        && k < n as f64
                        && (p - (-self.half_width + k * self.spacing())).abs() <= 1e-12;
                    if !on_grid {
                        return Err(Error::OffGrid { point: point.to_vec(), domain, axis });
                    }
                    k as usize
                }
                Domain::Frequency => {
                    let m = (p / self.freq_spacing()).round();
                    let half = (n / 2) as f64;
                    let on_grid =
                        m >= -half && m < half && (p - m * self.freq_spacing()).abs() <= 1e-12;
                    if !on_grid {
                        return Err(Error::OffGrid { point: point.to_vec(), domain, axis });
                    }
                    if m < 0.0 { (m + n as f64) as usize } else { m as usize }
                }
            };
            flat = flat * n + j;
        }
        Ok(flat)
    }

    fn check_axis(&self, axis: usize) -> Result<()> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange { axis, dim: self.dim });
        }
        Ok(())
    }
}

/// Complex-valued function sampled on a [`GridSpec`], tagged by domain.
///
/// Values are immutable after construction; all operations return new
/// wavefunctions, so sharing across threads is safe.
#[derive(Clone, Debug)]
pub struct WaveFunction {
    grid: GridSpec,
    domain: Domain,
    samples: Vec<Complex64>,
}

impl WaveFunction {
    pub fn new(grid: GridSpec, domain: Domain, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: samples.len() });
        }
        if samples.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::InvalidGrid("samples must be finite".into()));
        }
        Ok(WaveFunction { grid, domain, samples })
    }

    /// Product of 1-d Gaussian packets `(π w²)^{-1/4} e^{-(x-c)²/(2w²)}`,
    /// position domain. Unit L2 norm up to periodization error.
    pub fn gaussian_packet(grid: GridSpec, center: &[f64], width: f64) -> Result<Self> {
        if center.len() != grid.dim() {
            return Err(Error::DimensionMismatch { expected: grid.dim(), got: center.len() });
        }
        if !(width.is_finite() && width > 0.0) {
            return Err(Error::InvalidGrid(format!("packet width must be positive, got {width}")));
        }
        let axes: Vec<Vec<f64>> =
            (0..grid.dim()).map(|ax| grid.position_axis(ax)).collect::<Result<_>>()?;
        let amp = (std::f64::consts::PI * width * width).powf(-0.25);
        let mut samples = vec![Complex64::new(1.0, 0.0); grid.len()];
        for (flat, s) in samples.iter_mut().enumerate() {
            let mut v = 1.0;
            let mut rest = flat;
            for ax in (0..grid.dim()).rev() {
                let k = rest % grid.points();
                rest /= grid.points();
                let dx = axes[ax][k] - center[ax];
                v *= amp * (-dx * dx / (2.0 * width * width)).exp();
            }
            *s = Complex64::new(v, 0.0);
        }
        WaveFunction::new(grid, Domain::Position, samples)
    }

    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    /// Sample value at an on-grid point.
    pub fn value_at(&self, point: &[f64]) -> Result<Complex64> {
        let idx = self.grid.index_of(self.domain, point)?;
        Ok(self.samples[idx])
    }

    fn check_compatible(&self, other: &WaveFunction) -> Result<()> {
        if self.grid != other.grid {
            return Err(Error::GridMismatch);
        }
        if self.domain != other.domain {
            return Err(Error::DomainMismatch { expected: self.domain, got: other.domain });
        }
        Ok(())
    }

    /// L2 pairing `w^d Σ conj(u)·v`, conjugate-linear in `self`.
    ///
    /// `w` is the sample quadrature weight of the common domain, so the
    /// pairing approximates the continuum inner product in either domain.
    pub fn inner(&self, other: &WaveFunction) -> Result<Complex64> {
        self.check_compatible(other)?;
        let w = self.grid.weight(self.domain);
        let mut acc = Complex64::new(0.0, 0.0);
        for (a, b) in self.samples.iter().zip(&other.samples) {
            acc += a.conj() * b;
        }
        Ok(acc * w)
    }

    pub fn norm(&self) -> f64 {
        let w = self.grid.weight(self.domain);
        let s: f64 = self.samples.iter().map(|z| z.norm_sqr()).sum();
        (s * w).sqrt()
    }

    /// Rescale to unit norm; errors on the zero vector.
    pub fn normalized(&self) -> Result<WaveFunction> {
        let n = self.norm();
        if n == 0.0 || !n.is_finite() {
            return Err(Error::ZeroNorm);
        }
        let inv = 1.0 / n;
        let samples = self.samples.iter().map(|z| z * inv).collect();
        WaveFunction::new(self.grid, self.domain, samples)
    }

    /// L2 norm of `self - other`.
    pub fn distance(&self, other: &WaveFunction) -> Result<f64> {
        self.check_compatible(other)?;
        let w = self.grid.weight(self.domain);
        let s: f64 = self.samples.iter().zip(&other.samples).map(|(a, b)| (a - b).norm_sqr()).sum();
        Ok((s * w).sqrt())
    }

    /// Max sample-wise modulus of `self - other`.
    pub fn sup_distance(&self, other: &WaveFunction) -> Result<f64> {
        self.check_compatible(other)?;
        Ok(self
            .samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max))
    }

    /// Unitary transform to frequency samples approximating
    /// `(Fu)(α) = (2π)^{-d/2} ∫ u(x) e^{-i(α,x)} dx` at the frequency nodes.
    pub fn fourier(&self) -> Result<WaveFunction> {
        if self.domain != Domain::Position {
            return Err(Error::DomainMismatch { expected: Domain::Position, got: self.domain });
        }
        let mut samples = self.samples.clone();
        fft_all_axes(&self.grid, &mut samples, true);
        // x_k = -L + k·h turns the DFT kernel into (-1)^m e^{-2πi mk/N} per
        // axis; the parity factor re-centers the phase reference at x = 0.
        apply_digit_parity(&self.grid, &mut samples);
        let scale = (self.grid.spacing() / (2.0 * std::f64::consts::PI).sqrt())
            .powi(self.grid.dim() as i32);
        for z in &mut samples {
            *z *= scale;
        }
        WaveFunction::new(self.grid, Domain::Frequency, samples)
    }

    /// Inverse of [`WaveFunction::fourier`]; exact round trip up to rounding.
    pub fn inverse_fourier(&self) -> Result<WaveFunction> {
        if self.domain != Domain::Frequency {
            return Err(Error::DomainMismatch { expected: Domain::Frequency, got: self.domain });
        }
        let mut samples = self.samples.clone();
        apply_digit_parity(&self.grid, &mut samples);
        fft_all_axes(&self.grid, &mut samples, false);
        let scale = (self.grid.freq_spacing() / (2.0 * std::f64::consts::PI).sqrt())
            .powi(self.grid.dim() as i32);
        for z in &mut samples {
            *z *= scale;
        }
        WaveFunction::new(self.grid, Domain::Position, samples)
    }
}

/// Cached FFT plans, keyed by transform length and direction.
fn plan(n: usize, forward: bool) -> Arc<dyn Fft<f64>> {
    static PLANS: OnceLock<Mutex<HashMap<(usize, bool), Arc<dyn Fft<f64>>>>> = OnceLock::new();
    let cache = PLANS.get_or_init(|| Mutex::new(HashMap::new()));
    let mut cache = cache.lock().unwrap();
    cache
        .entry((n, forward))
        .or_insert_with(|| {
            let mut planner = FftPlanner::new();
            if forward {
                planner.plan_fft_forward(n)
            } else {
                planner.plan_fft_inverse(n)
            }
        })
        .clone()
}

/// Unnormalized DFT (`forward`: kernel `e^{-2πi jk/N}`; else `e^{+2πi jk/N}`)
/// applied along every axis of a row-major `N^d` array.
pub(crate) fn fft_all_axes(grid: &GridSpec, samples: &mut [Complex64], forward: bool) {
    let n = grid.points();
    let d = grid.dim();
    let fft = plan(n, forward);
    let mut line = vec![Complex64::new(0.0, 0.0); n];
    for axis in 0..d {
        let stride = n.pow((d - 1 - axis) as u32);
        if stride == 1 {
            for chunk in samples.chunks_exact_mut(n) {
                fft.process(chunk);
            }
        } else {
            let lines = samples.len() / n;
            for li in 0..lines {
                let base = line_base_offset(li, axis, d, n);
                for (t, v) in line.iter_mut().enumerate() {
                    *v = samples[base + t * stride];
                }
                fft.process(&mut line);
                for (t, v) in line.iter().enumerate() {
                    samples[base + t * stride] = *v;
                }
            }
        }
    }
}

/// Start offset of the `li`-th line along `axis` in a row-major `n^d` array.
fn line_base_offset(mut li: usize, axis: usize, d: usize, n: usize) -> usize {
    let mut offset = 0;
    let mut stride = 1;
    for ax in (0..d).rev() {
        if ax == axis {
            stride *= n;
            continue;
        }
        offset += (li % n) * stride;
        li /= n;
        stride *= n;
    }
    offset
}

/// Multiply sample `j` by `(-1)^{j_0 + … + j_{d-1}}` (sum of index digits).
fn apply_digit_parity(grid: &GridSpec, samples: &mut [Complex64]) {
    let n = grid.points();
    let d = grid.dim();
    for (flat, z) in samples.iter_mut().enumerate() {
        let mut rest = flat;
        let mut parity = 0usize;
        for _ in 0..d {
            parity += rest % n;
            rest /= n;
        }
        if parity % 2 == 1 {
            *z = -*z;
        }
    }
}
