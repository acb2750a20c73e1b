//! Pure-state density operators `ρ[u] = |u⟩⟨u|`, their position and
//! frequency kernels, bounded test operators, trace functionals and the
//! pure-state trace distance.
//!
//! Density operators are never materialized as `N^d × N^d` matrices. A pure
//! state stores its unit vector (and lazily its Fourier transform); kernels
//! are evaluated pointwise as `u(x)·conj(u(y))` and trace functionals as
//! `⟨u|A|u⟩`, so memory scales with the state, not its square.

use std::sync::OnceLock;

use nalgebra::DMatrix;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid::{Domain, GridSpec, WaveFunction};

/// Norm deviation accepted when a unit vector is required.
const NORMALIZATION_TOL: f64 = 1e-10;

/// A pair of on-grid points `(x, y)` (or `(α, β)` in the frequency domain)
/// at which a kernel is probed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelPoint {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
}

impl KernelPoint {
    pub fn new(x: Vec<f64>, y: Vec<f64>) -> Self {
        KernelPoint { x, y }
    }

    /// True when both coordinates coincide, which makes phase factors
    /// invisible to the kernel.
    pub fn is_diagonal(&self) -> bool {
        self.x.len() == self.y.len()
            && self.x.iter().zip(&self.y).all(|(a, b)| (a - b).abs() <= 1e-12)
    }
}

/// Pure state `ρ[u] = |u⟩⟨u|` for a normalized position-domain `u`.
#[derive(Clone, Debug)]
pub struct PureDensity {
    u: WaveFunction,
    freq: OnceLock<WaveFunction>,
}

impl PureDensity {
    /// Wrap a normalized position-domain vector; rejects norm deviations
    /// beyond 1e-10.
    pub fn new(u: WaveFunction) -> Result<Self> {
        if u.domain() != Domain::Position {
            return Err(Error::DomainMismatch { expected: Domain::Position, got: u.domain() });
        }
        let dev = (u.norm() - 1.0).abs();
        if dev > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { deviation: dev });
        }
        Ok(PureDensity { u, freq: OnceLock::new() })
    }

    pub fn state(&self) -> &WaveFunction {
        &self.u
    }

    /// Fourier transform of the state, computed once on first use.
    pub fn state_in_frequency(&self) -> &WaveFunction {
        self.freq.get_or_init(|| self.u.fourier().expect("position-domain state"))
    }

    /// Position kernel `ρ[u](x,y) = u(x)·conj(u(y))` at an on-grid point.
    pub fn kernel_at(&self, p: &KernelPoint) -> Result<Complex64> {
        let ux = self.u.value_at(&p.x)?;
        let uy = self.u.value_at(&p.y)?;
        Ok(ux * uy.conj())
    }

    /// Frequency kernel `(FρF^{-1})(α,β) = (Fu)(α)·conj((Fu)(β))`.
    pub fn fourier_kernel_at(&self, p: &KernelPoint) -> Result<Complex64> {
        let fu = self.state_in_frequency();
        let fa = fu.value_at(&p.x)?;
        let fb = fu.value_at(&p.y)?;
        Ok(fa * fb.conj())
    }
}

/// Bounded test operator defining a weak-topology functional `ρ ↦ tr(ρA)`.
#[derive(Clone, Debug)]
pub enum BoundedOperator {
    /// Pointwise multiplication by a bounded complex function over the
    /// position grid.
    Multiplication { grid: GridSpec, samples: Vec<Complex64>, bound: f64 },
    /// Rank-one operator `|v⟩⟨w|`.
    RankOne { v: WaveFunction, w: WaveFunction, bound: f64 },
    /// `Σ_ij M_ij |b_i⟩⟨b_j|` over an orthonormal family `b`.
    FiniteMatrix { basis: Vec<WaveFunction>, matrix: Vec<Complex64>, size: usize, bound: f64 },
}

impl BoundedOperator {
    pub fn multiplication(grid: GridSpec, samples: Vec<Complex64>) -> Result<Self> {
        if samples.len() != grid.len() {
            return Err(Error::DimensionMismatch { expected: grid.len(), got: samples.len() });
        }
        let bound = samples.iter().map(|z| z.norm()).fold(0.0, f64::max);
        if !bound.is_finite() {
            return Err(Error::InvalidOperator("multiplication samples must be bounded".into()));
        }
        Ok(BoundedOperator::Multiplication { grid, samples, bound })
    }

    /// Multiplication by the constant 1 (the identity).
    pub fn identity(grid: GridSpec) -> Self {
        BoundedOperator::Multiplication {
            grid,
            samples: vec![Complex64::new(1.0, 0.0); grid.len()],
            bound: 1.0,
        }
    }

    /// Indicator of the half-space `x_axis ≥ threshold`.
    pub fn halfspace_indicator(grid: GridSpec, axis: usize, threshold: f64) -> Result<Self> {
        let values = grid.position_axis(axis)?;
        let n = grid.points();
        let d = grid.dim();
        let samples = (0..grid.len())
            .map(|flat| {
                let k = (flat / n.pow((d - 1 - axis) as u32)) % n;
                if values[k] >= threshold {
                    Complex64::new(1.0, 0.0)
                } else {
                    Complex64::new(0.0, 0.0)
                }
            })
            .collect();
        BoundedOperator::multiplication(grid, samples)
    }

    pub fn rank_one(v: WaveFunction, w: WaveFunction) -> Result<Self> {
        if v.grid() != w.grid() || v.domain() != w.domain() {
            return Err(Error::GridMismatch);
        }
        let bound = v.norm() * w.norm();
        Ok(BoundedOperator::RankOne { v, w, bound })
    }

    /// Projector `|v⟩⟨v|` onto a normalized vector.
    pub fn projector(v: WaveFunction) -> Result<Self> {
        let dev = (v.norm() - 1.0).abs();
        if dev > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { deviation: dev });
        }
        BoundedOperator::rank_one(v.clone(), v)
    }

    /// `Σ_ij M_ij |b_i⟩⟨b_j|` with `matrix` in row-major order. The basis
    /// must be orthonormal within 1e-10; the bound is the spectral norm of M.
    pub fn finite_matrix(basis: Vec<WaveFunction>, matrix: Vec<Complex64>) -> Result<Self> {
        let size = basis.len();
        if size == 0 || matrix.len() != size * size {
            return Err(Error::InvalidOperator(format!(
                "matrix must be {size}x{size} for a basis of {size} vectors"
            )));
        }
        for i in 0..size {
            for j in i..size {
                let ip = basis[i].inner(&basis[j])?;
                let expected = if i == j { 1.0 } else { 0.0 };
                if (ip - Complex64::new(expected, 0.0)).norm() > 1e-10 {
                    return Err(Error::InvalidOperator(format!(
                        "basis is not orthonormal at pair ({i},{j})"
                    )));
                }
            }
        }
        let m = DMatrix::from_row_slice(size, size, &matrix);
        let bound = m.svd(false, false).singular_values.max();
        Ok(BoundedOperator::FiniteMatrix { basis, matrix, size, bound })
    }

    /// Operator-norm bound used by continuity estimates.
    pub fn norm_bound(&self) -> f64 {
        match self {
            BoundedOperator::Multiplication { bound, .. } => *bound,
            BoundedOperator::RankOne { bound, .. } => *bound,
            BoundedOperator::FiniteMatrix { bound, .. } => *bound,
        }
    }

    /// Apply the operator to a vector.
    pub fn apply(&self, u: &WaveFunction) -> Result<WaveFunction> {
        match self {
            BoundedOperator::Multiplication { grid, samples, .. } => {
                if u.grid() != grid || u.domain() != Domain::Position {
                    return Err(Error::GridMismatch);
                }
                let out = u.samples().iter().zip(samples).map(|(a, m)| a * m).collect();
                WaveFunction::new(*grid, Domain::Position, out)
            }
            BoundedOperator::RankOne { v, w, .. } => {
                let c = w.inner(u)?;
                let out = v.samples().iter().map(|z| z * c).collect();
                WaveFunction::new(*v.grid(), v.domain(), out)
            }
            BoundedOperator::FiniteMatrix { basis, matrix, size, .. } => {
                let mut coeffs = vec![Complex64::new(0.0, 0.0); *size];
                for (j, b) in basis.iter().enumerate() {
                    coeffs[j] = b.inner(u)?;
                }
                let mut out = vec![Complex64::new(0.0, 0.0); u.len()];
                for i in 0..*size {
                    let mut amp = Complex64::new(0.0, 0.0);
                    for j in 0..*size {
                        amp += matrix[i * size + j] * coeffs[j];
                    }
                    for (o, s) in out.iter_mut().zip(basis[i].samples()) {
                        *o += amp * s;
                    }
                }
                WaveFunction::new(*u.grid(), u.domain(), out)
            }
        }
    }
}

/// `tr(ρ[u] A) = ⟨u|A|u⟩`.
pub fn trace_functional(rho: &PureDensity, a: &BoundedOperator) -> Result<Complex64> {
    let au = a.apply(rho.state())?;
    rho.state().inner(&au)
}

/// Exact trace norm of `ρ[u] − ρ[v]` for normalized `u`, `v`:
/// `2·sqrt(1 − |⟨u,v⟩|²)` (the operator has rank ≤ 2).
pub fn trace_distance_pure(u: &WaveFunction, v: &WaveFunction) -> Result<f64> {
    for w in [u, v] {
        let dev = (w.norm() - 1.0).abs();
        if dev > NORMALIZATION_TOL {
            return Err(Error::NotNormalized { deviation: dev });
        }
    }
    let overlap = u.inner(v)?.norm_sqr();
    Ok(2.0 * (1.0 - overlap).max(0.0).sqrt())
}
