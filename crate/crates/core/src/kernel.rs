//! Half-integer Matérn covariances `k(x, y) = Φ(x - y)` and their spectral densities.
//!
//! The Fourier transform follows the convention
//! `Φ̃(u) = (2π)^{-d/2} ∫ Φ(x) e^{i(x,u)} dx`, under which
//!
//! ```text
//! Φ̃(u) = σ0² 2^{d/2} Γ(ν + d/2) a^ν / Γ(ν) · (a + |u|²)^{-(ν + d/2)},   a = 2ν/ρ².
//! ```

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::geometry::{distance, PointSet};
use crate::linalg::SymMatrix;

/// Nugget used when the caller does not pick one, relative to the variance.
pub const DEFAULT_NUGGET: f64 = 1e-10;

/// Smoothness ν of a Matérn kernel. Only the half-integers with closed forms are supported.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Smoothness {
    Half,
    ThreeHalves,
    FiveHalves,
}

impl Smoothness {
    pub fn from_nu(nu: f64) -> Result<Self> {
        match nu {
            0.5 => Ok(Self::Half),
            1.5 => Ok(Self::ThreeHalves),
            2.5 => Ok(Self::FiveHalves),
            _ => Err(Error::InvalidParameter {
                name: "nu",
                reason: format!("must be one of 0.5, 1.5, 2.5 (got {nu})"),
            }),
        }
    }

    pub fn nu(self) -> f64 {
        match self {
            Self::Half => 0.5,
            Self::ThreeHalves => 1.5,
            Self::FiveHalves => 2.5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MaternKernel {
    variance: f64,
    lengthscale: f64,
    smoothness: Smoothness,
    dim: usize,
}

impl MaternKernel {
    pub fn new(variance: f64, lengthscale: f64, nu: f64, dim: usize) -> Result<Self> {
        if !(variance.is_finite() && variance > 0.0) {
            return Err(Error::InvalidParameter {
                name: "variance",
                reason: format!("must be positive and finite (got {variance})"),
            });
        }
        if !(lengthscale.is_finite() && lengthscale > 0.0) {
            return Err(Error::InvalidParameter {
                name: "rho",
                reason: format!("must be positive and finite (got {lengthscale})"),
            });
        }
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                reason: "must be at least 1".into(),
            });
        }
        Ok(Self {
            variance,
            lengthscale,
            smoothness: Smoothness::from_nu(nu)?,
            dim,
        })
    }

    pub fn variance(&self) -> f64 {
        self.variance
    }

    pub fn lengthscale(&self) -> f64 {
        self.lengthscale
    }

    pub fn smoothness(&self) -> Smoothness {
        self.smoothness
    }

    pub fn nu(&self) -> f64 {
        self.smoothness.nu()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Sobolev exponent `s = ν + d/2` of the reproducing kernel Hilbert space.
    pub fn sobolev_exponent(&self) -> f64 {
        self.nu() + self.dim as f64 / 2.0
    }

    /// Φ as a function of the Euclidean distance `r`.
    pub fn eval_distance(&self, r: f64) -> f64 {
        let t = r / self.lengthscale;
        let shape = match self.smoothness {
            Smoothness::Half => (-t).exp(),
            Smoothness::ThreeHalves => {
                let a = 3f64.sqrt() * t;
                (1.0 + a) * (-a).exp()
            }
            Smoothness::FiveHalves => {
                let a = 5f64.sqrt() * t;
                (1.0 + a + a * a / 3.0) * (-a).exp()
            }
        };
        self.variance * shape
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        self.eval_distance(distance(x, y))
    }

    /// `G[i][j] = k(p_i, p_j) + nugget · σ0² · δ_ij`.
    pub fn gram(&self, points: &PointSet, nugget: f64) -> SymMatrix {
        let jitter = nugget * self.variance;
        SymMatrix::from_lower_fn(points.len(), |i, j| {
            let k = self.eval(points.point(i), points.point(j));
            if i == j {
                k + jitter
            } else {
                k
            }
        })
    }

    /// Covariances between `x` and every point of `points`.
    pub fn cross(&self, x: &[f64], points: &PointSet) -> Vec<f64> {
        points.iter().map(|p| self.eval(x, p)).collect()
    }

    /// Φ̃ as a function of `|u|`.
    pub fn spectral_density_radial(&self, radius: f64) -> f64 {
        let nu = self.nu();
        let d = self.dim as f64;
        let a = 2.0 * nu / (self.lengthscale * self.lengthscale);
        let s = nu + d / 2.0;
        let scale = self.variance * 2f64.powf(d / 2.0) * gamma_half_integer(s) * a.powf(nu)
            / gamma_half_integer(nu);
        scale * (a + radius * radius).powf(-s)
    }

    pub fn spectral_density(&self, u: &[f64]) -> f64 {
        let r = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        self.spectral_density_radial(r)
    }

    /// Evaluates `g(u) = Φ̃(u) (1 + |u|²)^s` at the given radii and reports its range.
    pub fn spectral_sandwich_check(&self, radii: &[f64]) -> Result<SandwichBounds> {
        if radii.is_empty() {
            return Err(Error::InvalidParameter {
                name: "sample_radii",
                reason: "need at least one radius".into(),
            });
        }
        let s = self.sobolev_exponent();
        let mut c1 = f64::INFINITY;
        let mut c2 = 0.0_f64;
        for &r in radii {
            let g = self.spectral_density_radial(r) * (1.0 + r * r).powf(s);
            if !(g.is_finite() && g > 0.0) {
                return Err(Error::BrokenSpectralDensity { radius: r, value: g });
            }
            c1 = c1.min(g);
            c2 = c2.max(g);
        }
        Ok(SandwichBounds {
            c1_hat: c1,
            c2_hat: c2,
            s,
        })
    }
}

/// Empirical constants of `c1 (1+|u|²)^{-s} ≤ Φ̃(u) ≤ c2 (1+|u|²)^{-s}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SandwichBounds {
    pub c1_hat: f64,
    pub c2_hat: f64,
    pub s: f64,
}

impl SandwichBounds {
    pub fn ratio(&self) -> f64 {
        self.c2_hat / self.c1_hat
    }
}

/// Γ(x) for `x` a positive multiple of 1/2.
fn gamma_half_integer(x: f64) -> f64 {
    let twice = (2.0 * x).round() as u64;
    debug_assert!(twice >= 1 && (2.0 * x - twice as f64).abs() < 1e-12);
    let (mut acc, mut t) = if twice.is_multiple_of(2) {
        (1.0, 1.0)
    } else {
        (PI.sqrt(), 0.5)
    };
    while t + 0.5 < x {
        acc *= t;
        t += 1.0;
    }
    acc
}

/// Numerical Fourier transform of a one-dimensional kernel,
/// `(2π)^{-1/2} · 2 ∫_0^∞ Φ(r) cos(u r) dr`, by composite 5-point Gauss–Legendre.
///
/// The integral is truncated at 80 lengthscales, where Φ is below 1e-30 σ0².
pub fn spectral_density_quadrature_1d(kernel: &MaternKernel, u: f64) -> f64 {
    const NODES: [f64; 5] = [
        -0.906_179_845_938_664,
        -0.538_469_310_105_683,
        0.0,
        0.538_469_310_105_683,
        0.906_179_845_938_664,
    ];
    const WEIGHTS: [f64; 5] = [
        0.236_926_885_056_189_1,
        0.478_628_670_499_366_5,
        0.568_888_888_888_888_9,
        0.478_628_670_499_366_5,
        0.236_926_885_056_189_1,
    ];
    let rho = kernel.lengthscale();
    let upper = 80.0 * rho;
    let mut width = 0.05 * rho;
    if u > 0.0 {
        width = width.min(0.25 / u);
    }
    let panels = (upper / width).ceil() as usize;
    let h = upper / panels as f64;
    let mut total = 0.0;
    for p in 0..panels {
        let mid = (p as f64 + 0.5) * h;
        let half = 0.5 * h;
        let mut acc = 0.0;
        for (t, w) in NODES.iter().zip(WEIGHTS) {
            let r = mid + half * t;
            acc += w * kernel.eval_distance(r) * (u * r).cos();
        }
        total += acc * half;
    }
    2.0 * total / (2.0 * PI).sqrt()
}
