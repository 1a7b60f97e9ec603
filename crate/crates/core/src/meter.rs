//! Joint momentum-space meter wavefunctions of the N photons.
//!
//! Three closed families are supported. All amplitudes are L²-normalized over
//! `dp₁…dp_N`. Momenta are dimensionless; typically everything is expressed in
//! units of the pump spread σ₀.
//!
//! The two correlated families factor as `F(s) · χ(p_⊥)` where `s = Σpₙ` and
//! `p_⊥` is the component of `p` orthogonal to `(1,…,1)`. `|F|²` is a normal
//! density of `s` with mean `p₀` and variance `σ₀²`, so the sum marginal does
//! not depend on the internal factor at all.

use std::f64::consts::PI;

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WvaError};
use crate::grid::{Grid1D, DEFAULT_HALF_WIDTH_SIGMAS, DEFAULT_POINTS};

/// Which meter operator the polarization couples to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum MeterOperator {
    /// Position: translates momentum amplitudes.
    X,
    /// Momentum: multiplies momentum amplitudes by a phase.
    P,
}

/// Independent Gaussian wavepackets, one per photon.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProductMeter {
    means: Vec<f64>,
    sigmas: Vec<f64>,
}

impl GaussianProductMeter {
    pub fn new(means: Vec<f64>, sigmas: Vec<f64>) -> Result<Self> {
        if means.is_empty() {
            return Err(WvaError::ZeroPhotons(0));
        }
        if means.len() != sigmas.len() {
            return Err(WvaError::DimensionMismatch {
                expected: means.len(),
                got: sigmas.len(),
            });
        }
        if sigmas.iter().any(|s| !(s.is_finite() && *s > 0.0)) {
            return Err(WvaError::param("sigma", "every sigma must be positive and finite"));
        }
        if means.iter().any(|m| !m.is_finite()) {
            return Err(WvaError::param("mean", "must be finite"));
        }
        Ok(Self { means, sigmas })
    }

    /// `n` identical photons.
    pub fn uniform(n: usize, mean: f64, sigma: f64) -> Result<Self> {
        Self::new(vec![mean; n], vec![sigma; n])
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sigmas(&self) -> &[f64] {
        &self.sigmas
    }
}

/// Photon pair from type-I nondegenerate or type-II down-conversion:
/// `exp[−(p₁+p₂−p₀)²/4σ₀²] · sinc[D(p₁−p₂)]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpdcPairMeter {
    p0: f64,
    sigma0: f64,
    d: f64,
}

impl SpdcPairMeter {
    pub fn new(p0: f64, sigma0: f64, d: f64) -> Result<Self> {
        if !p0.is_finite() {
            return Err(WvaError::param("p0", "must be finite"));
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(WvaError::param("sigma0", "must be positive"));
        }
        // D = 0 leaves the difference coordinate unconfined.
        if !(d.is_finite() && d > 0.0) {
            return Err(WvaError::param("D", "must be positive for a normalizable pair amplitude"));
        }
        Ok(Self { p0, sigma0, d })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn d(&self) -> f64 {
        self.d
    }
}

/// N-photon generalization that fixes only the sum coordinate: a Gaussian in
/// `Σpₙ` times an isotropic Gaussian in the orthonormal difference
/// (Jacobi) coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SumGaussianMeter {
    n_photons: usize,
    p0: f64,
    sigma0: f64,
    internal_sigma: f64,
}

impl SumGaussianMeter {
    pub fn new(n_photons: usize, p0: f64, sigma0: f64, internal_sigma: f64) -> Result<Self> {
        if n_photons == 0 {
            return Err(WvaError::ZeroPhotons(0));
        }
        if !p0.is_finite() {
            return Err(WvaError::param("p0", "must be finite"));
        }
        if !(sigma0.is_finite() && sigma0 > 0.0) {
            return Err(WvaError::param("sigma0", "must be positive"));
        }
        if !(internal_sigma.is_finite() && internal_sigma > 0.0) {
            return Err(WvaError::param("internal_sigma", "must be positive"));
        }
        Ok(Self {
            n_photons,
            p0,
            sigma0,
            internal_sigma,
        })
    }

    /// Internal spread equal to `sigma0`.
    pub fn with_default_internal(n_photons: usize, p0: f64, sigma0: f64) -> Result<Self> {
        Self::new(n_photons, p0, sigma0, sigma0)
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn sigma0(&self) -> f64 {
        self.sigma0
    }

    pub fn internal_sigma(&self) -> f64 {
        self.internal_sigma
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum Meter {
    GaussianProduct(GaussianProductMeter),
    Spdc(SpdcPairMeter),
    SumGaussian(SumGaussianMeter),
}

impl From<GaussianProductMeter> for Meter {
    fn from(m: GaussianProductMeter) -> Self {
        Meter::GaussianProduct(m)
    }
}

impl From<SpdcPairMeter> for Meter {
    fn from(m: SpdcPairMeter) -> Self {
        Meter::Spdc(m)
    }
}

impl From<SumGaussianMeter> for Meter {
    fn from(m: SumGaussianMeter) -> Self {
        Meter::SumGaussian(m)
    }
}

/// `sin(x)/x`, with the removable singularity handled by a short series.
pub fn sinc(x: f64) -> f64 {
    if x.abs() < 1e-4 {
        let x2 = x * x;
        1.0 - x2 / 6.0 + x2 * x2 / 120.0
    } else {
        x.sin() / x
    }
}

/// Amplitude of a Gaussian whose squared modulus is a normal density with
/// the given mean and variance.
pub(crate) fn gaussian_amplitude(x: f64, mean: f64, variance: f64) -> f64 {
    (2.0 * PI * variance).powf(-0.25) * (-(x - mean) * (x - mean) / (4.0 * variance)).exp()
}

pub(crate) fn normal_density(x: f64, mean: f64, variance: f64) -> f64 {
    (-(x - mean) * (x - mean) / (2.0 * variance)).exp() / (2.0 * PI * variance).sqrt()
}

impl Meter {
    pub fn n_photons(&self) -> usize {
        match self {
            Meter::GaussianProduct(m) => m.means.len(),
            Meter::Spdc(_) => 2,
            Meter::SumGaussian(m) => m.n_photons,
        }
    }

    pub fn family_name(&self) -> &'static str {
        match self {
            Meter::GaussianProduct(_) => "gaussian_product",
            Meter::Spdc(_) => "spdc",
            Meter::SumGaussian(_) => "sum_gaussian",
        }
    }

    /// Joint amplitude `ψ̃(p₁,…,p_N)`.
    pub fn amplitude(&self, p: &[f64]) -> Result<C64> {
        if p.len() != self.n_photons() {
            return Err(WvaError::DimensionMismatch {
                expected: self.n_photons(),
                got: p.len(),
            });
        }
        Ok(C64::new(self.amplitude_unchecked(p), 0.0))
    }

    // All three families are real in momentum space.
    pub(crate) fn amplitude_unchecked(&self, p: &[f64]) -> f64 {
        match self {
            Meter::GaussianProduct(m) => p
                .iter()
                .zip(m.means.iter().zip(&m.sigmas))
                .map(|(&x, (&mu, &s))| gaussian_amplitude(x, mu, s * s))
                .product(),
            Meter::Spdc(m) => {
                let s = p[0] + p[1];
                let d = p[0] - p[1];
                // dp₁dp₂ = ½ ds dd, hence the √2.
                std::f64::consts::SQRT_2
                    * gaussian_amplitude(s, m.p0, m.sigma0 * m.sigma0)
                    * (m.d / PI).sqrt()
                    * sinc(m.d * d)
            }
            Meter::SumGaussian(m) => {
                let n = m.n_photons as f64;
                let s: f64 = p.iter().sum();
                let perp2 = (p.iter().map(|x| x * x).sum::<f64>() - s * s / n).max(0.0);
                let tau2 = m.internal_sigma * m.internal_sigma;
                let internal = (2.0 * PI * tau2).powf(-0.25 * (n - 1.0)) * (-perp2 / (4.0 * tau2)).exp();
                // ds = √N du with u the unit-normalized sum coordinate.
                n.powf(0.25) * gaussian_amplitude(s, m.p0, m.sigma0 * m.sigma0) * internal
            }
        }
    }

    /// Mean of `s = Σpₙ` before any coupling.
    pub fn sum_mean(&self) -> f64 {
        match self {
            Meter::GaussianProduct(m) => m.means.iter().sum(),
            Meter::Spdc(m) => m.p0,
            Meter::SumGaussian(m) => m.p0,
        }
    }

    /// Variance of `s = Σpₙ` before any coupling.
    pub fn sum_variance(&self) -> f64 {
        match self {
            Meter::GaussianProduct(m) => m.sigmas.iter().map(|s| s * s).sum(),
            Meter::Spdc(m) => m.sigma0 * m.sigma0,
            Meter::SumGaussian(m) => m.sigma0 * m.sigma0,
        }
    }

    /// Spread of the sum coordinate. This is the σ₀ that appears in the
    /// Fisher information closed forms.
    pub fn sum_sigma(&self) -> f64 {
        self.sum_variance().sqrt()
    }

    /// Default grid for the sum coordinate: mean ± 8 standard deviations,
    /// widened by `extra_half_width` to make room for coupling-induced shifts.
    pub fn default_sum_grid(&self, extra_half_width: f64) -> Grid1D {
        let hw = DEFAULT_HALF_WIDTH_SIGMAS * self.sum_sigma() + extra_half_width.abs();
        Grid1D::centered(self.sum_mean(), hw, DEFAULT_POINTS).expect("positive width")
    }

    /// Normalized density of `s = Σpₙ` tabulated on `grid`.
    pub fn sum_marginal_density(&self, grid: &Grid1D) -> Vec<f64> {
        let (mean, var) = (self.sum_mean(), self.sum_variance());
        grid.points().map(|s| normal_density(s, mean, var)).collect()
    }

    /// Position-space spread `σ_x = 1/(2σ)` of a single-photon meter.
    pub fn position_sigma(&self) -> Result<f64> {
        self.require_single()?;
        Ok(0.5 / self.sum_sigma())
    }

    pub(crate) fn require_single(&self) -> Result<()> {
        if self.n_photons() != 1 {
            return Err(WvaError::Unsupported(format!(
                "single-photon quantity requested for a {}-photon meter",
                self.n_photons()
            )));
        }
        Ok(())
    }

    /// Overlap `∫ χ_b χ̄_b'` of the internal factor of a correlated meter for
    /// two branches whose coupling vectors `g·a` differ by `delta`.
    ///
    /// Returns `None` for the product family, which has no sum/difference
    /// factorization when the widths differ.
    pub(crate) fn internal_overlap(&self, op: MeterOperator, delta: &[f64]) -> Option<f64> {
        match self {
            Meter::GaussianProduct(_) => None,
            Meter::Spdc(m) => {
                let dd = delta[0] - delta[1];
                Some(match op {
                    // Shifted sincs: ∫ sinc(D(x+u)) sinc(D(x+v)) dx = (π/D) sinc(D(u−v)).
                    MeterOperator::X => sinc(m.d * dd),
                    // Fourier transform of sinc² is a triangle of half-width 2D.
                    MeterOperator::P => (1.0 - (0.5 * dd).abs() / (2.0 * m.d)).max(0.0),
                })
            }
            Meter::SumGaussian(m) => {
                let n = delta.len() as f64;
                let mean = delta.iter().sum::<f64>() / n;
                let perp2: f64 = delta.iter().map(|x| (x - mean) * (x - mean)).sum();
                let tau2 = m.internal_sigma * m.internal_sigma;
                Some(match op {
                    MeterOperator::X => (-perp2 / (8.0 * tau2)).exp(),
                    MeterOperator::P => (-perp2 * tau2 / 2.0).exp(),
                })
            }
        }
    }
}
