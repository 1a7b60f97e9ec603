//! Coupling, evolution and postselection of the joint polarization ⊗ meter state.
//!
//! The coupling unitary `⊗ₙ exp(−i g Âₙ M̂ₙ)` is diagonal in the polarization
//! basis, so `⟨f|Û|i⟩|ψ̃⟩ = Σ_b c_b Û_b|ψ̃⟩` with `c_b = ⟨f|b⟩⟨b|i⟩` and `Û_b`
//! acting on the meter only. For `M̂ = X̂`, `Û_b` translates the momentum
//! amplitude, `ψ̃_b(p) = ψ̃(p + g·a(b))`, so branch `b` moves the detected
//! momentum density by `−g·a(b)`. For `M̂ = P̂` it multiplies by
//! `exp(−i g a(b)·p)`.
//!
//! Three engines evaluate the postselected meter state:
//!
//! * exact branch sum: closed-form Gaussian interference, any N, any g;
//! * exact grid: direct evaluation of `Σ_b c_b ψ̃_b` on a grid, N ≤ 2;
//! * weak approximation: `⟨f|i⟩ exp(−i g A_w M̂)|ψ̃⟩`, first order in g.

use std::f64::consts::PI;
use std::fmt;

use num_complex::Complex64 as C64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WvaError};
use crate::grid::{trapezoid, Grid1D, DEFAULT_HALF_WIDTH_SIGMAS, DEFAULT_POINTS};
use crate::meter::{Meter, MeterOperator};
use crate::polarization::{weak_values, CouplingObservable, PolarizationState, WeakValueSet};

/// Branches with `|c_b|` below this are dropped.
pub const BRANCH_PRUNE: f64 = 1e-15;

/// Minimum points per axis accepted by the grid engine.
pub const MIN_GRID_POINTS: usize = 256;

/// Coupling strength and the meter operator it acts on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub g: f64,
    pub operator: MeterOperator,
}

impl CouplingConfig {
    pub fn new(g: f64, operator: MeterOperator) -> Result<Self> {
        if !g.is_finite() {
            return Err(WvaError::param("g", "must be finite"));
        }
        Ok(Self { g, operator })
    }

    pub fn with_g(&self, g: f64) -> Self {
        Self { g, ..*self }
    }

    /// `|g·A_w| < 0.1·σ₀`.
    pub fn is_weak_regime(&self, weak_value: C64, sigma0: f64) -> bool {
        (self.g * weak_value.norm()).abs() < 0.1 * sigma0
    }
}

/// Which engine produced a postselected meter state.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Engine {
    Exact,
    Grid,
    Weak,
}

impl fmt::Display for Engine {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Engine::Exact => "exact",
            Engine::Grid => "grid",
            Engine::Weak => "weak",
        })
    }
}

impl std::str::FromStr for Engine {
    type Err = WvaError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "exact" => Ok(Engine::Exact),
            "grid" => Ok(Engine::Grid),
            "weak" => Ok(Engine::Weak),
            other => Err(WvaError::param("engine", format!("unknown engine {other:?}"))),
        }
    }
}

/// One polarization basis state surviving pre- and postselection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branch {
    pub bits: u64,
    /// `⟨f|b⟩⟨b|i⟩`.
    pub coefficient: C64,
    /// Per-photon eigenvalues of the coupling observable in this branch.
    pub eigenvalues: Vec<f64>,
}

impl Branch {
    fn eigen_sum(&self) -> f64 {
        self.eigenvalues.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BranchDecomposition {
    n_photons: usize,
    branches: Vec<Branch>,
}

impl BranchDecomposition {
    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    pub fn branches(&self) -> &[Branch] {
        &self.branches
    }

    /// `Σ_b c_b = ⟨f|i⟩`.
    pub fn overlap(&self) -> C64 {
        self.branches.iter().map(|b| b.coefficient).sum()
    }

    /// True when every eigenvalue vector is proportional to `(1,…,1)`, as for
    /// GHZ-family states. Such branches act on the sum coordinate only.
    pub fn is_uniform(&self) -> bool {
        self.branches
            .iter()
            .all(|b| b.eigenvalues.iter().all(|&a| a == b.eigenvalues[0]))
    }

    /// Largest `|Σₙ aₙ|` over branches.
    fn max_eigen_sum(&self) -> f64 {
        self.branches
            .iter()
            .map(|b| b.eigen_sum().abs())
            .fold(0.0, f64::max)
    }

    fn max_eigenvalue(&self) -> f64 {
        self.branches
            .iter()
            .flat_map(|b| b.eigenvalues.iter())
            .map(|a| a.abs())
            .fold(0.0, f64::max)
    }
}

/// Expands `⟨f|i⟩` over the basis states where both states are nonzero.
pub fn decompose_branches(
    initial: &PolarizationState,
    fin: &PolarizationState,
    obs: &CouplingObservable,
) -> Result<BranchDecomposition> {
    if initial.n_photons() != fin.n_photons() {
        return Err(WvaError::PhotonMismatch {
            left: initial.n_photons(),
            right: fin.n_photons(),
        });
    }
    let n = initial.n_photons();
    let branches = fin
        .overlap_terms(initial)
        .map(|(bits, f_b, i_b)| Branch {
            bits,
            coefficient: f_b.conj() * i_b,
            eigenvalues: obs.eigenvalues(n, bits),
        })
        .filter(|b| b.coefficient.norm() >= BRANCH_PRUNE)
        .collect();
    Ok(BranchDecomposition {
        n_photons: n,
        branches,
    })
}

/// Sum of complex-weighted normal densities with complex means and a common
/// variance. Interference between Gaussian branches has exactly this form; the
/// imaginary parts cancel pairwise so the density is real.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianMixture {
    pub terms: Vec<MixtureTerm>,
    pub variance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixtureTerm {
    pub weight: C64,
    pub mean: C64,
}

impl GaussianMixture {
    pub fn density(&self, x: f64) -> f64 {
        let v = self.variance;
        let norm = 1.0 / (2.0 * PI * v).sqrt();
        let total: C64 = self
            .terms
            .iter()
            .map(|t| {
                let z = x - t.mean;
                t.weight * (-(z * z) / (2.0 * v)).exp()
            })
            .sum();
        (total.re * norm).max(0.0)
    }

    pub fn tabulate(&self, grid: &Grid1D) -> Vec<f64> {
        grid.points().map(|x| self.density(x)).collect()
    }

    /// Total probability.
    pub fn norm(&self) -> f64 {
        self.terms.iter().map(|t| t.weight).sum::<C64>().re
    }

    pub fn mean(&self) -> f64 {
        self.terms.iter().map(|t| t.weight * t.mean).sum::<C64>().re / self.norm()
    }

    pub fn central_variance(&self) -> f64 {
        let second = self
            .terms
            .iter()
            .map(|t| t.weight * (t.mean * t.mean + self.variance))
            .sum::<C64>()
            .re
            / self.norm();
        let m = self.mean();
        second - m * m
    }
}

/// Gaussian packet `exp(−(x−mean)²/4v − i·wavenumber·x + i·phase)` with the
/// normalization of a unit-norm state of variance `v`.
#[derive(Debug, Clone, Copy)]
struct Packet {
    mean: f64,
    wavenumber: f64,
    phase: f64,
}

/// `ψ_a(x)·conj(ψ_b(x)) = exp(log_weight) · N(x; mean, v)` with complex mean.
fn cross(a: Packet, b: Packet, v: f64) -> (C64, C64) {
    let kappa = a.wavenumber - b.wavenumber;
    let m = 0.5 * (a.mean + b.mean);
    let dm = a.mean - b.mean;
    let log_weight = C64::new(
        -dm * dm / (8.0 * v) - kappa * kappa * v / 2.0,
        -kappa * m + a.phase - b.phase,
    );
    (log_weight, C64::new(m, -kappa * v))
}

/// Exact postselected state as a list of branches acting on the meter.
#[derive(Debug, Clone, PartialEq)]
pub struct ExactBranchState {
    pub branches: BranchDecomposition,
    pub meter: Meter,
    pub coupling: CouplingConfig,
}

impl ExactBranchState {
    /// `Σ_b c_b ψ̃_b(p)`.
    pub fn amplitude(&self, p: &[f64]) -> Result<C64> {
        if p.len() != self.meter.n_photons() {
            return Err(WvaError::DimensionMismatch {
                expected: self.meter.n_photons(),
                got: p.len(),
            });
        }
        Ok(branch_sum_amplitude(&self.branches, &self.meter, &self.coupling, p))
    }

    /// Closed-form marginal of `|Σ_b c_b ψ̃_b|²` in `s = Σpₙ`.
    pub fn sum_mixture(&self) -> GaussianMixture {
        let g = self.coupling.g;
        let op = self.coupling.operator;
        let branches = self.branches.branches();
        let n = self.meter.n_photons() as f64;
        let mut terms = Vec::with_capacity(branches.len() * branches.len());
        match &self.meter {
            Meter::GaussianProduct(m) => {
                let packet = |b: &Branch, photon: usize| {
                    let a = b.eigenvalues[photon];
                    match op {
                        MeterOperator::X => Packet {
                            mean: m.means()[photon] - g * a,
                            wavenumber: 0.0,
                            phase: 0.0,
                        },
                        MeterOperator::P => Packet {
                            mean: m.means()[photon],
                            wavenumber: g * a,
                            phase: 0.0,
                        },
                    }
                };
                for b in branches {
                    for bp in branches {
                        let mut log_w = C64::default();
                        let mut mu = C64::default();
                        for (photon, sigma) in m.sigmas().iter().enumerate() {
                            let (w, u) = cross(packet(b, photon), packet(bp, photon), sigma * sigma);
                            log_w += w;
                            mu += u;
                        }
                        terms.push(MixtureTerm {
                            weight: b.coefficient * bp.coefficient.conj() * log_w.exp(),
                            mean: mu,
                        });
                    }
                }
            }
            Meter::Spdc(_) | Meter::SumGaussian(_) => {
                let (p0, v) = (self.meter.sum_mean(), self.meter.sum_variance());
                let packet = |b: &Branch| match op {
                    MeterOperator::X => Packet {
                        mean: p0 - g * b.eigen_sum(),
                        wavenumber: 0.0,
                        phase: 0.0,
                    },
                    MeterOperator::P => Packet {
                        mean: p0,
                        wavenumber: g * b.eigen_sum() / n,
                        phase: 0.0,
                    },
                };
                let mut delta = vec![0.0; self.meter.n_photons()];
                for b in branches {
                    for bp in branches {
                        for (d, (x, y)) in delta.iter_mut().zip(b.eigenvalues.iter().zip(&bp.eigenvalues)) {
                            *d = g * (x - y);
                        }
                        let overlap = self
                            .meter
                            .internal_overlap(op, &delta)
                            .expect("correlated meter");
                        let (log_w, mu) = cross(packet(b), packet(bp), v);
                        terms.push(MixtureTerm {
                            weight: b.coefficient * bp.coefficient.conj() * overlap * log_w.exp(),
                            mean: mu,
                        });
                    }
                }
            }
        }
        let variance = self.meter.sum_variance();
        GaussianMixture { terms, variance }
    }

    /// Closed-form arrival-position density for a single photon.
    pub fn position_mixture(&self) -> Result<GaussianMixture> {
        self.meter.require_single()?;
        let g = self.coupling.g;
        let p_bar = self.meter.sum_mean();
        let sx = self.meter.position_sigma()?;
        let v = sx * sx;
        let packet = |b: &Branch| {
            let a = b.eigenvalues[0];
            match self.coupling.operator {
                MeterOperator::X => Packet {
                    mean: 0.0,
                    wavenumber: -p_bar + g * a,
                    phase: 0.0,
                },
                MeterOperator::P => Packet {
                    mean: g * a,
                    wavenumber: -p_bar,
                    phase: -p_bar * g * a,
                },
            }
        };
        let branches = self.branches.branches();
        let mut terms = Vec::with_capacity(branches.len() * branches.len());
        for b in branches {
            for bp in branches {
                let (log_w, mu) = cross(packet(b), packet(bp), v);
                terms.push(MixtureTerm {
                    weight: b.coefficient * bp.coefficient.conj() * log_w.exp(),
                    mean: mu,
                });
            }
        }
        Ok(GaussianMixture { terms, variance: v })
    }
}

fn branch_amplitude(meter: &Meter, coupling: &CouplingConfig, b: &Branch, p: &[f64], buf: &mut [f64]) -> C64 {
    match coupling.operator {
        MeterOperator::X => {
            for ((q, x), a) in buf.iter_mut().zip(p).zip(&b.eigenvalues) {
                *q = x + coupling.g * a;
            }
            C64::new(meter.amplitude_unchecked(buf), 0.0)
        }
        MeterOperator::P => {
            let phase: f64 = p.iter().zip(&b.eigenvalues).map(|(x, a)| x * a).sum();
            C64::from_polar(meter.amplitude_unchecked(p), -coupling.g * phase)
        }
    }
}

fn branch_sum_amplitude(
    branches: &BranchDecomposition,
    meter: &Meter,
    coupling: &CouplingConfig,
    p: &[f64],
) -> C64 {
    let mut buf = vec![0.0; p.len()];
    branches
        .branches()
        .iter()
        .map(|b| b.coefficient * branch_amplitude(meter, coupling, b, p, &mut buf))
        .sum()
}

/// Tables produced by the grid engine.
#[derive(Debug, Clone, PartialEq)]
pub struct GridState {
    pub n_photons: usize,
    pub sum_grid: Grid1D,
    pub sum_density: Vec<f64>,
    /// Single-photon arrival-position table, N = 1 only.
    pub position: Option<(Grid1D, Vec<f64>)>,
    pub norm: f64,
}

/// First-order state `⟨f|i⟩ exp(−i g Σₙ A_wn M̂ₙ)|ψ̃⟩`, renormalized to `|⟨f|i⟩|²`.
#[derive(Debug, Clone, PartialEq)]
pub struct WeakState {
    pub weak: WeakValueSet,
    pub meter: Meter,
    pub coupling: CouplingConfig,
}

impl WeakState {
    /// `d⟨s⟩/dg` of the weak model.
    pub fn sum_slope(&self) -> f64 {
        weak_sum_slope(&self.weak, &self.meter, self.coupling.operator)
    }

    pub fn sum_mixture(&self) -> GaussianMixture {
        let mean = self.meter.sum_mean() + self.coupling.g * self.sum_slope();
        GaussianMixture {
            terms: vec![MixtureTerm {
                weight: C64::new(self.weak.postselection_probability(), 0.0),
                mean: C64::new(mean, 0.0),
            }],
            variance: self.meter.sum_variance(),
        }
    }

    pub fn position_mixture(&self) -> Result<GaussianMixture> {
        self.meter.require_single()?;
        let sx = self.meter.position_sigma()?;
        let a = self.weak.total;
        let g = self.coupling.g;
        let mean = match self.coupling.operator {
            // |exp(−igAx)ψ(x)|² ∝ exp(2g·ImA·x)|ψ(x)|²
            MeterOperator::X => 2.0 * g * a.im * sx * sx,
            MeterOperator::P => g * a.re,
        };
        Ok(GaussianMixture {
            terms: vec![MixtureTerm {
                weight: C64::new(self.weak.postselection_probability(), 0.0),
                mean: C64::new(mean, 0.0),
            }],
            variance: sx * sx,
        })
    }
}

/// `d⟨s⟩/dg` in the first-order model: `−Re A_w` for position coupling,
/// `2 Σₙ Im A_wn σₙ²` (product meter) or `2 Im Ā_w σ₀²` (correlated meters)
/// for momentum coupling.
pub fn weak_sum_slope(weak: &WeakValueSet, meter: &Meter, op: MeterOperator) -> f64 {
    match op {
        MeterOperator::X => -weak.total.re,
        MeterOperator::P => match meter {
            Meter::GaussianProduct(m) => 2.0
                * weak
                    .per_photon
                    .iter()
                    .zip(m.sigmas())
                    .map(|(a, s)| a.im * s * s)
                    .sum::<f64>(),
            _ => 2.0 * weak.mean().im * meter.sum_variance(),
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum PostselectedMeterState {
    Exact(ExactBranchState),
    Grid(GridState),
    Weak(WeakState),
}

impl PostselectedMeterState {
    pub fn engine(&self) -> Engine {
        match self {
            PostselectedMeterState::Exact(_) => Engine::Exact,
            PostselectedMeterState::Grid(_) => Engine::Grid,
            PostselectedMeterState::Weak(_) => Engine::Weak,
        }
    }

    pub fn n_photons(&self) -> usize {
        match self {
            PostselectedMeterState::Exact(s) => s.meter.n_photons(),
            PostselectedMeterState::Grid(s) => s.n_photons,
            PostselectedMeterState::Weak(s) => s.meter.n_photons(),
        }
    }

    /// Squared norm of the postselected meter state.
    pub fn postselection_probability(&self) -> f64 {
        match self {
            PostselectedMeterState::Exact(s) => s.sum_mixture().norm(),
            PostselectedMeterState::Grid(s) => s.norm,
            PostselectedMeterState::Weak(s) => s.weak.postselection_probability(),
        }
    }

    /// Grid on which [`sum_density`](Self::sum_density) is tabulated by default.
    pub fn default_sum_grid(&self) -> Grid1D {
        match self {
            PostselectedMeterState::Exact(s) => mixture_grid(&s.meter, &s.sum_mixture(), s.meter.sum_mean(), s.meter.sum_sigma()),
            PostselectedMeterState::Grid(s) => s.sum_grid,
            PostselectedMeterState::Weak(s) => {
                let shift = s.coupling.g * s.sum_slope();
                s.meter.default_sum_grid(shift)
            }
        }
    }

    pub fn default_position_grid(&self) -> Result<Grid1D> {
        match self {
            PostselectedMeterState::Exact(s) => {
                let sx = s.meter.position_sigma()?;
                Ok(mixture_grid(&s.meter, &s.position_mixture()?, 0.0, sx))
            }
            PostselectedMeterState::Grid(s) => s
                .position
                .as_ref()
                .map(|(g, _)| *g)
                .ok_or_else(|| WvaError::Unsupported("position table requires a single photon".into())),
            PostselectedMeterState::Weak(s) => {
                let sx = s.meter.position_sigma()?;
                let shift = s.position_mixture()?.mean();
                Ok(Grid1D::centered(0.0, DEFAULT_HALF_WIDTH_SIGMAS * sx + shift.abs(), DEFAULT_POINTS)?)
            }
        }
    }

    /// Density of `s = Σpₙ`, normalized to the postselection probability.
    pub fn sum_density(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        match self {
            PostselectedMeterState::Exact(s) => Ok(s.sum_mixture().tabulate(grid)),
            PostselectedMeterState::Grid(s) => {
                if !s.sum_grid.matches(grid) {
                    return Err(WvaError::GridMismatch);
                }
                Ok(s.sum_density.clone())
            }
            PostselectedMeterState::Weak(s) => Ok(s.sum_mixture().tabulate(grid)),
        }
    }

    /// Single-photon arrival-position density.
    pub fn position_density(&self, grid: &Grid1D) -> Result<Vec<f64>> {
        match self {
            PostselectedMeterState::Exact(s) => Ok(s.position_mixture()?.tabulate(grid)),
            PostselectedMeterState::Grid(s) => match &s.position {
                Some((g, d)) if g.matches(grid) => Ok(d.clone()),
                Some(_) => Err(WvaError::GridMismatch),
                None => Err(WvaError::Unsupported("position table requires a single photon".into())),
            },
            PostselectedMeterState::Weak(s) => Ok(s.position_mixture()?.tabulate(grid)),
        }
    }
}

fn mixture_grid(meter: &Meter, mix: &GaussianMixture, center: f64, sigma: f64) -> Grid1D {
    let _ = meter;
    let norm = mix.norm();
    let (shift, spread) = if norm > 0.0 {
        ((mix.mean() - center).abs(), mix.central_variance().max(0.0).sqrt())
    } else {
        (0.0, sigma)
    };
    let extra: f64 = mix
        .terms
        .iter()
        .map(|t| (t.mean.re - center).abs())
        .fold(shift, f64::max);
    let hw = DEFAULT_HALF_WIDTH_SIGMAS * sigma.max(spread) + extra;
    Grid1D::centered(center, hw, DEFAULT_POINTS).expect("positive width")
}

fn check_dims(meter: &Meter, n: usize) -> Result<()> {
    if meter.n_photons() != n {
        return Err(WvaError::PhotonMismatch {
            left: n,
            right: meter.n_photons(),
        });
    }
    Ok(())
}

/// Exact evolution and postselection for any coupling strength.
pub fn evolve_postselect_exact(
    branches: &BranchDecomposition,
    meter: &Meter,
    coupling: &CouplingConfig,
) -> Result<PostselectedMeterState> {
    check_dims(meter, branches.n_photons())?;
    Ok(PostselectedMeterState::Exact(ExactBranchState {
        branches: branches.clone(),
        meter: meter.clone(),
        coupling: *coupling,
    }))
}

/// First-order weak-value evolution.
pub fn evolve_postselect_weak(
    initial: &PolarizationState,
    fin: &PolarizationState,
    obs: &CouplingObservable,
    meter: &Meter,
    coupling: &CouplingConfig,
) -> Result<PostselectedMeterState> {
    check_dims(meter, initial.n_photons())?;
    let weak = weak_values(initial, fin, obs)?;
    Ok(PostselectedMeterState::Weak(WeakState {
        weak,
        meter: meter.clone(),
        coupling: *coupling,
    }))
}

/// Grids used by the grid engine.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    /// Output grid of the sum coordinate (the momentum for N = 1).
    pub sum: Grid1D,
    /// N = 2: grid of the difference `p₁ − p₂`. N = 1: momentum quadrature
    /// grid for the Fourier transform to position space.
    pub inner: Grid1D,
    /// Output grid of the arrival position, N = 1.
    pub position: Option<Grid1D>,
}

impl GridSpec {
    /// Defaults sized for `meter` under `coupling`: the sum grid matches the
    /// exact engine's default grid.
    pub fn default_for(branches: &BranchDecomposition, meter: &Meter, coupling: &CouplingConfig) -> Result<Self> {
        check_dims(meter, branches.n_photons())?;
        let exact = evolve_postselect_exact(branches, meter, coupling)?;
        let sum = exact.default_sum_grid();
        let g = coupling.g.abs();
        let shift = match coupling.operator {
            MeterOperator::X => 2.0 * g * branches.max_eigenvalue(),
            MeterOperator::P => 0.0,
        };
        let (inner, position) = match meter {
            _ if meter.n_photons() == 1 => {
                let sigma = meter.sum_sigma();
                let hw = 12.0 * sigma + g * branches.max_eigen_sum() + (sum.end - sum.start) / 2.0 - DEFAULT_HALF_WIDTH_SIGMAS * sigma;
                let inner = Grid1D::centered(meter.sum_mean(), hw.max(12.0 * sigma), DEFAULT_POINTS)?;
                (inner, Some(exact.default_position_grid()?))
            }
            Meter::Spdc(m) => {
                // Trapezoid is exact for band-limited sinc² once h ≤ π/2D.
                let h = std::f64::consts::FRAC_PI_2 / m.d();
                let hw = 16_000.0 * h + shift;
                let points = 2 * (hw / h).ceil() as usize + 1;
                (Grid1D::centered(0.0, hw, points)?, None)
            }
            Meter::SumGaussian(m) => {
                let sd = std::f64::consts::SQRT_2 * m.internal_sigma();
                (Grid1D::centered(0.0, 12.0 * sd + shift, 1201)?, None)
            }
            Meter::GaussianProduct(m) => {
                let sd = m.sigmas().iter().map(|s| s * s).sum::<f64>().sqrt();
                (Grid1D::centered(0.0, 12.0 * sd + shift, 1201)?, None)
            }
        };
        Ok(Self { sum, inner, position })
    }

    /// Same grids with `points` on the output axis.
    pub fn with_sum_points(mut self, points: usize) -> Result<Self> {
        self.sum = Grid1D::new(self.sum.start, self.sum.end, points)?;
        Ok(self)
    }
}

/// Exact evolution by direct evaluation of `Σ_b c_b ψ̃_b` on a grid (N ≤ 2).
/// The meter amplitude table is normalized on the grid itself.
pub fn evolve_postselect_grid(
    initial: &PolarizationState,
    fin: &PolarizationState,
    obs: &CouplingObservable,
    meter: &Meter,
    coupling: &CouplingConfig,
    spec: &GridSpec,
) -> Result<PostselectedMeterState> {
    let n = initial.n_photons();
    check_dims(meter, n)?;
    if n > 2 {
        return Err(WvaError::Unsupported(format!(
            "grid engine handles at most 2 photons (got {n})"
        )));
    }
    for (axis, grid) in [("sum", spec.sum), ("inner", spec.inner)] {
        if grid.len < MIN_GRID_POINTS {
            return Err(WvaError::param(
                "grid",
                format!("{axis} axis has {} points, need at least {MIN_GRID_POINTS}", grid.len),
            ));
        }
    }
    let branches = decompose_branches(initial, fin, obs)?;
    let amax = branches.max_eigenvalue();
    if coupling.operator == MeterOperator::P && coupling.g != 0.0 && amax > 0.0 {
        let limit = PI / (4.0 * coupling.g.abs() * amax);
        for grid in [spec.sum, spec.inner] {
            if grid.step() >= limit {
                return Err(WvaError::GridTooCoarse {
                    spacing: grid.step(),
                    limit,
                });
            }
        }
    }

    let state = if n == 1 {
        grid_single(&branches, meter, coupling, spec)?
    } else {
        grid_pair(&branches, meter, coupling, spec)
    };
    Ok(PostselectedMeterState::Grid(state))
}

fn grid_single(
    branches: &BranchDecomposition,
    meter: &Meter,
    coupling: &CouplingConfig,
    spec: &GridSpec,
) -> Result<GridState> {
    let inner = spec.inner;
    let unevolved: Vec<f64> = inner.points().map(|p| meter.amplitude_unchecked(&[p]).powi(2)).collect();
    let z = trapezoid(inner.step(), &unevolved);

    let amp = |p: f64| branch_sum_amplitude(branches, meter, coupling, &[p]);
    let sum_density: Vec<f64> = spec.sum.points().map(|p| amp(p).norm_sqr() / z).collect();

    let position = match spec.position {
        Some(xg) => {
            // ψ(x) = (2π)^{-1/2} ∫ e^{ipx} ψ̃(p) dp on the inner grid.
            let h = inner.step();
            let table: Vec<(f64, C64)> = inner
                .points()
                .enumerate()
                .map(|(j, p)| {
                    let w = if j == 0 || j + 1 == inner.len { 0.5 * h } else { h };
                    (p, amp(p) * w)
                })
                .collect();
            let xs = xg.to_vec();
            let density = xs
                .par_iter()
                .map(|&x| {
                    let psi: C64 = table.iter().map(|&(p, a)| a * C64::from_polar(1.0, p * x)).sum();
                    psi.norm_sqr() / (2.0 * PI) / z
                })
                .collect();
            Some((xg, density))
        }
        None => None,
    };
    let norm = trapezoid(spec.sum.step(), &sum_density);
    Ok(GridState {
        n_photons: 1,
        sum_grid: spec.sum,
        sum_density,
        position,
        norm,
    })
}

fn grid_pair(
    branches: &BranchDecomposition,
    meter: &Meter,
    coupling: &CouplingConfig,
    spec: &GridSpec,
) -> GridState {
    let inner = spec.inner;
    let hd = inner.step();
    let ds = inner.to_vec();
    let algebraic_tail = matches!(meter, Meter::Spdc(_));
    let integrate = |v: &[f64]| {
        if algebraic_tail {
            tail_extrapolated(hd, v)
        } else {
            trapezoid(hd, v)
        }
    };
    let rows: Vec<(f64, f64)> = spec
        .sum
        .to_vec()
        .par_iter()
        .map(|&s| {
            let mut evolved = Vec::with_capacity(ds.len());
            let mut bare = Vec::with_capacity(ds.len());
            for &d in &ds {
                let p = [(s + d) / 2.0, (s - d) / 2.0];
                // dp₁dp₂ = ½ ds dd
                evolved.push(0.5 * branch_sum_amplitude(branches, meter, coupling, &p).norm_sqr());
                bare.push(0.5 * meter.amplitude_unchecked(&p).powi(2));
            }
            (integrate(&evolved), integrate(&bare))
        })
        .collect();
    let bare: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let z = trapezoid(spec.sum.step(), &bare);
    let sum_density: Vec<f64> = rows.iter().map(|r| r.0 / z).collect();
    let norm = trapezoid(spec.sum.step(), &sum_density);
    GridState {
        n_photons: 2,
        sum_grid: spec.sum,
        sum_density,
        position: None,
        norm,
    }
}

/// Trapezoid over a symmetric window whose integrand decays as `1/d²`: the
/// truncation error is `C/L + O(L⁻²)`, so the full and half windows combine
/// to cancel the leading term.
fn tail_extrapolated(h: f64, values: &[f64]) -> f64 {
    let m = (values.len() - 1) / 2;
    let q = m / 2;
    let full = trapezoid(h, values);
    let half = trapezoid(h, &values[m - q..=m + q]);
    let (l, lh) = ((values.len() - 1) as f64 * h / 2.0, q as f64 * h);
    (l * full - lh * half) / (l - lh)
}
