//! Cross-checks between engines, used by the command-line `validate` task and
//! the acceptance suite.

use serde::{Deserialize, Serialize};

use crate::correlation::gn_sum_on;
use crate::dynamics::{
    decompose_branches, evolve_postselect_exact, evolve_postselect_grid, CouplingConfig, GridSpec,
};
use crate::error::Result;
use crate::experiment::Experiment;
use crate::grid::Grid1D;
use crate::meter::{GaussianProductMeter, Meter, MeterOperator, SpdcPairMeter, SumGaussianMeter};
use crate::polarization::{
    make_ghz_initial, make_phase_final, make_rotated_final, CouplingObservable, PhaseVariant, PolarizationState,
};
use crate::{Complex64 as C64, Engine};

/// Coupling strength used across the engine matrix; large enough that the
/// weak approximation no longer holds for the amplified configurations.
pub const MATRIX_G: f64 = 0.05;
/// Output points per case in the engine matrix.
pub const MATRIX_POINTS: usize = 256;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateConfig {
    /// GHZ preparation, rotated postselection (ε = 0.1, k = 1).
    GhzRotated,
    /// GHZ preparation, relative-phase postselection (ε = 0.1).
    GhzPhase,
    /// Unequal superpositions whose branches act differently on each photon.
    Generic,
}

impl StateConfig {
    pub const ALL: [StateConfig; 3] = [StateConfig::GhzRotated, StateConfig::GhzPhase, StateConfig::Generic];

    pub fn name(&self) -> &'static str {
        match self {
            StateConfig::GhzRotated => "ghz_rotated",
            StateConfig::GhzPhase => "ghz_phase",
            StateConfig::Generic => "generic",
        }
    }

    pub fn states(&self, n: usize) -> Result<(PolarizationState, PolarizationState)> {
        match self {
            StateConfig::GhzRotated => Ok((make_ghz_initial(n)?, make_rotated_final(n, 0.1, 1.0)?)),
            StateConfig::GhzPhase => Ok((make_ghz_initial(n)?, make_phase_final(n, 0.1, PhaseVariant::Minus)?)),
            StateConfig::Generic => {
                let amps_i = [C64::new(0.8, 0.1), C64::new(0.3, -0.5), C64::new(-0.2, 0.4), C64::new(0.5, 0.0)];
                let amps_f = [C64::new(0.6, 0.0), C64::new(-0.5, 0.0), C64::new(0.0, 0.4), C64::new(-0.3, 0.0)];
                let dim = 1usize << n;
                let i = PolarizationState::normalized(n, (0..dim).map(|b| (b as u64, amps_i[b % 4])))?;
                let f = PolarizationState::normalized(n, (0..dim).map(|b| (b as u64, amps_f[b % 4])))?;
                Ok((i, f))
            }
        }
    }
}

/// Meter families for the matrix at photon number `n` (1 or 2).
pub fn matrix_meters(n: usize) -> Result<Vec<Meter>> {
    let mut meters: Vec<Meter> = Vec::new();
    if n == 1 {
        meters.push(GaussianProductMeter::uniform(1, 0.3, 0.8)?.into());
        meters.push(SumGaussianMeter::with_default_internal(1, -0.2, 1.2)?.into());
    } else {
        meters.push(GaussianProductMeter::new(vec![0.2, -0.1], vec![0.8, 1.1])?.into());
        meters.push(SumGaussianMeter::new(2, 0.3, 1.0, 0.6)?.into());
        meters.push(SpdcPairMeter::new(0.2, 1.0, 1.5)?.into());
    }
    Ok(meters)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixCase {
    pub n_photons: usize,
    pub family: String,
    pub operator: MeterOperator,
    pub state: StateConfig,
    pub uniform_branches: bool,
    /// Largest pointwise difference of the sum-marginal densities.
    pub max_abs_diff: f64,
    pub exact_norm: f64,
    pub grid_norm: f64,
}

/// Exact branch sum against direct grid evaluation for every family, coupling
/// and state configuration with N ≤ 2.
pub fn engine_matrix() -> Result<Vec<MatrixCase>> {
    let obs = CouplingObservable::default();
    let mut cases = Vec::new();
    for n in [1usize, 2] {
        for meter in matrix_meters(n)? {
            for op in [MeterOperator::X, MeterOperator::P] {
                for state in StateConfig::ALL {
                    let (i, f) = state.states(n)?;
                    let coupling = CouplingConfig::new(MATRIX_G, op)?;
                    let branches = decompose_branches(&i, &f, &obs)?;
                    let spec = GridSpec::default_for(&branches, &meter, &coupling)?.with_sum_points(MATRIX_POINTS)?;
                    let grid = gn_sum_on(&evolve_postselect_grid(&i, &f, &obs, &meter, &coupling, &spec)?, &spec.sum)?;
                    let exact = gn_sum_on(&evolve_postselect_exact(&branches, &meter, &coupling)?, &spec.sum)?;
                    let max_abs_diff = grid
                        .density
                        .iter()
                        .zip(&exact.density)
                        .map(|(a, b)| (a - b).abs())
                        .fold(0.0, f64::max);
                    cases.push(MatrixCase {
                        n_photons: n,
                        family: meter.family_name().to_string(),
                        operator: op,
                        state,
                        uniform_branches: branches.is_uniform(),
                        max_abs_diff,
                        exact_norm: exact.norm,
                        grid_norm: grid.norm,
                    });
                }
            }
        }
    }
    Ok(cases)
}

/// Largest pointwise difference between SPDC sum marginals at `d_low` and
/// `d_high` for a GHZ configuration, evaluated by the grid engine.
pub fn spdc_width_invariance(d_low: f64, d_high: f64) -> Result<f64> {
    let obs = CouplingObservable::default();
    let (i, f) = StateConfig::GhzRotated.states(2)?;
    let coupling = CouplingConfig::new(MATRIX_G, MeterOperator::X)?;
    let branches = decompose_branches(&i, &f, &obs)?;
    let mut densities = Vec::new();
    let mut grid: Option<Grid1D> = None;
    for d in [d_low, d_high] {
        let meter: Meter = SpdcPairMeter::new(0.0, 1.0, d)?.into();
        let mut spec = GridSpec::default_for(&branches, &meter, &coupling)?.with_sum_points(MATRIX_POINTS)?;
        let sum = *grid.get_or_insert(spec.sum);
        spec.sum = sum;
        let st = evolve_postselect_grid(&i, &f, &obs, &meter, &coupling, &spec)?;
        densities.push(st.sum_density(&sum)?);
    }
    Ok(densities[0]
        .iter()
        .zip(&densities[1])
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BreakdownPoint {
    /// `g·|A_w|/σ₀`.
    pub strength: f64,
    pub g: f64,
    pub weak_shift: f64,
    pub exact_shift: f64,
    pub relative_deviation: f64,
}

/// Exact against first-order displacement of the sum marginal as the
/// coupling grows (GHZ, rotated postselection, position coupling).
pub fn weak_breakdown(n: usize, epsilon: f64, sigma0: f64, strengths: &[f64]) -> Result<Vec<BreakdownPoint>> {
    let meter: Meter = SumGaussianMeter::with_default_internal(n, 0.0, sigma0)?.into();
    let make = |engine| {
        Experiment::new(
            make_ghz_initial(n)?,
            make_rotated_final(n, epsilon, 1.0)?,
            CouplingObservable::default(),
            meter.clone(),
            MeterOperator::X,
            engine,
        )
    };
    let (exact, weak) = (make(Engine::Exact)?, make(Engine::Weak)?);
    let a = weak.weak_values()?.total.norm();
    strengths
        .iter()
        .map(|&strength| {
            let g = strength * sigma0 / a;
            let grid = exact.sum_grid(g)?;
            let base = exact.coincidences(0.0, &grid)?.mean;
            let exact_shift = exact.coincidences(g, &grid)?.mean - base;
            let weak_shift = weak.coincidences(g, &grid)?.mean - weak.coincidences(0.0, &grid)?.mean;
            Ok(BreakdownPoint {
                strength,
                g,
                weak_shift,
                exact_shift,
                relative_deviation: ((exact_shift - weak_shift) / weak_shift).abs(),
            })
        })
        .collect()
}
