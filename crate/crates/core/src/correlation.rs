//! Detector-side observables: single-photon densities and N-fold coincidence
//! densities of the summed momentum.

use serde::{Deserialize, Serialize};

use crate::dynamics::{Engine, PostselectedMeterState};
use crate::error::{Result, WvaError};
use crate::grid::{moments, Grid1D};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variable {
    /// `s = Σₙ pₙ` of an N-fold coincidence.
    SumMomentum,
    /// Transverse momentum of a single photon.
    Momentum,
    /// Arrival position of a single photon.
    Position,
}

/// A tabulated density with its moments. `density` integrates to `norm`, the
/// postselection probability; `mean` and `variance` are conditional on
/// postselection.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationResult {
    pub engine: Engine,
    pub variable: Variable,
    pub grid: Grid1D,
    pub density: Vec<f64>,
    pub norm: f64,
    pub mean: f64,
    pub variance: f64,
}

impl CorrelationResult {
    fn build(engine: Engine, variable: Variable, grid: Grid1D, density: Vec<f64>) -> Result<Self> {
        if density.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(WvaError::NoConvergence {
                what: "density tabulation",
                detail: "non-finite or negative values".into(),
            });
        }
        let m = moments(&grid, &density);
        if m.norm <= 0.0 {
            return Err(WvaError::DegenerateState(m.norm));
        }
        Ok(Self {
            engine,
            variable,
            grid,
            density,
            norm: m.norm,
            mean: m.mean,
            variance: m.variance,
        })
    }

    /// Density divided by its norm.
    pub fn conditional_density(&self) -> Vec<f64> {
        self.density.iter().map(|d| d / self.norm).collect()
    }

    pub fn std_dev(&self) -> f64 {
        self.variance.sqrt()
    }
}

/// First-order correlation of a single photon, on the state's default grid.
pub fn g1(state: &PostselectedMeterState, variable: Variable) -> Result<CorrelationResult> {
    let grid = match variable {
        Variable::Position => state.default_position_grid()?,
        _ => state.default_sum_grid(),
    };
    g1_on(state, variable, &grid)
}

pub fn g1_on(state: &PostselectedMeterState, variable: Variable, grid: &Grid1D) -> Result<CorrelationResult> {
    if state.n_photons() != 1 {
        return Err(WvaError::Unsupported(format!(
            "single-photon correlation needs N = 1 (got {})",
            state.n_photons()
        )));
    }
    let density = match variable {
        Variable::Position => state.position_density(grid)?,
        Variable::Momentum | Variable::SumMomentum => state.sum_density(grid)?,
    };
    let variable = match variable {
        Variable::SumMomentum => Variable::Momentum,
        v => v,
    };
    CorrelationResult::build(state.engine(), variable, *grid, density)
}

/// N-fold coincidence density of the summed momentum.
pub fn gn_sum(state: &PostselectedMeterState) -> Result<CorrelationResult> {
    gn_sum_on(state, &state.default_sum_grid())
}

pub fn gn_sum_on(state: &PostselectedMeterState, grid: &Grid1D) -> Result<CorrelationResult> {
    let density = state.sum_density(grid)?;
    CorrelationResult::build(state.engine(), Variable::SumMomentum, *grid, density)
}

/// Shift of the conditional mean relative to `baseline`.
pub fn displacement(result: &CorrelationResult, baseline: &CorrelationResult) -> Result<f64> {
    if result.variable != baseline.variable || !result.grid.matches(&baseline.grid) {
        return Err(WvaError::GridMismatch);
    }
    Ok(result.mean - baseline.mean)
}
