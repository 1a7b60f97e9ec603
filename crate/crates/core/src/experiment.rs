//! The full prepare → couple → postselect → detect pipeline as one value.

use serde::{Deserialize, Serialize};

use crate::correlation::{gn_sum_on, CorrelationResult};
use crate::dynamics::{
    decompose_branches, evolve_postselect_exact, evolve_postselect_grid, evolve_postselect_weak, BranchDecomposition,
    CouplingConfig, Engine, GridSpec, PostselectedMeterState,
};
use crate::error::{Result, WvaError};
use crate::grid::{Grid1D, DEFAULT_POINTS};
use crate::meter::{Meter, MeterOperator};
use crate::polarization::{weak_values, CouplingObservable, PolarizationState, WeakValueSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Experiment {
    pub initial: PolarizationState,
    pub fin: PolarizationState,
    pub observable: CouplingObservable,
    pub meter: Meter,
    pub operator: MeterOperator,
    pub engine: Engine,
}

impl Experiment {
    pub fn new(
        initial: PolarizationState,
        fin: PolarizationState,
        observable: CouplingObservable,
        meter: Meter,
        operator: MeterOperator,
        engine: Engine,
    ) -> Result<Self> {
        let n = initial.n_photons();
        for other in [fin.n_photons(), meter.n_photons()] {
            if other != n {
                return Err(WvaError::PhotonMismatch { left: n, right: other });
            }
        }
        if engine == Engine::Grid && n > 2 {
            return Err(WvaError::Unsupported(format!(
                "grid engine handles at most 2 photons (got {n})"
            )));
        }
        let exp = Self {
            initial,
            fin,
            observable,
            meter,
            operator,
            engine,
        };
        if engine == Engine::Weak {
            exp.weak_values()?;
        }
        Ok(exp)
    }

    pub fn n_photons(&self) -> usize {
        self.initial.n_photons()
    }

    pub fn coupling(&self, g: f64) -> Result<CouplingConfig> {
        CouplingConfig::new(g, self.operator)
    }

    pub fn branches(&self) -> Result<BranchDecomposition> {
        decompose_branches(&self.initial, &self.fin, &self.observable)
    }

    pub fn weak_values(&self) -> Result<WeakValueSet> {
        weak_values(&self.initial, &self.fin, &self.observable)
    }

    /// Postselected meter state at coupling `g`, with default grids for the
    /// grid engine.
    pub fn state(&self, g: f64) -> Result<PostselectedMeterState> {
        let coupling = self.coupling(g)?;
        match self.engine {
            Engine::Exact => evolve_postselect_exact(&self.branches()?, &self.meter, &coupling),
            Engine::Weak => evolve_postselect_weak(&self.initial, &self.fin, &self.observable, &self.meter, &coupling),
            Engine::Grid => {
                let spec = GridSpec::default_for(&self.branches()?, &self.meter, &coupling)?;
                evolve_postselect_grid(&self.initial, &self.fin, &self.observable, &self.meter, &coupling, &spec)
            }
        }
    }

    /// A sum grid wide enough for every coupling in `[-g_max, g_max]`.
    pub fn sum_grid(&self, g_max: f64) -> Result<Grid1D> {
        let g_max = g_max.abs();
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for g in [-g_max, 0.0, g_max] {
            let st = match self.engine {
                Engine::Weak => self.state(g)?,
                _ => evolve_postselect_exact(&self.branches()?, &self.meter, &self.coupling(g)?)?,
            };
            let grid = st.default_sum_grid();
            lo = lo.min(grid.start);
            hi = hi.max(grid.end);
        }
        Grid1D::new(lo, hi, DEFAULT_POINTS)
    }

    /// Coincidence density of the summed momentum at `g`, tabulated on `grid`.
    pub fn coincidences(&self, g: f64, grid: &Grid1D) -> Result<CorrelationResult> {
        let coupling = self.coupling(g)?;
        let state = match self.engine {
            Engine::Grid => {
                let mut spec = GridSpec::default_for(&self.branches()?, &self.meter, &coupling)?;
                spec.sum = *grid;
                evolve_postselect_grid(&self.initial, &self.fin, &self.observable, &self.meter, &coupling, &spec)?
            }
            _ => self.state(g)?,
        };
        gn_sum_on(&state, grid)
    }
}
