//! Weak value amplification with multi-photon polarization states.
//!
//! N photons carry a polarization state and a transverse-momentum meter. A
//! polarization observable couples to each photon's position or momentum,
//! the polarization is postselected, and the momentum-sum of the detected
//! coincidences is read out. The crate provides exact and first-order models
//! of that pipeline, the correlation functions a detector sees, and Fisher
//! information and Monte Carlo estimation tools for the coupling strength.
//!
//! ```
//! use wva_core::{make_ghz_initial, make_rotated_final, weak_values, CouplingObservable};
//!
//! let i = make_ghz_initial(4).unwrap();
//! let f = make_rotated_final(4, 0.1, 1.0).unwrap();
//! let w = weak_values(&i, &f, &CouplingObservable::default()).unwrap();
//! assert!((w.total.re - 4.0 / 0.1f64.tan()).abs() < 1e-9);
//! ```

pub mod correlation;
pub mod dynamics;
pub mod error;
pub mod experiment;
pub mod grid;
pub mod meter;
pub mod metrology;
pub mod polarization;
pub mod validation;

pub use dynamics::{
    decompose_branches, evolve_postselect_exact, evolve_postselect_grid, evolve_postselect_weak, weak_sum_slope,
    Branch, BranchDecomposition, CouplingConfig, Engine, ExactBranchState, GaussianMixture, GridSpec, GridState,
    MixtureTerm, PostselectedMeterState, WeakState,
};
pub use correlation::{displacement, g1, g1_on, gn_sum, gn_sum_on, CorrelationResult, Variable};
pub use error::{Result, WvaError};
pub use experiment::Experiment;
pub use grid::{moments, trapezoid, Grid1D, Moments};
pub use meter::{GaussianProductMeter, Meter, MeterOperator, SpdcPairMeter, SumGaussianMeter};
pub use metrology::{
    fisher_analytic, fisher_finite_difference, fisher_quadrature, fisher_report, log_log_slope, mle_estimate,
    run_estimation, sample_coincidences, scaling_sweep, scaling_sweep_with, CoincidenceSampler, EstimationConfig, EstimationRun,
    FisherEstimate, FisherReport, Regime, SweepConfig, SweepRow, SweepTable,
};
pub use polarization::{
    make_ghz_initial, make_phase_final, make_rotated_final, postselection_probability, weak_values,
    CouplingObservable, PhaseVariant, PolarizationState, WeakValueSet,
};
pub use num_complex::Complex64;
