//! Fixtures shared by the benchmarks.

use wva_core::{
    make_ghz_initial, make_rotated_final, CouplingObservable, Meter, PolarizationState, SpdcPairMeter,
    SumGaussianMeter,
};

/// GHZ preparation with the rotated postselection at `epsilon`.
pub fn ghz_pair(n_photons: usize, epsilon: f64) -> (PolarizationState, PolarizationState) {
    (
        make_ghz_initial(n_photons).expect("valid photon number"),
        make_rotated_final(n_photons, epsilon, 1.0).expect("weak regime"),
    )
}

pub fn observable() -> CouplingObservable {
    CouplingObservable::default()
}

/// Unit-width separable meter for `n_photons`.
pub fn sum_meter(n_photons: usize) -> Meter {
    SumGaussianMeter::with_default_internal(n_photons, 0.0, 1.0)
        .expect("valid meter")
        .into()
}

pub fn spdc_meter() -> Meter {
    SpdcPairMeter::new(0.0, 1.0, 1.0).expect("valid meter").into()
}
