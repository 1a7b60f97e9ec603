//! N-photon polarization states, the per-photon coupling observable and weak values.
//!
//! Basis states are bitstrings over {H, V}^N with `0 ↦ H` and `1 ↦ V`. Photon 1
//! is the leftmost character of the bitstring, i.e. the most significant bit
//! of the index.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4};

use num_complex::Complex64 as C64;
use serde::{Deserialize, Serialize};

use crate::error::{Result, WvaError};

/// Largest photon number whose basis index fits the sparse representation.
pub const MAX_PHOTONS: usize = 62;

/// Largest photon number accepted by the dense constructors.
pub const MAX_DENSE_PHOTONS: usize = 12;

/// Tolerance on `Σ|amplitude|² = 1`.
pub const NORM_TOLERANCE: f64 = 1e-12;

/// Overlaps below this modulus are treated as exactly zero.
pub const ZERO_OVERLAP: f64 = 1e-300;

/// Pure polarization state of `n_photons` photons, stored sparsely.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "StateRepr", into = "StateRepr")]
pub struct PolarizationState {
    n_photons: usize,
    // Sorted by basis index, no exact zeros.
    terms: Vec<(u64, C64)>,
}

impl PolarizationState {
    /// Builds a state from `(basis index, amplitude)` pairs. Repeated indices
    /// are summed; the result must be normalized.
    pub fn from_terms(n_photons: usize, terms: impl IntoIterator<Item = (u64, C64)>) -> Result<Self> {
        check_photons(n_photons)?;
        let mut terms: Vec<(u64, C64)> = terms.into_iter().collect();
        let limit = 1u64 << n_photons;
        if let Some(&(bits, _)) = terms.iter().find(|(b, _)| *b >= limit) {
            return Err(WvaError::InvalidBits {
                bits: format!("{bits:b}"),
                n_photons,
            });
        }
        terms.sort_by_key(|(b, _)| *b);
        let mut merged: Vec<(u64, C64)> = Vec::with_capacity(terms.len());
        for (b, a) in terms {
            match merged.last_mut() {
                Some((lb, la)) if *lb == b => *la += a,
                _ => merged.push((b, a)),
            }
        }
        merged.retain(|(_, a)| a.norm_sqr() > 0.0);
        let norm: f64 = merged.iter().map(|(_, a)| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > NORM_TOLERANCE {
            return Err(WvaError::NotNormalized(norm));
        }
        Ok(Self {
            n_photons,
            terms: merged,
        })
    }

    /// Like [`from_terms`](Self::from_terms) but rescales to unit norm first.
    pub fn normalized(n_photons: usize, terms: impl IntoIterator<Item = (u64, C64)>) -> Result<Self> {
        let terms: Vec<(u64, C64)> = terms.into_iter().collect();
        let norm: f64 = terms.iter().map(|(_, a)| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 || !norm.is_finite() {
            return Err(WvaError::NotNormalized(norm * norm));
        }
        Self::from_terms(n_photons, terms.into_iter().map(|(b, a)| (b, a / norm)))
    }

    /// Dense constructor for small N; `amplitudes.len()` must be `2^N`.
    pub fn from_dense(n_photons: usize, amplitudes: &[C64]) -> Result<Self> {
        check_photons(n_photons)?;
        if n_photons > MAX_DENSE_PHOTONS {
            return Err(WvaError::TooManyPhotons {
                got: n_photons,
                max: MAX_DENSE_PHOTONS,
            });
        }
        if amplitudes.len() != 1 << n_photons {
            return Err(WvaError::DimensionMismatch {
                expected: 1 << n_photons,
                got: amplitudes.len(),
            });
        }
        Self::from_terms(
            n_photons,
            amplitudes.iter().enumerate().map(|(i, &a)| (i as u64, a)),
        )
    }

    /// Product state with every photon in `bits`.
    pub fn basis(n_photons: usize, bits: u64) -> Result<Self> {
        Self::from_terms(n_photons, [(bits, C64::new(1.0, 0.0))])
    }

    pub fn n_photons(&self) -> usize {
        self.n_photons
    }

    /// Nonzero `(basis index, amplitude)` pairs in increasing index order.
    pub fn terms(&self) -> &[(u64, C64)] {
        &self.terms
    }

    pub fn amplitude(&self, bits: u64) -> C64 {
        self.terms
            .binary_search_by_key(&bits, |(b, _)| *b)
            .map(|i| self.terms[i].1)
            .unwrap_or_default()
    }

    pub fn to_dense(&self) -> Result<Vec<C64>> {
        if self.n_photons > MAX_DENSE_PHOTONS {
            return Err(WvaError::TooManyPhotons {
                got: self.n_photons,
                max: MAX_DENSE_PHOTONS,
            });
        }
        let mut v = vec![C64::default(); 1 << self.n_photons];
        for &(b, a) in &self.terms {
            v[b as usize] = a;
        }
        Ok(v)
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &PolarizationState) -> Result<C64> {
        same_photons(self, other)?;
        Ok(self.overlap_terms(other).map(|(_, s, o)| s.conj() * o).sum())
    }

    /// The same state multiplied by `e^{iφ}`.
    pub fn with_global_phase(&self, phase: f64) -> Self {
        let f = C64::from_polar(1.0, phase);
        Self {
            n_photons: self.n_photons,
            terms: self.terms.iter().map(|&(b, a)| (b, a * f)).collect(),
        }
    }

    /// Basis indices present in both states with their amplitudes.
    pub(crate) fn overlap_terms<'a>(
        &'a self,
        other: &'a PolarizationState,
    ) -> impl Iterator<Item = (u64, C64, C64)> + 'a {
        self.terms
            .iter()
            .filter_map(move |&(b, a)| {
                let o = other.amplitude(b);
                (o.norm_sqr() > 0.0).then_some((b, a, o))
            })
    }

    /// Whether photon `photon` (0-based, photon 1 = 0) is V in basis state `bits`.
    pub fn photon_is_v(&self, bits: u64, photon: usize) -> bool {
        bits >> (self.n_photons - 1 - photon) & 1 == 1
    }
}

fn check_photons(n: usize) -> Result<()> {
    if n == 0 {
        Err(WvaError::ZeroPhotons(n))
    } else if n > MAX_PHOTONS {
        Err(WvaError::TooManyPhotons {
            got: n,
            max: MAX_PHOTONS,
        })
    } else {
        Ok(())
    }
}

fn same_photons(a: &PolarizationState, b: &PolarizationState) -> Result<()> {
    if a.n_photons != b.n_photons {
        return Err(WvaError::PhotonMismatch {
            left: a.n_photons,
            right: b.n_photons,
        });
    }
    Ok(())
}

fn all_v(n: usize) -> u64 {
    (1u64 << n) - 1
}

/// Bitstring for basis index `bits`, photon 1 first.
pub fn bits_to_string(bits: u64, n_photons: usize) -> String {
    format!("{bits:0n_photons$b}")
}

pub fn parse_bits(s: &str, n_photons: usize) -> Result<u64> {
    let invalid = || WvaError::InvalidBits {
        bits: s.to_string(),
        n_photons,
    };
    if s.len() != n_photons || !s.bytes().all(|c| c == b'0' || c == b'1') {
        return Err(invalid());
    }
    u64::from_str_radix(s, 2).map_err(|_| invalid())
}

#[derive(Serialize, Deserialize)]
struct TermRepr {
    bits: String,
    re: f64,
    im: f64,
}

#[derive(Serialize, Deserialize)]
struct StateRepr {
    n_photons: usize,
    terms: Vec<TermRepr>,
}

impl TryFrom<StateRepr> for PolarizationState {
    type Error = WvaError;

    fn try_from(r: StateRepr) -> Result<Self> {
        let terms = r
            .terms
            .iter()
            .map(|t| Ok((parse_bits(&t.bits, r.n_photons)?, C64::new(t.re, t.im))))
            .collect::<Result<Vec<_>>>()?;
        Self::from_terms(r.n_photons, terms)
    }
}

impl From<PolarizationState> for StateRepr {
    fn from(s: PolarizationState) -> Self {
        StateRepr {
            n_photons: s.n_photons,
            terms: s
                .terms
                .iter()
                .map(|&(b, a)| TermRepr {
                    bits: bits_to_string(b, s.n_photons),
                    re: a.re,
                    im: a.im,
                })
                .collect(),
        }
    }
}

/// Per-photon observable `a_H |H⟩⟨H| + a_V |V⟩⟨V|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CouplingObservable {
    a_h: f64,
    a_v: f64,
}

impl Default for CouplingObservable {
    /// `|H⟩⟨H| − |V⟩⟨V|`.
    fn default() -> Self {
        Self { a_h: 1.0, a_v: -1.0 }
    }
}

impl CouplingObservable {
    pub fn new(a_h: f64, a_v: f64) -> Result<Self> {
        if !(a_h.is_finite() && a_v.is_finite()) {
            return Err(WvaError::param("observable", "eigenvalues must be finite"));
        }
        if a_h == a_v {
            return Err(WvaError::DegenerateObservable(a_h));
        }
        Ok(Self { a_h, a_v })
    }

    pub fn a_h(&self) -> f64 {
        self.a_h
    }

    pub fn a_v(&self) -> f64 {
        self.a_v
    }

    /// Eigenvalue of photon `photon` in basis state `bits`.
    pub fn eigenvalue(&self, state_n: usize, bits: u64, photon: usize) -> f64 {
        if bits >> (state_n - 1 - photon) & 1 == 1 {
            self.a_v
        } else {
            self.a_h
        }
    }

    /// Eigenvalues of every photon in basis state `bits`.
    pub fn eigenvalues(&self, n_photons: usize, bits: u64) -> Vec<f64> {
        (0..n_photons)
            .map(|n| self.eigenvalue(n_photons, bits, n))
            .collect()
    }
}

/// Per-photon and total weak values of a pre/postselected pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeakValueSet {
    pub per_photon: Vec<C64>,
    pub total: C64,
    pub overlap: C64,
}

impl WeakValueSet {
    pub fn n_photons(&self) -> usize {
        self.per_photon.len()
    }

    /// Average per-photon weak value `Ā_w`.
    pub fn mean(&self) -> C64 {
        self.total / self.per_photon.len() as f64
    }

    /// `|⟨f|i⟩|²`.
    pub fn postselection_probability(&self) -> f64 {
        self.overlap.norm_sqr()
    }
}

/// `(|H⟩^{⊗N} + |V⟩^{⊗N})/√2`.
pub fn make_ghz_initial(n_photons: usize) -> Result<PolarizationState> {
    check_photons(n_photons)?;
    let a = C64::new(FRAC_1_SQRT_2, 0.0);
    PolarizationState::from_terms(n_photons, [(0, a), (all_v(n_photons), a)])
}

/// `cos(−π/4 + kε)|H⟩^{⊗N} + sin(−π/4 + kε)|V⟩^{⊗N}`.
///
/// Only the product `kε` matters. `k = 1` gives the amplification-maximizing
/// final state and `k = N` the probability-maximizing one. A product with
/// `sin(kε) = 0` is orthogonal to the GHZ initial state and rejected.
pub fn make_rotated_final(n_photons: usize, epsilon: f64, k: f64) -> Result<PolarizationState> {
    check_photons(n_photons)?;
    if !(epsilon.is_finite() && k.is_finite()) {
        return Err(WvaError::param("epsilon", "epsilon and k must be finite"));
    }
    if k < 1.0 {
        return Err(WvaError::param("k", format!("must be >= 1 (got {k})")));
    }
    let angle = k * epsilon;
    if angle.sin() == 0.0 {
        return Err(WvaError::param(
            "epsilon",
            "k*epsilon is a multiple of pi: final state is orthogonal to the GHZ initial state",
        ));
    }
    let theta = -FRAC_PI_4 + angle;
    PolarizationState::from_terms(
        n_photons,
        [
            (0, C64::new(theta.cos(), 0.0)),
            (all_v(n_photons), C64::new(theta.sin(), 0.0)),
        ],
    )
}

/// True when `kε ∈ (0, π/4)`, the regime where the rotated final state
/// produces large weak values.
pub fn rotated_final_is_weak(epsilon: f64, k: f64) -> bool {
    let angle = k * epsilon;
    angle > 0.0 && angle < FRAC_PI_4
}

/// Relative sign between the two terms of the phase-postselection state.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseVariant {
    /// `(e^{−iε}|H…H⟩ − e^{iε}|V…V⟩)/√2`; overlap with GHZ is imaginary with
    /// modulus `sin ε`.
    #[default]
    Minus,
    /// `(e^{−iε}|H…H⟩ + e^{−iε}|V…V⟩)/√2`, a global phase times the GHZ state.
    Plus,
}

pub fn make_phase_final(
    n_photons: usize,
    epsilon: f64,
    variant: PhaseVariant,
) -> Result<PolarizationState> {
    check_photons(n_photons)?;
    if !epsilon.is_finite() {
        return Err(WvaError::param("epsilon", "must be finite"));
    }
    let h = C64::from_polar(FRAC_1_SQRT_2, -epsilon);
    let v = match variant {
        PhaseVariant::Minus => -C64::from_polar(FRAC_1_SQRT_2, epsilon),
        PhaseVariant::Plus => h,
    };
    PolarizationState::from_terms(n_photons, [(0, h), (all_v(n_photons), v)])
}

/// Per-photon weak values `⟨f|Âₙ|i⟩/⟨f|i⟩` and their sum.
pub fn weak_values(
    initial: &PolarizationState,
    fin: &PolarizationState,
    obs: &CouplingObservable,
) -> Result<WeakValueSet> {
    same_photons(initial, fin)?;
    let n = initial.n_photons;
    let mut overlap = C64::default();
    let mut numerators = vec![C64::default(); n];
    for (bits, f_b, i_b) in fin.overlap_terms(initial) {
        let c = f_b.conj() * i_b;
        overlap += c;
        for (photon, num) in numerators.iter_mut().enumerate() {
            *num += c * obs.eigenvalue(n, bits, photon);
        }
    }
    if overlap.norm() <= ZERO_OVERLAP {
        return Err(WvaError::ZeroOverlap {
            overlap: overlap.norm(),
        });
    }
    let per_photon: Vec<C64> = numerators.iter().map(|m| m / overlap).collect();
    let total = per_photon.iter().sum();
    Ok(WeakValueSet {
        per_photon,
        total,
        overlap,
    })
}

/// `|⟨f|i⟩|²`.
pub fn postselection_probability(initial: &PolarizationState, fin: &PolarizationState) -> Result<f64> {
    Ok(fin.inner(initial)?.norm_sqr().min(1.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn ghz_amplitudes() {
        let s = make_ghz_initial(1).unwrap();
        assert_eq!(s.terms().len(), 2);
        assert!(close(s.amplitude(0).re, FRAC_1_SQRT_2, 1e-15));
        assert!(close(s.amplitude(1).re, FRAC_1_SQRT_2, 1e-15));

        let s = make_ghz_initial(4).unwrap();
        let nonzero: Vec<u64> = s.terms().iter().map(|t| t.0).collect();
        assert_eq!(nonzero, vec![0b0000, 0b1111]);
        assert_eq!(bits_to_string(nonzero[1], 4), "1111");
        assert!(make_ghz_initial(0).is_err());
    }

    #[test]
    fn rotated_final_values() {
        let f = make_rotated_final(2, 0.1, 1.0).unwrap();
        // cos/sin of -π/4 + 0.1
        assert!(close(f.amplitude(0b00).re, 0.7741670784769464, 1e-14));
        assert!(close(f.amplitude(0b11).re, -0.6329813066769582, 1e-14));

        let f = make_rotated_final(5, FRAC_PI_4, 1.0).unwrap();
        assert_eq!(f.terms(), &[(0, C64::new(1.0, 0.0))]);

        let a = make_rotated_final(3, 0.05, 3.0).unwrap();
        let b = make_rotated_final(3, 0.15, 1.0).unwrap();
        for (x, y) in a.terms().iter().zip(b.terms()) {
            assert_eq!(x.0, y.0);
            assert!((x.1 - y.1).norm() < 1e-15);
        }
    }

    #[test]
    fn rotated_final_rejects_zero_overlap_and_small_k() {
        assert!(make_rotated_final(2, 0.0, 1.0).is_err());
        assert!(make_rotated_final(2, 0.1, 0.5).is_err());
        assert!(rotated_final_is_weak(0.1, 2.0));
        assert!(!rotated_final_is_weak(0.5, 2.0));
    }

    #[test]
    fn phase_final_overlap() {
        let i = make_ghz_initial(2).unwrap();
        let f = make_phase_final(2, 0.1, PhaseVariant::Minus).unwrap();
        let ov = f.inner(&i).unwrap();
        assert!(ov.re.abs() < 1e-16);
        assert!(close(ov.im.abs(), 0.1f64.sin(), 1e-15));
        assert!(close(postselection_probability(&i, &f).unwrap(), 0.009966711079379185, 1e-15));

        let f = make_phase_final(2, std::f64::consts::FRAC_PI_2, PhaseVariant::Minus).unwrap();
        assert!(close(postselection_probability(&i, &f).unwrap(), 1.0, 1e-15));

        let i1 = make_ghz_initial(1).unwrap();
        let f1 = make_phase_final(1, 0.1, PhaseVariant::Minus).unwrap();
        assert!(close(postselection_probability(&i1, &f1).unwrap(), 0.1f64.sin().powi(2), 1e-15));
    }

    #[test]
    fn phase_final_plus_variant_is_ghz_up_to_phase() {
        let i = make_ghz_initial(3).unwrap();
        let f = make_phase_final(3, 0.1, PhaseVariant::Plus).unwrap();
        assert!(close(postselection_probability(&i, &f).unwrap(), 1.0, 1e-15));
        let wv = weak_values(&i, &f, &CouplingObservable::default()).unwrap();
        assert!(wv.total.norm() < 1e-15);
    }

    #[test]
    fn phase_final_minus_weak_values_are_imaginary() {
        let eps = 0.1f64;
        let i = make_ghz_initial(2).unwrap();
        let f = make_phase_final(2, eps, PhaseVariant::Minus).unwrap();
        let wv = weak_values(&i, &f, &CouplingObservable::default()).unwrap();
        // brute force over the dense 4-dim vectors
        let (vi, vf) = (i.to_dense().unwrap(), f.to_dense().unwrap());
        let ov: C64 = vf.iter().zip(&vi).map(|(a, b)| a.conj() * b).sum();
        for photon in 0..2 {
            let num: C64 = (0..4)
                .map(|b| {
                    let a = if b >> (1 - photon) & 1 == 1 { -1.0 } else { 1.0 };
                    vf[b].conj() * vi[b] * a
                })
                .sum();
            let direct = num / ov;
            assert!((wv.per_photon[photon] - direct).norm() < 1e-12);
            assert!(wv.per_photon[photon].re.abs() < 1e-12);
            assert!(close(wv.per_photon[photon].im.abs(), 1.0 / eps.tan(), 1e-12));
        }
    }

    #[test]
    fn ghz_rotated_weak_value() {
        let i = make_ghz_initial(4).unwrap();
        let f = make_rotated_final(4, 0.1, 1.0).unwrap();
        let wv = weak_values(&i, &f, &CouplingObservable::default()).unwrap();
        assert!(close(wv.total.re, 39.86657769303695, 1e-11));
        assert!(wv.total.im.abs() < 1e-12);
        assert!((wv.total.re - 40.0).abs() / 40.0 < 0.01);
        for a in &wv.per_photon {
            assert!(close(a.re, 1.0 / 0.1f64.tan(), 1e-12));
        }
    }

    #[test]
    fn eigenstate_weak_value() {
        let h = PolarizationState::basis(3, 0).unwrap();
        let wv = weak_values(&h, &h, &CouplingObservable::default()).unwrap();
        assert!(wv.per_photon.iter().all(|a| (a - 1.0).norm() < 1e-15));
        assert!((wv.total - 3.0).norm() < 1e-15);
    }

    #[test]
    fn zero_overlap_is_an_error() {
        let h = PolarizationState::basis(2, 0b00).unwrap();
        let v = PolarizationState::basis(2, 0b11).unwrap();
        assert!(matches!(
            weak_values(&h, &v, &CouplingObservable::default()),
            Err(WvaError::ZeroOverlap { .. })
        ));
        assert_eq!(postselection_probability(&h, &v).unwrap(), 0.0);
    }

    #[test]
    fn postselection_probability_examples() {
        let i = make_ghz_initial(3).unwrap();
        let f = make_rotated_final(3, 0.1, 1.0).unwrap();
        let ps = postselection_probability(&i, &f).unwrap();
        assert!(close(ps, 0.1f64.sin().powi(2), 1e-15));
        let i5 = make_ghz_initial(5).unwrap();
        let f5 = make_rotated_final(5, 0.02, 5.0).unwrap();
        let ps = postselection_probability(&i5, &f5).unwrap();
        assert!(close(ps, 9.966711079379185e-3, 1e-15));
        assert!((ps - 0.01).abs() / 0.01 < 0.01);
    }

    #[test]
    fn invalid_states_are_rejected() {
        assert!(matches!(
            PolarizationState::from_terms(2, [(0, C64::new(0.5, 0.0))]),
            Err(WvaError::NotNormalized(_))
        ));
        assert!(PolarizationState::from_terms(2, [(4, C64::new(1.0, 0.0))]).is_err());
        assert!(PolarizationState::from_dense(2, &[C64::new(1.0, 0.0); 3]).is_err());
        assert!(CouplingObservable::new(1.0, 1.0).is_err());
        assert!(matches!(
            make_ghz_initial(2).unwrap().inner(&make_ghz_initial(3).unwrap()),
            Err(WvaError::PhotonMismatch { .. })
        ));
    }

    #[test]
    fn json_shape() {
        let s = make_rotated_final(2, 0.1, 1.0).unwrap();
        let js = serde_json::to_value(&s).unwrap();
        assert_eq!(js["n_photons"], 2);
        assert_eq!(js["terms"][1]["bits"], "11");
        let back: PolarizationState = serde_json::from_value(js).unwrap();
        assert_eq!(back, s);
        let bad = serde_json::json!({"n_photons": 2, "terms": [{"bits": "011", "re": 1.0, "im": 0.0}]});
        assert!(serde_json::from_value::<PolarizationState>(bad).is_err());
    }

    fn two_term_state(n: usize) -> impl Strategy<Value = PolarizationState> {
        let max = (1u64 << n) - 1;
        (0..=max, 0..=max, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0, -1.0f64..1.0)
            .prop_filter_map("nonzero", move |(b0, b1, r0, i0, r1, i1)| {
                PolarizationState::normalized(n, [(b0, C64::new(r0, i0)), (b1, C64::new(r1, i1))]).ok()
            })
    }

    fn dense_pair() -> impl Strategy<Value = (PolarizationState, PolarizationState)> {
        (1usize..=5).prop_flat_map(|n| (two_term_state(n), two_term_state(n)))
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(200))]

        #[test]
        fn total_weak_value_matches_collective_operator((i, f) in dense_pair()) {
            let obs = CouplingObservable::default();
            let n = i.n_photons();
            let ov = f.inner(&i).unwrap();
            prop_assume!(ov.norm() > 1e-6);
            let wv = weak_values(&i, &f, &obs).unwrap();
            let (vi, vf) = (i.to_dense().unwrap(), f.to_dense().unwrap());
            let collective: C64 = (0..vi.len())
                .map(|b| vf[b].conj() * vi[b] * obs.eigenvalues(n, b as u64).iter().sum::<f64>())
                .sum::<C64>() / ov;
            let scale = collective.norm().max(1.0);
            prop_assert!((wv.total - collective).norm() <= 1e-12 * scale);
            let summed: C64 = wv.per_photon.iter().sum();
            prop_assert!((wv.total - summed).norm() <= 1e-12 * scale);
        }

        #[test]
        fn weak_values_ignore_global_phase((i, f) in dense_pair(), pi in 0.0f64..6.3, pf in 0.0f64..6.3) {
            let obs = CouplingObservable::default();
            prop_assume!(f.inner(&i).unwrap().norm() > 1e-6);
            let a = weak_values(&i, &f, &obs).unwrap();
            let b = weak_values(&i.with_global_phase(pi), &f.with_global_phase(pf), &obs).unwrap();
            for (x, y) in a.per_photon.iter().zip(&b.per_photon) {
                prop_assert!((x - y).norm() <= 1e-12 * x.norm().max(1.0));
            }
        }

        #[test]
        fn postselection_probability_is_symmetric((i, f) in dense_pair()) {
            let a = postselection_probability(&i, &f).unwrap();
            let b = postselection_probability(&f, &i).unwrap();
            prop_assert!((a - b).abs() < 1e-15);
        }

        #[test]
        fn rotated_final_depends_on_product_only(n in 1usize..10, eps in 0.001f64..0.2, k in 1.0f64..4.0) {
            let obs = CouplingObservable::default();
            let i = make_ghz_initial(n).unwrap();
            let f1 = make_rotated_final(n, eps, k).unwrap();
            let f2 = make_rotated_final(n, eps * k, 1.0).unwrap();
            let w1 = weak_values(&i, &f1, &obs).unwrap();
            let w2 = weak_values(&i, &f2, &obs).unwrap();
            prop_assert!((w1.total - w2.total).norm() <= 1e-9 * w1.total.norm());
            let p1 = postselection_probability(&i, &f1).unwrap();
            let p2 = postselection_probability(&i, &f2).unwrap();
            prop_assert!((p1 - p2).abs() <= 1e-14);
        }
    }
}
