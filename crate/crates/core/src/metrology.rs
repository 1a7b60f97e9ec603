//! Fisher information, coincidence sampling and maximum-likelihood estimation
//! of the coupling strength.
//!
//! A trial either fails postselection or yields one coincidence with summed
//! momentum `s`. Its Fisher information splits as
//! `p_s·I_cond + (∂_g p_s)²/(p_s(1−p_s))`: detected events carry the
//! conditional information `I_cond` and the success/failure record carries the
//! binomial term. The Cramér–Rao bound for ν detected events is `1/(ν·I_cond)`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::correlation::{gn_sum, CorrelationResult};
use crate::dynamics::{weak_sum_slope, PostselectedMeterState};
use crate::error::{Result, WvaError};
use crate::experiment::Experiment;
use crate::grid::{pairwise_sum, trapezoid, Grid1D};
use crate::meter::{Meter, MeterOperator, SumGaussianMeter};
use crate::polarization::{
    make_ghz_initial, make_phase_final, make_rotated_final, CouplingObservable, PhaseVariant, WeakValueSet,
};
use crate::Engine;

/// Relative agreement required between successive Richardson estimates.
pub const RICHARDSON_TOLERANCE: f64 = 1e-6;
/// Maximum number of step halvings.
pub const RICHARDSON_LEVELS: usize = 6;

const LOG_FLOOR: f64 = 1e-300;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    XCoupling,
    PCoupling,
}

impl From<MeterOperator> for Regime {
    fn from(op: MeterOperator) -> Self {
        match op {
            MeterOperator::X => Regime::XCoupling,
            MeterOperator::P => Regime::PCoupling,
        }
    }
}

/// Closed-form per-trial Fisher information of the first-order model:
/// `p_s·(∂_g⟨s⟩)²/Var(s)`. This is `p_s (Re A_w)²/σ₀²` for position coupling and
/// `4 p_s (Im Ā_w)² σ₀²` for momentum coupling with a correlated meter.
pub fn fisher_analytic(weak: &WeakValueSet, meter: &Meter, operator: MeterOperator) -> Result<f64> {
    if weak.n_photons() != meter.n_photons() {
        return Err(WvaError::PhotonMismatch {
            left: weak.n_photons(),
            right: meter.n_photons(),
        });
    }
    let slope = weak_sum_slope(weak, meter, operator);
    Ok(weak.postselection_probability() * slope * slope / meter.sum_variance())
}

/// Numerical Fisher information of a density family at one coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FisherEstimate {
    /// Per detected event.
    pub conditional: f64,
    /// Information in the postselection outcome alone.
    pub binomial: f64,
    pub postselection_probability: f64,
    /// `p_s·conditional + binomial`.
    pub per_trial: f64,
    /// Richardson levels used.
    pub levels: usize,
}

fn same_grid(results: &[&CorrelationResult]) -> Result<()> {
    let g0 = results[0].grid;
    if results.iter().any(|r| !r.grid.matches(&g0)) {
        return Err(WvaError::GridMismatch);
    }
    Ok(())
}

fn log_density(r: &CorrelationResult) -> Vec<f64> {
    r.density.iter().map(|d| (d / r.norm).max(LOG_FLOOR).ln()).collect()
}

/// Richardson extrapolation of a quantity with an even error expansion in `h`.
/// `eval(h)` returns several quantities at once; all must converge.
fn richardson<const K: usize>(
    what: &'static str,
    h0: f64,
    eval: impl Fn(f64) -> Result<[f64; K]>,
) -> Result<([f64; K], usize)> {
    let mut prev_raw = eval(h0)?;
    let mut prev_ext: Option<[f64; K]> = None;
    for level in 1..=RICHARDSON_LEVELS {
        let h = h0 / f64::powi(2.0, level as i32);
        let raw = eval(h)?;
        let ext: [f64; K] = std::array::from_fn(|k| (4.0 * raw[k] - prev_raw[k]) / 3.0);
        let close = |a: f64, b: f64| (a - b).abs() <= RICHARDSON_TOLERANCE * a.abs().max(b.abs()) || (a - b).abs() < 1e-14;
        let converged = match prev_ext {
            Some(p) => (0..K).all(|k| close(ext[k], p[k])),
            None => (0..K).all(|k| close(raw[k], prev_raw[k])),
        };
        if converged {
            return Ok((ext, level));
        }
        prev_raw = raw;
        prev_ext = Some(ext);
    }
    Err(WvaError::NoConvergence {
        what,
        detail: format!("no agreement to {RICHARDSON_TOLERANCE:e} after {RICHARDSON_LEVELS} levels"),
    })
}

fn per_trial(conditional: f64, dp: f64, p: f64) -> f64 {
    let binomial = if p > 0.0 && p < 1.0 { dp * dp / (p * (1.0 - p)) } else { 0.0 };
    p * conditional + binomial
}

/// `∫ q (∂_g ln q)² ds` on the conditional density `q`, with central differences
/// of `ln q` at step `δ = max(1e-6, 1e-3·|g|)` refined by Richardson halving.
pub fn fisher_quadrature(family: impl Fn(f64) -> Result<CorrelationResult>, g: f64) -> Result<FisherEstimate> {
    let center = family(g)?;
    let q: Vec<f64> = center.conditional_density();
    let h_s = center.grid.step();
    let delta = f64::max(1e-6, 1e-3 * g.abs());
    let ([conditional, per_trial], levels) = richardson("Fisher quadrature", delta, |h| {
        let (up, down) = (family(g + h)?, family(g - h)?);
        same_grid(&[&center, &up, &down])?;
        let (lu, ld) = (log_density(&up), log_density(&down));
        let integrand: Vec<f64> = q
            .iter()
            .zip(lu.iter().zip(&ld))
            .map(|(q, (a, b))| {
                let score = (a - b) / (2.0 * h);
                q * score * score
            })
            .collect();
        let conditional = trapezoid(h_s, &integrand);
        let dp = (up.norm - down.norm) / (2.0 * h);
        Ok([conditional, per_trial(conditional, dp, center.norm)])
    })?;
    Ok(FisherEstimate {
        conditional,
        binomial: per_trial - center.norm * conditional,
        postselection_probability: center.norm,
        per_trial,
        levels,
    })
}

/// `−∫ q ∂²_g ln q ds` from second differences of the log-density.
pub fn fisher_finite_difference(
    family: impl Fn(f64) -> Result<CorrelationResult>,
    g: f64,
) -> Result<FisherEstimate> {
    let center = family(g)?;
    let q = center.conditional_density();
    let l0 = log_density(&center);
    let h_s = center.grid.step();
    let p0 = center.norm;
    let delta = 1e-3 * f64::max(1.0, g.abs());
    let ([conditional, per_trial], levels) = richardson("finite-difference Fisher information", delta, |h| {
        let (up, down) = (family(g + h)?, family(g - h)?);
        same_grid(&[&center, &up, &down])?;
        let (lu, ld) = (log_density(&up), log_density(&down));
        let integrand: Vec<f64> = q
            .iter()
            .enumerate()
            .map(|(i, q)| -q * (lu[i] - 2.0 * l0[i] + ld[i]) / (h * h))
            .collect();
        // Observed information of the Bernoulli success record.
        let bern = |p: f64| {
            if p > 0.0 && p < 1.0 {
                p0 * p.ln() + (1.0 - p0) * (1.0 - p).ln()
            } else {
                0.0
            }
        };
        let second = (bern(up.norm) - 2.0 * bern(p0) + bern(down.norm)) / (h * h);
        let conditional = trapezoid(h_s, &integrand);
        Ok([conditional, p0 * conditional - second])
    })?;
    Ok(FisherEstimate {
        conditional,
        binomial: per_trial - p0 * conditional,
        postselection_probability: p0,
        per_trial,
        levels,
    })
}

/// All three Fisher information routes for one experiment and coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FisherReport {
    pub g: f64,
    pub regime: Regime,
    pub engine: Engine,
    /// First-order closed form, per trial.
    pub analytic: f64,
    /// Score-squared quadrature, per trial.
    pub quadrature: f64,
    /// Curvature of the log-likelihood, per trial.
    pub finite_difference: f64,
    /// Per detected event (quadrature route).
    pub conditional: f64,
    /// Postselection-record contribution included in `quadrature`.
    pub binomial: f64,
    pub postselection_probability: f64,
    /// Equal to `quadrature`.
    pub per_trial: f64,
}

impl FisherReport {
    /// Largest pairwise relative difference between the three routes.
    pub fn max_relative_spread(&self) -> f64 {
        let v = [self.analytic, self.quadrature, self.finite_difference];
        let scale = v.iter().fold(0.0f64, |m, x| m.max(x.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut spread = 0.0f64;
        for a in &v {
            for b in &v {
                spread = spread.max((a - b).abs() / scale);
            }
        }
        spread
    }
}

pub fn fisher_report(experiment: &Experiment, g: f64) -> Result<FisherReport> {
    let weak = experiment.weak_values()?;
    let analytic = fisher_analytic(&weak, &experiment.meter, experiment.operator)?;
    let grid = experiment.sum_grid(g.abs() * 1.01 + 1e-6)?;
    let family = |gg: f64| experiment.coincidences(gg, &grid);
    let quad = fisher_quadrature(family, g)?;
    let fd = fisher_finite_difference(family, g)?;
    Ok(FisherReport {
        g,
        regime: experiment.operator.into(),
        engine: experiment.engine,
        analytic,
        quadrature: quad.per_trial,
        finite_difference: fd.per_trial,
        conditional: quad.conditional,
        binomial: quad.binomial,
        postselection_probability: quad.postselection_probability,
        per_trial: quad.per_trial,
    })
}

/// Deterministic random stream for `(seed, stream)`.
pub fn rng_for(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Inverse-CDF sampler over a tabulated density, linear within grid cells.
#[derive(Debug, Clone)]
pub struct CoincidenceSampler {
    grid: Grid1D,
    cdf: Vec<f64>,
}

impl CoincidenceSampler {
    pub fn new(result: &CorrelationResult) -> Result<Self> {
        if !(result.norm > 0.0) {
            return Err(WvaError::DegenerateState(result.norm));
        }
        let h = result.grid.step();
        let mut cdf = Vec::with_capacity(result.density.len());
        let mut acc = 0.0;
        cdf.push(0.0);
        for w in result.density.windows(2) {
            acc += 0.5 * h * (w[0] + w[1]);
            cdf.push(acc);
        }
        if !(acc > 0.0) {
            return Err(WvaError::DegenerateState(acc));
        }
        for c in &mut cdf {
            *c /= acc;
        }
        Ok(Self { grid: result.grid, cdf })
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn quantile(&self, u: f64) -> f64 {
        let last = self.cdf.len() - 1;
        let i = self.cdf.partition_point(|&c| c <= u).clamp(1, last) - 1;
        let (c0, c1) = (self.cdf[i], self.cdf[i + 1]);
        let t = if c1 > c0 { ((u - c0) / (c1 - c0)).clamp(0.0, 1.0) } else { 0.5 };
        let x0 = self.grid.point(i);
        x0 + t * (self.grid.point(i + 1) - x0)
    }

    pub fn sample(&self, n: usize, seed: u64, stream: u64) -> Vec<f64> {
        let mut rng = rng_for(seed, stream);
        (0..n).map(|_| self.quantile(rng.random::<f64>())).collect()
    }
}

/// `n` coincidence sums drawn from the conditional density of `state`.
pub fn sample_coincidences(state: &PostselectedMeterState, n: usize, seed: u64) -> Result<Vec<f64>> {
    if n == 0 {
        return Err(WvaError::param("n", "must be at least 1"));
    }
    Ok(CoincidenceSampler::new(&gn_sum(state)?)?.sample(n, seed, 0))
}

/// Minimum number of samples accepted by [`mle_estimate`].
pub const MLE_MIN_SAMPLES: usize = 100;
/// Bracket doublings before giving up on a boundary maximum.
pub const MLE_WIDENINGS: usize = 3;

/// Samples located once on a fixed grid, so the log-likelihood of any model on
/// that grid is a sum of interpolated log-densities.
struct LocatedSamples {
    grid: Grid1D,
    cells: Vec<(usize, f64)>,
}

impl LocatedSamples {
    fn new(samples: &[f64], grid: Grid1D) -> Self {
        let h = grid.step();
        let last = grid.len - 1;
        let cells = samples
            .iter()
            .map(|&s| {
                let u = ((s - grid.start) / h).clamp(0.0, last as f64);
                let i = (u.floor() as usize).min(last - 1);
                (i, u - i as f64)
            })
            .collect();
        Self { grid, cells }
    }

    fn log_likelihood(&self, r: &CorrelationResult) -> Result<f64> {
        if !r.grid.matches(&self.grid) {
            return Err(WvaError::GridMismatch);
        }
        let inv = 1.0 / r.norm;
        let terms: Vec<f64> = self
            .cells
            .iter()
            .map(|&(i, t)| {
                let d = (r.density[i] * (1.0 - t) + r.density[i + 1] * t) * inv;
                d.max(LOG_FLOOR).ln()
            })
            .collect();
        Ok(pairwise_sum(&terms))
    }
}

fn golden_max(f: impl Fn(f64) -> Result<f64>, mut a: f64, mut b: f64, tol: f64) -> Result<f64> {
    const INV_PHI: f64 = 0.618_033_988_749_894_9;
    let mut c = b - INV_PHI * (b - a);
    let mut d = a + INV_PHI * (b - a);
    let (mut fc, mut fd) = (f(c)?, f(d)?);
    while b - a > tol {
        if fc >= fd {
            b = d;
            d = c;
            fd = fc;
            c = b - INV_PHI * (b - a);
            fc = f(c)?;
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + INV_PHI * (b - a);
            fd = f(d)?;
        }
    }
    Ok(0.5 * (a + b))
}

/// Maximum-likelihood coupling for coincidence samples under `model`, searched
/// by golden section on `center ± half_width`; the bracket doubles while the
/// maximum sits on its edge.
pub fn mle_estimate(
    samples: &[f64],
    model: impl Fn(f64) -> Result<CorrelationResult>,
    center: f64,
    half_width: f64,
) -> Result<f64> {
    if samples.len() < MLE_MIN_SAMPLES {
        return Err(WvaError::param(
            "samples",
            format!("need at least {MLE_MIN_SAMPLES}, got {}", samples.len()),
        ));
    }
    if !(half_width > 0.0 && half_width.is_finite()) {
        return Err(WvaError::param("half_width", "must be positive and finite"));
    }
    let located = LocatedSamples::new(samples, model(center)?.grid);
    let ll = |g: f64| located.log_likelihood(&model(g)?);
    let mut hw = half_width;
    for _ in 0..=MLE_WIDENINGS {
        let (a, b) = (center - hw, center + hw);
        let tol = 1e-4 * (b - a);
        let g_hat = golden_max(ll, a, b, tol)?;
        if g_hat - a > 2.0 * tol && b - g_hat > 2.0 * tol {
            return Ok(g_hat);
        }
        hw *= 2.0;
    }
    Err(WvaError::NoConvergence {
        what: "maximum-likelihood search",
        detail: format!("maximum on the bracket edge after {MLE_WIDENINGS} widenings"),
    })
}

/// Variance about the sample mean with Bessel's correction.
pub fn sample_variance(values: &[f64]) -> f64 {
    let n = values.len() as f64;
    let mean = pairwise_sum(values) / n;
    let sq: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    pairwise_sum(&sq) / (n - 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimationConfig {
    pub true_g: f64,
    /// Detected events per replication.
    pub n_events: usize,
    pub replications: usize,
    pub seed: u64,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            true_g: 1e-3,
            n_events: 10_000,
            replications: 200,
            seed: 0,
        }
    }
}

/// Repeated maximum-likelihood estimation of the coupling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimationRun {
    pub true_g: f64,
    pub n_events: usize,
    pub seed: u64,
    pub estimates: Vec<f64>,
    pub mean_estimate: f64,
    pub empirical_variance: f64,
    /// Per-detected-event Fisher information at `true_g`.
    pub fisher_per_event: f64,
    /// `1/(ν·I)`.
    pub crb: f64,
    pub crb_ratio: f64,
}

impl EstimationRun {
    /// Standard error of `crb_ratio` from the replication count alone.
    pub fn ratio_standard_error(&self) -> f64 {
        self.crb_ratio * (2.0 / (self.estimates.len() as f64 - 1.0)).sqrt()
    }
}

/// Replication `r` draws from stream `r` of `seed`, so runs that share a seed
/// reuse the same uniforms.
pub fn run_estimation(experiment: &Experiment, config: &EstimationConfig) -> Result<EstimationRun> {
    if config.n_events < MLE_MIN_SAMPLES {
        return Err(WvaError::param(
            "n_events",
            format!("need at least {MLE_MIN_SAMPLES}, got {}", config.n_events),
        ));
    }
    if config.replications < 2 {
        return Err(WvaError::param("replications", "need at least 2"));
    }
    let g = config.true_g;
    let probe_grid = experiment.sum_grid(g.abs() + 1e-6)?;
    let fisher = fisher_quadrature(|gg| experiment.coincidences(gg, &probe_grid), g)?.conditional;
    if !(fisher > 0.0) {
        return Err(WvaError::DegenerateState(fisher));
    }
    let nu = config.n_events as f64;
    let half_width = 10.0 / (nu * fisher).sqrt();
    let reach = g.abs() + half_width * f64::powi(2.0, MLE_WIDENINGS as i32 + 1);
    let grid = experiment.sum_grid(reach)?;
    let model = |gg: f64| experiment.coincidences(gg, &grid);
    let sampler = CoincidenceSampler::new(&model(g)?)?;

    let estimates = (0..config.replications as u64)
        .into_par_iter()
        .map(|r| {
            let samples = sampler.sample(config.n_events, config.seed, r);
            mle_estimate(&samples, model, g, half_width)
        })
        .collect::<Result<Vec<f64>>>()?;
    let empirical_variance = sample_variance(&estimates);
    let crb = 1.0 / (nu * fisher);
    Ok(EstimationRun {
        true_g: g,
        n_events: config.n_events,
        seed: config.seed,
        mean_estimate: pairwise_sum(&estimates) / estimates.len() as f64,
        empirical_variance,
        fisher_per_event: fisher,
        crb,
        crb_ratio: empirical_variance / crb,
        estimates,
    })
}

/// Photon-number sweep of GHZ preparation with a separable Gaussian meter.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub photon_numbers: Vec<usize>,
    pub epsilon: f64,
    pub k: f64,
    pub p0: f64,
    pub sigma0: f64,
    pub operator: MeterOperator,
    pub phase_variant: PhaseVariant,
    pub engine: Engine,
    pub estimation: EstimationConfig,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            photon_numbers: vec![1, 2, 4, 8],
            epsilon: 0.1,
            k: 1.0,
            p0: 0.0,
            sigma0: 1.0,
            operator: MeterOperator::X,
            phase_variant: PhaseVariant::Minus,
            engine: Engine::Weak,
            estimation: EstimationConfig::default(),
        }
    }
}

impl SweepConfig {
    /// Rotated postselection for position coupling, phase postselection for
    /// momentum coupling.
    pub fn experiment(&self, n: usize) -> Result<Experiment> {
        let fin = match self.operator {
            MeterOperator::X => make_rotated_final(n, self.epsilon, self.k)?,
            MeterOperator::P => make_phase_final(n, self.epsilon * self.k, self.phase_variant)?,
        };
        let meter: Meter = SumGaussianMeter::with_default_internal(n, self.p0, self.sigma0)?.into();
        Experiment::new(
            make_ghz_initial(n)?,
            fin,
            CouplingObservable::default(),
            meter,
            self.operator,
            self.engine,
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub n_photons: usize,
    pub postselection_probability: f64,
    pub weak_value_re: f64,
    pub weak_value_im: f64,
    pub fisher_analytic: f64,
    pub fisher_per_event: f64,
    pub mean_estimate: f64,
    pub mc_variance: f64,
    pub crb: f64,
    pub crb_ratio: f64,
    /// `√(mc_variance)`.
    pub delta_g: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepTable {
    pub rows: Vec<SweepRow>,
    /// Least-squares slope of `ln Δg` against `ln N`.
    pub slope: f64,
    pub seed: u64,
}

pub fn scaling_sweep(config: &SweepConfig) -> Result<SweepTable> {
    scaling_sweep_with(&config.photon_numbers, &config.estimation, |n| config.experiment(n))
}

/// Photon-number sweep over experiments built by `make`.
pub fn scaling_sweep_with(
    photon_numbers: &[usize],
    estimation: &EstimationConfig,
    make: impl Fn(usize) -> Result<Experiment>,
) -> Result<SweepTable> {
    if photon_numbers.is_empty() {
        return Err(WvaError::param("photon_numbers", "must not be empty"));
    }
    let rows = photon_numbers
        .iter()
        .map(|&n| {
            let exp = make(n)?;
            let weak = exp.weak_values()?;
            let run = run_estimation(&exp, estimation)?;
            Ok(SweepRow {
                n_photons: n,
                postselection_probability: weak.postselection_probability(),
                weak_value_re: weak.total.re,
                weak_value_im: weak.total.im,
                fisher_analytic: fisher_analytic(&weak, &exp.meter, exp.operator)?,
                fisher_per_event: run.fisher_per_event,
                mean_estimate: run.mean_estimate,
                mc_variance: run.empirical_variance,
                crb: run.crb,
                crb_ratio: run.crb_ratio,
                delta_g: run.empirical_variance.sqrt(),
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let slope = if rows.len() >= 2 {
        let xs: Vec<f64> = rows.iter().map(|r| r.n_photons as f64).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.delta_g).collect();
        log_log_slope(&xs, &ys)?
    } else {
        f64::NAN
    };
    Ok(SweepTable {
        rows,
        slope,
        seed: estimation.seed,
    })
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(WvaError::param("slope", "need at least two paired points"));
    }
    if xs.iter().chain(ys).any(|v| !(*v > 0.0)) {
        return Err(WvaError::param("slope", "log-log fit needs positive values"));
    }
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    let n = lx.len() as f64;
    let (mx, my) = (lx.iter().sum::<f64>() / n, ly.iter().sum::<f64>() / n);
    let sxx: f64 = lx.iter().map(|x| (x - mx).powi(2)).sum();
    if sxx == 0.0 {
        return Err(WvaError::param("slope", "abscissae must not all be equal"));
    }
    let sxy: f64 = lx.iter().zip(&ly).map(|(x, y)| (x - mx) * (y - my)).sum();
    Ok(sxy / sxx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meter::GaussianProductMeter;
    use crate::polarization::{weak_values, PolarizationState};
    use num_complex::Complex64 as C64;

    fn ghz_x(n: usize, eps: f64, engine: Engine) -> Experiment {
        SweepConfig {
            epsilon: eps,
            engine,
            ..SweepConfig::default()
        }
        .experiment(n)
        .unwrap()
    }

    fn ghz_p(n: usize, eps: f64) -> Experiment {
        SweepConfig {
            epsilon: eps,
            operator: MeterOperator::P,
            ..SweepConfig::default()
        }
        .experiment(n)
        .unwrap()
    }

    #[test]
    fn analytic_four_photon_value() {
        let e = ghz_x(4, 0.1, Engine::Weak);
        let fi = fisher_analytic(&e.weak_values().unwrap(), &e.meter, e.operator).unwrap();
        assert!((fi - 15.840_532_622_729_935).abs() < 1e-9, "{fi}");
        assert!((fi - 16.0 * 0.1f64.cos().powi(2)).abs() < 1e-12);
    }

    #[test]
    fn analytic_vanishes_for_imaginary_weak_value_under_position_coupling() {
        let e = ghz_p(2, 0.1);
        let fi = fisher_analytic(&e.weak_values().unwrap(), &e.meter, MeterOperator::X).unwrap();
        assert!(fi.abs() < 1e-20);
    }

    #[test]
    fn three_routes_agree_on_weak_models() {
        for e in [ghz_x(4, 0.1, Engine::Weak), ghz_p(4, 0.1), ghz_x(1, 0.05, Engine::Weak)] {
            let r = fisher_report(&e, 1e-3).unwrap();
            assert!(r.max_relative_spread() < 1e-3, "{r:?}");
            assert!(r.per_trial <= r.conditional);
            assert!(r.binomial.abs() < 1e-12);
        }
    }

    #[test]
    fn constant_family_has_no_information() {
        let e = ghz_x(2, 0.1, Engine::Weak);
        let grid = e.sum_grid(0.0).unwrap();
        let fixed = e.coincidences(0.0, &grid).unwrap();
        let est = fisher_quadrature(|_| Ok(fixed.clone()), 0.3).unwrap();
        assert!(est.per_trial.abs() < 1e-14);
        let est = fisher_finite_difference(|_| Ok(fixed.clone()), 0.3).unwrap();
        assert!(est.per_trial.abs() < 1e-14);
    }

    #[test]
    fn exact_information_is_continuous_through_zero() {
        let e = ghz_x(2, 0.1, Engine::Exact);
        let grid = e.sum_grid(1e-3).unwrap();
        let at = |g: f64| fisher_quadrature(|gg| e.coincidences(gg, &grid), g).unwrap();
        let (m, z, p) = (at(-1e-4), at(0.0), at(1e-4));
        assert!(z.per_trial.is_finite());
        assert!((m.per_trial - z.per_trial).abs() < 1e-3 * z.per_trial);
        assert!((p.per_trial - z.per_trial).abs() < 1e-3 * z.per_trial);
        assert!(z.binomial.abs() < 1e-6 * z.per_trial);
    }

    #[test]
    fn mismatched_grids_are_rejected() {
        let e = ghz_x(2, 0.1, Engine::Weak);
        let family = |g: f64| {
            let grid = e.sum_grid(g.abs() + 1.0).unwrap();
            e.coincidences(g, &grid)
        };
        assert_eq!(fisher_quadrature(family, 0.5).unwrap_err(), WvaError::GridMismatch);
    }

    #[test]
    fn additivity_over_independent_photons() {
        // Each photon independently pre- and postselected.
        let one_i = PolarizationState::normalized(1, [(0, C64::new(0.8, 0.0)), (1, C64::new(0.6, 0.0))]).unwrap();
        let one_f = PolarizationState::normalized(1, [(0, C64::new(0.5, 0.0)), (1, C64::new(-0.7, 0.0))]).unwrap();
        let product = |s: &PolarizationState, n: usize| {
            let terms = (0..1u64 << n).map(|bits| {
                let amp: C64 = (0..n).map(|k| s.amplitude((bits >> k) & 1)).product();
                (bits, amp)
            });
            PolarizationState::from_terms(n, terms).unwrap()
        };
        let conditional = |n: usize| {
            let e = Experiment::new(
                product(&one_i, n),
                product(&one_f, n),
                CouplingObservable::default(),
                GaussianProductMeter::uniform(n, 0.0, 1.0).unwrap().into(),
                MeterOperator::X,
                Engine::Weak,
            )
            .unwrap();
            let grid = e.sum_grid(1e-3).unwrap();
            fisher_quadrature(|g| e.coincidences(g, &grid), 1e-3).unwrap().conditional
        };
        let one = conditional(1);
        for n in [2, 3] {
            assert!((conditional(n) / (n as f64 * one) - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn independent_momentum_coupled_photons_add() {
        let eps: f64 = 0.05;
        let fin = make_phase_final(1, eps, PhaseVariant::Minus).unwrap();
        let w = weak_values(&make_ghz_initial(1).unwrap(), &fin, &CouplingObservable::default()).unwrap();
        let meter: Meter = GaussianProductMeter::uniform(1, 0.0, 1.0).unwrap().into();
        let single = fisher_analytic(&w, &meter, MeterOperator::P).unwrap();
        assert!((single - 4.0 * eps.cos().powi(2)).abs() < 1e-12);
        assert!((5.0 * single - 20.0).abs() < 20.0 * eps * eps);
    }

    #[test]
    fn momentum_information_independent_of_photon_number() {
        let values: Vec<f64> = [2, 4, 8]
            .iter()
            .map(|&n| {
                let e = ghz_p(n, 0.1);
                fisher_analytic(&e.weak_values().unwrap(), &e.meter, e.operator).unwrap()
            })
            .collect();
        for v in &values {
            assert!((v - 4.0 * 0.1f64.cos().powi(2)).abs() < 1e-12);
        }
    }

    #[test]
    fn k_trade_off_invariance() {
        let a = SweepConfig { epsilon: 0.1, k: 1.0, ..SweepConfig::default() }.experiment(3).unwrap();
        let b = SweepConfig { epsilon: 0.025, k: 4.0, ..SweepConfig::default() }.experiment(3).unwrap();
        let fa = fisher_analytic(&a.weak_values().unwrap(), &a.meter, a.operator).unwrap();
        let fb = fisher_analytic(&b.weak_values().unwrap(), &b.meter, b.operator).unwrap();
        assert!((fa - fb).abs() < 1e-12 * fa);
    }

    #[test]
    fn sampler_is_deterministic_and_in_support() {
        let st = ghz_x(2, 0.1, Engine::Weak).state(1e-3).unwrap();
        let a = sample_coincidences(&st, 1000, 7).unwrap();
        assert_eq!(a, sample_coincidences(&st, 1000, 7).unwrap());
        assert_ne!(a, sample_coincidences(&st, 1000, 8).unwrap());
        let one = sample_coincidences(&st, 1, 3).unwrap();
        let grid = st.default_sum_grid();
        assert!(one[0] >= grid.start && one[0] <= grid.end);
        assert!(sample_coincidences(&st, 0, 3).is_err());
    }

    #[test]
    fn sampler_variance_of_unit_gaussian() {
        let st = ghz_x(2, 0.1, Engine::Weak).state(0.0).unwrap();
        let s = sample_coincidences(&st, 1_000_000, 11).unwrap();
        let v = sample_variance(&s);
        assert!((v - 1.0).abs() < 3.0 * (2.0f64 / 1e6).sqrt(), "{v}");
    }

    #[test]
    fn streams_differ() {
        let st = ghz_x(1, 0.1, Engine::Weak).state(0.0).unwrap();
        let sampler = CoincidenceSampler::new(&gn_sum(&st).unwrap()).unwrap();
        assert_ne!(sampler.sample(10, 1, 0), sampler.sample(10, 1, 1));
    }

    #[test]
    fn mle_matches_closed_form_gaussian_mean() {
        let e = ghz_x(4, 0.1, Engine::Weak);
        let re_a = e.weak_values().unwrap().total.re;
        let grid = e.sum_grid(0.05).unwrap();
        let model = |g: f64| e.coincidences(g, &grid);
        let samples = CoincidenceSampler::new(&model(1e-3).unwrap()).unwrap().sample(10_000, 5, 0);
        let mean = pairwise_sum(&samples) / samples.len() as f64;
        let closed = -mean / re_a;
        let hw = 10.0 / (1e4 * 15.84f64 / 0.1f64.sin().powi(2)).sqrt();
        let g_hat = mle_estimate(&samples, model, 1e-3, hw).unwrap();
        // Interpolation on a grid with step ~0.004σ bounds the difference.
        assert!((g_hat - closed).abs() < 2e-4 * hw + 1e-7, "{g_hat} vs {closed}");
    }

    #[test]
    fn mle_unbiased_at_zero() {
        let e = ghz_x(2, 0.1, Engine::Weak);
        let grid = e.sum_grid(0.05).unwrap();
        let model = |g: f64| e.coincidences(g, &grid);
        let fi = fisher_quadrature(model, 0.0).unwrap().conditional;
        let samples = CoincidenceSampler::new(&model(0.0).unwrap()).unwrap().sample(10_000, 9, 0);
        let g_hat = mle_estimate(&samples, model, 0.0, 10.0 / (1e4 * fi).sqrt()).unwrap();
        assert!(g_hat.abs() < 3.0 / (1e4 * fi).sqrt());
    }

    #[test]
    fn mle_reports_boundary_maximum() {
        let e = ghz_x(2, 0.1, Engine::Weak);
        let grid = e.sum_grid(1.0).unwrap();
        let model = |g: f64| e.coincidences(g, &grid);
        let samples = CoincidenceSampler::new(&model(0.5).unwrap()).unwrap().sample(1000, 1, 0);
        let err = mle_estimate(&samples, model, 0.0, 1e-4).unwrap_err();
        assert!(err.is_convergence());
        assert!(mle_estimate(&samples[..10], model, 0.0, 1e-4).is_err());
    }

    #[test]
    fn small_estimation_run_is_consistent() {
        let e = ghz_x(2, 0.1, Engine::Weak);
        let cfg = EstimationConfig {
            true_g: 1e-3,
            n_events: 1000,
            replications: 40,
            seed: 3,
        };
        let run = run_estimation(&e, &cfg).unwrap();
        assert_eq!(run.estimates.len(), 40);
        assert_eq!(run, run_estimation(&e, &cfg).unwrap());
        assert!((run.crb_ratio - 1.0).abs() < 4.0 * (2.0f64 / 39.0).sqrt());
        assert!((run.mean_estimate - 1e-3).abs() < 4.0 * (run.crb / 40.0).sqrt());
    }

    #[test]
    fn slope_fit() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(-1.0)).collect();
        assert!((log_log_slope(&xs, &ys).unwrap() + 1.0).abs() < 1e-12);
        assert!(log_log_slope(&[1.0], &[1.0]).is_err());
        assert!(log_log_slope(&[1.0, 2.0], &[1.0, -1.0]).is_err());
    }
}
