use serde::Serialize;
use serde_json::json;
use wva_core::metrology::scaling_sweep_with;
use wva_core::validation::{engine_matrix, spdc_width_invariance, weak_breakdown, MatrixCase};
use wva_core::{
    fisher_report, g1, gn_sum_on, run_estimation, Complex64, Engine, Experiment, Grid1D, Variable,
};

use crate::error::CliError;
use crate::output::OutputDir;
use crate::plot::{Plot, Series};
use crate::scenario::Resolved;

const BLUE: &str = "#1f77b4";
const ORANGE: &str = "#d95f02";
const GREY: &str = "#777777";
const GREEN: &str = "#1b9e77";

/// Tolerance for pointwise agreement between engines.
const ENGINE_TOLERANCE: f64 = 1e-8;
/// Amplified strengths `g|A_w|/σ₀` probed by the breakdown report.
const BREAKDOWN_STRENGTHS: [f64; 7] = [0.01, 0.1, 0.3, 0.5, 0.75, 1.0, 2.0];

fn weak_value_json(w: Complex64) -> serde_json::Value {
    json!({ "re": w.re, "im": w.im })
}

/// `g·|A_w|/σ₀` for the scenario's meter.
fn amplified_strength(exp: &Experiment, g: f64) -> Option<f64> {
    let w = exp.weak_values().ok()?;
    Some((g * w.total.norm()).abs() / exp.meter.sum_variance().sqrt())
}

fn sum_grid(exp: &Experiment, g: f64, points: usize) -> Result<Grid1D, CliError> {
    let wide = exp.sum_grid(g)?;
    Ok(Grid1D::new(wide.start, wide.end, points)?)
}

#[derive(Serialize)]
struct DensityRow {
    s: f64,
    density: f64,
}

fn density_rows(grid: &Grid1D, density: &[f64]) -> Vec<DensityRow> {
    grid.points()
        .zip(density)
        .map(|(s, &density)| DensityRow { s, density })
        .collect()
}

#[derive(Serialize)]
struct PositionRow {
    x: f64,
    density: f64,
}

pub fn simulate(run: &Resolved, out: &mut OutputDir) -> Result<(), CliError> {
    let n = run.scenario.polarization.n_photons;
    let g = run.scenario.coupling.g;
    let exp = run.experiment(n)?;
    let grid = sum_grid(&exp, g, run.scenario.grid.points)?;
    let coupled = exp.coincidences(g, &grid)?;
    let bare = exp.coincidences(0.0, &grid)?;
    let first_order = Experiment {
        engine: Engine::Weak,
        ..exp.clone()
    };
    let weak_shift = match first_order.weak_values() {
        Ok(_) => Some(
            first_order.coincidences(g, &grid)?.mean - first_order.coincidences(0.0, &grid)?.mean,
        ),
        Err(_) => None,
    };

    out.csv("coincidences.csv", &density_rows(&grid, &coupled.density))?;
    out.csv("uncoupled.csv", &density_rows(&grid, &bare.density))?;

    let mut position = serde_json::Value::Null;
    if n == 1 {
        let pos = g1(&exp.state(g)?, Variable::Position)?;
        let rows: Vec<PositionRow> = pos
            .grid
            .points()
            .zip(&pos.density)
            .map(|(x, &density)| PositionRow { x, density })
            .collect();
        out.csv("position.csv", &rows)?;
        position = json!({ "mean": pos.mean, "variance": pos.variance, "norm": pos.norm });
    }

    let weak = exp.weak_values().ok();
    out.json(
        "coincidences.json",
        &json!({
            "engine": run.engine,
            "n_photons": n,
            "g": g,
            "operator": run.scenario.coupling.operator,
            "grid": grid,
            "postselection_probability": coupled.norm,
            "uncoupled_postselection_probability": bare.norm,
            "weak_value": weak.as_ref().map(|w| weak_value_json(w.total)),
            "amplified_strength": amplified_strength(&exp, g),
            "mean": coupled.mean,
            "variance": coupled.variance,
            "uncoupled_mean": bare.mean,
            "displacement": coupled.mean - bare.mean,
            "first_order_displacement": weak_shift,
            "position": position,
        }),
    )?;

    let cond = coupled.conditional_density();
    let cond0 = bare.conditional_density();
    let plot = Plot {
        title: format!("{}: {}-photon coincidences, g = {g}", run.scenario.name, n),
        x_label: "summed momentum".into(),
        y_label: "conditional density".into(),
        log_x: false,
        log_y: false,
        series: vec![
            Series {
                label: "uncoupled".into(),
                points: grid.points().zip(cond0.iter().copied()).collect(),
                color: GREY,
                markers: false,
                dashed: true,
            },
            Series {
                label: format!("g = {g}"),
                points: grid.points().zip(cond.iter().copied()).collect(),
                color: BLUE,
                markers: false,
                dashed: false,
            },
        ],
    };
    out.svg("coincidences.svg", plot.render())
}

pub fn fisher(run: &Resolved, out: &mut OutputDir) -> Result<(), CliError> {
    let n = run.scenario.polarization.n_photons;
    let g = run.scenario.coupling.g;
    let exp = run.experiment(n)?;
    let report = fisher_report(&exp, g)?;
    out.csv("fisher.csv", std::slice::from_ref(&report))?;
    let weak = exp.weak_values()?;
    out.json(
        "fisher.json",
        &json!({
            "n_photons": n,
            "report": report,
            "max_relative_spread": report.max_relative_spread(),
            "weak_value": weak_value_json(weak.total),
            "amplified_strength": amplified_strength(&exp, g),
        }),
    )
}

#[derive(Serialize)]
struct EstimateRow {
    replication: usize,
    g_hat: f64,
}

pub fn mc_estimate(run: &Resolved, out: &mut OutputDir) -> Result<(), CliError> {
    let n = run.scenario.polarization.n_photons;
    let exp = run.experiment(n)?;
    let result = run_estimation(&exp, &run.estimation())?;
    let rows: Vec<EstimateRow> = result
        .estimates
        .iter()
        .enumerate()
        .map(|(replication, &g_hat)| EstimateRow { replication, g_hat })
        .collect();
    out.csv("estimates.csv", &rows)?;
    out.json(
        "estimation.json",
        &json!({
            "n_photons": n,
            "engine": run.engine,
            "true_g": result.true_g,
            "n_events": result.n_events,
            "replications": result.estimates.len(),
            "seed": result.seed,
            "mean_estimate": result.mean_estimate,
            "empirical_variance": result.empirical_variance,
            "fisher_per_event": result.fisher_per_event,
            "crb": result.crb,
            "crb_ratio": result.crb_ratio,
            "crb_ratio_standard_error": result.ratio_standard_error(),
        }),
    )
}

pub fn sweep(run: &Resolved, out: &mut OutputDir) -> Result<(), CliError> {
    let ns = &run.scenario.sweep.photon_numbers;
    let table = scaling_sweep_with(ns, &run.estimation(), |n| run.experiment(n))?;
    out.csv("sweep.csv", &table.rows)?;
    out.json(
        "sweep.json",
        &json!({
            "engine": run.engine,
            "seed": table.seed,
            "slope": table.slope,
            "heisenberg_slope": -1.0,
            "standard_quantum_limit_slope": -0.5,
            "rows": table.rows,
        }),
    )?;

    let first = &table.rows[0];
    let anchor = first.delta_g * first.n_photons as f64;
    let anchor_sql = first.delta_g * (first.n_photons as f64).sqrt();
    let xs: Vec<f64> = table.rows.iter().map(|r| r.n_photons as f64).collect();
    let plot = Plot {
        title: format!(
            "{}: estimator spread, fitted slope {:.3}",
            run.scenario.name, table.slope
        ),
        x_label: "photon number N".into(),
        y_label: "Δg".into(),
        log_x: true,
        log_y: true,
        series: vec![
            Series {
                label: "Monte Carlo Δg".into(),
                points: table
                    .rows
                    .iter()
                    .map(|r| (r.n_photons as f64, r.delta_g))
                    .collect(),
                color: BLUE,
                markers: true,
                dashed: false,
            },
            Series {
                label: "Cramér-Rao bound".into(),
                points: table
                    .rows
                    .iter()
                    .map(|r| (r.n_photons as f64, r.crb.sqrt()))
                    .collect(),
                color: ORANGE,
                markers: true,
                dashed: true,
            },
            Series {
                label: "1/N".into(),
                points: xs.iter().map(|&x| (x, anchor / x)).collect(),
                color: GREY,
                markers: false,
                dashed: true,
            },
            Series {
                label: "1/√N".into(),
                points: xs.iter().map(|&x| (x, anchor_sql / x.sqrt())).collect(),
                color: GREEN,
                markers: false,
                dashed: true,
            },
        ],
    };
    out.svg("sweep.svg", plot.render())
}

#[derive(Debug, Clone, Serialize)]
pub struct Check {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Self {
            name,
            passed,
            detail,
        }
    }

    pub fn line(&self) -> String {
        format!(
            "{} {}: {}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.detail
        )
    }
}

#[derive(Serialize)]
struct MatrixRow<'a> {
    n_photons: usize,
    family: &'a str,
    operator: wva_core::MeterOperator,
    state: &'static str,
    uniform_branches: bool,
    max_abs_diff: f64,
    exact_norm: f64,
    grid_norm: f64,
}

impl<'a> From<&'a MatrixCase> for MatrixRow<'a> {
    fn from(c: &'a MatrixCase) -> Self {
        Self {
            n_photons: c.n_photons,
            family: &c.family,
            operator: c.operator,
            state: c.state.name(),
            uniform_branches: c.uniform_branches,
            max_abs_diff: c.max_abs_diff,
            exact_norm: c.exact_norm,
            grid_norm: c.grid_norm,
        }
    }
}

/// Runs every invariant and returns the checks in report order.
pub fn validate(run: &Resolved, out: &mut OutputDir) -> Result<Vec<Check>, CliError> {
    let mut checks = Vec::new();

    let cases = engine_matrix()?;
    let worst = cases.iter().map(|c| c.max_abs_diff).fold(0.0, f64::max);
    let failing = cases
        .iter()
        .filter(|c| c.max_abs_diff >= ENGINE_TOLERANCE)
        .count();
    checks.push(Check::new(
        "engine-matrix",
        failing == 0,
        format!(
            "{} cases, {failing} above {ENGINE_TOLERANCE:e}, worst {worst:.2e}",
            cases.len()
        ),
    ));
    let rows: Vec<MatrixRow> = cases.iter().map(MatrixRow::from).collect();
    out.csv("engine_matrix.csv", &rows)?;

    let width = spdc_width_invariance(0.1, 10.0)?;
    checks.push(Check::new(
        "spdc-width-invariance",
        width < ENGINE_TOLERANCE,
        format!("max difference D=0.1 vs D=10: {width:.2e}"),
    ));

    let breakdown = weak_breakdown(4, 0.1, 1.0, &BREAKDOWN_STRENGTHS)?;
    out.csv("breakdown.csv", &breakdown)?;
    let inside = breakdown
        .iter()
        .filter(|p| p.strength <= 0.01)
        .map(|p| p.relative_deviation)
        .fold(0.0, f64::max);
    let beyond = breakdown
        .iter()
        .filter(|p| p.strength >= 0.5)
        .map(|p| p.relative_deviation)
        .fold(f64::INFINITY, f64::min);
    let report: Vec<String> = breakdown
        .iter()
        .map(|p| format!("{}:{:.2}%", p.strength, 100.0 * p.relative_deviation))
        .collect();
    checks.push(Check::new(
        "weak-breakdown",
        inside < 0.01 && beyond > 0.05,
        format!("deviation by g|A_w|/σ₀ {}", report.join(" ")),
    ));

    let n = run.scenario.polarization.n_photons;
    let g = run.scenario.coupling.g;
    let exact = Experiment {
        engine: Engine::Exact,
        ..run.experiment(n)?
    };
    let overlap = exact.branches()?.overlap().norm_sqr();
    let ps0 = exact.state(0.0)?.postselection_probability();
    checks.push(Check::new(
        "scenario-postselection",
        (ps0 - overlap).abs() < 1e-12,
        format!("p_s(g=0) = {ps0:.12e}, |<f|i>|² = {overlap:.12e}"),
    ));
    if n <= 2 {
        let grid = sum_grid(&exact, g, run.scenario.grid.points)?;
        let grid_exp = Experiment {
            engine: Engine::Grid,
            ..exact.clone()
        };
        let a = gn_sum_on(&exact.state(g)?, &grid)?;
        let b = grid_exp.coincidences(g, &grid)?;
        let diff = a
            .density
            .iter()
            .zip(&b.density)
            .map(|(x, y)| (x - y).abs())
            .fold(0.0, f64::max);
        checks.push(Check::new(
            "scenario-exact-vs-grid",
            diff < ENGINE_TOLERANCE,
            format!("max density difference {diff:.2e} at g = {g}"),
        ));
    }

    out.json(
        "validate.json",
        &json!({
            "passed": checks.iter().all(|c| c.passed),
            "checks": checks,
            "breakdown": breakdown,
        }),
    )?;
    Ok(checks)
}
