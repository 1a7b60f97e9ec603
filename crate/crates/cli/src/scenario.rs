//! TOML scenario files and their translation into core types.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use wva_core::metrology::EstimationConfig;
use wva_core::{
    make_ghz_initial, make_phase_final, make_rotated_final, CouplingObservable, Engine, Experiment,
    GaussianProductMeter, Meter, MeterOperator, PhaseVariant, SpdcPairMeter, SumGaussianMeter,
};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Simulate,
    Fisher,
    McEstimate,
    Sweep,
    Validate,
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Simulate => "simulate",
            Task::Fisher => "fisher",
            Task::McEstimate => "mc-estimate",
            Task::Sweep => "sweep",
            Task::Validate => "validate",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FinalFamily {
    Rotated,
    Phase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolarizationSpec {
    pub n_photons: usize,
    pub epsilon: f64,
    #[serde(default = "one")]
    pub k: f64,
    #[serde(rename = "final", default = "rotated")]
    pub final_family: FinalFamily,
    #[serde(default)]
    pub variant: PhaseVariant,
    #[serde(default = "one")]
    pub a_h: f64,
    #[serde(default = "minus_one")]
    pub a_v: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeterFamily {
    GaussianProduct,
    Spdc,
    SumGaussian,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeterSpec {
    pub family: MeterFamily,
    #[serde(default)]
    pub p0: f64,
    #[serde(default = "one")]
    pub sigma0: f64,
    /// SPDC sinc width.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d: Option<f64>,
    /// Spread of the internal (difference) coordinates of the separable meter.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub internal_sigma: Option<f64>,
    /// Per-photon means and widths of the product meter; `p0`/`sigma0` fill in when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub means: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigmas: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingSpec {
    #[serde(default = "default_g")]
    pub g: f64,
    #[serde(default = "default_operator")]
    pub operator: MeterOperator,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub engine: Option<Engine>,
}

impl Default for CouplingSpec {
    fn default() -> Self {
        Self {
            g: default_g(),
            operator: default_operator(),
            engine: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSettings {
    #[serde(default = "default_points")]
    pub points: usize,
}

impl Default for GridSettings {
    fn default() -> Self {
        Self {
            points: default_points(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimationSpec {
    #[serde(default = "default_events")]
    pub n_events: usize,
    #[serde(default = "default_replications")]
    pub replications: usize,
}

impl Default for EstimationSpec {
    fn default() -> Self {
        Self {
            n_events: default_events(),
            replications: default_replications(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    #[serde(default = "default_photon_numbers")]
    pub photon_numbers: Vec<usize>,
}

impl Default for SweepSpec {
    fn default() -> Self {
        Self {
            photon_numbers: default_photon_numbers(),
        }
    }
}

/// One scenario file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub task: Option<Task>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    pub polarization: PolarizationSpec,
    pub meter: MeterSpec,
    #[serde(default)]
    pub coupling: CouplingSpec,
    #[serde(default)]
    pub grid: GridSettings,
    #[serde(default)]
    pub estimation: EstimationSpec,
    #[serde(default)]
    pub sweep: SweepSpec,
}

fn one() -> f64 {
    1.0
}
fn minus_one() -> f64 {
    -1.0
}
fn rotated() -> FinalFamily {
    FinalFamily::Rotated
}
fn default_g() -> f64 {
    1e-3
}
fn default_operator() -> MeterOperator {
    MeterOperator::X
}
fn default_points() -> usize {
    4096
}
fn default_events() -> usize {
    10_000
}
fn default_replications() -> usize {
    200
}
fn default_photon_numbers() -> Vec<usize> {
    vec![1, 2, 4, 8]
}

pub const DEFAULT_SEED: u64 = 0;
pub const DEFAULT_OUT: &str = "wva-out";
pub const DEFAULT_ENGINE: Engine = Engine::Exact;

/// Parses a scenario, reporting the 1-based line and column of any error.
pub fn parse(text: &str) -> Result<Scenario, CliError> {
    toml::from_str(text).map_err(|e| {
        let (line, column) = match e.span() {
            Some(span) => line_column(text, span.start),
            None => (1, 1),
        };
        CliError::Parse {
            message: e.message().to_string(),
            line,
            column,
        }
    })
}

fn line_column(text: &str, offset: usize) -> (usize, usize) {
    let before = &text[..offset.min(text.len())];
    let line = before.matches('\n').count() + 1;
    let column = before.rsplit('\n').next().map_or(0, |l| l.chars().count()) + 1;
    (line, column)
}

/// Scenario with command-line overrides applied.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub task: Task,
    pub engine: Engine,
    pub seed: u64,
    pub out: PathBuf,
    pub scenario: Scenario,
}

impl Resolved {
    pub fn new(
        scenario: Scenario,
        task: Task,
        engine: Option<Engine>,
        seed: Option<u64>,
        out: Option<PathBuf>,
    ) -> Self {
        Self {
            task,
            engine: engine
                .or(scenario.coupling.engine)
                .unwrap_or(DEFAULT_ENGINE),
            seed: seed.or(scenario.seed).unwrap_or(DEFAULT_SEED),
            out: out
                .or_else(|| scenario.out.clone())
                .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT)),
            scenario,
        }
    }

    /// Every precondition problem at once.
    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.scenario;
        let p = &s.polarization;
        let mut problems = Vec::new();
        let mut check = |ok: bool, msg: String| {
            if !ok {
                problems.push(msg);
            }
        };
        check(!s.name.trim().is_empty(), "name must not be empty".into());
        let photon_numbers: Vec<usize> = match self.task {
            Task::Sweep => s.sweep.photon_numbers.clone(),
            _ => vec![p.n_photons],
        };
        check(
            !photon_numbers.is_empty(),
            "sweep.photon_numbers must not be empty".into(),
        );
        for &n in &photon_numbers {
            check(
                (1..=wva_core::polarization::MAX_PHOTONS).contains(&n),
                format!(
                    "photon number {n} outside 1..={}",
                    wva_core::polarization::MAX_PHOTONS
                ),
            );
            if self.engine == Engine::Grid {
                check(
                    n <= 2,
                    format!("grid engine handles at most 2 photons (got {n})"),
                );
            }
            if s.meter.family == MeterFamily::Spdc {
                check(
                    n == 2,
                    format!("spdc meter describes exactly 2 photons (got {n})"),
                );
            }
        }
        check(
            p.epsilon.is_finite(),
            "polarization.epsilon must be finite".into(),
        );
        check(
            p.k >= 1.0,
            format!("polarization.k must be at least 1 (got {})", p.k),
        );
        check(
            p.a_h != p.a_v,
            "polarization.a_h and a_v must differ".into(),
        );
        check(
            s.meter.sigma0 > 0.0,
            format!("meter.sigma0 must be positive (got {})", s.meter.sigma0),
        );
        if let Some(d) = s.meter.d {
            check(d > 0.0, format!("meter.d must be positive (got {d})"));
        }
        check(s.coupling.g.is_finite(), "coupling.g must be finite".into());
        check(
            s.grid.points >= 256,
            format!("grid.points must be at least 256 (got {})", s.grid.points),
        );
        if matches!(self.task, Task::McEstimate | Task::Sweep) {
            check(
                s.estimation.n_events >= 100,
                format!(
                    "estimation.n_events must be at least 100 (got {})",
                    s.estimation.n_events
                ),
            );
            check(
                s.estimation.replications >= 2,
                format!(
                    "estimation.replications must be at least 2 (got {})",
                    s.estimation.replications
                ),
            );
        }
        if problems.is_empty() {
            Ok(())
        } else {
            Err(CliError::Precondition(problems))
        }
    }

    pub fn meter(&self, n: usize) -> wva_core::Result<Meter> {
        let m = &self.scenario.meter;
        Ok(match m.family {
            MeterFamily::Spdc => SpdcPairMeter::new(m.p0, m.sigma0, m.d.unwrap_or(1.0))?.into(),
            MeterFamily::SumGaussian => match m.internal_sigma {
                Some(t) => SumGaussianMeter::new(n, m.p0, m.sigma0, t)?.into(),
                None => SumGaussianMeter::with_default_internal(n, m.p0, m.sigma0)?.into(),
            },
            MeterFamily::GaussianProduct => {
                let means = m.means.clone().unwrap_or_else(|| vec![m.p0; n]);
                let sigmas = m.sigmas.clone().unwrap_or_else(|| vec![m.sigma0; n]);
                GaussianProductMeter::new(means, sigmas)?.into()
            }
        })
    }

    pub fn experiment(&self, n: usize) -> wva_core::Result<Experiment> {
        let p = &self.scenario.polarization;
        let fin = match p.final_family {
            FinalFamily::Rotated => make_rotated_final(n, p.epsilon, p.k)?,
            FinalFamily::Phase => make_phase_final(n, p.epsilon * p.k, p.variant)?,
        };
        Experiment::new(
            make_ghz_initial(n)?,
            fin,
            CouplingObservable::new(p.a_h, p.a_v)?,
            self.meter(n)?,
            self.scenario.coupling.operator,
            self.engine,
        )
    }

    pub fn estimation(&self) -> EstimationConfig {
        EstimationConfig {
            true_g: self.scenario.coupling.g,
            n_events: self.scenario.estimation.n_events,
            replications: self.scenario.estimation.replications,
            seed: self.seed,
        }
    }
}
