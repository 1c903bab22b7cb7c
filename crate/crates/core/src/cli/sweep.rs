//! Parameter sweeps: ensembles over a grid of one or two swept values.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::scenario::Scenario;
use crate::analysis::{ensemble_stats, EnsembleStats, MetricsObserver, MetricsReport};
use crate::engine::{run_ensemble_with, SimulationConfig};
use crate::error::{Error, Result};
use crate::protocol::ValidationMode;

/// Quantities a sweep may vary.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweptParameter {
    Alpha,
    Beta,
    Gamma,
    Kappa,
    DropProbability,
}

impl SweptParameter {
    pub fn name(self) -> &'static str {
        match self {
            Self::Alpha => "alpha",
            Self::Beta => "beta",
            Self::Gamma => "gamma",
            Self::Kappa => "kappa",
            Self::DropProbability => "drop_probability",
        }
    }

    pub fn apply(self, config: &mut SimulationConfig, value: f64) {
        match self {
            Self::Alpha => config.params.alpha = value,
            Self::Beta => config.params.beta = value,
            Self::Gamma => config.params.gamma = value,
            Self::Kappa => config.params.kappa = value,
            Self::DropProbability => config.loss.drop_probability = value,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepDimension {
    pub parameter: SweptParameter,
    pub values: Vec<f64>,
}

/// Sweep file contents. `base` is resolved relative to the sweep file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    pub base: PathBuf,
    pub runs: usize,
    #[serde(default)]
    pub seed_base: u64,
    /// Overrides the base scenario's validation mode for every point.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub validation: Option<ValidationMode>,
    pub dimensions: Vec<SweepDimension>,
}

impl SweepSpec {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        let spec: Self =
            toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string().trim_end()))?;
        spec.check()
            .map_err(|e| Error::parse(origin, e.to_string()))?;
        Ok(spec)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::parse(path, e.to_string()))?;
        Self::parse(&text, path)
    }

    pub fn check(&self) -> Result<()> {
        if self.runs == 0 {
            return Err(Error::Config("runs: must be at least 1".into()));
        }
        if self.dimensions.is_empty() || self.dimensions.len() > 2 {
            return Err(Error::Config(format!(
                "dimensions: expected one or two, found {}",
                self.dimensions.len()
            )));
        }
        for (i, d) in self.dimensions.iter().enumerate() {
            if d.values.is_empty() {
                return Err(Error::Config(format!(
                    "dimensions[{i}].values: `{}` has an empty value list",
                    d.parameter.name()
                )));
            }
            if d.values.iter().any(|v| !v.is_finite()) {
                return Err(Error::Config(format!(
                    "dimensions[{i}].values: must be finite"
                )));
            }
        }
        if self.dimensions.len() == 2
            && self.dimensions[0].parameter == self.dimensions[1].parameter
        {
            return Err(Error::Config(
                "dimensions: the same parameter is swept twice".into(),
            ));
        }
        Ok(())
    }

    /// Cartesian grid, first dimension slowest.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut grid = vec![Vec::new()];
        for d in &self.dimensions {
            grid = grid
                .into_iter()
                .flat_map(|prefix| {
                    d.values.iter().map(move |&v| {
                        let mut p = prefix.clone();
                        p.push(v);
                        p
                    })
                })
                .collect();
        }
        grid
    }
}

/// Ensemble statistics at one grid point; `None` when no run reached the
/// metric.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub values: Vec<f64>,
    pub runs: usize,
    pub settling: Option<EnsembleStats>,
    pub convergence: Option<EnsembleStats>,
    pub steady_state_error: Option<EnsembleStats>,
    pub settling_not_reached: usize,
}

fn stats(values: &[Option<f64>]) -> Result<Option<EnsembleStats>> {
    match ensemble_stats(values) {
        Ok(s) => Ok(Some(s)),
        Err(Error::UndefinedStats) => Ok(None),
        Err(e) => Err(e),
    }
}

/// Summarises one point's per-run metric reports.
pub fn summarise(values: Vec<f64>, reports: &[MetricsReport]) -> Result<SweepPoint> {
    let ts: Vec<_> = reports
        .iter()
        .map(|r| r.settling_time.map(|t| t as f64))
        .collect();
    let tc: Vec<_> = reports
        .iter()
        .map(|r| r.convergence_time.map(|t| t as f64))
        .collect();
    let ess: Vec<_> = reports.iter().map(|r| Some(r.epsilon_ss)).collect();
    Ok(SweepPoint {
        values,
        runs: reports.len(),
        settling_not_reached: ts.iter().filter(|t| t.is_none()).count(),
        settling: stats(&ts)?,
        convergence: stats(&tc)?,
        steady_state_error: stats(&ess)?,
    })
}

/// Runs every grid point as an ensemble of `spec.runs` seeds.
pub fn run_sweep(spec: &SweepSpec, base: &Scenario) -> Result<Vec<SweepPoint>> {
    spec.check()?;
    let cycle = base.config.n();
    spec.points()
        .into_iter()
        .map(|values| {
            let mut config = base.config.clone();
            for (d, &v) in spec.dimensions.iter().zip(&values) {
                d.parameter.apply(&mut config, v);
            }
            if let Some(mode) = spec.validation {
                config.options.validation = mode;
            }
            let observers = run_ensemble_with(&config, spec.runs, spec.seed_base, |_| {
                MetricsObserver::new(base.tolerance, cycle)
            })?;
            let reports = observers
                .iter()
                .map(MetricsObserver::report)
                .collect::<Result<Vec<_>>>()?;
            summarise(values, &reports)
        })
        .collect()
}

pub fn summary_header(spec: &SweepSpec) -> Vec<String> {
    let mut h: Vec<String> = spec
        .dimensions
        .iter()
        .map(|d| d.parameter.name().to_string())
        .collect();
    h.extend(
        [
            "runs",
            "settled_runs",
            "mean_settling_time",
            "sd_settling_time",
            "mean_convergence_time",
            "sd_convergence_time",
            "mean_steady_state_error",
            "sd_steady_state_error",
        ]
        .map(String::from),
    );
    h
}

fn opt(v: Option<f64>) -> String {
    v.map(|v| v.to_string()).unwrap_or_default()
}

/// CSV text of the summary table; metrics no run reached are left empty.
pub fn summary_csv(spec: &SweepSpec, points: &[SweepPoint]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let csv_err = |e: csv::Error| Error::Config(format!("cannot write summary: {e}"));
    w.write_record(summary_header(spec)).map_err(csv_err)?;
    for p in points {
        let mut rec: Vec<String> = p.values.iter().map(f64::to_string).collect();
        rec.push(p.runs.to_string());
        rec.push((p.runs - p.settling_not_reached).to_string());
        for s in [&p.settling, &p.convergence, &p.steady_state_error] {
            rec.push(opt(s.map(|s| s.mean)));
            rec.push(opt(s.map(|s| s.std_dev)));
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
