//! Command implementations behind the `median-consensus` binary.
//!
//! Every command returns a typed result; [`exit_code`] maps errors to the
//! process status (0 success, 1 rejected or failed run, 2 usage or parse
//! error).

pub mod output;
pub mod scenario;
pub mod sweep;

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use crate::analysis::{EnsembleStats, MetricsObserver, MetricsReport};
use crate::engine::{run_ensemble_with, run_with, SimulationConfig};
use crate::error::{Error, Result};
use crate::network::neighbor_counts;
use crate::protocol::{instability_band, validate_params, ValidationMode, ValidationReport};
use output::{
    generator_tag, write_atomic, write_json, PlotWriter, TraceCsvWriter, TraceMetadata,
    TRACE_FORMAT_VERSION,
};
use scenario::{Scenario, ScenarioFile};
use sweep::{run_sweep, summarise, summary_csv, SweepPoint, SweepSpec};

pub const TRACE_FILE: &str = "trace.csv";
pub const META_FILE: &str = "trace.meta.json";
pub const METRICS_FILE: &str = "metrics.json";
pub const PLOTS_DIR: &str = "plots";
pub const ENSEMBLE_FILE: &str = "ensemble.csv";
pub const ENSEMBLE_SUMMARY_FILE: &str = "ensemble_summary.json";
pub const SWEEP_SUMMARY_FILE: &str = "sweep_summary.csv";

#[derive(Debug, Clone, Default)]
pub struct RunArgs {
    pub scenario: PathBuf,
    pub out: PathBuf,
    /// Overrides the scenario's loss seed.
    pub seed: Option<u64>,
    /// Ensemble size; the trace is always that of the first run.
    pub runs: Option<usize>,
    pub strict: bool,
    pub quantize: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: ValidationReport,
    pub metrics: MetricsReport,
    pub ensemble: Option<SweepPoint>,
    pub files: Vec<PathBuf>,
}

#[derive(Debug, Clone, Default)]
pub struct SweepArgs {
    pub sweep: PathBuf,
    pub out: PathBuf,
    pub strict: bool,
}

#[derive(Debug, Clone)]
pub struct SweepOutcome {
    pub points: Vec<SweepPoint>,
    pub summary: PathBuf,
}

#[derive(Debug, Clone, Default)]
pub struct ValidateArgs {
    pub scenario: PathBuf,
    pub strict: bool,
}

/// Process exit status for a command result.
pub fn exit_code(result: &Result<()>) -> i32 {
    match result {
        Ok(()) => 0,
        Err(Error::Usage(_) | Error::Parse { .. }) => 2,
        Err(_) => 1,
    }
}

fn prepare_out_dir(out: &Path) -> Result<()> {
    if out.as_os_str().is_empty() {
        return Err(Error::Usage("--out must name a directory".into()));
    }
    fs::create_dir_all(out)?;
    Ok(())
}

fn apply_overrides(config: &mut SimulationConfig, args: &RunArgs) {
    if let Some(seed) = args.seed {
        config.loss.seed = seed;
    }
    if args.strict {
        config.options.validation = ValidationMode::Strict;
    }
    if let Some(q) = args.quantize {
        config.options.quantization = Some(q);
    }
}

#[derive(Serialize)]
struct MetricsFile<'a> {
    scenario: &'a str,
    seed: u64,
    drop_probability: f64,
    metrics: &'a MetricsReport,
}

#[derive(Serialize)]
struct EnsembleSummaryFile<'a> {
    scenario: &'a str,
    seed_base: u64,
    drop_probability: f64,
    runs: usize,
    settling_not_reached: usize,
    settling: Option<EnsembleStats>,
    convergence: Option<EnsembleStats>,
    steady_state_error: Option<EnsembleStats>,
}

/// Runs one scenario and writes trace, sidecar, metrics and plot data.
pub fn cmd_run(args: &RunArgs) -> Result<RunOutcome> {
    if args.out.as_os_str().is_empty() {
        return Err(Error::Usage("--out must name a directory".into()));
    }
    if args.runs == Some(0) {
        return Err(Error::Usage("--runs must be at least 1".into()));
    }
    if args.quantize.is_some_and(|q| !(q.is_finite() && q > 0.0)) {
        return Err(Error::Usage("--quantize must be a positive step".into()));
    }
    let mut scenario = Scenario::load(&args.scenario)?;
    apply_overrides(&mut scenario.config, args);
    let config = &scenario.config;
    config.validate()?;
    prepare_out_dir(&args.out)?;

    let n = config.n();
    let alpha = config.params.alpha;
    let counts = neighbor_counts(&config.topology);
    let r_min = counts.iter().copied().min().unwrap_or(1);
    let band = instability_band(&config.params, r_min).ok();
    let alpha_over_r = counts.iter().map(|&r| alpha / r as f64).collect();

    let mut trace_writer = TraceCsvWriter::create(&args.out.join(TRACE_FILE), n)?;
    let mut plots = PlotWriter::create(
        &args.out.join(PLOTS_DIR),
        config.total_steps,
        alpha_over_r,
        band,
    )?;
    let mut metrics = MetricsObserver::new(scenario.tolerance, n);
    let summary = run_with(config, &mut (&mut trace_writer, (&mut metrics, &mut plots)))?;
    let metrics = metrics.report()?;

    let meta = TraceMetadata {
        format_version: TRACE_FORMAT_VERSION,
        generator: generator_tag(),
        scenario_name: scenario.name.clone(),
        n,
        total_steps: config.total_steps,
        seed: config.loss.seed,
        drop_probability: config.loss.drop_probability,
        y_bands: counts.iter().map(|&r| 2.0 * alpha / r as f64).collect(),
        scenario: toml::Value::try_from(ScenarioFile::from_scenario(&scenario))
            .map_err(|e| Error::Config(format!("cannot echo scenario: {e}")))?,
    };

    let mut files = vec![trace_writer.finish()?];
    files.extend(plots.finish()?);
    files.push(write_json(&args.out.join(META_FILE), &meta)?);
    files.push(write_json(
        &args.out.join(METRICS_FILE),
        &MetricsFile {
            scenario: &scenario.name,
            seed: config.loss.seed,
            drop_probability: config.loss.drop_probability,
            metrics: &metrics,
        },
    )?);

    let ensemble = match args.runs {
        Some(runs) if runs > 1 => {
            let seed_base = config.loss.seed;
            let observers = run_ensemble_with(config, runs, seed_base, |_| {
                MetricsObserver::new(scenario.tolerance, n)
            })?;
            let reports = observers
                .iter()
                .map(MetricsObserver::report)
                .collect::<Result<Vec<_>>>()?;
            files.push(write_atomic(
                &args.out.join(ENSEMBLE_FILE),
                ensemble_csv(seed_base, &reports)?.as_bytes(),
            )?);
            let point = summarise(vec![config.loss.drop_probability], &reports)?;
            files.push(write_json(
                &args.out.join(ENSEMBLE_SUMMARY_FILE),
                &EnsembleSummaryFile {
                    scenario: &scenario.name,
                    seed_base,
                    drop_probability: config.loss.drop_probability,
                    runs: point.runs,
                    settling_not_reached: point.settling_not_reached,
                    settling: point.settling,
                    convergence: point.convergence,
                    steady_state_error: point.steady_state_error,
                },
            )?);
            Some(point)
        }
        _ => None,
    };

    Ok(RunOutcome {
        report: summary.report,
        metrics,
        ensemble,
        files,
    })
}

fn ensemble_csv(seed_base: u64, reports: &[MetricsReport]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| Error::Config(format!("cannot write ensemble table: {e}"));
    w.write_record([
        "run",
        "seed",
        "settling_time",
        "convergence_time",
        "steady_state_error",
    ])
    .map_err(err)?;
    for (i, r) in reports.iter().enumerate() {
        let opt = |v: Option<usize>| v.map(|v| v.to_string()).unwrap_or_default();
        w.write_record([
            i.to_string(),
            seed_base.wrapping_add(i as u64).to_string(),
            opt(r.settling_time),
            opt(r.convergence_time),
            r.epsilon_ss.to_string(),
        ])
        .map_err(err)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Runs a sweep file and writes `sweep_summary.csv`.
pub fn cmd_sweep(args: &SweepArgs) -> Result<SweepOutcome> {
    if args.out.as_os_str().is_empty() {
        return Err(Error::Usage("--out must name a directory".into()));
    }
    let spec = SweepSpec::load(&args.sweep)?;
    let base_path = args
        .sweep
        .parent()
        .unwrap_or(Path::new("."))
        .join(&spec.base);
    let mut base = Scenario::load(&base_path)?;
    if args.strict {
        base.config.options.validation = ValidationMode::Strict;
    }
    prepare_out_dir(&args.out)?;
    let points = run_sweep(&spec, &base)?;
    let summary = write_atomic(
        &args.out.join(SWEEP_SUMMARY_FILE),
        summary_csv(&spec, &points)?.as_bytes(),
    )?;
    Ok(SweepOutcome { points, summary })
}

/// Checks a scenario's parameters. The lenient report is always returned;
/// with `strict` any failed condition is an error instead.
pub fn cmd_validate(args: &ValidateArgs) -> Result<ValidationReport> {
    let scenario = Scenario::load(&args.scenario)?;
    let params = &scenario.config.params;
    if args.strict {
        validate_params(params, ValidationMode::Strict)?;
    }
    validate_params(params, ValidationMode::Lenient)
}
