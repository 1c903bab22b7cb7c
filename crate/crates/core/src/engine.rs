//! Global stepping of the protocol under the round-robin schedule.
//!
//! One step `k`:
//! 1. `z^k` is sampled from the reference signals,
//! 2. the slot owner `j` broadcasts its pre-step `x_j^k`,
//! 3. every receiver applies the local update against that same value,
//! 4. the new state is handed to the [`Observer`].
//!
//! Row `k` of a trace holds `x^k, y^k, z^k`; the transmitter and receiver
//! set stored in row `k` are the ones that produced it (row 0 has none).

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::network::{deliveries_into, neighbor_counts, LossModel, Schedule, Topology};
use crate::protocol::{
    self, update_unchecked, validate_params, AgentState, ProtocolParams, ValidationMode,
    ValidationReport,
};
use crate::signals::{evaluate_into, ReferenceSignal};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EngineOptions {
    /// The transmitter also updates itself in its own slot.
    pub self_update: bool,
    /// Clamp `y` into `[-2 alpha / r, 2 alpha / r]` after every update.
    pub y_clamp: bool,
    /// Round the over-the-air `x_j` to a multiple of this step.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub quantization: Option<f64>,
    pub validation: ValidationMode,
}

impl Default for EngineOptions {
    fn default() -> Self {
        Self {
            self_update: true,
            y_clamp: false,
            quantization: None,
            validation: ValidationMode::Lenient,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub params: ProtocolParams,
    pub topology: Topology,
    pub schedule: Schedule,
    pub loss: LossModel,
    pub signals: Vec<ReferenceSignal>,
    pub total_steps: usize,
    pub options: EngineOptions,
}

impl SimulationConfig {
    /// Lossless round-robin configuration with default options.
    pub fn new(
        params: ProtocolParams,
        topology: Topology,
        signals: Vec<ReferenceSignal>,
        total_steps: usize,
    ) -> Self {
        let n = topology.n();
        Self {
            params,
            topology,
            schedule: Schedule::round_robin(n),
            loss: LossModel::lossless(),
            signals,
            total_steps,
            options: EngineOptions::default(),
        }
    }

    pub fn with_loss(mut self, drop_probability: f64, seed: u64) -> Self {
        self.loss = LossModel {
            drop_probability,
            seed,
        };
        self
    }

    pub fn with_options(mut self, options: EngineOptions) -> Self {
        self.options = options;
        self
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    /// Checks structural consistency, then the protocol parameters under
    /// `options.validation`.
    pub fn validate(&self) -> Result<ValidationReport> {
        let n = self.topology.n();
        if self.params.n != n {
            return Err(Error::Config(format!(
                "params.n = {} but topology has {n} agents",
                self.params.n
            )));
        }
        if self.schedule.n() != n {
            return Err(Error::Config(format!(
                "schedule covers {} agents, topology has {n}",
                self.schedule.n()
            )));
        }
        if self.signals.len() != n {
            return Err(Error::Config(format!(
                "{} signals for {n} agents",
                self.signals.len()
            )));
        }
        if self.total_steps == 0 {
            return Err(Error::Config("total_steps must be at least 1".into()));
        }
        for (i, s) in self.signals.iter().enumerate() {
            s.validate().map_err(|e| match e {
                Error::InvalidSignal { field, reason } => Error::InvalidSignal {
                    field: format!("signals[{i}].{field}"),
                    reason,
                },
                other => other,
            })?;
        }
        self.loss.check()?;
        if let Some(q) = self.options.quantization {
            if !(q.is_finite() && q > 0.0) {
                return Err(Error::InvalidParameter {
                    name: "quantization",
                    value: q.to_string(),
                    reason: "must be finite and strictly positive",
                });
            }
        }
        let report = validate_params(&self.params, self.options.validation)?;
        if !report.permits_run() {
            let failed = report.failures().next().expect("a failure blocks the run");
            return Err(Error::ConstraintViolation {
                condition: failed.condition.label().to_string(),
            });
        }
        Ok(report)
    }
}

/// One trace row as seen by an observer.
#[derive(Debug, Clone, Copy)]
pub struct StepRecord<'a> {
    pub k: usize,
    pub transmitter: Option<usize>,
    pub delivered: &'a [usize],
    pub x: &'a [f64],
    pub y: &'a [f64],
    pub z: &'a [f64],
    pub lyapunov: f64,
    pub band_violations: &'a [bool],
}

/// Receives every row of a run, starting with the initial state at `k = 0`.
pub trait Observer {
    fn observe(&mut self, record: &StepRecord<'_>);
}

impl<A: Observer, B: Observer> Observer for (A, B) {
    fn observe(&mut self, record: &StepRecord<'_>) {
        self.0.observe(record);
        self.1.observe(record);
    }
}

impl<O: Observer + ?Sized> Observer for &mut O {
    fn observe(&mut self, record: &StepRecord<'_>) {
        (**self).observe(record);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub k: usize,
    pub transmitter: Option<usize>,
    pub delivered: Vec<usize>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    pub lyapunov: f64,
    pub band_violations: Vec<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub n: usize,
    /// Per-agent `y` band half-widths `2 alpha / r_i` behind the violation flags.
    pub y_bands: Vec<f64>,
    pub rows: Vec<TraceRow>,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn last(&self) -> Option<&TraceRow> {
        self.rows.last()
    }

    pub fn lyapunov_series(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.lyapunov).collect()
    }
}

/// Records every row into a [`Trace`].
#[derive(Debug, Clone)]
pub struct TraceRecorder {
    trace: Trace,
}

impl TraceRecorder {
    pub fn new(config: &SimulationConfig) -> Self {
        let y_bands = neighbor_counts(&config.topology)
            .into_iter()
            .map(|r| 2.0 * config.params.alpha / r as f64)
            .collect();
        Self {
            trace: Trace {
                n: config.n(),
                y_bands,
                rows: Vec::with_capacity(config.total_steps.saturating_add(1).min(1 << 20)),
            },
        }
    }

    pub fn into_trace(self) -> Trace {
        self.trace
    }
}

impl Observer for TraceRecorder {
    fn observe(&mut self, r: &StepRecord<'_>) {
        self.trace.rows.push(TraceRow {
            k: r.k,
            transmitter: r.transmitter,
            delivered: r.delivered.to_vec(),
            x: r.x.to_vec(),
            y: r.y.to_vec(),
            z: r.z.to_vec(),
            lyapunov: r.lyapunov,
            band_violations: r.band_violations.to_vec(),
        });
    }
}

/// What a finished run leaves behind besides what the observer collected.
#[derive(Debug, Clone, PartialEq)]
pub struct RunSummary {
    pub report: ValidationReport,
    pub final_states: Vec<AgentState>,
}

/// Applies one slot's broadcast of `x_j` to every listed receiver.
///
/// Each receiver reads only its own state and `x_j`, so the result does not
/// depend on the order of `receivers`. The transmitter, when listed, uses
/// its own unquantised `x`.
pub fn apply_step(
    states: &mut [AgentState],
    transmitter: usize,
    receivers: &[usize],
    params: &ProtocolParams,
    options: &EngineOptions,
) {
    let own = states[transmitter].x;
    let on_air = match options.quantization {
        Some(q) => (own / q).round() * q,
        None => own,
    };
    for &i in receivers {
        let x_j = if i == transmitter { own } else { on_air };
        let mut next = update_unchecked(&states[i], x_j, params);
        if options.y_clamp {
            let band = next.y_band(params.alpha);
            next.y = next.y.clamp(-band, band);
        }
        states[i] = next;
    }
}

/// Runs a configuration, streaming every row to `observer`.
pub fn run_with<O: Observer>(config: &SimulationConfig, observer: &mut O) -> Result<RunSummary> {
    let report = config.validate()?;
    let n = config.n();
    let p = config.params;
    let counts = neighbor_counts(&config.topology);

    let mut z = vec![0.0; n];
    evaluate_into(&config.signals, 0, &mut z);
    let mut states: Vec<AgentState> = z
        .iter()
        .zip(&counts)
        .map(|(&zi, &r)| AgentState::new(zi, r))
        .collect();

    let mut x = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut flags = vec![false; n];
    let mut receivers = Vec::with_capacity(n);

    let mut emit = |k: usize,
                    transmitter: Option<usize>,
                    receivers: &[usize],
                    states: &[AgentState],
                    z: &[f64],
                    observer: &mut O| {
        for (i, s) in states.iter().enumerate() {
            x[i] = s.x;
            y[i] = s.y;
            flags[i] = s.band_violation(p.alpha);
        }
        let lyapunov = protocol::spread(x.iter().copied()) + protocol::spread(y.iter().copied());
        observer.observe(&StepRecord {
            k,
            transmitter,
            delivered: receivers,
            x: &x,
            y: &y,
            z,
            lyapunov,
            band_violations: &flags,
        });
    };

    emit(0, None, &[], &states, &z, observer);

    for k in 0..config.total_steps {
        let j = config.schedule.transmitter(k);
        deliveries_into(
            &config.topology,
            &config.schedule,
            &config.loss,
            k,
            config.options.self_update,
            &mut receivers,
        );
        apply_step(&mut states, j, &receivers, &p, &config.options);
        if receivers
            .iter()
            .any(|&i| !(states[i].x.is_finite() && states[i].y.is_finite()))
        {
            return Err(Error::NonFinite { step: k + 1 });
        }

        evaluate_into(&config.signals, k + 1, &mut z);
        for (s, &zi) in states.iter_mut().zip(&z) {
            s.z = zi;
        }
        emit(k + 1, Some(j), &receivers, &states, &z, observer);
    }

    Ok(RunSummary {
        report,
        final_states: states,
    })
}

pub fn run(config: &SimulationConfig) -> Result<Trace> {
    let mut recorder = TraceRecorder::new(config);
    run_with(config, &mut recorder)?;
    Ok(recorder.into_trace())
}

fn seeded(config: &SimulationConfig, seed_base: u64, i: usize) -> SimulationConfig {
    let mut c = config.clone();
    c.loss.seed = seed_base.wrapping_add(i as u64);
    c
}

/// `n_runs` independent runs with loss seeds `seed_base + i`, in parallel.
pub fn run_ensemble(
    config: &SimulationConfig,
    n_runs: usize,
    seed_base: u64,
) -> Result<Vec<Trace>> {
    if n_runs == 0 {
        return Err(Error::Config("an ensemble needs at least one run".into()));
    }
    (0..n_runs)
        .into_par_iter()
        .map(|i| run(&seeded(config, seed_base, i)))
        .collect()
}

/// Ensemble variant that keeps only what a fresh observer per run collects.
pub fn run_ensemble_with<O, F>(
    config: &SimulationConfig,
    n_runs: usize,
    seed_base: u64,
    make_observer: F,
) -> Result<Vec<O>>
where
    O: Observer + Send,
    F: Fn(&SimulationConfig) -> O + Sync,
{
    if n_runs == 0 {
        return Err(Error::Config("an ensemble needs at least one run".into()));
    }
    (0..n_runs)
        .into_par_iter()
        .map(|i| {
            let c = seeded(config, seed_base, i);
            let mut observer = make_observer(&c);
            run_with(&c, &mut observer)?;
            Ok(observer)
        })
        .collect()
}

/// Change over one communication cycle starting at row `k`:
/// `max_i |x_i^{k+cycle} - x_i^k| + |y_i^{k+cycle} - y_i^k|`.
pub fn stationarity_residual(trace: &Trace, k: usize, cycle: usize) -> Result<f64> {
    let end = k.checked_add(cycle).filter(|&e| e < trace.len());
    let Some(end) = end else {
        return Err(Error::OutOfRange {
            index: k.saturating_add(cycle),
            limit: trace.len(),
        });
    };
    Ok(cycle_residual(
        &trace.rows[k].x,
        &trace.rows[k].y,
        &trace.rows[end].x,
        &trace.rows[end].y,
    ))
}

fn cycle_residual(x0: &[f64], y0: &[f64], x1: &[f64], y1: &[f64]) -> f64 {
    (0..x0.len())
        .map(|i| (x1[i] - x0[i]).abs() + (y1[i] - y0[i]).abs())
        .fold(0.0, f64::max)
}

/// Tracks the stationarity residual of the first and the final cycle
/// without storing the whole trace.
#[derive(Debug, Clone)]
pub struct StationarityProbe {
    cycle: usize,
    head: Vec<(Vec<f64>, Vec<f64>)>,
    tail: std::collections::VecDeque<(Vec<f64>, Vec<f64>)>,
}

impl StationarityProbe {
    pub fn new(cycle: usize) -> Self {
        Self {
            cycle,
            head: Vec::with_capacity(cycle + 1),
            tail: std::collections::VecDeque::with_capacity(cycle + 1),
        }
    }

    /// Residual between rows `0` and `cycle`.
    pub fn first_cycle(&self) -> Option<f64> {
        let a = self.head.first()?;
        let b = self.head.get(self.cycle)?;
        Some(cycle_residual(&a.0, &a.1, &b.0, &b.1))
    }

    /// Residual between the last row and the row one cycle before it.
    pub fn final_cycle(&self) -> Option<f64> {
        if self.tail.len() < self.cycle + 1 {
            return None;
        }
        let a = self.tail.front()?;
        let b = self.tail.back()?;
        Some(cycle_residual(&a.0, &a.1, &b.0, &b.1))
    }
}

impl Observer for StationarityProbe {
    fn observe(&mut self, r: &StepRecord<'_>) {
        let row = (r.x.to_vec(), r.y.to_vec());
        if self.head.len() <= self.cycle {
            self.head.push(row.clone());
        }
        if self.tail.len() == self.cycle + 1 {
            self.tail.pop_front();
        }
        self.tail.push_back(row);
    }
}
