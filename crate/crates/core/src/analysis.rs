//! Median oracle and the time-domain metrics of a run.
//!
//! * settling time `t_s`: first step from which every agent stays within
//!   the tolerance band around the median of the current measurements,
//! * convergence time `t_c`: first step from which the spread of `x` stays
//!   within the same band width,
//! * steady-state error `eps_ss`: largest relative distance of any agent
//!   from the median over a window (by default the final cycle).
//!
//! For even agent counts the median is an interval and distances are taken
//! to the interval, so an agent anywhere inside it is at distance zero.

use std::collections::VecDeque;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::engine::{Observer, StepRecord, Trace};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MedianResult {
    pub low: f64,
    pub high: f64,
    /// Midpoint of `[low, high]`; equal to both for odd lengths.
    pub point: f64,
}

impl MedianResult {
    /// Distance from `v` to the median interval.
    #[inline]
    pub fn distance(&self, v: f64) -> f64 {
        if v < self.low {
            self.low - v
        } else if v > self.high {
            v - self.high
        } else {
            0.0
        }
    }

    pub fn contains(&self, v: f64) -> bool {
        self.low <= v && v <= self.high
    }
}

pub fn median(z: &[f64]) -> Result<MedianResult> {
    if z.is_empty() {
        return Err(Error::EmptyInput("measurement vector"));
    }
    if z.iter().any(|v| v.is_nan()) {
        return Err(Error::NumericDomain("measurement vector"));
    }
    let mut sorted = z.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len();
    let (low, high) = if n % 2 == 1 {
        (sorted[n / 2], sorted[n / 2])
    } else {
        (sorted[n / 2 - 1], sorted[n / 2])
    };
    let point = if low == high {
        low
    } else {
        low + (high - low) / 2.0
    };
    Ok(MedianResult { low, high, point })
}

/// Band used by all metrics.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerance {
    /// Fraction of `|median|`.
    pub relative: f64,
    /// Below this `|median|` the band switches to `absolute`.
    pub zero_floor: f64,
    /// Band width, in signal units, used near a zero median.
    pub absolute: f64,
}

impl Default for Tolerance {
    fn default() -> Self {
        Self {
            relative: 0.05,
            zero_floor: 1e-9,
            absolute: 0.05,
        }
    }
}

impl Tolerance {
    pub fn relative(relative: f64) -> Self {
        Self {
            relative,
            ..Self::default()
        }
    }

    fn near_zero(&self, m: &MedianResult) -> bool {
        m.point.abs() < self.zero_floor
    }

    /// Allowed distance / spread at a row with median `m`.
    #[inline]
    pub fn allowed(&self, m: &MedianResult) -> f64 {
        if self.near_zero(m) {
            self.absolute
        } else {
            self.relative * m.point.abs()
        }
    }

    /// Denominator for relative errors; `1` near a zero median, which makes
    /// the reported error absolute there.
    #[inline]
    pub fn scale(&self, m: &MedianResult) -> f64 {
        if self.near_zero(m) {
            1.0
        } else {
            m.point.abs()
        }
    }
}

/// Per-row quantities every metric is built from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowEval {
    pub settled: bool,
    pub converged: bool,
    pub relative_error: f64,
    pub max_distance: f64,
}

pub fn evaluate_row(x: &[f64], m: &MedianResult, tol: &Tolerance) -> RowEval {
    let mut max_distance = 0.0f64;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &v in x {
        max_distance = max_distance.max(m.distance(v));
        lo = lo.min(v);
        hi = hi.max(v);
    }
    let allowed = tol.allowed(m);
    RowEval {
        settled: max_distance <= allowed,
        converged: hi - lo <= allowed,
        relative_error: max_distance / tol.scale(m),
        max_distance,
    }
}

fn sustained_entry(last_failure: Option<usize>, last_row: usize) -> Option<usize> {
    match last_failure {
        None => Some(0),
        Some(f) if f == last_row => None,
        Some(f) => Some(f + 1),
    }
}

fn row_evals<'a>(
    trace: &'a Trace,
    tol: &'a Tolerance,
) -> impl Iterator<Item = Result<RowEval>> + 'a {
    trace
        .rows
        .iter()
        .map(move |r| median(&r.z).map(|m| evaluate_row(&r.x, &m, tol)))
}

fn last_failure(
    trace: &Trace,
    tol: &Tolerance,
    pick: fn(&RowEval) -> bool,
) -> Result<Option<usize>> {
    let mut last = None;
    for (k, eval) in row_evals(trace, tol).enumerate() {
        if !pick(&eval?) {
            last = Some(k);
        }
    }
    Ok(last)
}

/// `None` means the band is not held through the end of the trace.
pub fn settling_time(trace: &Trace, tol: &Tolerance) -> Result<Option<usize>> {
    if trace.is_empty() {
        return Err(Error::EmptyInput("trace"));
    }
    let last = last_failure(trace, tol, |e| e.settled)?;
    Ok(sustained_entry(last, trace.len() - 1))
}

pub fn convergence_time(trace: &Trace, tol: &Tolerance) -> Result<Option<usize>> {
    if trace.is_empty() {
        return Err(Error::EmptyInput("trace"));
    }
    let last = last_failure(trace, tol, |e| e.converged)?;
    Ok(sustained_entry(last, trace.len() - 1))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SteadyStateError {
    pub value: f64,
    /// The window starts before the run settled (or it never did).
    pub before_settle: bool,
}

/// Last `cycle` rows of a trace of `len` rows.
pub fn final_cycle_window(len: usize, cycle: usize) -> Range<usize> {
    len.saturating_sub(cycle)..len
}

pub fn steady_state_error(
    trace: &Trace,
    window: Range<usize>,
    tol: &Tolerance,
) -> Result<SteadyStateError> {
    if window.is_empty() {
        return Err(Error::EmptyInput("steady-state window"));
    }
    if window.end > trace.len() {
        return Err(Error::OutOfRange {
            index: window.end,
            limit: trace.len(),
        });
    }
    let mut value = 0.0f64;
    for row in &trace.rows[window.clone()] {
        let m = median(&row.z)?;
        value = value.max(evaluate_row(&row.x, &m, tol).relative_error);
    }
    let settle = settling_time(trace, tol)?;
    Ok(SteadyStateError {
        value,
        before_settle: settle.is_none_or(|t| window.start < t),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    /// `null` when not reached.
    pub settling_time: Option<usize>,
    pub convergence_time: Option<usize>,
    pub epsilon_ss: f64,
    /// Relative band used for `t_s` and `t_c`.
    pub band: f64,
    /// Steady-state window `[start, end)` in rows.
    pub window: (usize, usize),
    pub window_before_settle: bool,
    pub rows: usize,
}

/// Metrics of a stored trace, steady state over the final cycle.
pub fn compute_metrics(trace: &Trace, tol: &Tolerance) -> Result<MetricsReport> {
    let settling = settling_time(trace, tol)?;
    let convergence = convergence_time(trace, tol)?;
    let window = final_cycle_window(trace.len(), trace.n);
    let ss = steady_state_error(trace, window.clone(), tol)?;
    Ok(MetricsReport {
        settling_time: settling,
        convergence_time: convergence,
        epsilon_ss: ss.value,
        band: tol.relative,
        window: (window.start, window.end),
        window_before_settle: ss.before_settle,
        rows: trace.len(),
    })
}

/// Streaming counterpart of [`compute_metrics`] for runs too long to store.
#[derive(Debug, Clone)]
pub struct MetricsObserver {
    tol: Tolerance,
    cycle: usize,
    rows: usize,
    last_unsettled: Option<usize>,
    last_unconverged: Option<usize>,
    recent_errors: VecDeque<f64>,
    cached: Option<(Vec<f64>, MedianResult)>,
}

impl MetricsObserver {
    pub fn new(tol: Tolerance, cycle: usize) -> Self {
        Self {
            tol,
            cycle: cycle.max(1),
            rows: 0,
            last_unsettled: None,
            last_unconverged: None,
            recent_errors: VecDeque::with_capacity(cycle.max(1)),
            cached: None,
        }
    }

    fn median_of(&mut self, z: &[f64]) -> MedianResult {
        if let Some((prev, m)) = &self.cached {
            if prev.as_slice() == z {
                return *m;
            }
        }
        // trace rows never carry NaN measurements: signals are validated finite
        let m = median(z).expect("non-empty finite measurements");
        self.cached = Some((z.to_vec(), m));
        m
    }

    pub fn report(&self) -> Result<MetricsReport> {
        if self.rows == 0 {
            return Err(Error::EmptyInput("trace"));
        }
        let last = self.rows - 1;
        let settling = sustained_entry(self.last_unsettled, last);
        let window = final_cycle_window(self.rows, self.cycle);
        Ok(MetricsReport {
            settling_time: settling,
            convergence_time: sustained_entry(self.last_unconverged, last),
            epsilon_ss: self.recent_errors.iter().copied().fold(0.0, f64::max),
            band: self.tol.relative,
            window: (window.start, window.end),
            window_before_settle: settling.is_none_or(|t| window.start < t),
            rows: self.rows,
        })
    }
}

impl Observer for MetricsObserver {
    fn observe(&mut self, r: &StepRecord<'_>) {
        let m = self.median_of(r.z);
        let eval = evaluate_row(r.x, &m, &self.tol);
        if !eval.settled {
            self.last_unsettled = Some(r.k);
        }
        if !eval.converged {
            self.last_unconverged = Some(r.k);
        }
        if self.recent_errors.len() == self.cycle {
            self.recent_errors.pop_front();
        }
        self.recent_errors.push_back(eval.relative_error);
        self.rows += 1;
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnsembleStats {
    pub mean: f64,
    /// Sample standard deviation (`n - 1` denominator); zero for one value.
    pub std_dev: f64,
    pub count: usize,
    pub not_reached: usize,
}

/// Mean and sample standard deviation of the reached values.
pub fn ensemble_stats(values: &[Option<f64>]) -> Result<EnsembleStats> {
    let reached: Vec<f64> = values.iter().flatten().copied().collect();
    let not_reached = values.len() - reached.len();
    if reached.is_empty() {
        return Err(Error::UndefinedStats);
    }
    let count = reached.len();
    let mean = reached.iter().sum::<f64>() / count as f64;
    let std_dev = if count > 1 {
        let ss: f64 = reached.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (count - 1) as f64).sqrt()
    } else {
        0.0
    };
    Ok(EnsembleStats {
        mean,
        std_dev,
        count,
        not_reached,
    })
}
