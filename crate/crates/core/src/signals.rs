//! Per-agent measurement generators, evaluated once per global step.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A change of sine period at a given step. The phase stays continuous
/// across the switch.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PeriodSwitch {
    pub at: usize,
    pub period: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ReferenceSignal {
    Constant {
        value: f64,
    },
    /// `initial` before `at`, `final` from `at` inclusive.
    Step {
        initial: f64,
        #[serde(rename = "final")]
        final_value: f64,
        at: usize,
    },
    Sine {
        offset: f64,
        amplitude: f64,
        /// Period in steps.
        period: f64,
        #[serde(default)]
        phase: f64,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        switch: Option<PeriodSwitch>,
    },
    /// Piecewise-constant with hold-last semantics. Steps before the first
    /// breakpoint take its value.
    Table {
        breakpoints: Vec<(usize, f64)>,
    },
}

impl ReferenceSignal {
    pub fn constant(value: f64) -> Self {
        Self::Constant { value }
    }

    pub fn step(initial: f64, final_value: f64, at: usize) -> Self {
        Self::Step {
            initial,
            final_value,
            at,
        }
    }

    pub fn sine(offset: f64, amplitude: f64, period: f64, phase: f64) -> Self {
        Self::Sine {
            offset,
            amplitude,
            period,
            phase,
            switch: None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |field: &str, reason: &str| {
            Err(Error::InvalidSignal {
                field: field.into(),
                reason: reason.into(),
            })
        };
        match self {
            Self::Constant { value } if !value.is_finite() => bad("value", "must be finite"),
            Self::Step {
                initial,
                final_value,
                ..
            } if !(initial.is_finite() && final_value.is_finite()) => {
                bad("initial/final", "must be finite")
            }
            Self::Sine {
                offset,
                amplitude,
                period,
                phase,
                switch,
            } => {
                if !(offset.is_finite() && amplitude.is_finite() && phase.is_finite()) {
                    return bad("offset/amplitude/phase", "must be finite");
                }
                if !period.is_finite() || *period < 2.0 {
                    return bad("period", "must be at least 2 steps");
                }
                if let Some(s) = switch {
                    if !s.period.is_finite() || s.period < 2.0 {
                        return bad("switch.period", "must be at least 2 steps");
                    }
                }
                Ok(())
            }
            Self::Table { breakpoints } => {
                if breakpoints.is_empty() {
                    return bad("breakpoints", "must not be empty");
                }
                if breakpoints.windows(2).any(|w| w[0].0 >= w[1].0) {
                    return bad("breakpoints", "steps must be strictly increasing");
                }
                if breakpoints.iter().any(|(_, v)| !v.is_finite()) {
                    return bad("breakpoints", "values must be finite");
                }
                Ok(())
            }
            _ => Ok(()),
        }
    }

    pub fn evaluate(&self, k: usize) -> f64 {
        match self {
            Self::Constant { value } => *value,
            Self::Step {
                initial,
                final_value,
                at,
            } => {
                if k < *at {
                    *initial
                } else {
                    *final_value
                }
            }
            Self::Sine {
                offset,
                amplitude,
                period,
                phase,
                switch,
            } => {
                let angle = match switch {
                    Some(s) if k >= s.at => {
                        TAU * s.at as f64 / period + TAU * (k - s.at) as f64 / s.period
                    }
                    _ => TAU * k as f64 / period,
                };
                offset + amplitude * (angle + phase).sin()
            }
            Self::Table { breakpoints } => {
                let idx = breakpoints.partition_point(|(at, _)| *at <= k);
                breakpoints[idx.saturating_sub(1)].1
            }
        }
    }
}

/// Measurement vector `z^k`, one entry per agent.
pub fn evaluate_all(signals: &[ReferenceSignal], k: usize, n: usize) -> Result<Vec<f64>> {
    if signals.len() != n {
        return Err(Error::Config(format!(
            "{} signals for {n} agents",
            signals.len()
        )));
    }
    Ok(signals.iter().map(|s| s.evaluate(k)).collect())
}

pub(crate) fn evaluate_into(signals: &[ReferenceSignal], k: usize, out: &mut [f64]) {
    for (slot, s) in out.iter_mut().zip(signals) {
        *slot = s.evaluate(k);
    }
}
