//! Agent state and the per-step local update rule.
//!
//! Each agent `i` carries a consensus state `x`, an auxiliary state `y` that
//! is never transmitted, and its current measurement `z`. When agent `j`
//! transmits in a slot and `i` receives the message, `i` applies
//!
//! ```text
//! x' = x + beta (x_j - x) + (alpha / r) sign(z - x) + y
//! y' = y + gamma ((x_j - x) - kappa y)
//! ```
//!
//! where `r` is the number of neighbours of `i` in the union graph,
//! including `i` itself.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tuning gains of the protocol together with the agent count they were
/// chosen for.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ProtocolParams {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
    pub n: usize,
}

impl ProtocolParams {
    pub fn new(alpha: f64, beta: f64, gamma: f64, kappa: f64, n: usize) -> Self {
        Self {
            alpha,
            beta,
            gamma,
            kappa,
            n,
        }
    }

    /// Checks the parameter domain only (positivity, finiteness, `n >= 2`).
    pub fn check_domain(&self) -> Result<()> {
        for (name, value) in [
            ("alpha", self.alpha),
            ("beta", self.beta),
            ("gamma", self.gamma),
            ("kappa", self.kappa),
        ] {
            if !value.is_finite() || value <= 0.0 {
                return Err(Error::InvalidParameter {
                    name,
                    value: value.to_string(),
                    reason: "must be finite and strictly positive",
                });
            }
        }
        if self.n < 2 {
            return Err(Error::InvalidSize { n: self.n });
        }
        Ok(())
    }

    /// Upper bound on `beta` used by the stability conditions, `1 / n^2`.
    pub fn beta_bound(&self) -> f64 {
        let n = self.n as f64;
        1.0 / (n * n)
    }
}

/// How strictly [`validate_params`] treats the stability conditions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ValidationMode {
    /// Any failed condition is an error.
    Strict,
    /// `beta` sitting exactly on `1/n^2` is a warning; other failures are
    /// reported but do not error.
    #[default]
    Lenient,
    /// Conditions are evaluated and reported, never enforced. Used for
    /// sensitivity studies that deliberately leave the stable region.
    Permissive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Condition {
    GammaBelowBeta,
    KappaGammaBelowOne,
    BetaBelowInverseNSquared,
}

impl Condition {
    pub fn label(self) -> &'static str {
        match self {
            Condition::GammaBelowBeta => "gamma < beta",
            Condition::KappaGammaBelowOne => "kappa*gamma < 1",
            Condition::BetaBelowInverseNSquared => "beta < 1/n^2",
        }
    }
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.label())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CheckStatus {
    Pass,
    Warn,
    Fail,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionCheck {
    pub condition: Condition,
    pub lhs: f64,
    pub rhs: f64,
    pub status: CheckStatus,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub mode: ValidationMode,
    pub checks: Vec<ConditionCheck>,
}

impl ValidationReport {
    /// True when no condition failed. Warnings still pass.
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.status != CheckStatus::Fail)
    }

    pub fn has_warnings(&self) -> bool {
        self.checks.iter().any(|c| c.status == CheckStatus::Warn)
    }

    pub fn failures(&self) -> impl Iterator<Item = &ConditionCheck> {
        self.checks.iter().filter(|c| c.status == CheckStatus::Fail)
    }

    pub fn status_of(&self, condition: Condition) -> Option<CheckStatus> {
        self.checks
            .iter()
            .find(|c| c.condition == condition)
            .map(|c| c.status)
    }

    /// Whether a simulation may proceed under this report's mode.
    pub fn permits_run(&self) -> bool {
        self.mode == ValidationMode::Permissive || self.passed()
    }
}

impl std::fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        for check in &self.checks {
            let tag = match check.status {
                CheckStatus::Pass => "pass",
                CheckStatus::Warn => "warn",
                CheckStatus::Fail => "FAIL",
            };
            writeln!(
                f,
                "{tag:>4}  {:<16} ({} vs {})",
                check.condition.label(),
                check.lhs,
                check.rhs
            )?;
        }
        Ok(())
    }
}

/// Relative slack used to decide that `beta` sits on the `1/n^2` boundary
/// rather than strictly above it.
const BOUNDARY_RTOL: f64 = 1e-12;

pub fn validate_params(params: &ProtocolParams, mode: ValidationMode) -> Result<ValidationReport> {
    params.check_domain()?;

    let strict_lt = |lhs: f64, rhs: f64| {
        if lhs < rhs {
            CheckStatus::Pass
        } else {
            CheckStatus::Fail
        }
    };

    let bound = params.beta_bound();
    let beta_status = if params.beta < bound && (bound - params.beta) > BOUNDARY_RTOL * bound {
        CheckStatus::Pass
    } else if (params.beta - bound).abs() <= BOUNDARY_RTOL * bound {
        match mode {
            ValidationMode::Strict => CheckStatus::Fail,
            _ => CheckStatus::Warn,
        }
    } else {
        CheckStatus::Fail
    };

    let checks = vec![
        ConditionCheck {
            condition: Condition::GammaBelowBeta,
            lhs: params.gamma,
            rhs: params.beta,
            status: strict_lt(params.gamma, params.beta),
        },
        ConditionCheck {
            condition: Condition::KappaGammaBelowOne,
            lhs: params.kappa * params.gamma,
            rhs: 1.0,
            status: strict_lt(params.kappa * params.gamma, 1.0),
        },
        ConditionCheck {
            condition: Condition::BetaBelowInverseNSquared,
            lhs: params.beta,
            rhs: bound,
            status: beta_status,
        },
    ];
    let report = ValidationReport { mode, checks };

    if mode == ValidationMode::Strict {
        if let Some(failed) = report.failures().next() {
            return Err(Error::ConstraintViolation {
                condition: failed.condition.label().to_string(),
            });
        }
    }
    Ok(report)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentState {
    pub x: f64,
    pub y: f64,
    pub z: f64,
    /// Neighbour count in the union graph, self included.
    pub r: usize,
}

impl AgentState {
    /// Fresh agent: `x` starts at the first measurement, `y` at zero.
    pub fn new(z: f64, r: usize) -> Self {
        Self { x: z, y: 0.0, z, r }
    }

    /// Half-width of the admissible `y` band, `2 alpha / r`.
    pub fn y_band(&self, alpha: f64) -> f64 {
        2.0 * alpha / self.r as f64
    }

    pub fn band_violation(&self, alpha: f64) -> bool {
        self.y.abs() > self.y_band(alpha)
    }
}

/// Sign with `sign(0) = 0`.
#[inline]
pub fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn local_update(
    state: &AgentState,
    x_j: f64,
    link_active: bool,
    params: &ProtocolParams,
) -> Result<AgentState> {
    if !(state.x.is_finite() && state.y.is_finite() && state.z.is_finite()) {
        return Err(Error::NumericDomain("agent state"));
    }
    if !x_j.is_finite() {
        return Err(Error::NumericDomain("transmitted value"));
    }
    if !link_active {
        return Ok(*state);
    }
    Ok(update_unchecked(state, x_j, params))
}

/// The update rule without input checks; the engine's hot path.
#[inline]
pub(crate) fn update_unchecked(
    state: &AgentState,
    x_j: f64,
    params: &ProtocolParams,
) -> AgentState {
    let diff = x_j - state.x;
    let x = state.x
        + params.beta * diff
        + params.alpha / state.r as f64 * sign(state.z - state.x)
        + state.y;
    let y = state.y + params.gamma * (diff - params.kappa * state.y);
    AgentState { x, y, ..*state }
}

/// Non-smooth Lyapunov candidate: spread of `x` plus spread of `y`.
pub fn lyapunov_value(states: &[AgentState]) -> Result<f64> {
    if states.is_empty() {
        return Err(Error::EmptyInput("agent states"));
    }
    let xs = states.iter().map(|s| s.x);
    let ys = states.iter().map(|s| s.y);
    Ok(spread(xs) + spread(ys))
}

pub(crate) fn spread(values: impl Iterator<Item = f64>) -> f64 {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| {
        (lo.min(v), hi.max(v))
    });
    hi - lo
}

/// Worst-case spread of `x` below which the Lyapunov decrease is no longer
/// guaranteed: `(6 alpha - 4 kappa gamma alpha) / (r_min (beta - gamma))`.
pub fn instability_band(params: &ProtocolParams, r_min: usize) -> Result<f64> {
    params.check_domain()?;
    if r_min == 0 {
        return Err(Error::InvalidParameter {
            name: "r_min",
            value: "0".into(),
            reason: "must be at least 1",
        });
    }
    let margin = params.beta - params.gamma;
    if margin <= 0.0 {
        return Err(Error::ConstraintViolation {
            condition: Condition::GammaBelowBeta.label().to_string(),
        });
    }
    let numerator = 6.0 * params.alpha - 4.0 * params.kappa * params.gamma * params.alpha;
    Ok(numerator / (r_min as f64 * margin))
}
