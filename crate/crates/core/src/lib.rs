//! Dynamic median consensus over a round-robin scheduled broadcast network.
//!
//! Each agent tracks the median of all agents' time-varying measurements
//! using only the values it overhears. The crate contains
//!
//! * [`protocol`]: the per-agent update, parameter checks and the Lyapunov
//!   diagnostics,
//! * [`network`]: topologies, the transmission schedule and packet loss,
//! * [`signals`]: per-agent reference measurements,
//! * [`engine`]: deterministic stepping, traces and seeded ensembles,
//! * [`analysis`]: the median oracle and settling/convergence/steady-state
//!   metrics,
//! * [`cli`]: scenario files, output formats and the commands behind the
//!   `median-consensus` binary.
//!
//! ```
//! use median_consensus::engine::{run, SimulationConfig};
//! use median_consensus::analysis::{compute_metrics, Tolerance};
//! use median_consensus::network::build_complete;
//! use median_consensus::protocol::ProtocolParams;
//! use median_consensus::signals::ReferenceSignal;
//!
//! let params = ProtocolParams::new(9.0, 0.08, 0.003, 0.1, 3);
//! let signals = [600.0, 1200.0, 100.0].map(ReferenceSignal::constant).to_vec();
//! let config = SimulationConfig::new(params, build_complete(3).unwrap(), signals, 3000);
//! let trace = run(&config).unwrap();
//! let metrics = compute_metrics(&trace, &Tolerance::default()).unwrap();
//! assert!(metrics.settling_time.is_some());
//! ```

pub mod analysis;
pub mod cli;
pub mod engine;
pub mod error;
pub mod network;
pub mod protocol;
pub mod signals;

pub use error::{Error, Result};
