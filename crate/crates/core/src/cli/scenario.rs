//! Scenario files: a TOML description of one [`SimulationConfig`].

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::analysis::Tolerance;
use crate::engine::{EngineOptions, SimulationConfig};
use crate::error::{Error, Result};
use crate::network::{build_chain, build_complete, LossModel, Schedule, Topology};
use crate::protocol::ProtocolParams;
use crate::signals::ReferenceSignal;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub name: String,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub description: String,
    pub agents: usize,
    pub total_steps: usize,
    pub params: ParamsSection,
    pub topology: TopologySpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub schedule: Option<ScheduleSection>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub loss: Option<LossModel>,
    #[serde(default)]
    pub options: EngineOptions,
    #[serde(default)]
    pub metrics: Tolerance,
    pub signals: Vec<ReferenceSignal>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamsSection {
    pub alpha: f64,
    pub beta: f64,
    pub gamma: f64,
    pub kappa: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum TopologySpec {
    Complete,
    Chain,
    Matrix {
        rows: Vec<Vec<u8>>,
    },
    Edges {
        edges: Vec<(usize, usize)>,
    },
    /// External plain-text file, relative to the scenario file.
    File {
        path: PathBuf,
        format: TopologyFormat,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopologyFormat {
    Matrix,
    Edges,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleSection {
    pub slot_order: Vec<usize>,
}

/// A parsed scenario: the simulation itself plus the metric band.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub description: String,
    pub config: SimulationConfig,
    pub tolerance: Tolerance,
}

impl ScenarioFile {
    pub fn parse(text: &str, origin: &Path) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::parse(origin, e.to_string().trim_end()))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(format!("cannot serialise scenario: {e}")))
    }

    /// Resolves builders and external files; `base_dir` anchors relative
    /// topology paths.
    pub fn into_scenario(self, origin: &Path) -> Result<Scenario> {
        let at = |field: &str, e: Error| Error::parse(origin, format!("{field}: {e}"));
        let n = self.agents;
        let topology = match &self.topology {
            TopologySpec::Complete => build_complete(n),
            TopologySpec::Chain => build_chain(n),
            TopologySpec::Matrix { rows } => Topology::from_rows(rows),
            TopologySpec::Edges { edges } => Topology::from_edges(n, edges),
            TopologySpec::File { path, format } => {
                let full = origin.parent().unwrap_or(Path::new(".")).join(path);
                let text =
                    fs::read_to_string(&full).map_err(|e| Error::parse(&full, e.to_string()))?;
                match format {
                    TopologyFormat::Matrix => Topology::parse_matrix_text(&text),
                    TopologyFormat::Edges => Topology::parse_edge_list_text(&text),
                }
                .map_err(|e| Error::parse(&full, e.to_string()))
            }
        }
        .map_err(|e| at("topology", e))?;
        if topology.n() != n {
            return Err(at(
                "topology",
                Error::Config(format!("has {} agents, `agents` says {n}", topology.n())),
            ));
        }

        let schedule = match self.schedule {
            Some(s) => {
                Schedule::with_order(s.slot_order).map_err(|e| at("schedule.slot_order", e))?
            }
            None => Schedule::round_robin(n),
        };
        if schedule.n() != n {
            return Err(at(
                "schedule.slot_order",
                Error::Config(format!("lists {} agents, expected {n}", schedule.n())),
            ));
        }
        let loss = self.loss.unwrap_or_else(LossModel::lossless);
        loss.check().map_err(|e| at("loss.drop_probability", e))?;

        let p = self.params;
        let params = ProtocolParams::new(p.alpha, p.beta, p.gamma, p.kappa, n);
        params.check_domain().map_err(|e| match e {
            Error::InvalidParameter { name, .. } => at(&format!("params.{name}"), e),
            other => at("agents", other),
        })?;

        if self.signals.len() != n {
            return Err(at(
                "signals",
                Error::Config(format!("{} entries for {n} agents", self.signals.len())),
            ));
        }
        for (i, s) in self.signals.iter().enumerate() {
            s.validate().map_err(|e| at(&format!("signals[{i}]"), e))?;
        }
        if self.total_steps == 0 {
            return Err(at(
                "total_steps",
                Error::Config("must be at least 1".into()),
            ));
        }

        Ok(Scenario {
            name: self.name,
            description: self.description,
            config: SimulationConfig {
                params,
                topology,
                schedule,
                loss,
                signals: self.signals,
                total_steps: self.total_steps,
                options: self.options,
            },
            tolerance: self.metrics,
        })
    }

    /// Re-emits a scenario with an explicit adjacency matrix.
    pub fn from_scenario(s: &Scenario) -> Self {
        let c = &s.config;
        Self {
            name: s.name.clone(),
            description: s.description.clone(),
            agents: c.n(),
            total_steps: c.total_steps,
            params: ParamsSection {
                alpha: c.params.alpha,
                beta: c.params.beta,
                gamma: c.params.gamma,
                kappa: c.params.kappa,
            },
            topology: TopologySpec::Matrix {
                rows: c.topology.rows(),
            },
            schedule: Some(ScheduleSection {
                slot_order: c.schedule.slot_order().to_vec(),
            }),
            loss: Some(c.loss),
            options: c.options,
            metrics: s.tolerance,
            signals: c.signals.clone(),
        }
    }
}

impl Scenario {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::parse(path, e.to_string()))?;
        Self::from_toml(&text, path)
    }

    pub fn from_toml(text: &str, origin: &Path) -> Result<Self> {
        ScenarioFile::parse(text, origin)?.into_scenario(origin)
    }

    pub fn to_toml(&self) -> Result<String> {
        ScenarioFile::from_scenario(self).to_toml()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SAMPLE: &str = r#"
name = "demo"
agents = 3
total_steps = 100

[params]
alpha = 9
beta = 0.08
gamma = 0.003
kappa = 0.1

[topology]
kind = "chain"

[loss]
drop_probability = 0.2
seed = 7

[options]
quantization = 0.5

[[signals]]
kind = "constant"
value = 600

[[signals]]
kind = "step"
initial = 100.0
final = 180.0
at = 50

[[signals]]
kind = "sine"
offset = 10.0
amplitude = 2.0
period = 40.0
switch = { at = 80, period = 10.0 }
"#;

    fn origin() -> PathBuf {
        PathBuf::from("demo.toml")
    }

    #[test]
    fn parses_sample() {
        let s = Scenario::from_toml(SAMPLE, &origin()).unwrap();
        assert_eq!(s.name, "demo");
        assert_eq!(s.config.n(), 3);
        assert_eq!(s.config.topology, build_chain(3).unwrap());
        assert_eq!(s.config.loss.seed, 7);
        assert_eq!(s.config.options.quantization, Some(0.5));
        assert!(s.config.options.self_update);
        assert_eq!(s.config.signals[0], ReferenceSignal::constant(600.0));
        assert_eq!(s.config.signals[1], ReferenceSignal::step(100.0, 180.0, 50));
        assert_eq!(s.tolerance, Tolerance::default());
    }

    #[test]
    fn round_trip_is_config_identical() {
        let s = Scenario::from_toml(SAMPLE, &origin()).unwrap();
        let again = Scenario::from_toml(&s.to_toml().unwrap(), &origin()).unwrap();
        assert_eq!(again, s);
    }

    #[test]
    fn syntax_errors_carry_line_numbers() {
        let broken = SAMPLE.replace("gamma = 0.003", "gamma = = 0.003");
        let err = Scenario::from_toml(&broken, &origin())
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 9"), "{err}");
    }

    #[test]
    fn semantic_errors_name_the_field() {
        let cases = [
            (SAMPLE.replace("alpha = 9", "alpha = -9"), "params.alpha"),
            (
                SAMPLE.replace("period = 40.0", "period = 1.0"),
                "signals[2]",
            ),
            (
                SAMPLE.replace("drop_probability = 0.2", "drop_probability = 2.0"),
                "loss.drop_probability",
            ),
            (SAMPLE.replace("agents = 3", "agents = 4"), "signals"),
            (
                SAMPLE.replace("total_steps = 100", "total_steps = 0"),
                "total_steps",
            ),
            (
                SAMPLE.replace("kind = \"chain\"", "kind = \"ring\""),
                "ring",
            ),
            (
                SAMPLE.replace("[options]", "[options]\nturbo = true"),
                "turbo",
            ),
        ];
        for (text, needle) in cases {
            let err = Scenario::from_toml(&text, &origin())
                .unwrap_err()
                .to_string();
            assert!(err.contains(needle), "expected `{needle}` in `{err}`");
        }
    }

    #[test]
    fn explicit_topologies() {
        let text = SAMPLE.replace(
            "kind = \"chain\"",
            "kind = \"matrix\"\nrows = [[1,1,1],[1,1,0],[1,0,1]]",
        );
        let s = Scenario::from_toml(&text, &origin()).unwrap();
        assert!(!s.config.topology.linked(1, 2));

        let text = SAMPLE.replace(
            "kind = \"chain\"",
            "kind = \"edges\"\nedges = [[0,2],[1,2]]",
        );
        let s = Scenario::from_toml(&text, &origin()).unwrap();
        assert!(s.config.topology.linked(0, 2) && !s.config.topology.linked(0, 1));

        let text = SAMPLE.replace("kind = \"chain\"", "kind = \"edges\"\nedges = [[0,1]]");
        assert!(Scenario::from_toml(&text, &origin())
            .unwrap_err()
            .to_string()
            .contains("topology"));
    }

    #[test]
    fn topology_file_is_resolved_relative_to_scenario() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("ring.txt"), "n 3\n0 1\n1 2\n2 0\n").unwrap();
        let text = SAMPLE.replace(
            "kind = \"chain\"",
            "kind = \"file\"\npath = \"ring.txt\"\nformat = \"edges\"",
        );
        let path = dir.path().join("s.toml");
        fs::write(&path, text).unwrap();
        let s = Scenario::load(&path).unwrap();
        assert_eq!(s.config.topology, build_complete(3).unwrap());
    }
}
