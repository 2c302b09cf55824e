//! Whole-simulation configuration, loaded from TOML.
//!
//! ```toml
//! [topology]   # data-center counts, server counts, capacities
//! [traffic]    # load model and request template
//! [placement]  # allow_colocation
//! [p2c]        # candidate_k
//! [agent]      # variant, learning hyperparameters, reward weights
//! [metrics]    # window, sample_every
//! [run]
//! arrivals = 5000
//! phases = [[4000, "train"], [1000, "eval"]]
//! seed = 7
//! algorithm = "hadrl"
//! ```
//!
//! Every key is optional; unknown keys are rejected.

use std::fmt;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::agent::{AgentConfig, AgentVariant};
use crate::metrics::MetricsConfig;
use crate::p2c::P2cConfig;
use crate::placement::PlacementConfig;
use crate::substrate::TopologyConfig;
use crate::traffic::TrafficConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("cannot parse config: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Random,
    P2c,
    Agent(AgentVariant),
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Random => "random",
            Algorithm::P2c => "p2c",
            Algorithm::Agent(v) => v.name(),
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "random" => Ok(Algorithm::Random),
            "p2c" => Ok(Algorithm::P2c),
            other => other
                .parse()
                .map(Algorithm::Agent)
                .map_err(|_| ConfigError::Invalid(format!("unknown algorithm {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PhaseMode {
    Train,
    Eval,
}

/// The `[run]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub arrivals: u64,
    /// `[count, mode]` blocks. The last block is stretched or the list
    /// truncated so the blocks cover exactly `arrivals`.
    pub phases: Vec<(u64, PhaseMode)>,
    pub seed: u64,
    /// Overrides `[agent] variant`; defaults to p2c when neither is set.
    pub algorithm: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            arrivals: 1000,
            phases: Vec::new(),
            seed: 1,
            algorithm: None,
        }
    }
}

/// Train/eval blocks covering a run's arrivals.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhaseSchedule {
    blocks: Vec<(u64, PhaseMode)>,
}

impl PhaseSchedule {
    pub fn new(phases: &[(u64, PhaseMode)], arrivals: u64) -> Result<Self, ConfigError> {
        if let Some(&(n, _)) = phases.iter().find(|&&(n, _)| n == 0) {
            return Err(ConfigError::Invalid(format!("phase counts must be at least 1, got {n}")));
        }
        let mut blocks = Vec::new();
        let mut covered = 0;
        for &(n, mode) in phases {
            if covered >= arrivals {
                break;
            }
            let n = n.min(arrivals - covered);
            blocks.push((n, mode));
            covered += n;
        }
        match blocks.last_mut() {
            Some(last) => last.0 += arrivals - covered,
            None => blocks.push((arrivals, PhaseMode::Train)),
        }
        Ok(Self { blocks })
    }

    pub fn blocks(&self) -> &[(u64, PhaseMode)] {
        &self.blocks
    }

    /// Mode of the 0-based arrival `index`; past the end, the last mode.
    pub fn mode_at(&self, index: u64) -> PhaseMode {
        let mut end = 0;
        for &(n, mode) in &self.blocks {
            end += n;
            if index < end {
                return mode;
            }
        }
        self.blocks.last().map_or(PhaseMode::Train, |b| b.1)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimConfig {
    pub topology: TopologyConfig,
    pub traffic: TrafficConfig,
    pub placement: PlacementConfig,
    pub p2c: P2cConfig,
    pub agent: AgentConfig,
    pub metrics: MetricsConfig,
    pub run: RunConfig,
}

impl SimConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.message().replace('\n', " ")))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = fs::read_to_string(path).map_err(|e| ConfigError::Io {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks everything that can be checked without building the network.
    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |e: String| ConfigError::Invalid(e);
        self.traffic.load_model().map_err(|e| invalid(e.to_string()))?;
        self.traffic.template().map_err(|e| invalid(e.to_string()))?;
        self.agent.validate().map_err(invalid)?;
        if self.run.arrivals == 0 {
            return Err(invalid("run.arrivals must be at least 1".into()));
        }
        if self.metrics.window == 0 || self.metrics.sample_every == 0 {
            return Err(invalid("metrics.window and metrics.sample_every must be at least 1".into()));
        }
        PhaseSchedule::new(&self.run.phases, self.run.arrivals)?;
        self.algorithm()?;
        Ok(())
    }

    /// `[run] algorithm`, else `[agent] variant`, else p2c.
    pub fn algorithm(&self) -> Result<Algorithm, ConfigError> {
        match (&self.run.algorithm, &self.agent.variant) {
            (Some(a), _) => a.parse(),
            (None, Some(v)) => v
                .parse()
                .map(Algorithm::Agent)
                .map_err(|_| ConfigError::Invalid(format!("unknown agent variant {v:?}"))),
            (None, None) => Ok(Algorithm::P2c),
        }
    }

    pub fn phase_schedule(&self) -> Result<PhaseSchedule, ConfigError> {
        PhaseSchedule::new(&self.run.phases, self.run.arrivals)
    }
}
