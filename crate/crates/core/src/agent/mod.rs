//! Actor-critic placement agents.
//!
//! Four variants come from two independent switches: whether the state
//! includes network-load features, and whether the action distribution is
//! biased toward the P2C heuristic's choice (`softmax(z + β·H)`).
//!
//! | variant | load features | heuristic control |
//! |---------|---------------|-------------------|
//! | DRL     | no            | no                |
//! | eDRL    | yes           | no                |
//! | HA-DRL  | no            | yes               |
//! | HA-eDRL | yes           | yes               |

pub mod a2c;
pub mod features;
pub mod gradcheck;
pub mod mlp;
pub mod policy;

use std::fmt;
use std::io;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;
use crate::substrate::{PhysicalNetwork, ServerId};
use crate::traffic::{Nspr, NsprTemplate};

pub use a2c::{episode_reward, update, ActorTerms, LossReport, RewardConfig, Step, Trajectory, UpdateConfig};
pub use features::Featurizer;
pub use gradcheck::{grad_check, GradCheckSummary};
pub use mlp::MlpParams;
pub use policy::{ha_distribution, policy_forward, select_action};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum AgentError {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("no feasible action")]
    NoFeasibleAction,
    #[error("non-finite gradient; update skipped")]
    NonFiniteGradient,
    #[error("empty trajectory")]
    EmptyTrajectory,
    #[error("action {0} is masked out")]
    InvalidAction(usize),
    #[error("bad checkpoint: {0}")]
    Checkpoint(String),
    #[error("i/o error: {0}")]
    Io(String),
    #[error("unknown agent variant {0:?}")]
    UnknownVariant(String),
}

impl From<io::Error> for AgentError {
    fn from(err: io::Error) -> Self {
        AgentError::Io(err.to_string())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct AgentVariant {
    pub use_load_features: bool,
    pub use_ha_control: bool,
}

impl AgentVariant {
    pub const DRL: Self = Self {
        use_load_features: false,
        use_ha_control: false,
    };
    pub const EDRL: Self = Self {
        use_load_features: true,
        use_ha_control: false,
    };
    pub const HADRL: Self = Self {
        use_load_features: false,
        use_ha_control: true,
    };
    pub const HAEDRL: Self = Self {
        use_load_features: true,
        use_ha_control: true,
    };
    pub const ALL: [Self; 4] = [Self::DRL, Self::EDRL, Self::HADRL, Self::HAEDRL];

    pub fn name(self) -> &'static str {
        match (self.use_load_features, self.use_ha_control) {
            (false, false) => "drl",
            (true, false) => "edrl",
            (false, true) => "hadrl",
            (true, true) => "haedrl",
        }
    }
}

impl fmt::Display for AgentVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AgentVariant {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|v| v.name() == s.to_ascii_lowercase().replace('-', ""))
            .ok_or_else(|| AgentError::UnknownVariant(s.to_string()))
    }
}

/// The `[agent]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    /// Used when `[run] algorithm` is not set.
    pub variant: Option<String>,
    pub learning_rate: f64,
    pub gamma: f64,
    pub entropy_weight: f64,
    /// Heuristic bias strength β.
    pub beta: f64,
    /// Multiplicative decay of β after every training episode.
    pub beta_decay: f64,
    pub updates_per_episode: usize,
    pub hidden: Vec<usize>,
    /// Optional cross-entropy pull toward the heuristic's choice.
    pub ha_loss_weight: f64,
    pub w_lb: f64,
    pub w_bw: f64,
    /// Defaults to `vnf_count × server-to-server diameter`.
    pub bw_norm: Option<f64>,
    /// Scale of the actor's initial output weights; small values start
    /// from a near-uniform policy.
    pub actor_output_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            variant: None,
            learning_rate: 0.002,
            gamma: 0.99,
            entropy_weight: 0.01,
            beta: 3.0,
            beta_decay: 1.0,
            updates_per_episode: 1,
            hidden: vec![128, 64],
            ha_loss_weight: 0.0,
            w_lb: 0.5,
            w_bw: 0.25,
            bw_norm: None,
            actor_output_scale: 0.01,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate.is_finite() && self.learning_rate > 0.0) {
            return Err(format!("learning_rate must be positive, got {}", self.learning_rate));
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(format!("gamma must lie in [0, 1], got {}", self.gamma));
        }
        if !(self.beta.is_finite() && self.beta >= 0.0) {
            return Err(format!("beta must be non-negative, got {}", self.beta));
        }
        if !(self.beta_decay > 0.0 && self.beta_decay <= 1.0) {
            return Err(format!("beta_decay must lie in (0, 1], got {}", self.beta_decay));
        }
        if self.hidden.contains(&0) {
            return Err("hidden layer sizes must be positive".into());
        }
        if !(self.entropy_weight >= 0.0 && self.ha_loss_weight >= 0.0) {
            return Err("loss weights must be non-negative".into());
        }
        Ok(())
    }

    pub fn update_config<T: Scalar>(&self) -> UpdateConfig<T> {
        UpdateConfig {
            learning_rate: T::lit(self.learning_rate),
            gamma: T::lit(self.gamma),
            entropy_weight: T::lit(self.entropy_weight),
            ha_loss_weight: T::lit(self.ha_loss_weight),
            updates_per_episode: self.updates_per_episode,
        }
    }
}

/// An actor-critic agent bound to one network size and request template.
#[derive(Debug, Clone)]
pub struct Agent<T> {
    variant: AgentVariant,
    config: AgentConfig,
    actor: MlpParams<T>,
    critic: MlpParams<T>,
    featurizer: Featurizer,
    beta: f64,
    episodes: u64,
}

impl<T: Scalar> Agent<T> {
    /// Fresh agent; weights are drawn from `rng`.
    pub fn new<R: Rng + ?Sized>(
        variant: AgentVariant,
        config: AgentConfig,
        net: &PhysicalNetwork,
        template: &NsprTemplate,
        rng: &mut R,
    ) -> Self {
        let featurizer = Featurizer::new(net, template, variant);
        let input = featurizer.dim(net.server_count());
        let mut sizes = vec![input];
        sizes.extend(&config.hidden);
        let mut actor_sizes = sizes.clone();
        actor_sizes.push(net.server_count());
        sizes.push(1);
        let actor = MlpParams::init(&actor_sizes, config.actor_output_scale, rng);
        let critic = MlpParams::init(&sizes, 1.0, rng);
        Self {
            variant,
            beta: if variant.use_ha_control { config.beta } else { 0.0 },
            config,
            actor,
            critic,
            featurizer,
            episodes: 0,
        }
    }

    pub fn variant(&self) -> AgentVariant {
        self.variant
    }

    pub fn actor(&self) -> &MlpParams<T> {
        &self.actor
    }

    pub fn critic(&self) -> &MlpParams<T> {
        &self.critic
    }

    /// Replaces both networks, e.g. from checkpoints.
    pub fn set_params(&mut self, actor: MlpParams<T>, critic: MlpParams<T>) -> Result<(), AgentError> {
        for (expected, got) in [(self.actor.sizes(), actor.sizes()), (self.critic.sizes(), critic.sizes())] {
            if expected != got {
                return Err(AgentError::Checkpoint(format!("layer sizes {got:?} do not match {expected:?}")));
            }
        }
        self.actor = actor;
        self.critic = critic;
        Ok(())
    }

    /// Current heuristic bias strength (always 0 without heuristic control).
    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn episodes_trained(&self) -> u64 {
        self.episodes
    }

    pub fn param_checksum(&self) -> u64 {
        self.actor.checksum() ^ self.critic.checksum().rotate_left(1)
    }

    /// Chooses a host for VNF `vnf_index`. With `explore` the action is
    /// sampled; otherwise it is the distribution's argmax.
    #[allow(clippy::too_many_arguments)]
    pub fn decide<R: Rng + ?Sized>(
        &self,
        net: &PhysicalNetwork,
        nspr: &Nspr,
        vnf_index: usize,
        prev_host: Option<ServerId>,
        load_estimate: f64,
        mask: Vec<bool>,
        heuristic: Vec<T>,
        explore: bool,
        rng: &mut R,
    ) -> Result<Step<T>, AgentError> {
        let state = self.featurizer.featurize(net, nspr, vnf_index, prev_host, load_estimate);
        let logits = policy_forward(&self.actor, &state, &mask)?;
        let beta = T::lit(self.beta);
        let probs = ha_distribution(&logits, &heuristic, beta)?;
        let (action, log_prob) = if explore {
            select_action(&probs, rng)
        } else {
            let a = policy::argmax(&probs);
            (a, probs[a].ln())
        };
        let value = if explore { self.critic.forward(&state)?[0] } else { T::zero() };
        Ok(Step {
            state,
            mask,
            action,
            log_prob,
            heuristic,
            beta,
            value,
        })
    }

    /// One online update on a finished episode, then β decay.
    pub fn learn(&mut self, traj: &Trajectory<T>) -> Result<LossReport, AgentError> {
        let result = update(&mut self.actor, &mut self.critic, traj, &self.config.update_config());
        self.episodes += 1;
        if self.variant.use_ha_control {
            self.beta *= self.config.beta_decay;
        }
        result
    }
}
