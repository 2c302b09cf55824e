//! Discrete-event simulator for online network slice placement.
//!
//! Slice requests (chains of VNFs joined by virtual links) arrive over a
//! hierarchical substrate of edge, core and central data centers. Each is
//! placed VNF by VNF by one of six algorithms: random fit, power of two
//! choices (P2C), or an actor-critic agent in one of four variants that
//! differ in their state features and in whether P2C biases the policy.
//!
//! The learning code is generic over [`Scalar`] (`f32` or `f64`); the
//! aliases below fix it to `f64`, which is what the engine runs.

pub mod agent;
pub mod config;
pub mod engine;
pub mod metrics;
pub mod p2c;
pub mod placement;
pub mod scalar;
pub mod substrate;
pub mod traffic;

pub use config::{Algorithm, ConfigError, PhaseMode, PhaseSchedule, SimConfig};
pub use engine::{compare, run, ComparisonReport, RunReport, Simulation};
pub use metrics::MetricsSeries;
pub use placement::{PlacementDecision, RejectReason};
pub use scalar::Scalar;
pub use substrate::{PhysicalNetwork, Tier, TopologyConfig};
pub use traffic::{LoadModel, Nspr, NsprTemplate};

pub type Agent = agent::Agent<f64>;
pub type Mlp = agent::MlpParams<f64>;
pub type Step = agent::Step<f64>;
pub type Trajectory = agent::Trajectory<f64>;
