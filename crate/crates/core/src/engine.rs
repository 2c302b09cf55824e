//! Discrete-event simulation of slice arrivals and departures.
//!
//! Arrivals are drawn from their own rng stream, independently of every
//! placement outcome, so runs sharing a seed see the same request sequence
//! whatever the algorithm. Placement randomness (random fit, P2C draws,
//! action sampling), the heuristic used for biasing, and agent weight
//! initialization each use a further stream of the same seed.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::sync::atomic::{AtomicUsize, Ordering as AtomicOrdering};
use std::sync::Mutex;
use std::thread;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agent::{episode_reward, Agent, RewardConfig, Trajectory};
use crate::config::{Algorithm, ConfigError, PhaseMode, PhaseSchedule, SimConfig};
use crate::metrics::MetricsSeries;
use crate::p2c::P2c;
use crate::placement::{assemble_decision, candidate_nodes, decision_cost, Assembly, PlacementDecision, RejectReason, Rejection};
use crate::substrate::{PhysicalNetwork, ServerId, SliceId};
use crate::traffic::{offered_load, sample_nspr, LoadModel, Nspr, NsprTemplate};

pub const TRAFFIC_STREAM: u64 = 0;
pub const POLICY_STREAM: u64 = 1;
pub const HEURISTIC_STREAM: u64 = 2;
pub const INIT_STREAM: u64 = 3;

/// Stream `stream` of the ChaCha8 generator seeded with `seed`.
pub fn rng_stream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// The request sequence of a run.
#[derive(Debug, Clone)]
pub struct TrafficSource {
    model: LoadModel,
    template: NsprTemplate,
    rng: ChaCha8Rng,
    t: f64,
    next_id: SliceId,
}

impl TrafficSource {
    pub fn new(model: LoadModel, template: NsprTemplate, seed: u64) -> Self {
        Self {
            model,
            template,
            rng: rng_stream(seed, TRAFFIC_STREAM),
            t: 0.0,
            next_id: 0,
        }
    }

    pub fn from_config(config: &SimConfig) -> Result<Self, ConfigError> {
        let invalid = |e: crate::traffic::TrafficError| ConfigError::Invalid(e.to_string());
        Ok(Self::new(
            config.traffic.load_model().map_err(invalid)?,
            config.traffic.template().map_err(invalid)?,
            config.run.seed,
        ))
    }
}

impl Iterator for TrafficSource {
    type Item = Nspr;

    /// Ends when the rate drops to zero for good.
    fn next(&mut self) -> Option<Nspr> {
        let t = self.model.next_arrival(self.t, &mut self.rng);
        if !t.is_finite() {
            return None;
        }
        self.t = t;
        let nspr = sample_nspr(&self.template, self.next_id, t, &mut self.rng);
        self.next_id += 1;
        Some(nspr)
    }
}

#[derive(Debug, Clone)]
enum EventKind {
    Arrival(Nspr),
    Departure(SliceId),
}

#[derive(Debug, Clone)]
struct Event {
    time: f64,
    seq: u64,
    kind: EventKind,
}

impl PartialEq for Event {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Event {}

impl PartialOrd for Event {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Event {
    // Reversed so the max-heap pops the earliest (time, seq) first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.time.total_cmp(&self.time).then_with(|| other.seq.cmp(&self.seq))
    }
}

/// Outcome of one arrival.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrivalRecord {
    pub time: f64,
    pub slice_id: SliceId,
    pub holding_time: f64,
    pub mode: PhaseMode,
    pub accepted: bool,
    pub reward: f64,
    pub rejection: Option<Rejection>,
    /// Hosts chosen VNF by VNF; shorter than the chain when no host was
    /// available for some VNF.
    pub actions: Vec<ServerId>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct LatencyStats {
    pub count: usize,
    pub mean_ms: f64,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub max_ms: f64,
}

impl LatencyStats {
    pub fn from_samples(samples_ms: &[f64]) -> Self {
        if samples_ms.is_empty() {
            return Self::default();
        }
        let mut sorted = samples_ms.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median_ms = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            (sorted[n / 2 - 1] + sorted[n / 2]) / 2.0
        };
        Self {
            count: n,
            mean_ms: sorted.iter().sum::<f64>() / n as f64,
            median_ms,
            p95_ms: sorted[((n as f64 * 0.95).ceil() as usize).clamp(1, n) - 1],
            max_ms: sorted[n - 1],
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub algorithm: Algorithm,
    pub seed: u64,
    pub records: Vec<ArrivalRecord>,
    pub series: MetricsSeries,
    pub accepted: u64,
    pub total: u64,
    pub cumulative_acceptance: f64,
    pub mean_reward: f64,
    pub departures: u64,
    /// Agent updates skipped because of non-finite gradients.
    pub failed_updates: u64,
    /// Network state after the last event.
    pub network: PhysicalNetwork,
    pub last_decision: Option<PlacementDecision>,
    pub agent: Option<Agent<f64>>,
    pub wall: Duration,
    /// Time to reach a decision for each request, in milliseconds.
    pub decision_ms: Vec<f64>,
}

impl RunReport {
    pub fn latency(&self) -> LatencyStats {
        LatencyStats::from_samples(&self.decision_ms)
    }

    pub fn accepted_between(&self, from: usize, to: usize) -> f64 {
        self.series.acceptance_between(from, to)
    }

    /// Equality of everything except the algorithm label and wall-clock
    /// measurements.
    pub fn same_outcome(&self, other: &RunReport) -> bool {
        self.seed == other.seed
            && self.records == other.records
            && self.series == other.series
            && self.accepted == other.accepted
            && self.total == other.total
            && self.cumulative_acceptance.to_bits() == other.cumulative_acceptance.to_bits()
            && self.mean_reward.to_bits() == other.mean_reward.to_bits()
            && self.departures == other.departures
            && self.failed_updates == other.failed_updates
            && self.network == other.network
            && self.last_decision == other.last_decision
            && match (&self.agent, &other.agent) {
                (Some(a), Some(b)) => a.actor() == b.actor() && a.critic() == b.critic(),
                (None, None) => true,
                _ => false,
            }
    }
}

struct Placement {
    outcome: Result<PlacementDecision, Rejection>,
    actions: Vec<ServerId>,
    reward: f64,
    /// Present when the agent should learn from this episode.
    trajectory: Option<Trajectory<f64>>,
}

/// One configured run, ready to execute.
#[derive(Debug)]
pub struct Simulation {
    config: SimConfig,
    algorithm: Algorithm,
    schedule: PhaseSchedule,
    net: PhysicalNetwork,
    model: LoadModel,
    template: NsprTemplate,
    p2c: P2c,
    agent: Option<Agent<f64>>,
    reward: RewardConfig,
    policy_rng: ChaCha8Rng,
    heuristic_rng: ChaCha8Rng,
}

impl Simulation {
    /// Builds the configured topology.
    pub fn new(config: &SimConfig) -> Result<Self, ConfigError> {
        config.validate()?;
        let net = PhysicalNetwork::build_topology(&config.topology).map_err(|e| ConfigError::Invalid(e.to_string()))?;
        Self::with_network(config, net)
    }

    /// Uses `net` instead of the configured topology.
    pub fn with_network(config: &SimConfig, net: PhysicalNetwork) -> Result<Self, ConfigError> {
        config.validate()?;
        let invalid = |e: crate::traffic::TrafficError| ConfigError::Invalid(e.to_string());
        let model = config.traffic.load_model().map_err(invalid)?;
        let template = config.traffic.template().map_err(invalid)?;
        let algorithm = config.algorithm()?;
        let p2c = P2c::new(&net, &config.p2c).with_colocation(config.placement.allow_colocation);
        let diameter = (0..net.server_count())
            .flat_map(|a| (0..net.server_count()).map(move |b| (a, b)))
            .map(|(a, b)| p2c.distance(a, b))
            .filter(|&d| d != u32::MAX)
            .max()
            .unwrap_or(0);
        let reward = RewardConfig {
            w_lb: config.agent.w_lb,
            w_bw: config.agent.w_bw,
            bw_norm: config
                .agent
                .bw_norm
                .unwrap_or((template.vnf_count as f64 * diameter as f64).max(1.0)),
        };
        let agent = match algorithm {
            Algorithm::Agent(variant) => Some(Agent::new(
                variant,
                config.agent.clone(),
                &net,
                &template,
                &mut rng_stream(config.run.seed, INIT_STREAM),
            )),
            _ => None,
        };
        Ok(Self {
            schedule: config.phase_schedule()?,
            config: config.clone(),
            algorithm,
            net,
            model,
            template,
            p2c,
            agent,
            reward,
            policy_rng: rng_stream(config.run.seed, POLICY_STREAM),
            heuristic_rng: rng_stream(config.run.seed, HEURISTIC_STREAM),
        })
    }

    pub fn network(&self) -> &PhysicalNetwork {
        &self.net
    }

    pub fn reward_config(&self) -> RewardConfig {
        self.reward
    }

    pub fn agent(&self) -> Option<&Agent<f64>> {
        self.agent.as_ref()
    }

    pub fn agent_mut(&mut self) -> Option<&mut Agent<f64>> {
        self.agent.as_mut()
    }

    /// Chooses hosts VNF by VNF, then assembles and applies the decision.
    fn place(&mut self, nspr: &Nspr, mode: PhaseMode) -> Placement {
        let explore = mode == PhaseMode::Train;
        let allow_colocation = self.config.placement.allow_colocation;
        let load = offered_load(&self.model, &self.template, &self.net, nspr.arrival_time);
        let mut hosts = Vec::with_capacity(nspr.vnf_count());
        let mut steps = Vec::new();
        let mut failed_at = None;

        for (i, &(cpu, ram)) in nspr.vnfs.iter().enumerate() {
            let prev = hosts.last().copied();
            let allowed = |s: ServerId| allow_colocation || Some(s) != prev;
            let choice = match self.algorithm {
                Algorithm::Random => {
                    let mut candidates = candidate_nodes(&self.net, cpu, ram);
                    candidates.retain(|&s| allowed(s));
                    (!candidates.is_empty()).then(|| candidates[self.policy_rng.random_range(0..candidates.len())])
                }
                Algorithm::P2c => self.p2c.select(&self.net, cpu, ram, prev, &mut self.policy_rng),
                Algorithm::Agent(variant) => {
                    let agent = self.agent.as_ref().expect("agent algorithms carry an agent");
                    let mask: Vec<bool> = self
                        .net
                        .servers
                        .iter()
                        .map(|s| s.cpu_available >= cpu && s.ram_available >= ram && allowed(s.server_id))
                        .collect();
                    if mask.iter().any(|&ok| ok) {
                        let heuristic = if variant.use_ha_control {
                            self.p2c.heuristic_scores(&self.net, nspr, i, prev, &mut self.heuristic_rng)
                        } else {
                            vec![0.0; self.net.server_count()]
                        };
                        let step = agent
                            .decide(&self.net, nspr, i, prev, load, mask, heuristic, explore, &mut self.policy_rng)
                            .expect("state and mask sized for this network");
                        let action = step.action;
                        steps.push(step);
                        Some(action)
                    } else {
                        None
                    }
                }
            };
            match choice {
                Some(s) => {
                    self.net.stage(s, cpu, ram).expect("chosen host is feasible");
                    hosts.push(s);
                }
                None => {
                    failed_at = Some(i);
                    break;
                }
            }
        }
        self.net.clear_staged();

        let outcome = match failed_at {
            Some(index) => Err(Rejection {
                reason: RejectReason::NodeCapacity,
                index,
            }),
            None => match assemble_decision(&self.net, nspr, &hosts, &self.config.placement)
                .expect("hosts are servers, one per VNF")
            {
                Assembly::Placed(decision) => Ok(decision),
                Assembly::Rejected(rejection) => Err(rejection),
            },
        };
        let reward = match &outcome {
            Ok(decision) => episode_reward(Some(&decision_cost(&self.net, decision)), &self.reward),
            Err(_) => episode_reward(None, &self.reward),
        };
        if let Ok(decision) = &outcome {
            self.net.allocate(decision.clone()).expect("assembled decision fits");
        }

        Placement {
            outcome,
            actions: hosts,
            reward,
            trajectory: (explore && !steps.is_empty()).then_some(Trajectory { steps, reward }),
        }
    }

    pub fn run(mut self) -> RunReport {
        let start = Instant::now();
        let arrivals = self.config.run.arrivals;
        let mut source = TrafficSource::new(self.model.clone(), self.template.clone(), self.config.run.seed);
        let mut queue = BinaryHeap::new();
        let mut seq = 0u64;
        let mut push = |queue: &mut BinaryHeap<Event>, time: f64, kind: EventKind| {
            queue.push(Event { time, seq, kind });
            seq += 1;
        };
        if let Some(first) = source.next() {
            push(&mut queue, first.arrival_time, EventKind::Arrival(first));
        }

        let mut series = MetricsSeries::new(self.config.metrics.clone());
        let mut records = Vec::new();
        let mut decision_ms = Vec::new();
        let mut last_decision = None;
        let mut departures = 0;
        let mut failed_updates = 0;
        let mut reward_sum = 0.0;
        let mut horizon = f64::INFINITY;

        while let Some(event) = queue.pop() {
            if event.time > horizon {
                break;
            }
            match event.kind {
                EventKind::Departure(id) => {
                    self.net.release(id).expect("departing slice is active");
                    departures += 1;
                }
                EventKind::Arrival(nspr) => {
                    let index = records.len() as u64;
                    let mode = self.schedule.mode_at(index);
                    let began = Instant::now();
                    let Placement {
                        outcome,
                        actions,
                        reward,
                        trajectory,
                    } = self.place(&nspr, mode);
                    decision_ms.push(began.elapsed().as_secs_f64() * 1e3);
                    if let (Some(traj), Some(agent)) = (trajectory, self.agent.as_mut()) {
                        if let Err(e) = agent.learn(&traj) {
                            log::warn!("slice {}: update skipped: {e}", nspr.slice_id);
                            failed_updates += 1;
                        }
                    }
                    let accepted = outcome.is_ok();
                    if let Ok(decision) = outcome.as_ref() {
                        push(
                            &mut queue,
                            nspr.arrival_time + nspr.holding_time,
                            EventKind::Departure(nspr.slice_id),
                        );
                        last_decision = Some(decision.clone());
                    }
                    series
                        .record_outcome(nspr.arrival_time, accepted)
                        .expect("arrivals come in time order");
                    if series.load_due() {
                        let load = offered_load(&self.model, &self.template, &self.net, nspr.arrival_time);
                        series
                            .record_load(nspr.arrival_time, load, self.net.utilization().overall)
                            .expect("arrivals come in time order");
                    }
                    records.push(ArrivalRecord {
                        time: nspr.arrival_time,
                        slice_id: nspr.slice_id,
                        holding_time: nspr.holding_time,
                        mode,
                        accepted,
                        reward,
                        rejection: outcome.err(),
                        actions,
                    });
                    reward_sum += reward;
                    if index + 1 < arrivals {
                        if let Some(next) = source.next() {
                            push(&mut queue, next.arrival_time, EventKind::Arrival(next));
                        }
                    } else {
                        horizon = nspr.arrival_time;
                    }
                }
            }
            debug_assert!(self.net.check_conservation().is_ok(), "resource conservation violated");
        }

        let total = records.len() as u64;
        let accepted = series.accepted();
        RunReport {
            algorithm: self.algorithm,
            seed: self.config.run.seed,
            cumulative_acceptance: series.cumulative_acceptance(),
            mean_reward: if total == 0 { 0.0 } else { reward_sum / total as f64 },
            records,
            series,
            accepted,
            total,
            departures,
            failed_updates,
            network: self.net,
            last_decision,
            agent: self.agent,
            wall: start.elapsed(),
            decision_ms,
        }
    }
}

/// Builds and runs one configured simulation.
pub fn run(config: &SimConfig) -> Result<RunReport, ConfigError> {
    Ok(Simulation::new(config)?.run())
}

/// Runs every config on up to `jobs` threads; results keep input order.
pub fn run_many(configs: &[SimConfig], jobs: usize) -> Vec<Result<RunReport, ConfigError>> {
    let next = AtomicUsize::new(0);
    let results: Mutex<Vec<Option<Result<RunReport, ConfigError>>>> =
        Mutex::new((0..configs.len()).map(|_| None).collect());
    thread::scope(|scope| {
        for _ in 0..jobs.clamp(1, configs.len().max(1)) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, AtomicOrdering::Relaxed);
                let Some(config) = configs.get(i) else { break };
                let result = run(config);
                results.lock().expect("no panics while holding the lock")[i] = Some(result);
            });
        }
    });
    results
        .into_inner()
        .expect("workers finished")
        .into_iter()
        .map(|r| r.expect("every index was claimed"))
        .collect()
}

/// Errors unless all configs share topology, traffic, seed and arrival
/// count, which is what makes their runs comparable.
pub fn check_comparable(configs: &[SimConfig]) -> Result<(), ConfigError> {
    let Some(first) = configs.first() else {
        return Err(ConfigError::Invalid("nothing to compare".into()));
    };
    for c in &configs[1..] {
        if c.topology != first.topology {
            return Err(ConfigError::Invalid("compared runs differ in topology".into()));
        }
        if c.traffic != first.traffic {
            return Err(ConfigError::Invalid("compared runs differ in traffic".into()));
        }
        if c.run.seed != first.run.seed || c.run.arrivals != first.run.arrivals {
            return Err(ConfigError::Invalid("compared runs differ in seed or arrival count".into()));
        }
    }
    Ok(())
}

/// Side-by-side results of several algorithms on one arrival sequence.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub reports: Vec<RunReport>,
}

/// Rows of `(arrival_idx, t, window acceptance per run)`, taking `t` from
/// the first run.
pub fn window_table(reports: &[RunReport]) -> Vec<(u64, f64, Vec<f64>)> {
    let rows = reports.iter().map(|r| r.series.acceptance.len()).min().unwrap_or(0);
    (0..rows)
        .map(|i| {
            let first = &reports[0].series.acceptance[i];
            let values = reports.iter().map(|r| r.series.acceptance[i].window_acceptance).collect();
            (first.arrival_idx, first.t, values)
        })
        .collect()
}

impl ComparisonReport {
    pub fn window_table(&self) -> Vec<(u64, f64, Vec<f64>)> {
        window_table(&self.reports)
    }

    /// `(algorithm, cumulative acceptance, mean reward)` per run.
    pub fn summary(&self) -> Vec<(Algorithm, f64, f64)> {
        self.reports
            .iter()
            .map(|r| (r.algorithm, r.cumulative_acceptance, r.mean_reward))
            .collect()
    }
}

pub fn compare(configs: &[SimConfig], jobs: usize) -> Result<ComparisonReport, ConfigError> {
    check_comparable(configs)?;
    let reports = run_many(configs, jobs).into_iter().collect::<Result<_, _>>()?;
    Ok(ComparisonReport { reports })
}
