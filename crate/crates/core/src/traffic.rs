//! Slice request generator: non-homogeneous Poisson arrivals with
//! exponential holding times and uniform integer demands.
//!
//! The arrival rate is
//!
//! ```text
//! λ(t) = lambda_base · (1 + amplitude · sin(2πt / period)) · multiplier(t)
//! ```
//!
//! where `multiplier(t)` is a step function given by phase overrides
//! (1 before the first override). Arrivals are sampled by thinning a
//! homogeneous process of rate `λ_max`.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::substrate::{PhysicalNetwork, SliceId};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum TrafficError {
    #[error("invalid load model: {0}")]
    InvalidModel(String),
    #[error("invalid request template: {0}")]
    InvalidTemplate(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct LoadModel {
    lambda_base: f64,
    amplitude: f64,
    period: f64,
    /// `(start_time, multiplier)`, sorted by start time.
    phase_offsets: Vec<(f64, f64)>,
}

impl LoadModel {
    pub fn new(lambda_base: f64, amplitude: f64, period: f64, phase_offsets: Vec<(f64, f64)>) -> Result<Self, TrafficError> {
        let invalid = |msg: String| Err(TrafficError::InvalidModel(msg));
        if !(lambda_base.is_finite() && lambda_base >= 0.0) {
            return invalid(format!("lambda_base must be finite and non-negative, got {lambda_base}"));
        }
        if !(0.0..1.0).contains(&amplitude) {
            return invalid(format!("amplitude must lie in [0, 1), got {amplitude}"));
        }
        if !(period.is_finite() && period > 0.0) {
            return invalid(format!("period must be positive, got {period}"));
        }
        for pair in phase_offsets.windows(2) {
            if pair[1].0 <= pair[0].0 {
                return invalid("phase start times must be strictly increasing".into());
            }
        }
        if let Some(&(start, mult)) = phase_offsets
            .iter()
            .find(|&&(s, m)| !(s.is_finite() && s >= 0.0 && m.is_finite() && m >= 0.0))
        {
            return invalid(format!("bad phase ({start}, {mult})"));
        }
        Ok(Self {
            lambda_base,
            amplitude,
            period,
            phase_offsets,
        })
    }

    /// Constant rate `lambda`.
    pub fn stationary(lambda: f64) -> Result<Self, TrafficError> {
        Self::new(lambda, 0.0, 1.0, Vec::new())
    }

    pub fn lambda_base(&self) -> f64 {
        self.lambda_base
    }

    pub fn amplitude(&self) -> f64 {
        self.amplitude
    }

    pub fn period(&self) -> f64 {
        self.period
    }

    pub fn phase_offsets(&self) -> &[(f64, f64)] {
        &self.phase_offsets
    }

    pub fn multiplier(&self, t: f64) -> f64 {
        self.phase_offsets
            .iter()
            .take_while(|&&(start, _)| start <= t)
            .last()
            .map_or(1.0, |&(_, m)| m)
    }

    pub fn rate(&self, t: f64) -> f64 {
        self.lambda_base * (1.0 + self.amplitude * (2.0 * PI * t / self.period).sin()) * self.multiplier(t)
    }

    pub fn rate_max(&self) -> f64 {
        let initial = match self.phase_offsets.first() {
            Some(&(start, _)) if start <= 0.0 => 0.0,
            _ => 1.0,
        };
        let max_mult = self.phase_offsets.iter().map(|&(_, m)| m).fold(initial, f64::max);
        self.lambda_base * (1.0 + self.amplitude) * max_mult
    }

    /// True when no arrival can ever occur at or after `t`.
    fn silent_from(&self, t: f64) -> bool {
        if self.lambda_base == 0.0 {
            return true;
        }
        self.multiplier(t) == 0.0 && self.phase_offsets.iter().all(|&(s, m)| s <= t || m == 0.0)
    }

    /// Next arrival strictly after `t_now`, or `f64::INFINITY` if the rate
    /// is zero from `t_now` onward.
    pub fn next_arrival<R: Rng + ?Sized>(&self, t_now: f64, rng: &mut R) -> f64 {
        let rate_max = self.rate_max();
        if rate_max <= 0.0 || self.silent_from(t_now) {
            return f64::INFINITY;
        }
        let proposal = Exp::new(rate_max).expect("positive rate");
        let mut t = t_now;
        loop {
            t += proposal.sample(rng);
            if self.silent_from(t) {
                return f64::INFINITY;
            }
            let ratio = self.rate(t) / rate_max;
            // Skip the uniform draw when acceptance is certain, so a flat
            // rate consumes exactly one exponential draw per arrival.
            if ratio >= 1.0 || rng.random::<f64>() < ratio {
                return t;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NsprStatus {
    Pending,
    Placed,
    Rejected,
    Departed,
}

/// One slice placement request: a chain of VNFs joined by virtual links.
#[derive(Debug, Clone, PartialEq)]
pub struct Nspr {
    pub slice_id: SliceId,
    /// `(cpu_demand, ram_demand)` per VNF, in chain order.
    pub vnfs: Vec<(u64, u64)>,
    /// Bandwidth demand of the link from VNF `i` to VNF `i + 1`.
    pub vlinks: Vec<u64>,
    pub arrival_time: f64,
    pub holding_time: f64,
    pub status: NsprStatus,
}

impl Nspr {
    pub fn vnf_count(&self) -> usize {
        self.vnfs.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsprTemplate {
    pub vnf_count: usize,
    pub cpu_demand_range: (u64, u64),
    pub ram_demand_range: (u64, u64),
    pub bw_demand_range: (u64, u64),
    pub mean_holding: f64,
}

impl NsprTemplate {
    pub fn validate(&self) -> Result<(), TrafficError> {
        let invalid = |msg: String| Err(TrafficError::InvalidTemplate(msg));
        if self.vnf_count == 0 {
            return invalid("vnf_count must be at least 1".into());
        }
        for (name, (lo, hi)) in [
            ("cpu", self.cpu_demand_range),
            ("ram", self.ram_demand_range),
            ("bw", self.bw_demand_range),
        ] {
            if lo == 0 || lo > hi {
                return invalid(format!("{name} range [{lo}, {hi}] must satisfy 1 <= min <= max"));
            }
        }
        if !(self.mean_holding.is_finite() && self.mean_holding > 0.0) {
            return invalid(format!("mean_holding must be positive, got {}", self.mean_holding));
        }
        Ok(())
    }

    /// Expected total CPU demand of one slice.
    pub fn mean_slice_cpu(&self) -> f64 {
        let (lo, hi) = self.cpu_demand_range;
        self.vnf_count as f64 * (lo + hi) as f64 / 2.0
    }
}

/// Draws one request from `template`.
///
/// Draw order: cpu and ram for each VNF, then each virtual link's
/// bandwidth, then the holding time.
pub fn sample_nspr<R: Rng + ?Sized>(template: &NsprTemplate, slice_id: SliceId, t_arrival: f64, rng: &mut R) -> Nspr {
    let (cpu_lo, cpu_hi) = template.cpu_demand_range;
    let (ram_lo, ram_hi) = template.ram_demand_range;
    let (bw_lo, bw_hi) = template.bw_demand_range;
    let vnfs = (0..template.vnf_count)
        .map(|_| (rng.random_range(cpu_lo..=cpu_hi), rng.random_range(ram_lo..=ram_hi)))
        .collect();
    let vlinks = (1..template.vnf_count).map(|_| rng.random_range(bw_lo..=bw_hi)).collect();
    let holding_time = Exp::new(1.0 / template.mean_holding)
        .expect("validated mean_holding")
        .sample(rng);
    Nspr {
        slice_id,
        vnfs,
        vlinks,
        arrival_time: t_arrival,
        holding_time,
        status: NsprStatus::Pending,
    }
}

/// Instantaneous offered CPU load `λ(t) · mean_holding · E[slice cpu] / Σ cpu capacity`.
pub fn offered_load(model: &LoadModel, template: &NsprTemplate, net: &PhysicalNetwork, t: f64) -> f64 {
    let capacity = net.total_cpu_capacity();
    if capacity == 0 {
        return 0.0;
    }
    model.rate(t) * template.mean_holding * template.mean_slice_cpu() / capacity as f64
}

/// The `[traffic]` configuration section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrafficConfig {
    pub lambda_base: f64,
    pub amplitude: f64,
    pub period: f64,
    /// `[start_time, multiplier]` pairs.
    pub phases: Vec<(f64, f64)>,
    pub vnf_count: usize,
    pub cpu_min: u64,
    pub cpu_max: u64,
    pub ram_min: u64,
    pub ram_max: u64,
    pub bw_min: u64,
    pub bw_max: u64,
    pub mean_holding: f64,
}

impl Default for TrafficConfig {
    fn default() -> Self {
        Self {
            lambda_base: 12.0,
            amplitude: 0.3,
            period: 2000.0,
            phases: Vec::new(),
            vnf_count: 5,
            cpu_min: 1,
            cpu_max: 4,
            ram_min: 1,
            ram_max: 4,
            bw_min: 1,
            bw_max: 3,
            mean_holding: 100.0,
        }
    }
}

impl TrafficConfig {
    pub fn load_model(&self) -> Result<LoadModel, TrafficError> {
        LoadModel::new(self.lambda_base, self.amplitude, self.period, self.phases.clone())
    }

    pub fn template(&self) -> Result<NsprTemplate, TrafficError> {
        let template = NsprTemplate {
            vnf_count: self.vnf_count,
            cpu_demand_range: (self.cpu_min, self.cpu_max),
            ram_demand_range: (self.ram_min, self.ram_max),
            bw_demand_range: (self.bw_min, self.bw_max),
            mean_holding: self.mean_holding,
        };
        template.validate()?;
        Ok(template)
    }
}
