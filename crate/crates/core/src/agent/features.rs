//! State vectors for the actor and critic.
//!
//! Layout, all entries in `[-1, 1]`:
//!
//! ```text
//! per server s:  cpu_avail/cpu_cap, ram_avail/ram_cap, max adjacent bw_avail / max bw_cap
//! request:       cpu/cpu_ref, ram/ram_ref, incoming bw/bw_ref, vnf_index/vnf_count, prev host id/(S-1) or -1
//! load (opt.):   min(ρ, 2)/2, network cpu utilization
//! ```

use super::AgentVariant;
use crate::scalar::Scalar;
use crate::substrate::{PhysicalNetwork, ServerId};
use crate::traffic::{Nspr, NsprTemplate};

pub const SERVER_FEATURES: usize = 3;
pub const REQUEST_FEATURES: usize = 5;
pub const LOAD_FEATURES: usize = 2;

#[derive(Debug, Clone)]
pub struct Featurizer {
    use_load_features: bool,
    cpu_ref: f64,
    ram_ref: f64,
    bw_ref: f64,
    max_bw_capacity: f64,
}

impl Featurizer {
    /// Demand features are normalized by the template's upper bounds.
    pub fn new(net: &PhysicalNetwork, template: &NsprTemplate, variant: AgentVariant) -> Self {
        Self {
            use_load_features: variant.use_load_features,
            cpu_ref: template.cpu_demand_range.1.max(1) as f64,
            ram_ref: template.ram_demand_range.1.max(1) as f64,
            bw_ref: template.bw_demand_range.1.max(1) as f64,
            max_bw_capacity: net.links.iter().map(|l| l.bw_capacity).max().unwrap_or(0) as f64,
        }
    }

    pub fn dim(&self, server_count: usize) -> usize {
        SERVER_FEATURES * server_count + REQUEST_FEATURES + if self.use_load_features { LOAD_FEATURES } else { 0 }
    }

    pub fn featurize<T: Scalar>(
        &self,
        net: &PhysicalNetwork,
        nspr: &Nspr,
        vnf_index: usize,
        prev_host: Option<ServerId>,
        load_estimate: f64,
    ) -> Vec<T> {
        let n = net.server_count();
        let mut state = Vec::with_capacity(self.dim(n));
        for server in &net.servers {
            let best_bw = net
                .neighbors(server.server_id)
                .iter()
                .map(|&(_, l)| net.links[l].bw_available)
                .max()
                .unwrap_or(0);
            let bw = if self.max_bw_capacity > 0.0 {
                best_bw as f64 / self.max_bw_capacity
            } else {
                0.0
            };
            state.push(T::lit(server.cpu_available as f64 / server.cpu_capacity as f64));
            state.push(T::lit(server.ram_available as f64 / server.ram_capacity as f64));
            state.push(T::lit(bw));
        }

        let (cpu, ram) = nspr.vnfs[vnf_index];
        let incoming_bw = vnf_index.checked_sub(1).map_or(0, |i| nspr.vlinks[i]);
        let prev = match prev_host {
            Some(s) if n > 1 => s as f64 / (n - 1) as f64,
            Some(_) => 0.0,
            None => -1.0,
        };
        state.push(T::lit((cpu as f64 / self.cpu_ref).min(1.0)));
        state.push(T::lit((ram as f64 / self.ram_ref).min(1.0)));
        state.push(T::lit((incoming_bw as f64 / self.bw_ref).min(1.0)));
        state.push(T::lit(vnf_index as f64 / nspr.vnf_count() as f64));
        state.push(T::lit(prev));

        if self.use_load_features {
            state.push(T::lit(load_estimate.clamp(0.0, 2.0) / 2.0));
            state.push(T::lit(net.utilization().overall.cpu));
        }
        state
    }
}
