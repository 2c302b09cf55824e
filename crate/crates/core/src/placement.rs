//! Feasibility filtering, bandwidth-constrained routing and assembly of
//! complete placement decisions (VNF hosts plus chaining paths).

use std::collections::{BTreeMap, HashMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::substrate::{LinkId, NodeId, PhysicalNetwork, ServerId, SliceId};
use crate::traffic::Nspr;

/// Where each VNF of a slice runs and which links carry each virtual link.
///
/// The decision also carries the demands it was assembled for, so it can be
/// applied to and released from a network on its own.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlacementDecision {
    pub slice_id: SliceId,
    pub vnf_hosts: Vec<ServerId>,
    /// Path `i` connects `vnf_hosts[i]` to `vnf_hosts[i + 1]`; empty when
    /// both VNFs share a server.
    pub vlink_paths: Vec<Vec<LinkId>>,
    /// `(cpu, ram)` per VNF.
    pub vnf_demands: Vec<(u64, u64)>,
    pub vlink_bw: Vec<u64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum RejectReason {
    NodeCapacity,
    NoPath,
    /// Consecutive VNFs on one server while co-location is disabled.
    Colocation,
}

impl fmt::Display for RejectReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RejectReason::NodeCapacity => "node_capacity",
            RejectReason::NoPath => "no_path",
            RejectReason::Colocation => "colocation",
        })
    }
}

/// Why a slice could not be placed. `index` is the first failing VNF
/// (for node reasons) or virtual link (for [`RejectReason::NoPath`]).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rejection {
    pub reason: RejectReason,
    pub index: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Assembly {
    Placed(PlacementDecision),
    Rejected(Rejection),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DecisionCost {
    /// Σ over virtual links of bandwidth demand × hop count.
    pub total_bw_consumed: u64,
    pub max_server_utilization_after: f64,
    pub servers_touched: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PlacementError {
    #[error("node {0} is not a server of this network")]
    UnknownNode(NodeId),
    #[error("expected {expected} hosts, got {got}")]
    LengthMismatch { expected: usize, got: usize },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlacementConfig {
    pub allow_colocation: bool,
}

impl Default for PlacementConfig {
    fn default() -> Self {
        Self { allow_colocation: true }
    }
}

/// Servers that can host a VNF with the given demands, ascending by id.
pub fn candidate_nodes(net: &PhysicalNetwork, cpu_demand: u64, ram_demand: u64) -> Vec<ServerId> {
    net.servers
        .iter()
        .filter(|s| s.cpu_available >= cpu_demand && s.ram_available >= ram_demand)
        .map(|s| s.server_id)
        .collect()
}

/// Minimum-hop path between two servers over links with at least
/// `bw_demand` available bandwidth. Among shortest paths the one with the
/// lexicographically smallest node sequence is returned.
pub fn shortest_feasible_path(
    net: &PhysicalNetwork,
    src: ServerId,
    dst: ServerId,
    bw_demand: u64,
) -> Result<Option<Vec<LinkId>>, PlacementError> {
    for node in [src, dst] {
        if !net.is_server(node) {
            return Err(PlacementError::UnknownNode(node));
        }
    }
    Ok(bfs_path(net, src, dst, |l| net.links[l].bw_available >= bw_demand))
}

// Visiting neighbors in ascending id order makes the first-discovered parent
// of every node lie on its lexicographically smallest shortest path.
fn bfs_path(net: &PhysicalNetwork, src: NodeId, dst: NodeId, link_ok: impl Fn(LinkId) -> bool) -> Option<Vec<LinkId>> {
    if src == dst {
        return Some(Vec::new());
    }
    let mut parent: Vec<Option<(NodeId, LinkId)>> = vec![None; net.node_count()];
    let mut seen = vec![false; net.node_count()];
    seen[src] = true;
    let mut queue = VecDeque::from([src]);
    while let Some(u) = queue.pop_front() {
        for &(v, link) in net.neighbors(u) {
            if seen[v] || !link_ok(link) {
                continue;
            }
            seen[v] = true;
            parent[v] = Some((u, link));
            if v == dst {
                let mut path = Vec::new();
                let mut node = dst;
                while let Some((p, l)) = parent[node] {
                    path.push(l);
                    node = p;
                }
                path.reverse();
                return Some(path);
            }
            queue.push_back(v);
        }
    }
    None
}

/// Turns a host assignment into a complete decision.
///
/// VNFs sharing a server must fit jointly. Virtual links are routed in
/// chain order, and each route sees the bandwidth claimed by the routes
/// before it.
pub fn assemble_decision(
    net: &PhysicalNetwork,
    nspr: &Nspr,
    vnf_hosts: &[ServerId],
    config: &PlacementConfig,
) -> Result<Assembly, PlacementError> {
    if vnf_hosts.len() != nspr.vnfs.len() {
        return Err(PlacementError::LengthMismatch {
            expected: nspr.vnfs.len(),
            got: vnf_hosts.len(),
        });
    }
    if let Some(&bad) = vnf_hosts.iter().find(|&&h| !net.is_server(h)) {
        return Err(PlacementError::UnknownNode(bad));
    }

    let rejected = |reason, index| Ok(Assembly::Rejected(Rejection { reason, index }));
    let mut claimed_nodes: BTreeMap<ServerId, (u64, u64)> = BTreeMap::new();
    for (i, (&host, &(cpu, ram))) in vnf_hosts.iter().zip(&nspr.vnfs).enumerate() {
        if !config.allow_colocation && i > 0 && vnf_hosts[i - 1] == host {
            return rejected(RejectReason::Colocation, i);
        }
        let claim = claimed_nodes.entry(host).or_default();
        claim.0 += cpu;
        claim.1 += ram;
        let server = &net.servers[host];
        if claim.0 > server.cpu_available || claim.1 > server.ram_available {
            return rejected(RejectReason::NodeCapacity, i);
        }
    }

    let mut claimed_bw: HashMap<LinkId, u64> = HashMap::new();
    let mut vlink_paths = Vec::with_capacity(nspr.vlinks.len());
    for (i, &bw) in nspr.vlinks.iter().enumerate() {
        let residual_ok = |l: LinkId| {
            let used = claimed_bw.get(&l).copied().unwrap_or(0);
            net.links[l].bw_available.saturating_sub(used) >= bw
        };
        let Some(path) = bfs_path(net, vnf_hosts[i], vnf_hosts[i + 1], residual_ok) else {
            return rejected(RejectReason::NoPath, i);
        };
        for &l in &path {
            *claimed_bw.entry(l).or_default() += bw;
        }
        vlink_paths.push(path);
    }

    Ok(Assembly::Placed(PlacementDecision {
        slice_id: nspr.slice_id,
        vnf_hosts: vnf_hosts.to_vec(),
        vlink_paths,
        vnf_demands: nspr.vnfs.clone(),
        vlink_bw: nspr.vlinks.clone(),
    }))
}

/// Resource cost of a decision that has not been applied to `net` yet.
pub fn decision_cost(net: &PhysicalNetwork, decision: &PlacementDecision) -> DecisionCost {
    let total_bw_consumed = decision
        .vlink_paths
        .iter()
        .zip(&decision.vlink_bw)
        .map(|(path, &bw)| bw * path.len() as u64)
        .sum();
    let mut cpu_on: BTreeMap<ServerId, u64> = BTreeMap::new();
    for (&host, &(cpu, _)) in decision.vnf_hosts.iter().zip(&decision.vnf_demands) {
        *cpu_on.entry(host).or_default() += cpu;
    }
    let max_server_utilization_after = cpu_on
        .iter()
        .map(|(&host, &cpu)| {
            let s = &net.servers[host];
            (s.cpu_capacity - s.cpu_available + cpu) as f64 / s.cpu_capacity as f64
        })
        .fold(0.0, f64::max)
        .min(1.0);
    DecisionCost {
        total_bw_consumed,
        max_server_utilization_after,
        servers_touched: cpu_on.len(),
    }
}
