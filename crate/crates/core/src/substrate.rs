//! Physical substrate network: data centers, servers, switches, links and
//! the ledger of resources held by active slices.
//!
//! Node identifiers are dense. Servers occupy `0..server_count()` in data
//! center order, and the switch of data center `d` is node
//! `server_count() + d`. A server's id is therefore also its index in
//! [`PhysicalNetwork::servers`] and in every per-server vector built on top
//! of the network (feature blocks, action masks, score vectors).

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::placement::PlacementDecision;

pub type NodeId = usize;
pub type ServerId = usize;
pub type LinkId = usize;
pub type SliceId = u64;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Tier {
    /// Edge data center: local, small.
    Edc,
    /// Core data center: regional, medium.
    Cdc,
    /// Central cloud platform: national, big.
    Ccp,
}

impl Tier {
    pub const ALL: [Tier; 3] = [Tier::Edc, Tier::Cdc, Tier::Ccp];

    fn index(self) -> usize {
        match self {
            Tier::Edc => 0,
            Tier::Cdc => 1,
            Tier::Ccp => 2,
        }
    }
}

impl fmt::Display for Tier {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Tier::Edc => "EDC",
            Tier::Cdc => "CDC",
            Tier::Ccp => "CCP",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DataCenter {
    pub dc_id: usize,
    pub tier: Tier,
    pub server_ids: Vec<ServerId>,
    pub switch_id: NodeId,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ServerNode {
    pub server_id: ServerId,
    pub dc_id: usize,
    pub cpu_capacity: u64,
    pub ram_capacity: u64,
    pub cpu_available: u64,
    pub ram_available: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Link {
    pub link_id: LinkId,
    /// Stored with the smaller node id first.
    pub endpoints: (NodeId, NodeId),
    pub bw_capacity: u64,
    pub bw_available: u64,
}

impl Link {
    /// The endpoint opposite `node`, if `node` is an endpoint of this link.
    pub fn other(&self, node: NodeId) -> Option<NodeId> {
        match self.endpoints {
            (a, b) if a == node => Some(b),
            (a, b) if b == node => Some(a),
            _ => None,
        }
    }
}

/// A resource on a specific server or link, used to name violations.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Resource {
    Cpu(ServerId),
    Ram(ServerId),
    Bandwidth(LinkId),
}

impl fmt::Display for Resource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Resource::Cpu(s) => write!(f, "cpu on server {s}"),
            Resource::Ram(s) => write!(f, "ram on server {s}"),
            Resource::Bandwidth(l) => write!(f, "bandwidth on link {l}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SubstrateError {
    #[error("invalid topology: {0}")]
    InvalidTopology(String),
    #[error("insufficient resources: {resource} (demand {demand}, available {available})")]
    InsufficientResources {
        resource: Resource,
        demand: u64,
        available: u64,
    },
    #[error("slice {0} is already allocated")]
    DuplicateSlice(SliceId),
    #[error("slice {0} is not allocated")]
    UnknownSlice(SliceId),
    #[error("node {0} is not a server of this network")]
    UnknownNode(NodeId),
    #[error("malformed decision: {0}")]
    MalformedDecision(String),
}

/// Resources held by one active slice.
type ServerUse = BTreeMap<ServerId, (u64, u64)>;
type LinkUse = BTreeMap<LinkId, u64>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Allocation {
    pub decision: PlacementDecision,
    pub server_use: BTreeMap<ServerId, (u64, u64)>,
    pub link_use: BTreeMap<LinkId, u64>,
}

/// Per-tier and overall topology parameters.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TopologyConfig {
    pub edc_count: usize,
    pub cdc_count: usize,
    pub ccp_count: usize,
    pub edc_servers: usize,
    pub cdc_servers: usize,
    pub ccp_servers: usize,
    pub edc_cpu: u64,
    pub edc_ram: u64,
    pub cdc_cpu: u64,
    pub cdc_ram: u64,
    pub ccp_cpu: u64,
    pub ccp_ram: u64,
    pub bw_server: u64,
    pub bw_edc_cdc: u64,
    pub bw_cdc_ring: u64,
    pub bw_cdc_ccp: u64,
}

impl Default for TopologyConfig {
    fn default() -> Self {
        Self {
            edc_count: 15,
            cdc_count: 5,
            ccp_count: 1,
            edc_servers: 16,
            cdc_servers: 64,
            ccp_servers: 448,
            edc_cpu: 8,
            edc_ram: 16,
            cdc_cpu: 16,
            cdc_ram: 32,
            ccp_cpu: 32,
            ccp_ram: 64,
            bw_server: 100,
            bw_edc_cdc: 200,
            bw_cdc_ring: 400,
            bw_cdc_ccp: 400,
        }
    }
}

impl TopologyConfig {
    fn tier_params(&self, tier: Tier) -> (usize, u64, u64) {
        match tier {
            Tier::Edc => (self.edc_servers, self.edc_cpu, self.edc_ram),
            Tier::Cdc => (self.cdc_servers, self.cdc_cpu, self.cdc_ram),
            Tier::Ccp => (self.ccp_servers, self.ccp_cpu, self.ccp_ram),
        }
    }
}

/// Servers of one data center, used by [`PhysicalNetwork::from_layout`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DcLayout {
    pub tier: Tier,
    /// `(cpu_capacity, ram_capacity)` per server.
    pub servers: Vec<(u64, u64)>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct Utilization {
    pub cpu: f64,
    pub ram: f64,
    pub bw: f64,
}

/// Utilization ratios for the whole network and for each tier.
///
/// Per-tier bandwidth covers the links internal to the tier's data centers
/// (server to switch); inter-DC links only count toward `overall`.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct UtilizationSummary {
    pub overall: Utilization,
    per_tier: [Utilization; 3],
}

impl UtilizationSummary {
    pub fn tier(&self, tier: Tier) -> Utilization {
        self.per_tier[tier.index()]
    }
}

fn used_ratio(available: u64, capacity: u64) -> f64 {
    if capacity == 0 {
        0.0
    } else {
        1.0 - available as f64 / capacity as f64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhysicalNetwork {
    pub data_centers: Vec<DataCenter>,
    pub servers: Vec<ServerNode>,
    pub switches: Vec<NodeId>,
    pub links: Vec<Link>,
    pub allocations: BTreeMap<SliceId, Allocation>,
    /// Sorted by neighbor id.
    adjacency: Vec<Vec<(NodeId, LinkId)>>,
    /// Tentative per-VNF debits of an episode in progress.
    staged: Vec<(ServerId, u64, u64)>,
}

impl PhysicalNetwork {
    /// Builds the tiered data center topology.
    ///
    /// Each DC's servers star-connect to its switch. EDCs are partitioned
    /// into contiguous, equally sized groups, one per CDC. CDC switches form
    /// a ring and each links to the CCP switch.
    pub fn build_topology(config: &TopologyConfig) -> Result<Self, SubstrateError> {
        if config.ccp_count > 1 {
            return Err(SubstrateError::InvalidTopology(format!(
                "at most one CCP is supported, got {}",
                config.ccp_count
            )));
        }
        if config.edc_count > 0 && (config.cdc_count == 0 || !config.edc_count.is_multiple_of(config.cdc_count)) {
            return Err(SubstrateError::InvalidTopology(format!(
                "EDC count {} is not divisible by CDC count {}",
                config.edc_count, config.cdc_count
            )));
        }
        let counts = [
            (Tier::Edc, config.edc_count),
            (Tier::Cdc, config.cdc_count),
            (Tier::Ccp, config.ccp_count),
        ];
        let mut layout = Vec::new();
        for (tier, count) in counts {
            let (servers, cpu, ram) = config.tier_params(tier);
            if count > 0 && servers == 0 {
                return Err(SubstrateError::InvalidTopology(format!(
                    "{tier} data centers must have at least one server"
                )));
            }
            for _ in 0..count {
                layout.push(DcLayout {
                    tier,
                    servers: vec![(cpu, ram); servers],
                });
            }
        }
        if layout.is_empty() {
            return Err(SubstrateError::InvalidTopology("no data centers".into()));
        }

        let server_count: usize = layout.iter().map(|dc| dc.servers.len()).sum();
        let switch_of = |dc: usize| server_count + dc;
        let edc_dcs = 0..config.edc_count;
        let cdc_dcs = config.edc_count..config.edc_count + config.cdc_count;
        let ccp_dc = (config.ccp_count == 1).then_some(config.edc_count + config.cdc_count);

        let mut links = Vec::new();
        let mut next_server = 0;
        for (dc_id, dc) in layout.iter().enumerate() {
            for _ in &dc.servers {
                links.push((next_server, switch_of(dc_id), config.bw_server));
                next_server += 1;
            }
        }
        if let Some(per_cdc) = config.edc_count.checked_div(config.cdc_count) {
            for edc in edc_dcs {
                let cdc = cdc_dcs.start + edc / per_cdc;
                links.push((switch_of(edc), switch_of(cdc), config.bw_edc_cdc));
            }
        }
        let ring: Vec<usize> = cdc_dcs.clone().collect();
        match ring.len() {
            0 | 1 => {}
            2 => links.push((switch_of(ring[0]), switch_of(ring[1]), config.bw_cdc_ring)),
            n => {
                for i in 0..n {
                    links.push((switch_of(ring[i]), switch_of(ring[(i + 1) % n]), config.bw_cdc_ring));
                }
            }
        }
        if let Some(ccp) = ccp_dc {
            for cdc in cdc_dcs {
                links.push((switch_of(cdc), switch_of(ccp), config.bw_cdc_ccp));
            }
        }

        let net = Self::from_layout(layout, &links)?;
        if !net.is_connected() {
            return Err(SubstrateError::InvalidTopology(
                "configuration yields a disconnected network".into(),
            ));
        }
        Ok(net)
    }

    /// Builds a network from explicit data centers and links.
    ///
    /// Servers are numbered in DC order, then one switch per DC. Links
    /// are given as `(node, node, bandwidth)`. Connectivity is not required;
    /// see [`PhysicalNetwork::is_connected`].
    pub fn from_layout(layout: Vec<DcLayout>, links: &[(NodeId, NodeId, u64)]) -> Result<Self, SubstrateError> {
        let server_count: usize = layout.iter().map(|dc| dc.servers.len()).sum();
        let node_count = server_count + layout.len();
        let mut servers = Vec::with_capacity(server_count);
        let mut data_centers = Vec::with_capacity(layout.len());
        for (dc_id, dc) in layout.into_iter().enumerate() {
            if dc.servers.is_empty() {
                return Err(SubstrateError::InvalidTopology(format!("data center {dc_id} has no servers")));
            }
            let mut server_ids = Vec::with_capacity(dc.servers.len());
            for (cpu, ram) in dc.servers {
                if cpu == 0 || ram == 0 {
                    return Err(SubstrateError::InvalidTopology(format!(
                        "server {} must have positive cpu and ram capacity",
                        servers.len()
                    )));
                }
                server_ids.push(servers.len());
                servers.push(ServerNode {
                    server_id: servers.len(),
                    dc_id,
                    cpu_capacity: cpu,
                    ram_capacity: ram,
                    cpu_available: cpu,
                    ram_available: ram,
                });
            }
            data_centers.push(DataCenter {
                dc_id,
                tier: dc.tier,
                server_ids,
                switch_id: server_count + dc_id,
            });
        }

        let mut adjacency = vec![Vec::new(); node_count];
        let mut built = Vec::with_capacity(links.len());
        for &(a, b, bw) in links {
            if a >= node_count || b >= node_count {
                return Err(SubstrateError::InvalidTopology(format!("link ({a}, {b}) references an unknown node")));
            }
            if a == b {
                return Err(SubstrateError::InvalidTopology(format!("self-loop on node {a}")));
            }
            let endpoints = (a.min(b), a.max(b));
            if adjacency[a].iter().any(|&(n, _)| n == b) {
                return Err(SubstrateError::InvalidTopology(format!("duplicate link between {a} and {b}")));
            }
            let link_id = built.len();
            adjacency[a].push((b, link_id));
            adjacency[b].push((a, link_id));
            built.push(Link {
                link_id,
                endpoints,
                bw_capacity: bw,
                bw_available: bw,
            });
        }
        for neighbors in &mut adjacency {
            neighbors.sort_unstable();
        }

        Ok(Self {
            data_centers,
            servers,
            switches: (server_count..node_count).collect(),
            links: built,
            allocations: BTreeMap::new(),
            adjacency,
            staged: Vec::new(),
        })
    }

    pub fn server_count(&self) -> usize {
        self.servers.len()
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_server(&self, node: NodeId) -> bool {
        node < self.servers.len()
    }

    /// Neighbors of `node` with the connecting link, sorted by neighbor id.
    pub fn neighbors(&self, node: NodeId) -> &[(NodeId, LinkId)] {
        &self.adjacency[node]
    }

    pub fn tier_of_server(&self, server: ServerId) -> Tier {
        self.data_centers[self.servers[server].dc_id].tier
    }

    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        if n == 0 {
            return true;
        }
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        let mut count = 1;
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    count += 1;
                    queue.push_back(v);
                }
            }
        }
        count == n
    }

    /// Hop distances from `src` to every node, ignoring bandwidth.
    /// Unreachable nodes get `u32::MAX`.
    pub fn hop_distances(&self, src: NodeId) -> Vec<u32> {
        let mut dist = vec![u32::MAX; self.node_count()];
        dist[src] = 0;
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            for &(v, _) in &self.adjacency[u] {
                if dist[v] == u32::MAX {
                    dist[v] = dist[u] + 1;
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    /// Walks `path` from `src` and returns the visited nodes (including
    /// `src`). Fails if a link id is unknown, does not touch the current
    /// node, or the walk revisits a node.
    pub fn path_nodes(&self, src: NodeId, path: &[LinkId]) -> Result<Vec<NodeId>, SubstrateError> {
        let mut nodes = vec![src];
        let mut current = src;
        for &link_id in path {
            let link = self
                .links
                .get(link_id)
                .ok_or_else(|| SubstrateError::MalformedDecision(format!("unknown link {link_id}")))?;
            current = link.other(current).ok_or_else(|| {
                SubstrateError::MalformedDecision(format!("link {link_id} does not continue the path at node {current}"))
            })?;
            if nodes.contains(&current) {
                return Err(SubstrateError::MalformedDecision(format!("path revisits node {current}")));
            }
            nodes.push(current);
        }
        Ok(nodes)
    }

    /// Aggregates the server and link consumption of a decision and checks
    /// its structure against this network.
    fn consumption(
        &self,
        decision: &PlacementDecision,
    ) -> Result<(ServerUse, LinkUse), SubstrateError> {
        let vnf_count = decision.vnf_hosts.len();
        if decision.vnf_demands.len() != vnf_count
            || decision.vlink_paths.len() + 1 != vnf_count.max(1)
            || decision.vlink_bw.len() != decision.vlink_paths.len()
        {
            return Err(SubstrateError::MalformedDecision(format!(
                "{} hosts, {} demands, {} paths, {} link demands",
                vnf_count,
                decision.vnf_demands.len(),
                decision.vlink_paths.len(),
                decision.vlink_bw.len()
            )));
        }
        let mut server_use: BTreeMap<ServerId, (u64, u64)> = BTreeMap::new();
        for (&host, &(cpu, ram)) in decision.vnf_hosts.iter().zip(&decision.vnf_demands) {
            if !self.is_server(host) {
                return Err(SubstrateError::UnknownNode(host));
            }
            let entry = server_use.entry(host).or_default();
            entry.0 += cpu;
            entry.1 += ram;
        }
        let mut link_use: BTreeMap<LinkId, u64> = BTreeMap::new();
        for (i, (path, &bw)) in decision.vlink_paths.iter().zip(&decision.vlink_bw).enumerate() {
            let (src, dst) = (decision.vnf_hosts[i], decision.vnf_hosts[i + 1]);
            let nodes = self.path_nodes(src, path)?;
            if *nodes.last().unwrap_or(&src) != dst {
                return Err(SubstrateError::MalformedDecision(format!(
                    "path {i} does not connect server {src} to server {dst}"
                )));
            }
            for &link in path {
                *link_use.entry(link).or_default() += bw;
            }
        }
        Ok((server_use, link_use))
    }

    /// Debits the decision's demands from every assigned server and every
    /// hop of every path. All-or-nothing: on error the network is untouched.
    pub fn allocate(&mut self, decision: PlacementDecision) -> Result<(), SubstrateError> {
        let slice_id = decision.slice_id;
        if self.allocations.contains_key(&slice_id) {
            return Err(SubstrateError::DuplicateSlice(slice_id));
        }
        let (server_use, link_use) = self.consumption(&decision)?;
        for (&s, &(cpu, ram)) in &server_use {
            let server = &self.servers[s];
            if cpu > server.cpu_available {
                return Err(SubstrateError::InsufficientResources {
                    resource: Resource::Cpu(s),
                    demand: cpu,
                    available: server.cpu_available,
                });
            }
            if ram > server.ram_available {
                return Err(SubstrateError::InsufficientResources {
                    resource: Resource::Ram(s),
                    demand: ram,
                    available: server.ram_available,
                });
            }
        }
        for (&l, &bw) in &link_use {
            if bw > self.links[l].bw_available {
                return Err(SubstrateError::InsufficientResources {
                    resource: Resource::Bandwidth(l),
                    demand: bw,
                    available: self.links[l].bw_available,
                });
            }
        }
        for (&s, &(cpu, ram)) in &server_use {
            self.servers[s].cpu_available -= cpu;
            self.servers[s].ram_available -= ram;
        }
        for (&l, &bw) in &link_use {
            self.links[l].bw_available -= bw;
        }
        self.allocations.insert(
            slice_id,
            Allocation {
                decision,
                server_use,
                link_use,
            },
        );
        Ok(())
    }

    /// Returns every resource held by `slice_id` and removes its entry.
    pub fn release(&mut self, slice_id: SliceId) -> Result<PlacementDecision, SubstrateError> {
        let allocation = self
            .allocations
            .remove(&slice_id)
            .ok_or(SubstrateError::UnknownSlice(slice_id))?;
        for (&s, &(cpu, ram)) in &allocation.server_use {
            self.servers[s].cpu_available += cpu;
            self.servers[s].ram_available += ram;
        }
        for (&l, &bw) in &allocation.link_use {
            self.links[l].bw_available += bw;
        }
        Ok(allocation.decision)
    }

    /// Tentatively debits a server while the VNFs of one slice are being
    /// chosen, so later choices see earlier ones. Undo with
    /// [`PhysicalNetwork::clear_staged`] before allocating.
    pub fn stage(&mut self, server: ServerId, cpu: u64, ram: u64) -> Result<(), SubstrateError> {
        let node = self.servers.get_mut(server).ok_or(SubstrateError::UnknownNode(server))?;
        if cpu > node.cpu_available {
            return Err(SubstrateError::InsufficientResources {
                resource: Resource::Cpu(server),
                demand: cpu,
                available: node.cpu_available,
            });
        }
        if ram > node.ram_available {
            return Err(SubstrateError::InsufficientResources {
                resource: Resource::Ram(server),
                demand: ram,
                available: node.ram_available,
            });
        }
        node.cpu_available -= cpu;
        node.ram_available -= ram;
        self.staged.push((server, cpu, ram));
        Ok(())
    }

    pub fn clear_staged(&mut self) {
        for (s, cpu, ram) in self.staged.drain(..) {
            self.servers[s].cpu_available += cpu;
            self.servers[s].ram_available += ram;
        }
    }

    /// Checks `available + staged + Σ consumed = capacity` on every server
    /// and link, returning the first violated resource.
    pub fn check_conservation(&self) -> Result<(), Resource> {
        let mut cpu: Vec<u64> = self.servers.iter().map(|s| s.cpu_available).collect();
        let mut ram: Vec<u64> = self.servers.iter().map(|s| s.ram_available).collect();
        let mut bw: Vec<u64> = self.links.iter().map(|l| l.bw_available).collect();
        for &(s, c, r) in &self.staged {
            cpu[s] += c;
            ram[s] += r;
        }
        for allocation in self.allocations.values() {
            for (&s, &(c, r)) in &allocation.server_use {
                cpu[s] += c;
                ram[s] += r;
            }
            for (&l, &b) in &allocation.link_use {
                bw[l] += b;
            }
        }
        for (i, server) in self.servers.iter().enumerate() {
            if cpu[i] != server.cpu_capacity {
                return Err(Resource::Cpu(i));
            }
            if ram[i] != server.ram_capacity {
                return Err(Resource::Ram(i));
            }
        }
        for (i, link) in self.links.iter().enumerate() {
            if bw[i] != link.bw_capacity {
                return Err(Resource::Bandwidth(i));
            }
        }
        Ok(())
    }

    pub fn utilization(&self) -> UtilizationSummary {
        // (available, capacity) sums: cpu, ram, bw; overall then per tier
        let mut sums = [[(0u64, 0u64); 3]; 4];
        for server in &self.servers {
            let t = self.data_centers[server.dc_id].tier.index();
            for slot in [0, t + 1] {
                sums[slot][0].0 += server.cpu_available;
                sums[slot][0].1 += server.cpu_capacity;
                sums[slot][1].0 += server.ram_available;
                sums[slot][1].1 += server.ram_capacity;
            }
        }
        for link in &self.links {
            sums[0][2].0 += link.bw_available;
            sums[0][2].1 += link.bw_capacity;
            let (a, b) = link.endpoints;
            if let Some(t) = self.intra_dc_tier(a, b) {
                sums[t.index() + 1][2].0 += link.bw_available;
                sums[t.index() + 1][2].1 += link.bw_capacity;
            }
        }
        let to_util = |s: [(u64, u64); 3]| Utilization {
            cpu: used_ratio(s[0].0, s[0].1),
            ram: used_ratio(s[1].0, s[1].1),
            bw: used_ratio(s[2].0, s[2].1),
        };
        UtilizationSummary {
            overall: to_util(sums[0]),
            per_tier: [to_util(sums[1]), to_util(sums[2]), to_util(sums[3])],
        }
    }

    /// The DC a node belongs to (servers and switches alike).
    pub fn dc_of_node(&self, node: NodeId) -> Option<usize> {
        if self.is_server(node) {
            Some(self.servers[node].dc_id)
        } else if node < self.node_count() {
            Some(node - self.servers.len())
        } else {
            None
        }
    }

    fn intra_dc_tier(&self, a: NodeId, b: NodeId) -> Option<Tier> {
        let (da, db) = (self.dc_of_node(a)?, self.dc_of_node(b)?);
        (da == db).then(|| self.data_centers[da].tier)
    }

    pub fn total_cpu_capacity(&self) -> u64 {
        self.servers.iter().map(|s| s.cpu_capacity).sum()
    }
}
