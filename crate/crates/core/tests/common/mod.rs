#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use slicesim::substrate::{DcLayout, NodeId, PhysicalNetwork, Tier};
use slicesim::SimConfig;

/// Random network of at most `max_nodes` nodes (servers plus one switch
/// per DC) with random links and bandwidths; may be disconnected.
pub fn random_network<R: Rng>(rng: &mut R, max_nodes: usize) -> PhysicalNetwork {
    loop {
        let dcs = rng.random_range(1..=3usize);
        let layout: Vec<DcLayout> = (0..dcs)
            .map(|_| DcLayout {
                tier: Tier::ALL[rng.random_range(0..3)],
                servers: (0..rng.random_range(1..=3))
                    .map(|_| (rng.random_range(1..=16), rng.random_range(1..=16)))
                    .collect(),
            })
            .collect();
        let n: usize = layout.iter().map(|d| d.servers.len()).sum::<usize>() + dcs;
        if n > max_nodes {
            continue;
        }
        let density = rng.random_range(0.15..0.6);
        let mut links = Vec::new();
        for a in 0..n {
            for b in a + 1..n {
                if rng.random_bool(density) {
                    links.push((a, b, rng.random_range(0..=6)));
                }
            }
        }
        return PhysicalNetwork::from_layout(layout, &links).unwrap();
    }
}

/// Exhaustive search over all simple paths: the minimum hop count and,
/// among minimum paths, the lexicographically smallest node sequence.
pub fn oracle_shortest(net: &PhysicalNetwork, src: NodeId, dst: NodeId, bw: u64) -> Option<Vec<NodeId>> {
    let n = net.node_count();
    let mut adj = vec![Vec::new(); n];
    for link in &net.links {
        if link.bw_available >= bw {
            let (a, b) = link.endpoints;
            adj[a].push(b);
            adj[b].push(a);
        }
    }
    let mut best: Option<Vec<NodeId>> = None;
    let mut path = vec![src];
    let mut on_path = vec![false; n];
    on_path[src] = true;
    fn dfs(
        adj: &[Vec<NodeId>],
        dst: NodeId,
        path: &mut Vec<NodeId>,
        on_path: &mut [bool],
        best: &mut Option<Vec<NodeId>>,
    ) {
        let u = *path.last().unwrap();
        if u == dst {
            let better = match best {
                None => true,
                Some(b) => (path.len(), &path[..]) < (b.len(), &b[..]),
            };
            if better {
                *best = Some(path.clone());
            }
            return;
        }
        for &v in &adj[u] {
            if !on_path[v] {
                on_path[v] = true;
                path.push(v);
                dfs(adj, dst, path, on_path, best);
                path.pop();
                on_path[v] = false;
            }
        }
    }
    dfs(&adj, dst, &mut path, &mut on_path, &mut best);
    best
}

/// 100 servers: 4 EDCs of 10, 2 CDCs of 20, one CCP of 20.
pub fn topology_100(config: &mut SimConfig) {
    config.topology.edc_count = 4;
    config.topology.cdc_count = 2;
    config.topology.ccp_count = 1;
    config.topology.edc_servers = 10;
    config.topology.cdc_servers = 20;
    config.topology.ccp_servers = 20;
}

pub type Attrs = BTreeMap<String, String>;

#[derive(Debug, Default)]
pub struct DotGraph {
    pub directed: bool,
    pub nodes: BTreeMap<String, Attrs>,
    pub edges: Vec<(String, String, Attrs)>,
    pub subgraphs: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Id(String),
    Punct(&'static str),
}

fn tokenize(text: &str) -> Result<Vec<Tok>, String> {
    let chars: Vec<char> = text.chars().collect();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        if c.is_whitespace() {
            i += 1;
        } else if c == '/' && chars.get(i + 1) == Some(&'/') || c == '#' {
            while i < chars.len() && chars[i] != '\n' {
                i += 1;
            }
        } else if c == '/' && chars.get(i + 1) == Some(&'*') {
            i += 2;
            while i + 1 < chars.len() && !(chars[i] == '*' && chars[i + 1] == '/') {
                i += 1;
            }
            i += 2;
        } else if c == '"' {
            let mut s = String::new();
            i += 1;
            loop {
                match chars.get(i) {
                    None => return Err("unterminated string".into()),
                    Some('"') => break,
                    Some('\\') if chars.get(i + 1) == Some(&'"') => {
                        s.push('"');
                        i += 2;
                    }
                    Some(&ch) => {
                        s.push(ch);
                        i += 1;
                    }
                }
            }
            i += 1;
            toks.push(Tok::Id(s));
        } else if c == '-' && matches!(chars.get(i + 1), Some('>') | Some('-')) {
            toks.push(Tok::Punct(if chars[i + 1] == '>' { "->" } else { "--" }));
            i += 2;
        } else if let Some(p) = ["{", "}", "[", "]", "=", ";", ",", ":"].iter().find(|p| p.starts_with(c)) {
            toks.push(Tok::Punct(p));
            i += 1;
        } else if c.is_ascii_alphabetic() || c == '_' || c as u32 >= 0x80 {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_' || chars[i] as u32 >= 0x80) {
                i += 1;
            }
            toks.push(Tok::Id(chars[start..i].iter().collect()));
        } else if c.is_ascii_digit() || c == '.' || c == '-' {
            let start = i;
            i += 1;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            toks.push(Tok::Id(chars[start..i].iter().collect()));
        } else {
            return Err(format!("unexpected character {c:?}"));
        }
    }
    Ok(toks)
}

struct Parser {
    toks: Vec<Tok>,
    pos: usize,
    graph: DotGraph,
}

fn is_keyword(s: &str, kw: &str) -> bool {
    s.eq_ignore_ascii_case(kw)
}

impl Parser {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos)
    }

    fn punct(&mut self, p: &str) -> bool {
        if matches!(self.peek(), Some(Tok::Punct(q)) if *q == p) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, p: &str) -> Result<(), String> {
        if self.punct(p) {
            Ok(())
        } else {
            Err(format!("expected {p:?} at token {} ({:?})", self.pos, self.peek()))
        }
    }

    fn id(&mut self) -> Result<String, String> {
        match self.peek() {
            Some(Tok::Id(s)) => {
                let s = s.clone();
                self.pos += 1;
                Ok(s)
            }
            other => Err(format!("expected ID at token {}, got {other:?}", self.pos)),
        }
    }

    fn peek_keyword(&self, kw: &str) -> bool {
        matches!(self.peek(), Some(Tok::Id(s)) if is_keyword(s, kw))
    }

    fn graph(&mut self) -> Result<(), String> {
        if self.peek_keyword("strict") {
            self.pos += 1;
        }
        let kind = self.id()?;
        self.graph.directed = if is_keyword(&kind, "digraph") {
            true
        } else if is_keyword(&kind, "graph") {
            false
        } else {
            return Err(format!("expected graph or digraph, got {kind}"));
        };
        if !self.punct("{") {
            self.id()?;
            self.expect("{")?;
        }
        self.stmt_list()?;
        self.expect("}")?;
        if self.pos != self.toks.len() {
            return Err("trailing tokens after graph".into());
        }
        Ok(())
    }

    fn stmt_list(&mut self) -> Result<(), String> {
        while !matches!(self.peek(), Some(Tok::Punct("}")) | None) {
            self.stmt()?;
            self.punct(";");
        }
        Ok(())
    }

    fn attr_list(&mut self) -> Result<Attrs, String> {
        let mut attrs = Attrs::new();
        while self.punct("[") {
            while !self.punct("]") {
                let k = self.id()?;
                self.expect("=")?;
                let v = self.id()?;
                attrs.insert(k, v);
                if !self.punct(";") {
                    self.punct(",");
                }
            }
        }
        Ok(attrs)
    }

    /// Parses a node id or subgraph and returns the node names it covers.
    fn endpoint(&mut self) -> Result<Vec<String>, String> {
        if self.peek_keyword("subgraph") || self.peek() == Some(&Tok::Punct("{")) {
            let before: Vec<String> = self.graph.nodes.keys().cloned().collect();
            self.subgraph()?;
            return Ok(self.graph.nodes.keys().filter(|k| !before.contains(k)).cloned().collect());
        }
        let name = self.id()?;
        if self.punct(":") {
            self.id()?;
            if self.punct(":") {
                self.id()?;
            }
        }
        Ok(vec![name])
    }

    fn subgraph(&mut self) -> Result<(), String> {
        if self.peek_keyword("subgraph") {
            self.pos += 1;
            if let Some(Tok::Id(_)) = self.peek() {
                let name = self.id()?;
                self.graph.subgraphs.push(name);
            }
        }
        self.expect("{")?;
        self.stmt_list()?;
        self.expect("}")
    }

    fn stmt(&mut self) -> Result<(), String> {
        if ["graph", "node", "edge"].iter().any(|k| self.peek_keyword(k))
            && matches!(self.toks.get(self.pos + 1), Some(Tok::Punct("[")))
        {
            self.pos += 1;
            self.attr_list()?;
            return Ok(());
        }
        if let (Some(Tok::Id(_)), Some(Tok::Punct("="))) = (self.peek(), self.toks.get(self.pos + 1)) {
            self.pos += 2;
            self.id()?;
            return Ok(());
        }
        let is_subgraph = self.peek_keyword("subgraph") || self.peek() == Some(&Tok::Punct("{"));
        let mut chain = vec![self.endpoint()?];
        loop {
            let op = if self.graph.directed { "->" } else { "--" };
            let wrong = if self.graph.directed { "--" } else { "->" };
            if self.punct(wrong) {
                return Err(format!("edge operator {wrong} in the wrong graph kind"));
            }
            if !self.punct(op) {
                break;
            }
            chain.push(self.endpoint()?);
        }
        let attrs = self.attr_list()?;
        if chain.len() == 1 {
            if !is_subgraph {
                for n in &chain[0] {
                    self.graph.nodes.entry(n.clone()).or_default().extend(attrs.clone());
                }
            }
        } else {
            for pair in chain.windows(2) {
                for a in &pair[0] {
                    for b in &pair[1] {
                        self.graph.nodes.entry(a.clone()).or_default();
                        self.graph.nodes.entry(b.clone()).or_default();
                        self.graph.edges.push((a.clone(), b.clone(), attrs.clone()));
                    }
                }
            }
        }
        Ok(())
    }
}

/// Parses DOT text per the published DOT language grammar (HTML strings
/// and `+` string concatenation are not supported).
pub fn parse_dot(text: &str) -> Result<DotGraph, String> {
    let mut parser = Parser {
        toks: tokenize(text)?,
        pos: 0,
        graph: DotGraph::default(),
    };
    parser.graph()?;
    Ok(parser.graph)
}

/// Compares `shortest_feasible_path` with [`oracle_shortest`] on `graphs`
/// random networks of at most 12 nodes, several queries each. Returns the
/// number of disagreeing queries and the number of queries.
pub fn path_oracle_suite(seed: u64, graphs: usize) -> (usize, usize) {
    use rand::SeedableRng;
    use slicesim::placement::shortest_feasible_path;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let (mut mismatches, mut queries) = (0, 0);
    for _ in 0..graphs {
        let net = random_network(&mut rng, 12);
        for _ in 0..8 {
            let src = rng.random_range(0..net.server_count());
            let dst = rng.random_range(0..net.server_count());
            let bw = rng.random_range(0..=5);
            let expected = oracle_shortest(&net, src, dst, bw);
            let got = shortest_feasible_path(&net, src, dst, bw)
                .unwrap()
                .map(|links| net.path_nodes(src, &links).unwrap());
            let feasible = got
                .as_ref()
                .is_none_or(|nodes| nodes.windows(2).all(|w| link_between(&net, w[0], w[1]).is_some_and(|bw_av| bw_av >= bw)));
            queries += 1;
            if got != expected || !feasible {
                mismatches += 1;
            }
        }
    }
    (mismatches, queries)
}

fn link_between(net: &PhysicalNetwork, a: NodeId, b: NodeId) -> Option<u64> {
    net.links
        .iter()
        .find(|l| l.endpoints == (a.min(b), a.max(b)))
        .map(|l| l.bw_available)
}

/// Random interleaved allocate/release operations over random networks.
/// After every operation resource conservation must hold exactly, failed
/// operations must leave the network untouched, and allocating then
/// releasing a slice must restore the previous state. Returns the number of
/// operations performed.
pub fn conservation_suite(seed: u64, networks: usize, ops_per_network: usize) -> Result<usize, String> {
    use rand::SeedableRng;
    use slicesim::placement::{assemble_decision, Assembly, PlacementConfig, PlacementDecision};
    use slicesim::traffic::{Nspr, NsprStatus};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut ops = 0;
    for _ in 0..networks {
        let mut net = random_network(&mut rng, 12);
        let mut active: Vec<u64> = Vec::new();
        let mut next_id = 0u64;
        for _ in 0..ops_per_network {
            ops += 1;
            let before = net.clone();
            let roll = rng.random_range(0..10);
            if roll < 5 || active.is_empty() {
                // allocate an assembled decision
                let len = rng.random_range(1..=4);
                let hosts: Vec<usize> = (0..len).map(|_| rng.random_range(0..net.server_count())).collect();
                let nspr = Nspr {
                    slice_id: next_id,
                    vnfs: (0..len).map(|_| (rng.random_range(0..=6), rng.random_range(0..=6))).collect(),
                    vlinks: (1..len).map(|_| rng.random_range(0..=3)).collect(),
                    arrival_time: 0.0,
                    holding_time: 1.0,
                    status: NsprStatus::Pending,
                };
                next_id += 1;
                let config = PlacementConfig {
                    allow_colocation: rng.random_bool(0.8),
                };
                if let Assembly::Placed(d) = assemble_decision(&net, &nspr, &hosts, &config).unwrap() {
                    net.allocate(d).map_err(|e| format!("assembled decision failed: {e}"))?;
                    if rng.random_bool(0.3) {
                        net.release(nspr.slice_id).map_err(|e| e.to_string())?;
                        if net != before {
                            return Err("allocate then release changed the network".into());
                        }
                    } else {
                        active.push(nspr.slice_id);
                    }
                } else if net != before {
                    return Err("rejected assembly changed the network".into());
                }
            } else if roll < 7 {
                // raw decision, often infeasible or malformed
                let len = rng.random_range(1..=3);
                let decision = PlacementDecision {
                    slice_id: if rng.random_bool(0.1) && !active.is_empty() { active[0] } else { next_id },
                    vnf_hosts: (0..len).map(|_| rng.random_range(0..net.server_count() + 1)).collect(),
                    vlink_paths: (1..len)
                        .map(|_| (0..rng.random_range(0..3)).map(|_| rng.random_range(0..net.links.len() + 1)).collect())
                        .collect(),
                    vnf_demands: (0..len).map(|_| (rng.random_range(0..=20), rng.random_range(0..=20))).collect(),
                    vlink_bw: (1..len).map(|_| rng.random_range(0..=8)).collect(),
                };
                let id = decision.slice_id;
                match net.allocate(decision) {
                    Ok(()) => {
                        next_id += 1;
                        active.push(id);
                    }
                    Err(_) if net != before => return Err("failed allocate changed the network".into()),
                    Err(_) => {}
                }
            } else if roll < 9 {
                let i = rng.random_range(0..active.len());
                let id = active.swap_remove(i);
                net.release(id).map_err(|e| format!("release of active slice failed: {e}"))?;
            } else {
                if net.release(u64::MAX - rng.random_range(0..10)).is_ok() || net != before {
                    return Err("release of unknown slice did not fail cleanly".into());
                }
            }
            net.check_conservation()
                .map_err(|r| format!("conservation violated on {r:?}"))?;
        }
        for id in active.drain(..) {
            net.release(id).map_err(|e| e.to_string())?;
        }
        let fresh = net.servers.iter().all(|s| s.cpu_available == s.cpu_capacity && s.ram_available == s.ram_capacity)
            && net.links.iter().all(|l| l.bw_available == l.bw_capacity);
        if !fresh {
            return Err("releasing everything did not restore full capacity".into());
        }
    }
    Ok(ops)
}

/// Small topology (EDC 2×4, CDC 1×4, CCP 1×4) with light traffic.
pub fn small_config(algorithm: &str, arrivals: u64, seed: u64) -> SimConfig {
    let mut config = SimConfig::default();
    config.topology.edc_count = 2;
    config.topology.cdc_count = 1;
    config.topology.ccp_count = 1;
    config.topology.edc_servers = 4;
    config.topology.cdc_servers = 4;
    config.topology.ccp_servers = 4;
    config.traffic.lambda_base = 0.5;
    config.traffic.mean_holding = 20.0;
    config.agent.hidden = vec![16];
    config.run.arrivals = arrivals;
    config.run.seed = seed;
    config.run.algorithm = Some(algorithm.to_string());
    config
}

/// Runs `config` twice and compares the exported CSV files byte for byte.
pub fn csv_determinism(config: &SimConfig) -> Result<(), String> {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    for dir in &dirs {
        let report = slicesim::run(config).map_err(|e| e.to_string())?;
        report.series.export_csv(dir.path()).map_err(|e| e.to_string())?;
    }
    for file in [slicesim::metrics::ACCEPTANCE_FILE, slicesim::metrics::LOAD_FILE] {
        let a = std::fs::read(dirs[0].path().join(file)).map_err(|e| e.to_string())?;
        let b = std::fs::read(dirs[1].path().join(file)).map_err(|e| e.to_string())?;
        if a != b {
            return Err(format!("{file} differs between repeated runs"));
        }
        if a.is_empty() {
            return Err(format!("{file} is empty"));
        }
    }
    Ok(())
}

/// `(arrival time bits, slice id, holding time bits)` per arrival.
pub fn arrival_sequence(report: &slicesim::RunReport) -> Vec<(u64, u64, u64)> {
    report
        .records
        .iter()
        .map(|r| (r.time.to_bits(), r.slice_id, r.holding_time.to_bits()))
        .collect()
}
