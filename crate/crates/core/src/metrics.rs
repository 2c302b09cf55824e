//! Acceptance and load data series, CSV export, and DOT snapshots of the
//! substrate.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;
use std::fs;
use std::io;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::placement::PlacementDecision;
use crate::substrate::{PhysicalNetwork, Utilization};

pub const ACCEPTANCE_FILE: &str = "acceptance.csv";
pub const LOAD_FILE: &str = "load.csv";

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("time went backwards: {t} after {last}")]
    NonMonotoneTime { last: f64, t: f64 },
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

/// The `[metrics]` configuration section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricsConfig {
    /// Sliding-window length in arrivals.
    pub window: usize,
    /// A load record is taken every `sample_every` arrivals.
    pub sample_every: usize,
}

impl Default for MetricsConfig {
    fn default() -> Self {
        Self {
            window: 100,
            sample_every: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceRecord {
    pub t: f64,
    /// 1-based.
    pub arrival_idx: u64,
    pub window_acceptance: f64,
    pub cumulative_acceptance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LoadRecord {
    pub t: f64,
    pub offered_load: f64,
    pub cpu_util: f64,
    pub ram_util: f64,
    pub bw_util: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricsSeries {
    pub acceptance: Vec<AcceptanceRecord>,
    pub load: Vec<LoadRecord>,
    config: MetricsConfig,
    recent: VecDeque<bool>,
    recent_accepted: usize,
    accepted: u64,
    total: u64,
    last_t: f64,
}

impl MetricsSeries {
    pub fn new(config: MetricsConfig) -> Self {
        Self {
            acceptance: Vec::new(),
            load: Vec::new(),
            config: MetricsConfig {
                window: config.window.max(1),
                sample_every: config.sample_every.max(1),
            },
            recent: VecDeque::new(),
            recent_accepted: 0,
            accepted: 0,
            total: 0,
            last_t: f64::NEG_INFINITY,
        }
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn cumulative_acceptance(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.accepted as f64 / self.total as f64
        }
    }

    fn advance(&mut self, t: f64) -> Result<(), MetricsError> {
        if t < self.last_t || t.is_nan() {
            return Err(MetricsError::NonMonotoneTime { last: self.last_t, t });
        }
        self.last_t = t;
        Ok(())
    }

    /// Appends the outcome of one arrival.
    pub fn record_outcome(&mut self, t: f64, accepted: bool) -> Result<&AcceptanceRecord, MetricsError> {
        self.advance(t)?;
        self.total += 1;
        self.accepted += u64::from(accepted);
        self.recent.push_back(accepted);
        self.recent_accepted += usize::from(accepted);
        if self.recent.len() > self.config.window && self.recent.pop_front() == Some(true) {
            self.recent_accepted -= 1;
        }
        self.acceptance.push(AcceptanceRecord {
            t,
            arrival_idx: self.total,
            window_acceptance: self.recent_accepted as f64 / self.recent.len() as f64,
            cumulative_acceptance: self.cumulative_acceptance(),
        });
        Ok(self.acceptance.last().expect("just pushed"))
    }

    /// Whether the arrival just recorded falls on a load sampling tick.
    pub fn load_due(&self) -> bool {
        self.total > 0 && self.total.is_multiple_of(self.config.sample_every as u64)
    }

    pub fn record_load(&mut self, t: f64, offered_load: f64, util: Utilization) -> Result<(), MetricsError> {
        self.advance(t)?;
        self.load.push(LoadRecord {
            t,
            offered_load,
            cpu_util: util.cpu,
            ram_util: util.ram,
            bw_util: util.bw,
        });
        Ok(())
    }

    /// Mean acceptance over arrivals `[from, to)` (0-based), recovered
    /// exactly from the cumulative column.
    pub fn acceptance_between(&self, from: usize, to: usize) -> f64 {
        let count = |n: usize| -> f64 {
            match n {
                0 => 0.0,
                n => (self.acceptance[n - 1].cumulative_acceptance * n as f64).round(),
            }
        };
        let to = to.min(self.acceptance.len());
        if to <= from {
            return 0.0;
        }
        (count(to) - count(from)) / (to - from) as f64
    }

    /// Writes `acceptance.csv` and `load.csv` into `dir`.
    pub fn export_csv(&self, dir: &Path) -> Result<(), MetricsError> {
        fs::create_dir_all(dir)?;
        let mut w = csv_writer(&dir.join(ACCEPTANCE_FILE))?;
        w.write_record(["t", "arrival_idx", "window_acceptance", "cumulative_acceptance"])?;
        for r in &self.acceptance {
            w.write_record([
                fixed(r.t),
                r.arrival_idx.to_string(),
                fixed(r.window_acceptance),
                fixed(r.cumulative_acceptance),
            ])?;
        }
        w.flush()?;

        let mut w = csv_writer(&dir.join(LOAD_FILE))?;
        w.write_record(["t", "offered_load", "cpu_util", "ram_util", "bw_util"])?;
        for r in &self.load {
            w.write_record([fixed(r.t), fixed(r.offered_load), fixed(r.cpu_util), fixed(r.ram_util), fixed(r.bw_util)])?;
        }
        w.flush()?;
        Ok(())
    }
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

fn csv_writer(path: &Path) -> Result<csv::Writer<fs::File>, MetricsError> {
    Ok(csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_path(path)?)
}

fn read_rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>, MetricsError> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader.deserialize().collect::<Result<_, _>>()?;
    Ok(rows)
}

/// Reads back the two files written by [`MetricsSeries::export_csv`].
pub fn read_csv(dir: &Path) -> Result<(Vec<AcceptanceRecord>, Vec<LoadRecord>), MetricsError> {
    Ok((read_rows(&dir.join(ACCEPTANCE_FILE))?, read_rows(&dir.join(LOAD_FILE))?))
}

fn server_node(id: usize) -> String {
    format!("s{id}")
}

fn switch_node(dc: usize) -> String {
    format!("w{dc}")
}

/// Renders the substrate as a DOT digraph, one cluster per data center.
///
/// Edges are undirected in meaning and drawn with `dir=none`; every edge
/// carries `id="l<link_id>"`. With a decision, its hosts and path links are
/// colored red and labeled with the VNF / virtual-link indices they carry.
pub fn dot_string(net: &PhysicalNetwork, decision: Option<&PlacementDecision>) -> String {
    let mut vnfs_on: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    let mut vlinks_on: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    if let Some(d) = decision {
        for (i, &h) in d.vnf_hosts.iter().enumerate() {
            vnfs_on.entry(h).or_default().push(i);
        }
        for (i, path) in d.vlink_paths.iter().enumerate() {
            for &l in path {
                vlinks_on.entry(l).or_default().push(i);
            }
        }
    }
    let join = |v: &[usize]| v.iter().map(usize::to_string).collect::<Vec<_>>().join(",");

    let mut out = String::from("digraph psn {\n  node [shape=ellipse];\n");
    for (d, dc) in net.data_centers.iter().enumerate() {
        let _ = writeln!(out, "  subgraph cluster_dc{d} {{");
        let _ = writeln!(out, "    label=\"DC {d} ({})\";", dc.tier);
        for &s in &dc.server_ids {
            let server = &net.servers[s];
            let mut label = format!(
                "{}\\ncpu={}/{} ram={}/{}",
                server_node(s),
                server.cpu_available,
                server.cpu_capacity,
                server.ram_available,
                server.ram_capacity
            );
            let mut extra = String::new();
            if let Some(v) = vnfs_on.get(&s) {
                let _ = write!(label, "\\nvnf={}", join(v));
                extra.push_str(", color=\"red\"");
            }
            let _ = writeln!(out, "    {} [label=\"{label}\"{extra}];", server_node(s));
        }
        let _ = writeln!(out, "    {} [shape=box, label=\"switch {d}\"];", switch_node(d));
        out.push_str("  }\n");
    }
    let node_name = |n: usize| match net.dc_of_node(n) {
        Some(_) if net.is_server(n) => server_node(n),
        Some(dc) => switch_node(dc),
        None => unreachable!("links reference known nodes"),
    };
    for link in &net.links {
        let (a, b) = link.endpoints;
        let mut label = format!("bw={}/{}", link.bw_available, link.bw_capacity);
        let mut extra = String::new();
        if let Some(v) = vlinks_on.get(&link.link_id) {
            let _ = write!(label, " vlink={}", join(v));
            extra.push_str(", color=\"red\"");
        }
        let _ = writeln!(
            out,
            "  {} -> {} [id=\"l{}\", dir=none, label=\"{label}\"{extra}];",
            node_name(a),
            node_name(b),
            link.link_id
        );
    }
    out.push_str("}\n");
    out
}

pub fn export_dot(net: &PhysicalNetwork, decision: Option<&PlacementDecision>, path: &Path) -> Result<(), MetricsError> {
    fs::write(path, dot_string(net, decision))?;
    Ok(())
}
