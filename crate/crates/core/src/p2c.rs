//! Power-of-two-choices placement heuristic.
//!
//! Two distinct feasible servers are drawn uniformly at random and the one
//! with the lower CPU utilization after placement wins. When the previous
//! VNF's host is known, sampling is restricted to the `candidate_k`
//! feasible servers nearest to it, which keeps chaining paths short.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::placement::candidate_nodes;
use crate::scalar::Scalar;
use crate::substrate::{PhysicalNetwork, ServerId};
use crate::traffic::Nspr;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct P2cConfig {
    pub candidate_k: usize,
}

impl Default for P2cConfig {
    fn default() -> Self {
        Self { candidate_k: 32 }
    }
}

#[derive(Debug, Clone)]
pub struct P2c {
    candidate_k: usize,
    allow_colocation: bool,
    /// Hop distance between every pair of servers on the unfiltered graph.
    distances: Vec<Vec<u32>>,
}

impl P2c {
    pub fn new(net: &PhysicalNetwork, config: &P2cConfig) -> Self {
        let n = net.server_count();
        let distances = (0..n)
            .map(|s| {
                let mut d = net.hop_distances(s);
                d.truncate(n);
                d
            })
            .collect();
        Self {
            candidate_k: config.candidate_k.max(1),
            allow_colocation: true,
            distances,
        }
    }

    /// When co-location is disabled the previous host is never chosen.
    pub fn with_colocation(mut self, allow: bool) -> Self {
        self.allow_colocation = allow;
        self
    }

    pub fn distance(&self, a: ServerId, b: ServerId) -> u32 {
        self.distances[a][b]
    }

    /// Candidate set the two choices are drawn from.
    pub fn candidates(&self, net: &PhysicalNetwork, cpu_demand: u64, ram_demand: u64, prev_host: Option<ServerId>) -> Vec<ServerId> {
        let mut candidates = candidate_nodes(net, cpu_demand, ram_demand);
        if let Some(prev) = prev_host {
            if !self.allow_colocation {
                candidates.retain(|&s| s != prev);
            }
            let dist = &self.distances[prev];
            candidates.sort_by_key(|&s| (dist[s], s));
            candidates.truncate(self.candidate_k);
        }
        candidates
    }

    pub fn select<R: Rng + ?Sized>(
        &self,
        net: &PhysicalNetwork,
        cpu_demand: u64,
        ram_demand: u64,
        prev_host: Option<ServerId>,
        rng: &mut R,
    ) -> Option<ServerId> {
        let candidates = self.candidates(net, cpu_demand, ram_demand, prev_host);
        let n = candidates.len();
        match n {
            0 => None,
            1 => Some(candidates[0]),
            _ => {
                let i = rng.random_range(0..n);
                let j = (i + rng.random_range(1..n)) % n;
                Some(less_loaded_after(net, cpu_demand, candidates[i], candidates[j]))
            }
        }
    }

    /// One-hot score over all servers at the heuristic's choice for VNF
    /// `vnf_index`, or all zeros when nothing is feasible.
    pub fn heuristic_scores<T: Scalar, R: Rng + ?Sized>(
        &self,
        net: &PhysicalNetwork,
        nspr: &Nspr,
        vnf_index: usize,
        prev_host: Option<ServerId>,
        rng: &mut R,
    ) -> Vec<T> {
        let (cpu, ram) = nspr.vnfs[vnf_index];
        let mut scores = vec![T::zero(); net.server_count()];
        if let Some(s) = self.select(net, cpu, ram, prev_host, rng) {
            scores[s] = T::one();
        }
        scores
    }
}

/// Compares post-placement CPU utilization exactly with integer
/// cross-multiplication; ties go to the lower server id.
fn less_loaded_after(net: &PhysicalNetwork, cpu_demand: u64, a: ServerId, b: ServerId) -> ServerId {
    let load = |s: ServerId| {
        let node = &net.servers[s];
        ((node.cpu_capacity - node.cpu_available + cpu_demand) as u128, node.cpu_capacity as u128)
    };
    let ((used_a, cap_a), (used_b, cap_b)) = (load(a), load(b));
    let lhs = used_a * cap_b;
    let rhs = used_b * cap_a;
    if lhs < rhs || (lhs == rhs && a < b) {
        a
    } else {
        b
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::substrate::{DcLayout, Tier};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn flat_net(servers: Vec<(u64, u64)>) -> PhysicalNetwork {
        let n = servers.len();
        let links: Vec<_> = (0..n).map(|s| (s, n, 10)).collect();
        PhysicalNetwork::from_layout(vec![DcLayout { tier: Tier::Cdc, servers }], &links).unwrap()
    }

    #[test]
    fn single_feasible_server() {
        let net = flat_net(vec![(1, 1), (10, 10), (2, 2)]);
        let p2c = P2c::new(&net, &P2cConfig::default());
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(p2c.select(&net, 5, 5, None, &mut rng), Some(1));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(p2c.select(&net, 50, 5, None, &mut rng), None);
    }

    #[test]
    fn picks_less_loaded_of_pair() {
        let mut net = flat_net(vec![(10, 10), (10, 10)]);
        net.stage(0, 8, 1).unwrap();
        let p2c = P2c::new(&net, &P2cConfig::default());
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            assert_eq!(p2c.select(&net, 1, 1, None, &mut rng), Some(1));
        }
        assert_eq!(less_loaded_after(&net, 1, 0, 1), 1);
        assert_eq!(less_loaded_after(&net, 1, 1, 0), 1);
        net.clear_staged();
        assert_eq!(less_loaded_after(&net, 1, 1, 0), 0);
    }

    #[test]
    fn proximity_pruning_and_colocation() {
        // two DCs of three servers; switches 6 and 7 are linked
        let net = PhysicalNetwork::from_layout(
            vec![
                DcLayout {
                    tier: Tier::Edc,
                    servers: vec![(4, 4); 3],
                },
                DcLayout {
                    tier: Tier::Edc,
                    servers: vec![(4, 4); 3],
                },
            ],
            &[(0, 6, 5), (1, 6, 5), (2, 6, 5), (3, 7, 5), (4, 7, 5), (5, 7, 5), (6, 7, 5)],
        )
        .unwrap();
        let p2c = P2c::new(&net, &P2cConfig { candidate_k: 3 });
        assert_eq!(p2c.candidates(&net, 1, 1, Some(4)), vec![4, 3, 5]);
        let strict = p2c.clone().with_colocation(false);
        assert_eq!(strict.candidates(&net, 1, 1, Some(4)), vec![3, 5, 0]);
        assert_eq!(p2c.distance(0, 5), 3);
    }

    #[test]
    fn scores_are_one_hot_or_zero() {
        let net = flat_net(vec![(4, 4); 8]);
        let p2c = P2c::new(&net, &P2cConfig::default());
        let nspr = Nspr {
            slice_id: 0,
            vnfs: vec![(1, 1), (9, 9)],
            vlinks: vec![1],
            arrival_time: 0.0,
            holding_time: 1.0,
            status: crate::traffic::NsprStatus::Pending,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let h: Vec<f64> = p2c.heuristic_scores(&net, &nspr, 0, None, &mut rng);
        assert_eq!(h.iter().sum::<f64>(), 1.0);
        let h: Vec<f64> = p2c.heuristic_scores(&net, &nspr, 1, Some(0), &mut rng);
        assert!(h.iter().all(|&x| x == 0.0));
    }
}
