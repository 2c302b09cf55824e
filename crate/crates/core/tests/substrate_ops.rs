mod common;

use proptest::prelude::*;
use slicesim::substrate::{PhysicalNetwork, TopologyConfig};

#[test]
fn default_topology_counts() {
    let net = PhysicalNetwork::build_topology(&TopologyConfig::default()).unwrap();
    assert_eq!(net.data_centers.len(), 21);
    assert_eq!(net.server_count(), 1008);
    assert!(net.is_connected());
    net.check_conservation().unwrap();
}

#[test]
fn shortest_paths_match_exhaustive_search() {
    let (mismatches, queries) = common::path_oracle_suite(7, 200);
    assert_eq!(queries, 1600);
    assert_eq!(mismatches, 0);
}

#[test]
fn interleaved_operations_conserve_resources() {
    let ops = common::conservation_suite(11, 20, 500).unwrap();
    assert_eq!(ops, 10_000);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn conservation_holds_for_any_seed(seed in any::<u64>()) {
        prop_assert!(common::conservation_suite(seed, 2, 100).is_ok());
    }

    #[test]
    fn path_search_agrees_for_any_seed(seed in any::<u64>()) {
        prop_assert_eq!(common::path_oracle_suite(seed, 5).0, 0);
    }
}
