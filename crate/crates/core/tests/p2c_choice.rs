use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use slicesim::p2c::{P2c, P2cConfig};
use slicesim::placement::PlacementDecision;
use slicesim::substrate::{DcLayout, PhysicalNetwork, Tier};

/// Five servers of capacity 10 loaded 0, 2, 4, 6, 8 in shuffled order.
fn loaded_network() -> PhysicalNetwork {
    let layout = vec![DcLayout {
        tier: Tier::Edc,
        servers: vec![(10, 10); 5],
    }];
    let links: Vec<(usize, usize, u64)> = (0..5).map(|s| (s, 5, 10)).collect();
    let mut net = PhysicalNetwork::from_layout(layout, &links).unwrap();
    for (server, load) in [(0, 6), (1, 0), (2, 8), (3, 2), (4, 4)] {
        net.allocate(PlacementDecision {
            slice_id: server as u64,
            vnf_hosts: vec![server],
            vlink_paths: Vec::new(),
            vnf_demands: vec![(load, 0)],
            vlink_bw: Vec::new(),
        })
        .unwrap();
    }
    net
}

#[test]
fn selection_frequencies_follow_rank() {
    let net = loaded_network();
    let p2c = P2c::new(&net, &P2cConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let draws = 100_000;
    let mut counts = [0u64; 5];
    for _ in 0..draws {
        counts[p2c.select(&net, 1, 1, None, &mut rng).unwrap()] += 1;
    }
    // Server ranks by load, lightest first.
    let rank = [3, 0, 4, 1, 2];
    let n = 5.0;
    for server in 0..5 {
        // Chosen iff it is drawn together with a heavier server.
        let p = 2.0 * (n - 1.0 - rank[server] as f64) / (n * (n - 1.0));
        let expected = p * draws as f64;
        let sigma = (draws as f64 * p * (1.0 - p)).sqrt();
        let got = counts[server] as f64;
        if p == 0.0 {
            assert_eq!(counts[server], 0, "heaviest server chosen");
        } else {
            assert!((got - expected).abs() <= 4.0 * sigma, "server {server}: {got} vs {expected}");
        }
    }
}

#[test]
fn infeasible_servers_never_chosen() {
    let net = loaded_network();
    let p2c = P2c::new(&net, &P2cConfig::default());
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    // cpu 5 fits only on the servers loaded 0, 2 and 4
    for _ in 0..1000 {
        let s = p2c.select(&net, 5, 0, None, &mut rng).unwrap();
        assert!([1, 3, 4].contains(&s));
    }
    assert_eq!(p2c.select(&net, 11, 0, None, &mut rng), None);
}

#[test]
fn colocation_rule_excludes_previous_host() {
    let net = loaded_network();
    let p2c = P2c::new(&net, &P2cConfig::default()).with_colocation(false);
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for _ in 0..1000 {
        assert_ne!(p2c.select(&net, 1, 0, Some(1), &mut rng), Some(1));
    }
}
