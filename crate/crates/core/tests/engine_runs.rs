mod common;

use slicesim::engine::Simulation;
use slicesim::substrate::{DcLayout, PhysicalNetwork, Tier};
use slicesim::{Algorithm, SimConfig};

const ALGORITHMS: [&str; 6] = ["random", "p2c", "drl", "edrl", "hadrl", "haedrl"];

#[test]
fn single_huge_server_accepts_everything_without_paths() {
    for algo in ALGORITHMS {
        let layout = vec![DcLayout {
            tier: Tier::Ccp,
            servers: vec![(1_000_000, 1_000_000)],
        }];
        let net = PhysicalNetwork::from_layout(layout, &[(0, 1, 0)]).unwrap();
        let mut config = common::small_config(algo, 300, 4);
        config.placement.allow_colocation = true;
        let report = Simulation::with_network(&config, net).unwrap().run();
        assert_eq!(report.total, 300, "{algo}");
        assert_eq!(report.accepted, 300, "{algo}");
        assert!(report.records.iter().all(|r| r.actions.iter().all(|&s| s == 0)));
        let last = report.last_decision.unwrap();
        assert!(last.vlink_paths.iter().all(Vec::is_empty));
        report.network.check_conservation().unwrap();
    }
}

#[test]
fn colocation_disabled_on_one_server_rejects_everything() {
    let layout = vec![DcLayout {
        tier: Tier::Ccp,
        servers: vec![(1_000_000, 1_000_000)],
    }];
    let net = PhysicalNetwork::from_layout(layout, &[(0, 1, 0)]).unwrap();
    let mut config = common::small_config("p2c", 50, 4);
    config.placement.allow_colocation = false;
    let report = Simulation::with_network(&config, net).unwrap().run();
    assert_eq!(report.accepted, 0);
    assert_eq!(report.mean_reward, -1.0);
}

#[test]
fn repeated_runs_write_identical_csvs() {
    for algo in ["random", "p2c", "haedrl"] {
        common::csv_determinism(&common::small_config(algo, 400, 9)).unwrap();
    }
}

#[test]
fn compare_feeds_identical_arrivals() {
    let configs: Vec<SimConfig> = ALGORITHMS.iter().map(|a| common::small_config(a, 300, 2)).collect();
    let comparison = slicesim::compare(&configs, 2).unwrap();
    assert_eq!(comparison.reports.len(), 6);
    let reference = common::arrival_sequence(&comparison.reports[0]);
    assert_eq!(reference.len(), 300);
    for (report, algo) in comparison.reports.iter().zip(ALGORITHMS) {
        assert_eq!(report.algorithm, algo.parse::<Algorithm>().unwrap());
        assert_eq!(common::arrival_sequence(report), reference);
    }
    let table = comparison.window_table();
    assert_eq!(table.len(), 300);
    assert!(table.iter().all(|(_, _, v)| v.len() == 6));
}

#[test]
fn resources_return_after_all_departures() {
    // With the horizon at the last arrival some slices remain; releasing them
    // must restore full capacity.
    let report = slicesim::run(&common::small_config("p2c", 500, 3)).unwrap();
    let mut net = report.network.clone();
    let ids: Vec<u64> = net.allocations.keys().copied().collect();
    assert_eq!(report.accepted - report.departures, ids.len() as u64);
    for id in ids {
        net.release(id).unwrap();
    }
    assert!(net.servers.iter().all(|s| s.cpu_available == s.cpu_capacity));
    assert!(net.links.iter().all(|l| l.bw_available == l.bw_capacity));
}

#[test]
fn eval_phase_freezes_the_agent() {
    let mut config = common::small_config("hadrl", 300, 5);
    config.run.phases = vec![(200, slicesim::PhaseMode::Train), (100, slicesim::PhaseMode::Eval)];
    let report = slicesim::run(&config).unwrap();
    let agent = report.agent.as_ref().unwrap();
    assert_eq!(agent.episodes_trained(), 200);
    assert!(report.records[200..].iter().all(|r| r.mode == slicesim::PhaseMode::Eval));
}
