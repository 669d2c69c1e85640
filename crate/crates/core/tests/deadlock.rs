use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use floosim::config::ExperimentConfig;
use floosim::endpoints::core::{CoreGen, RandomTraffic};
use floosim::engine::{RunExit, Simulation};
use floosim::protocol::NodeId;

fn random_sim(cfg: &ExperimentConfig, traffic: RandomTraffic, cores: u8) -> Simulation {
    let (x, y) = (cfg.mesh.x_tiles, cfg.mesh.y_tiles);
    let mut sim = Simulation::new(cfg.sim_setup()).unwrap();
    for tx in 0..x as i16 {
        for ty in 0..y as i16 {
            let node = NodeId::tile(tx, ty);
            for c in 0..cores {
                let seed = cfg.seed ^ ((tx as u64) << 16 | (ty as u64) << 8 | c as u64);
                let g = CoreGen::random(
                    node,
                    c,
                    traffic,
                    ChaCha8Rng::seed_from_u64(seed),
                    (x, y),
                    cfg.workload.pattern_params(),
                );
                sim.tile_mut(node).unwrap().cores.push(g);
            }
        }
    }
    sim
}

/// Saturating narrow reads against a target that can hold only a few
/// requests and one response.
fn pressure(merge: bool) -> (ExperimentConfig, RandomTraffic) {
    let mut cfg = ExperimentConfig::default();
    cfg.sim.merge_req_rsp = merge;
    cfg.ni.meta_buffer_depth = 4;
    cfg.ni.rsp_queue_depth = 1;
    let t = RandomTraffic {
        rate: 1.0,
        end_cycle: 20_000,
        max_burst: 16,
        max_outstanding: 64,
        ..RandomTraffic::default()
    };
    (cfg, t)
}

#[test]
fn merged_request_and_response_networks_deadlock() {
    let (cfg, t) = pressure(true);
    let mut sim = random_sim(&cfg, t, 8);
    match sim.run(200_000).unwrap() {
        RunExit::Deadlock(r) => {
            assert!(r.outstanding > 0);
            assert!(!r.blocked.is_empty());
        }
        other => panic!("expected a deadlock, got {other:?}"),
    }
}

#[test]
fn separate_networks_survive_the_same_pressure() {
    let (cfg, t) = pressure(false);
    let mut sim = random_sim(&cfg, t, 8);
    assert!(matches!(
        sim.run(200_000).unwrap(),
        RunExit::Completed { .. }
    ));
}

#[test]
fn uniform_random_runs_100k_cycles() {
    let cfg = ExperimentConfig::default();
    let t = RandomTraffic {
        rate: 0.1,
        end_cycle: 100_000,
        read_fraction: 0.5,
        write_fraction: 0.4,
        atomic_fraction: 0.1,
        max_burst: 8,
        max_outstanding: 8,
        ..RandomTraffic::default()
    };
    let mut sim = random_sim(&cfg, t, 1);
    match sim.run(200_000).unwrap() {
        RunExit::Completed { cycle } => assert!(cycle >= 100_000),
        other => panic!("{other:?}"),
    }
    assert_eq!(sim.outstanding(), 0);
    assert!(sim.samples.len() > 100_000, "{}", sim.samples.len());
}

#[test]
fn xy_drains_at_any_injection_rate() {
    for rate in [0.05, 0.25, 0.5, 1.0] {
        let cfg = ExperimentConfig::default();
        let t = RandomTraffic {
            rate,
            end_cycle: 5_000,
            max_burst: 4,
            max_outstanding: 16,
            ..RandomTraffic::default()
        };
        let mut sim = random_sim(&cfg, t, 2);
        assert!(
            matches!(sim.run(100_000).unwrap(), RunExit::Completed { .. }),
            "rate {rate}"
        );
    }
}
