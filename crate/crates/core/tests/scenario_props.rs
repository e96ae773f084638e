mod common;

use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use resilient_dlms::rng::Streams;
use resilient_dlms::scenario::{
    build_topology, make_ground_truth, sample_measurement, GroundTruth, Measurement, SignalParams, TopologySpec,
};
use resilient_dlms::{SimConfig, Vector};

#[test]
fn regressor_covariance_matches_within_five_percent() {
    let cfg = SimConfig::reference();
    let scenario = cfg.scenario().unwrap();
    let streams = Streams::new(5);
    let samples = 100_000u64;
    for node in [0usize, 7, 14] {
        let var = scenario.signal.regressor_variance(node);
        let mut cov = DMatrix::<f64>::zeros(3, 3);
        let mut noise = 0.0;
        for t in 0..samples {
            let m = scenario.measurement(&streams, 0, node, t);
            cov += &m.u * m.u.transpose();
            noise += m.noise * m.noise;
        }
        cov /= samples as f64;
        for i in 0..3 {
            for j in 0..3 {
                let target = if i == j { var } else { 0.0 };
                assert!((cov[(i, j)] - target).abs() <= 0.05 * var, "node {node} entry ({i},{j}): {}", cov[(i, j)]);
            }
        }
        let zvar = scenario.signal.noise_variance(node);
        assert!((noise / samples as f64 - zvar).abs() <= 0.05 * zvar);
    }
}

#[test]
fn measurements_are_pure_functions_of_the_key() {
    let scenario = SimConfig::reference().scenario().unwrap();
    let s = Streams::new(11);
    assert_eq!(scenario.measurement(&s, 3, 4, 100), scenario.measurement(&s, 3, 4, 100));
    assert_ne!(scenario.measurement(&s, 3, 4, 100), scenario.measurement(&s, 3, 4, 101));
    assert_ne!(scenario.measurement(&s, 3, 4, 100), scenario.measurement(&s, 4, 4, 100));
}

#[test]
fn noiseless_projection() {
    let topo = build_topology(&TopologySpec { num_nodes: 1, edges: vec![], clusters: vec![vec![0]] }).unwrap();
    let truth = GroundTruth::from_cluster_targets(&topo, vec![Vector::from_vec(vec![2.0, 0.0, 0.0])]).unwrap();
    let m = Measurement::from_parts(Vector::from_vec(vec![1.0, 0.0, 0.0]), truth.target(0), 0.0);
    assert_eq!(m.d, 2.0);
    let params = SignalParams::new(3, vec![1.0], vec![0.01]).unwrap();
    let mut a = ChaCha8Rng::seed_from_u64(1);
    let mut b = ChaCha8Rng::seed_from_u64(1);
    assert_eq!(sample_measurement(0, &truth, &params, &mut a), sample_measurement(0, &truth, &params, &mut b));
}

proptest! {
    #[test]
    fn targets_stay_within_radius(seed in any::<u64>(), radius in 0.0f64..2.0) {
        let topo = SimConfig::reference().scenario().unwrap().topology;
        let base = Vector::from_vec(vec![0.3, -1.0, 2.0]);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth = make_ground_truth(&topo, &base, radius, &mut rng).unwrap();
        for m in 0..topo.num_clusters() {
            prop_assert!((truth.cluster_target(m) - &base).norm() <= radius + 1e-12);
            for &n in topo.cluster(m) {
                prop_assert_eq!(truth.target(n), truth.cluster_target(m));
            }
        }
        for i in 0..topo.num_clusters() {
            for j in 0..topo.num_clusters() {
                prop_assert!((truth.cluster_target(i) - truth.cluster_target(j)).norm() <= 2.0 * radius + 1e-12);
            }
        }
        let mut again = ChaCha8Rng::seed_from_u64(seed);
        prop_assert_eq!(make_ground_truth(&topo, &base, radius, &mut again).unwrap(), truth);
    }

    #[test]
    fn zero_radius_is_single_task(seed in any::<u64>()) {
        let topo = SimConfig::reference().scenario().unwrap().topology;
        let base = Vector::from_vec(vec![1.0, 2.0, 3.0]);
        let truth = make_ground_truth(&topo, &base, 0.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        for n in 0..topo.num_nodes() {
            prop_assert_eq!(truth.target(n), &base);
        }
    }

    #[test]
    fn neighborhoods_are_consistent(seed in 0u64..500) {
        let scenario = common::random_scenario(seed);
        let topo = &scenario.topology;
        for n in 0..topo.num_nodes() {
            prop_assert!(topo.neighbors(n).contains(&n));
            prop_assert!(topo.same_cluster(n).contains(&n));
            prop_assert!(!topo.other_cluster(n).contains(&n));
            prop_assert_eq!(topo.same_cluster(n).len() + topo.other_cluster(n).len(), topo.neighbors(n).len());
            for &l in topo.same_cluster(n) {
                prop_assert_eq!(topo.cluster_of(l), topo.cluster_of(n));
                prop_assert!(topo.neighbors(l).contains(&n));
            }
            for &k in topo.other_cluster(n) {
                prop_assert!(topo.cluster_of(k) != topo.cluster_of(n));
            }
        }
    }
}
