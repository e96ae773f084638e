mod common;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use resilient_dlms::analysis::{gelfand_estimate, spectral_radius, NetworkMatrices};
use resilient_dlms::diffusion::AdaptWeights;
use resilient_dlms::scenario::{make_ground_truth, Scenario};
use resilient_dlms::{SimConfig, Vector};

/// One step of the mean recursion written node by node:
/// ē_n ← Σ_l a_ln [ē_l − μ R_l ē_l − μη Σ_k ρ_lk (w_l − w_k)], w = ē + w°.
fn nodewise_step(s: &Scenario, adapt: AdaptWeights, e: &[Vector], mu: f64, eta: f64) -> Vec<Vector> {
    let topo = &s.topology;
    let psi: Vec<Vector> = (0..topo.num_nodes())
        .map(|l| {
            let r: f64 = resilient_dlms::diffusion::adapt_weights(topo, l, adapt)
                .iter()
                .map(|&(j, c)| c * s.signal.regressor_variance(j))
                .sum();
            let others = topo.other_cluster(l);
            let mut reg = Vector::zeros(s.dim());
            for &k in others {
                let wl = &e[l] + s.truth.target(l);
                let wk = &e[k] + s.truth.target(k);
                reg += (wl - wk) / others.len() as f64;
            }
            &e[l] - &e[l] * (mu * r) - reg * (mu * eta)
        })
        .collect();
    (0..topo.num_nodes())
        .map(|n| {
            let hood = topo.same_cluster(n);
            hood.iter().map(|&l| &psi[l]).sum::<Vector>() / hood.len() as f64
        })
        .collect()
}

fn stack(parts: &[Vector]) -> DVector<f64> {
    DVector::from_iterator(parts.iter().map(|v| v.len()).sum(), parts.iter().flat_map(|v| v.iter().copied()))
}

#[test]
fn lifted_recursion_matches_nodewise_form() {
    for seed in 0..20 {
        let s = common::random_scenario(seed);
        for adapt in [AdaptWeights::Identity, AdaptWeights::Uniform] {
            let m = NetworkMatrices::from_scenario(&s, adapt);
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let e: Vec<Vector> = (0..s.num_nodes()).map(|_| Vector::from_fn(3, |_, _| rng.random_range(-1.0..1.0))).collect();
            let expected = stack(&nodewise_step(&s, adapt, &e, 0.05, 0.1));
            let got = m.mean_recursion_step(&stack(&e), 0.05, 0.1);
            assert!((got - expected).amax() < 1e-12, "seed {seed}");
        }
    }
}

#[test]
fn closed_form_matches_iterated_fixed_point() {
    let exp = SimConfig::reference().build().unwrap();
    let s = &exp.scenario;
    let (mu, eta) = (exp.params.step_size, exp.params.regularization);
    let m = NetworkMatrices::from_scenario(s, AdaptWeights::Identity);
    let closed = m.asymptotic_deviation(mu, eta).unwrap();
    let mut e: Vec<Vector> = (0..s.num_nodes()).map(|n| -s.truth.target(n)).collect();
    for _ in 0..20_000 {
        e = nodewise_step(s, AdaptWeights::Identity, &e, mu, eta);
    }
    assert!((stack(&e) - &closed).amax() < 1e-8);
    // the fixed point is reached from any start
    let again = m.iterate(&DVector::zeros(closed.len()), mu, eta, 20_000);
    assert!((again - &closed).amax() < 1e-8);
    assert!(closed.amax() > 0.0);
}

#[test]
fn identical_targets_leave_no_bias() {
    for seed in 0..10 {
        let mut s = common::random_scenario(seed);
        let base = Vector::from_vec(vec![0.4, 0.1, -0.9]);
        s.truth = make_ground_truth(&s.topology, &base, 0.0, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        let m = NetworkMatrices::from_scenario(&s, AdaptWeights::Uniform);
        assert!(m.forcing(0.05, 0.3).amax() < 1e-15);
        assert!(m.asymptotic_deviation(0.05, 0.3).unwrap().amax() < 1e-12);
    }
}

#[test]
fn isolated_single_node_contracts_at_one_minus_mu_sigma() {
    let topo = resilient_dlms::scenario::build_topology(&resilient_dlms::scenario::TopologySpec {
        num_nodes: 1,
        edges: vec![],
        clusters: vec![vec![0]],
    })
    .unwrap();
    let signal = resilient_dlms::scenario::SignalParams::new(2, vec![1.5], vec![0.01]).unwrap();
    let truth = make_ground_truth(&topo, &Vector::from_vec(vec![1.0, 1.0]), 0.0, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
    let s = Scenario::new(topo, signal, truth).unwrap();
    let m = NetworkMatrices::from_scenario(&s, AdaptWeights::Identity);
    let mu = 0.1;
    assert!((spectral_radius(&m.transition(mu, 0.7)) - (1.0 - mu * 1.5)).abs() < 1e-12);
    let e = m.iterate(&DVector::from_vec(vec![1.0, -2.0]), mu, 0.7, 10);
    let f = (1.0 - mu * 1.5f64).powi(10);
    assert!((e - DVector::from_vec(vec![f, -2.0 * f])).amax() < 1e-12);
}

#[test]
fn bound_separates_stable_from_unstable_on_reference() {
    let exp = SimConfig::reference().build().unwrap();
    let m = NetworkMatrices::from_scenario(&exp.scenario, AdaptWeights::Identity);
    let eta = exp.params.regularization;
    let mu_max = m.step_bound(eta);
    assert!(spectral_radius(&m.transition(0.9 * mu_max, eta)) < 1.0);
    assert!(spectral_radius(&m.transition(1.5 * mu_max, eta)) > 1.0);
    assert!(spectral_radius(&m.transition(exp.params.step_size, eta)) < 1.0);
}

#[test]
fn schur_and_gelfand_agree_on_transitions() {
    for seed in 0..10 {
        let s = common::random_scenario(seed);
        let m = NetworkMatrices::from_scenario(&s, AdaptWeights::Uniform);
        let b = m.transition(0.8 * m.step_bound(0.1), 0.1);
        let (a, g) = (spectral_radius(&b), gelfand_estimate(&b, 40));
        assert!((a - g).abs() < 1e-6 * a.max(1.0), "seed {seed}: {a} vs {g}");
    }
}

#[test]
fn radius_of_known_matrices() {
    let rot = DMatrix::from_row_slice(2, 2, &[0.0, -0.5, 0.5, 0.0]);
    assert!((spectral_radius(&rot) - 0.5).abs() < 1e-12);
    let jordan = DMatrix::from_row_slice(2, 2, &[0.9, 1.0, 0.0, 0.9]);
    assert!((spectral_radius(&jordan) - 0.9).abs() < 1e-9);
    assert_eq!(spectral_radius(&DMatrix::zeros(3, 3)), 0.0);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn bound_is_sufficient_on_random_networks(seed in 0u64..10_000, frac in 0.05f64..0.95, eta in 0.0f64..0.5) {
        let s = common::random_scenario(seed);
        for adapt in [AdaptWeights::Identity, AdaptWeights::Uniform] {
            let m = NetworkMatrices::from_scenario(&s, adapt);
            let mu = frac * m.step_bound(eta);
            prop_assert!(spectral_radius(&m.transition(mu, eta)) < 1.0);
        }
    }

    #[test]
    fn combination_is_column_stochastic(seed in 0u64..10_000) {
        let s = common::random_scenario(seed);
        let a = NetworkMatrices::from_scenario(&s, AdaptWeights::Identity).lifted_combination();
        for c in 0..a.ncols() {
            prop_assert!((a.column(c).sum() - 1.0).abs() < 1e-12);
        }
    }
}
