use resilient_dlms::config::{AlgorithmName, AttackName};
use resilient_dlms::{run_monte_carlo, MonteCarloResult, SimConfig};

fn run(algo: AlgorithmName, attack: AttackName, runs: u64, edit: impl FnOnce(&mut SimConfig)) -> MonteCarloResult {
    let mut cfg = SimConfig::reference();
    cfg.runs = runs;
    cfg.algorithm = algo;
    cfg.attack.kind = attack;
    edit(&mut cfg);
    run_monte_carlo(&cfg.build().unwrap()).unwrap()
}

#[test]
fn reference_proposed_runs_to_completion() {
    let r = run(AlgorithmName::Proposed, AttackName::None, 2, |_| {});
    assert_eq!(r.msd_linear.len(), 1001);
    assert!(r.msd_linear.iter().all(|m| m.is_finite()));
}

#[test]
fn fdi_degrades_unprotected_mdlms_by_10_db() {
    let clean = run(AlgorithmName::Mdlms, AttackName::None, 50, |_| {}).steady_state_db();
    let hit = run(AlgorithmName::Mdlms, AttackName::Fdi, 50, |_| {}).steady_state_db();
    assert!(hit >= clean + 10.0, "attack-free {clean:.2} dB, under FDI {hit:.2} dB");
}

#[test]
fn standalone_lms_trails_attack_free_mdlms() {
    let clean = run(AlgorithmName::Mdlms, AttackName::None, 50, |_| {}).steady_state_db();
    let alone = run(AlgorithmName::Nclms, AttackName::None, 50, |_| {}).steady_state_db();
    assert!(alone > clean, "NC-LMS {alone:.2} dB, M-DLMS {clean:.2} dB");
}

#[test]
fn attack_free_mdlms_curve_decreases_then_flattens() {
    let r = run(AlgorithmName::Mdlms, AttackName::None, 50, |_| {});
    let m = &r.msd_linear;
    let block = |a: usize, b: usize| m[a..b].iter().sum::<f64>() / (b - a) as f64;
    for k in 0..4 {
        assert!(block(k * 50, (k + 1) * 50) > block((k + 1) * 50, (k + 2) * 50));
    }
    let (late, last) = (block(600, 800), block(800, 1001));
    assert!((late / last).log10().abs() * 10.0 < 1.0);
}

#[test]
fn fdi_events_do_not_decrease_with_attack_variance() {
    let events: Vec<f64> = [1.0, 3.0, 10.0, 30.0]
        .iter()
        .map(|&v| run(AlgorithmName::Proposed, AttackName::Fdi, 20, |c| c.attack.fdi_variance = v).average_events())
        .collect();
    for w in events.windows(2) {
        assert!(w[1] >= w[0], "events by variance: {events:?}");
    }
}

#[test]
fn persistent_attackers_lose_reputation() {
    // an attacked sender flagged in most polls should be polled rarely once detected
    let r = run(AlgorithmName::Proposed, AttackName::Fdi, 20, |_| {});
    let mut polled = 0u64;
    let mut flagged = 0u64;
    for per_run in &r.attacked_sender {
        for &(p, f) in per_run {
            polled += p;
            flagged += f;
        }
    }
    assert!(polled > 0);
    assert!(flagged as f64 / polled as f64 > 0.5);
}

// The following encode behavioural expectations on the reference scenario.

#[test]
fn attack_free_proposed_matches_mdlms_within_1_db() {
    let proposed = run(AlgorithmName::Proposed, AttackName::None, 200, |_| {}).steady_state_db();
    let mdlms = run(AlgorithmName::Mdlms, AttackName::None, 200, |_| {}).steady_state_db();
    assert!((proposed - mdlms).abs() <= 1.0, "proposed {proposed:.2} dB, M-DLMS {mdlms:.2} dB");
}

#[test]
fn proposed_beats_mdlms_under_fdi() {
    let proposed = run(AlgorithmName::Proposed, AttackName::Fdi, 200, |_| {});
    let mdlms = run(AlgorithmName::Mdlms, AttackName::Fdi, 200, |_| {});
    // 95% one-sided margin on the per-run steady-state means
    let per_run = |r: &MonteCarloResult| -> (f64, f64) {
        let n = r.final_errors.len() as f64;
        let v: Vec<f64> = r.final_errors.iter().map(|e| e.norm_squared() / r.num_nodes as f64).collect();
        let mean = v.iter().sum::<f64>() / n;
        let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (mean, (var / n).sqrt())
    };
    let (pm, ps) = per_run(&proposed);
    let (mm, ms) = per_run(&mdlms);
    assert!(
        proposed.steady_state_db() < mdlms.steady_state_db() && pm + 1.645 * (ps * ps + ms * ms).sqrt() < mm,
        "proposed {:.2} dB, M-DLMS {:.2} dB",
        proposed.steady_state_db(),
        mdlms.steady_state_db()
    );
}

#[test]
fn attack_free_steady_state_flags_nobody() {
    let mut cfg = SimConfig::reference();
    cfg.runs = 20;
    cfg.output.trace = true;
    let r = run_monte_carlo(&cfg.build().unwrap()).unwrap();
    let flagged: usize = r.trace.iter().filter(|t| t.t > 800).map(|t| t.s_minus).sum();
    let polled: usize = r.trace.iter().filter(|t| t.t > 800).map(|t| t.b_plus).sum();
    assert_eq!(flagged, 0, "{flagged} of {polled} polls flagged after convergence");
}
