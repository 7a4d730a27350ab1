use hopkey::analysis::{fading_pb, key_prob, min_transmissions};
use hopkey::experiments::{analytic_sweep, frontier, run_engagement, sweep};
use hopkey::protocol::{run_rounds, run_scripted};
use hopkey::{
    AdversaryRule, Deployment, FrontierSource, Geometry, KeyRequest, NodeId, Probability, ResultTable, RoundOutcome,
    ScenarioConfig, SweepSpec,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn small_spec(seed: u64) -> SweepSpec {
    SweepSpec {
        ks: vec![8, 24],
        ns: vec![30, 60, 90],
        d_bes: vec![5.0, 30.0],
        sigmas: vec![8.0],
        trials: 80,
        base_seed: seed,
        ..SweepSpec::default()
    }
}

#[test]
fn sweep_csv_round_trips() {
    let table = sweep(&small_spec(4)).unwrap();
    let text = table.to_csv_string();
    let back = ResultTable::read_csv(text.as_bytes()).unwrap();
    assert_eq!(back, table);
    assert!(text.starts_with("k,n,d_be,sigma,rule,metric,trials,p_hat,ci_lo,ci_hi,p_analytic\n"));
}

#[test]
fn sweep_rows_follow_grid_order() {
    let spec = small_spec(1);
    let table = sweep(&spec).unwrap();
    let coords: Vec<_> = table.rows.iter().map(|r| (r.k, r.n, r.d_be)).collect();
    let want: Vec<_> = spec.points().iter().map(|p| (p.k, p.n, p.d_be)).collect();
    assert_eq!(coords, want);
    for r in &table.rows {
        assert!(r.ci_lo <= r.p_hat && r.p_hat <= r.ci_hi);
        assert_eq!(r.trials, 80);
    }
}

#[test]
fn empty_axis_gives_empty_table_but_fails_validation() {
    let spec = SweepSpec {
        d_bes: vec![],
        ..small_spec(0)
    };
    assert!(sweep(&spec).unwrap().rows.is_empty());
    assert!(spec.validate().is_err());
}

#[test]
fn frontier_matches_min_transmissions_on_a_fine_grid() {
    let spec = SweepSpec {
        ks: vec![32],
        ns: (32..=4000).collect(),
        d_bes: vec![100.0],
        sigmas: vec![8.0],
        trials: 1,
        budget: u64::MAX,
        ..SweepSpec::default()
    };
    let rows = frontier(&analytic_sweep(&spec).unwrap(), 0.99, FrontierSource::Analytic);
    let req = KeyRequest::new(32, 0.99).unwrap();
    let want = min_transmissions(&req, fading_pb(100.0, 8.0, 3.5)).unwrap();
    assert_eq!(rows[0].min_n, Some(want));
}

#[test]
fn random_guess_ignores_geometry() {
    let cfg = ScenarioConfig {
        n_rounds: 3000,
        seed: 8,
        ..ScenarioConfig::default()
    };
    let near = run_engagement(&cfg, Deployment::canonical(1.0).unwrap(), AdversaryRule::RandomGuess).unwrap();
    let far = run_engagement(&cfg, Deployment::canonical(900.0).unwrap(), AdversaryRule::RandomGuess).unwrap();
    assert_eq!(near.report, far.report);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn nodes_agree_on_every_key(seed in any::<u64>(), n in 0u64..400) {
        let t = run_rounds(n, &mut ChaCha8Rng::seed_from_u64(seed)).unwrap();
        prop_assert_eq!(t.node_key(NodeId::Alice), t.node_key(NodeId::Bob));
        prop_assert_eq!(t.node_key(NodeId::Alice), t.key_bits.clone());
        let collisions = t.rounds.iter().filter(|r| r.outcome.is_collision()).count();
        prop_assert_eq!(collisions + t.key_bits.len(), n as usize);
    }

    #[test]
    fn scripted_rounds_follow_the_rule(a in proptest::collection::vec(any::<bool>(), 0..64), seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b: Vec<bool> = a.iter().map(|_| rand::Rng::random(&mut rng)).collect();
        let t = run_scripted(&a, &b).unwrap();
        for (i, r) in t.rounds.iter().enumerate() {
            match r.outcome {
                RoundOutcome::Collision { .. } => prop_assert_eq!(a[i], b[i]),
                RoundOutcome::SharedBit { value, .. } => {
                    prop_assert_ne!(a[i], b[i]);
                    prop_assert_eq!(value, a[i]);
                }
            }
        }
    }

    #[test]
    fn decisions_survive_power_shifts(
        seed in any::<u64>(),
        d_be in 1.0..200.0f64,
        sigma in 0.0..15.0f64,
        dpt in -50.0..50.0f64,
        dpl0 in -30.0..30.0f64,
    ) {
        let base = ScenarioConfig { sigma, n_rounds: 300, seed, ..ScenarioConfig::default() };
        let shifted = ScenarioConfig { pt: base.pt + dpt, pl0: base.pl0 + dpl0, ..base };
        let dep = Deployment::canonical(d_be).unwrap();
        let a = run_engagement(&base, dep, AdversaryRule::MlPairwise).unwrap();
        let b = run_engagement(&shifted, dep, AdversaryRule::MlPairwise).unwrap();
        prop_assert_eq!(a.trace.guesses, b.trace.guesses);
        prop_assert_eq!(a.report, b.report);
    }

    #[test]
    fn analytic_column_monotone_in_n(k in 1u64..64, d_be in 1.0..300.0f64, sigma in 0.5..15.0f64) {
        let spec = SweepSpec {
            ks: vec![k],
            ns: vec![k, 2 * k, 4 * k, 8 * k, 16 * k],
            d_bes: vec![d_be],
            sigmas: vec![sigma],
            trials: 1,
            ..SweepSpec::default()
        };
        let t = analytic_sweep(&spec).unwrap();
        for w in t.rows.windows(2) {
            prop_assert!(w[0].p_hat <= w[1].p_hat + 1e-12);
        }
    }

    #[test]
    fn equidistant_secret_rate_without_shadowing(seed in any::<u64>(), d in 25.0..500.0f64) {
        let cfg = ScenarioConfig { sigma: 0.0, n_rounds: 500, seed, ..ScenarioConfig::default() };
        let r = run_engagement(&cfg, Deployment::equidistant(d).unwrap(), AdversaryRule::MlPairwise).unwrap();
        prop_assert_eq!(r.report.guessed_correct, 0);
        prop_assert_eq!(r.report.secret, r.report.generated);
    }

    #[test]
    fn geometry_offsets_hold(d in 0.5..1e4f64) {
        let dep = Geometry::Collinear.deployment(d).unwrap();
        prop_assert!((dep.d_ae() - dep.d_be() - 50.0).abs() < 1e-9 * (1.0 + d));
        prop_assert!((dep.d_ab() - 50.0).abs() < 1e-12);
    }

    #[test]
    fn key_prob_is_a_probability(k in 0u64..500, n in 0u64..2000, p in 0.0..=1.0f64) {
        let v = key_prob(k, n, Probability::new(p).unwrap()).value();
        prop_assert!((0.0..=1.0).contains(&v));
    }
}
