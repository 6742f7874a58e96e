use psro_core::game::{MatrixGame, MixedStrategy};
use psro_core::meta::*;
use psro_core::regret::RegretRule;
use psro_core::rng::{seeded, Purpose};
use psro_core::solvers::{exploitability_matrix, exploitability_populations, solve_matrix_nash, PayoffMode};
use psro_core::tree::{reduced_normal_form, BehaviorPolicy, GameTree, DEFAULT_STRATEGY_CAP};
use psro_core::zoo::{fig1_bad_case, kuhn_poker, random_matrix_game};
use psro_core::Player;

fn mwu(eta: f64) -> RegretConfig {
    RegretConfig { rule: RegretRule::Mwu, eta: Some(eta), gamma: None }
}

fn first_policies(game: &GameTree<f64>) -> [Vec<BehaviorPolicy<f64>>; 2] {
    Player::BOTH.map(|p| vec![BehaviorPolicy::deterministic(game, p, &vec![0; game.num_infosets(p)]).unwrap()])
}

fn without_clock<T: Clone, S: Clone>(trace: &RunTrace<T, S>) -> RunTrace<T, S> {
    let mut t = trace.clone();
    for r in &mut t.records {
        r.wall_ms = 0;
    }
    t
}

#[test]
fn ado_is_monotone_and_ends_at_equilibrium() {
    for seed in 0..30u64 {
        let size = 10 + (seed as usize * 3) % 41;
        let g: MatrixGame<f64> = random_matrix_game(size, size, seed).unwrap();
        let t = run_ado(&g, [vec![0], vec![0]], 1000, 1e-9).unwrap();
        let e = t.exploitabilities();
        for w in e[1..].windows(2) {
            assert!(w[1] <= w[0] + 1e-9, "seed {seed}: {e:?}");
        }
        assert!(*e.last().unwrap() <= 1e-6);
        assert_eq!(t.termination, Termination::NoNovelBestResponse);
    }
}

#[test]
fn do_and_ado_terminate_within_the_strategy_count() {
    for seed in 0..200u64 {
        let g: MatrixGame<f64> = random_matrix_game(30, 30, 1000 + seed).unwrap();
        for t in [run_do(&g, [vec![0], vec![0]], 1000, 1e-9).unwrap(), run_ado(&g, [vec![0], vec![0]], 1000, 1e-9).unwrap()] {
            assert!(t.records.len() <= 60);
            assert!(t.final_record().exploitability <= 1e-6);
            for w in t.records.windows(2) {
                assert!(w[1].pop_size_p1 + w[1].pop_size_p2 > w[0].pop_size_p1 + w[0].pop_size_p2);
            }
        }
    }
}

#[test]
fn rmbr_average_meets_the_regret_bound() {
    let (n, eta) = (20_000u64, 0.1);
    for seed in 0..5u64 {
        let g: MatrixGame<f64> = random_matrix_game(12, 12, 50 + seed).unwrap();
        let all: Vec<usize> = (0..12).collect();
        let cfg = RmbrConfig { updates: n, br_every: 1, regret: mwu(eta) };
        let out = run_rmbr(&g, &[all.clone(), all], &cfg, &mut seeded(seed, Purpose::RegretSampling)).unwrap();
        let x = MixedStrategy::new(out.average[0].clone()).unwrap();
        let y = MixedStrategy::new(out.average[1].clone()).unwrap();
        // Rewards are normalized to [0, 1], so the bound is scaled back by the payoff range.
        let range = g.max_entry() - g.min_entry();
        let bound = 2.0 * range * ((12f64).ln() / (n as f64 * eta) + eta);
        let e = exploitability_matrix(&g, &x, &y).unwrap();
        assert!(e <= bound, "seed {seed}: {e} > {bound}");
    }
}

#[test]
fn rmbr_on_full_kuhn_populations_approaches_equilibrium() {
    let kuhn = kuhn_poker::<f64>();
    let pops = Player::BOTH.map(|p| reduced_normal_form(&kuhn, p, DEFAULT_STRATEGY_CAP).unwrap());
    // One best response per 1000 updates leaves only 100 distinct opponents to learn from.
    for (br_every, eta, limit) in [(1000, 0.005, 0.05), (100, 0.02, 0.02)] {
        let cfg = RmbrConfig { updates: 100_000, br_every, regret: mwu(eta) };
        let out = run_rmbr(&kuhn, &pops, &cfg, &mut seeded(0, Purpose::RegretSampling)).unwrap();
        let e = exploitability_populations(
            &kuhn,
            &pops[0],
            &MixedStrategy::new(out.average[0].clone()).unwrap(),
            &pops[1],
            &MixedStrategy::new(out.average[1].clone()).unwrap(),
        )
        .unwrap();
        assert!(e < limit, "br_every {br_every}: {e}");
    }
}

#[test]
fn rmbr_do_on_kuhn() {
    let kuhn = kuhn_poker::<f64>();
    let cfg = RmbrDoConfig { inner: RmbrConfig { updates: 10_000, br_every: 100, regret: mwu(0.1) }, epsilon: 0.0, novelty_tol: 0.03 };
    let t = run_rmbr_do(&kuhn, first_policies(&kuhn), 20, cfg, seeded(0, Purpose::RegretSampling)).unwrap();
    assert!(t.final_record().exploitability < 0.05, "{:?}", t.exploitabilities());
}

#[test]
fn rmbr_do_stops_once_the_gap_is_small() {
    let g: MatrixGame<f64> = random_matrix_game(15, 15, 7).unwrap();
    let cfg = RmbrDoConfig { inner: RmbrConfig { updates: 20_000, br_every: 1, regret: mwu(0.05) }, epsilon: 0.5, novelty_tol: 0.0 };
    let t = run_rmbr_do(&g, [vec![0], vec![0]], 100, cfg, seeded(1, Purpose::RegretSampling)).unwrap();
    if t.termination == Termination::GapBelowEpsilon {
        let r = t.final_record();
        assert!(-(r.restricted_value_p1 + r.restricted_value_p2) <= 0.5);
    }
    assert!(t.termination != Termination::MaxIterations);
}

#[test]
fn psro_and_apsro_on_kuhn_record_budgets() {
    let kuhn = kuhn_poker::<f64>();
    let pcfg = PsroConfig { q_episodes: 2_000, learner: BrLearner::default(), payoff_mode: PayoffMode::Simulated { episodes: 50 }, warm_start: false };
    let p = run_psro_tabular(&kuhn, first_policies(&kuhn), 4, pcfg, seeded(0, Purpose::Simulation), seeded(0, Purpose::QLearning)).unwrap();
    assert_eq!(p.records.len(), 5);
    assert!(p.exploitabilities().iter().all(|e| e.is_finite() && *e >= -1e-12));
    assert_eq!(p.final_record().q_episodes, 5 * 2 * 2_000);

    let acfg = ApsroConfig {
        regret_updates: 500,
        q_episodes: 5_000,
        regret_batch: 10,
        q_batch: 100,
        regret: mwu(0.1),
        learner: BrLearner::default(),
        warm_start: false,
    };
    let a = run_apsro(&kuhn, first_policies(&kuhn), 4, acfg, seeded(0, Purpose::RegretSampling), seeded(0, Purpose::QLearning)).unwrap();
    let r = a.final_record();
    assert_eq!((r.regret_updates, r.q_episodes, r.br_calls), (5 * 2 * 500, 5 * 2 * 5_000, 0));
    for rec in &a.records {
        for d in &rec.distributions {
            assert!((d.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        }
    }
}

#[test]
fn exact_psro_on_fig1_matches_do_with_exact_restricted_values() {
    let g: MatrixGame<f64> = fig1_bad_case();
    let tree = GameTree::from_matrix(&g).unwrap();
    let cfg = PsroConfig { q_episodes: 0, learner: BrLearner::Exact, payoff_mode: PayoffMode::Exact, warm_start: false };
    let p = run_psro_tabular(&tree, first_policies(&tree), 10, cfg, seeded(0, Purpose::Simulation), seeded(0, Purpose::QLearning)).unwrap();
    let d = run_do(&g, [vec![0], vec![0]], 10, 1e-9).unwrap();
    for (a, b) in p.records.iter().zip(&d.records) {
        assert!((a.exploitability - b.exploitability).abs() < 1e-9);
        assert!((a.restricted_value_p1 - b.restricted_value_p1).abs() < 1e-9);
    }
    let value = solve_matrix_nash(&g, 1e-9).unwrap().value;
    assert!((p.final_record().restricted_value_p1 - value).abs() < 1e-9);
}

fn resume_matches<'g, S, R, F>(make: F, resume: R, split: usize)
where
    S: Clone + PartialEq + std::fmt::Debug + serde::Serialize + serde::de::DeserializeOwned,
    F: Fn() -> Box<dyn MetaSolver<f64, Strategy = S> + 'g>,
    R: Fn(Checkpoint<f64, S>) -> Box<dyn MetaSolver<f64, Strategy = S> + 'g>,
{
    let full = make().run_to_end().unwrap();
    let mut first = make();
    for _ in 0..split {
        first.step().unwrap();
    }
    let text = first.checkpoint("cfg").to_json().unwrap();
    let mut second = resume(Checkpoint::from_json(&text).unwrap());
    let resumed = second.run_to_end().unwrap();
    assert_eq!(without_clock(&full), without_clock(&resumed));
}

#[test]
fn checkpoints_resume_bit_exactly() {
    let g: MatrixGame<f64> = random_matrix_game(20, 20, 3).unwrap();
    resume_matches(
        || Box::new(AdoRunner::new(&g, [vec![0], vec![0]], 100, 1e-9).unwrap()),
        |cp| Box::new(AdoRunner::resume(&g, 1e-9, cp, "cfg").unwrap()),
        3,
    );
    resume_matches(
        || Box::new(DoRunner::new(&g, [vec![0], vec![0]], 100, 1e-9).unwrap()),
        |cp| Box::new(DoRunner::resume(&g, 1e-9, cp, "cfg").unwrap()),
        2,
    );

    let kuhn = kuhn_poker::<f64>();
    let rcfg = RmbrDoConfig { inner: RmbrConfig { updates: 2_000, br_every: 100, regret: RegretConfig::default() }, epsilon: 0.0, novelty_tol: 0.03 };
    resume_matches(
        || Box::new(RmbrDoRunner::new(&kuhn, first_policies(&kuhn), 5, rcfg, seeded(2, Purpose::RegretSampling)).unwrap()),
        |cp| Box::new(RmbrDoRunner::resume(&kuhn, rcfg, cp, "cfg").unwrap()),
        2,
    );

    let acfg = ApsroConfig {
        regret_updates: 300,
        q_episodes: 3_000,
        regret_batch: 10,
        q_batch: 100,
        regret: RegretConfig::default(),
        learner: BrLearner::default(),
        warm_start: true,
    };
    resume_matches(
        || {
            Box::new(
                ApsroRunner::new(&kuhn, first_policies(&kuhn), 4, acfg, seeded(5, Purpose::RegretSampling), seeded(5, Purpose::QLearning))
                    .unwrap(),
            )
        },
        |cp| Box::new(ApsroRunner::resume(&kuhn, acfg, cp, "cfg").unwrap()),
        2,
    );

    let pcfg = PsroConfig { q_episodes: 1_000, learner: BrLearner::default(), payoff_mode: PayoffMode::Simulated { episodes: 20 }, warm_start: true };
    resume_matches(
        || {
            Box::new(
                PsroRunner::new(&kuhn, first_policies(&kuhn), 4, pcfg, seeded(5, Purpose::Simulation), seeded(5, Purpose::QLearning))
                    .unwrap(),
            )
        },
        |cp| Box::new(PsroRunner::resume(&kuhn, pcfg, cp, "cfg").unwrap()),
        3,
    );
}

#[test]
fn resume_refuses_a_different_configuration() {
    let g: MatrixGame<f64> = fig1_bad_case();
    let mut r = AdoRunner::new(&g, [vec![0], vec![0]], 10, 1e-9).unwrap();
    r.step().unwrap();
    let cp = r.checkpoint("a");
    assert!(AdoRunner::resume(&g, 1e-9, cp.clone(), "b").is_err());
    assert!(DoRunner::resume(&g, 1e-9, cp, "a").is_err());
    assert!(Checkpoint::<f64, usize>::from_json(r#"{"format":"x"}"#).is_err());
}

