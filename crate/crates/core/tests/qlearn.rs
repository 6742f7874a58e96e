use psro_core::qlearn::{qlearner_train, QConfig, QLearner};
use psro_core::rng::{seeded, Purpose};
use psro_core::solvers::best_response_tree;
use psro_core::tree::{evaluate_tree, BehaviorPolicy};
use psro_core::zoo::kuhn_poker;
use psro_core::Player;

/// Shortfall of the greedy policy after training against uniform play.
fn shortfall(learner_side: Player, config: QConfig, seed: u64) -> f64 {
    let kuhn = kuhn_poker::<f64>();
    let opp = BehaviorPolicy::uniform(&kuhn, learner_side.opponent());
    let (_, exact) = best_response_tree(&kuhn, &opp, learner_side).unwrap();
    let mut learner = QLearner::new(&kuhn, learner_side, config).unwrap();
    let mut rng = seeded(seed, Purpose::QLearning);
    qlearner_train(&mut learner, &kuhn, |_| &opp, 500_000, &mut rng).unwrap();
    let greedy = learner.greedy_policy(&kuhn).unwrap();
    let v = match learner_side {
        Player::One => evaluate_tree(&kuhn, &greedy, &opp).unwrap(),
        Player::Two => -evaluate_tree(&kuhn, &opp, &greedy).unwrap(),
    };
    exact - v
}

#[test]
fn kuhn_greedy_policy_matches_exact_best_response_with_small_steps() {
    let config = QConfig { step_size: 0.01, epsilon: 0.2 };
    for side in Player::BOTH {
        for seed in 0..5 {
            let gap = shortfall(side, config, seed);
            assert!((-1e-12..0.05).contains(&gap), "{side:?} seed {seed}: {gap}");
        }
    }
}
