//! Tabular epsilon-greedy Q-learning over one player's information sets, used
//! as an approximate best-response oracle.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::game::Player;
use crate::scalar::Scalar;
use crate::tree::{sample_index, BehaviorPolicy, GameTree, Node};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QConfig {
    pub step_size: f64,
    pub epsilon: f64,
}

impl QConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.step_size > 0.0 && self.step_size <= 1.0) {
            return arg(format!("step size must lie in (0, 1], got {}", self.step_size));
        }
        if !(0.0..=1.0).contains(&self.epsilon) {
            return arg(format!("epsilon must lie in [0, 1], got {}", self.epsilon));
        }
        Ok(())
    }
}

impl Default for QConfig {
    fn default() -> Self {
        Self { step_size: 0.1, epsilon: 0.2 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct QLearner<T> {
    owner: Player,
    step_size: T,
    epsilon: T,
    q: Vec<Vec<T>>,
    episodes: u64,
}

fn argmax_lowest<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate().skip(1) {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

impl<T: Scalar> QLearner<T> {
    pub fn new(game: &GameTree<T>, owner: Player, config: QConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            owner,
            step_size: T::lit(config.step_size),
            epsilon: T::lit(config.epsilon),
            q: game.infosets(owner).iter().map(|s| vec![T::zero(); s.num_actions()]).collect(),
            episodes: 0,
        })
    }

    pub fn owner(&self) -> Player {
        self.owner
    }

    pub fn episodes(&self) -> u64 {
        self.episodes
    }

    pub fn q_values(&self, infoset: usize) -> &[T] {
        &self.q[infoset]
    }

    /// Deterministic policy taking the highest-valued action at every infoset,
    /// lowest index on ties.
    pub fn greedy_policy(&self, game: &GameTree<T>) -> Result<BehaviorPolicy<T>> {
        let actions: Vec<usize> = self.q.iter().map(|q| argmax_lowest(q)).collect();
        BehaviorPolicy::deterministic(game, self.owner, &actions)
    }

    fn behave<R: Rng + ?Sized>(&self, infoset: usize, rng: &mut R) -> usize {
        let q = &self.q[infoset];
        if T::lit(rng.gen::<f64>()) < self.epsilon {
            rng.gen_range(0..q.len())
        } else {
            argmax_lowest(q)
        }
    }

    /// Plays one episode against `opponent`, updating after each of the
    /// learner's transitions. Rewards come only at terminals; discount is 1.
    pub fn episode<R: Rng + ?Sized>(
        &mut self,
        game: &GameTree<T>,
        opponent: &BehaviorPolicy<T>,
        rng: &mut R,
    ) -> Result<()> {
        if opponent.owner() != self.owner.opponent() {
            return arg("opponent policy belongs to the learner");
        }
        let mut pending: Option<(usize, usize)> = None;
        let mut id = game.root();
        loop {
            match game.node(id) {
                Node::Terminal { payoff } => {
                    if let Some((s, a)) = pending {
                        let r = self.owner.orient(*payoff);
                        let q = &mut self.q[s][a];
                        *q += self.step_size * (r - *q);
                    }
                    self.episodes += 1;
                    return Ok(());
                }
                Node::Chance { outcomes } => {
                    let u = T::lit(rng.gen::<f64>());
                    let mut acc = T::zero();
                    let mut next = outcomes[outcomes.len() - 1].child;
                    for o in outcomes {
                        acc += o.prob;
                        if u < acc {
                            next = o.child;
                            break;
                        }
                    }
                    id = next;
                }
                Node::Decision { player, infoset, children } => {
                    if *player == self.owner {
                        if let Some((s, a)) = pending {
                            let target = self.q[*infoset].iter().copied().fold(T::neg_infinity(), T::max);
                            let q = &mut self.q[s][a];
                            *q += self.step_size * (target - *q);
                        }
                        let a = self.behave(*infoset, rng);
                        pending = Some((*infoset, a));
                        id = children[a];
                    } else {
                        let probs = opponent.action_probs(*infoset).ok_or_else(|| Error::PolicyDomain {
                            infoset: *infoset,
                            label: game.infoset(*player, *infoset).label.clone(),
                        })?;
                        id = children[sample_index(probs, rng)];
                    }
                }
            }
        }
    }
}

/// Runs `episodes` episodes, drawing a fresh opponent from `opponent_sampler`
/// before each one.
pub fn qlearner_train<'a, T, R, F>(
    learner: &mut QLearner<T>,
    game: &GameTree<T>,
    mut opponent_sampler: F,
    episodes: u64,
    rng: &mut R,
) -> Result<()>
where
    T: Scalar,
    R: Rng + ?Sized,
    F: FnMut(&mut R) -> &'a BehaviorPolicy<T>,
{
    for _ in 0..episodes {
        let opponent = opponent_sampler(rng);
        learner.episode(game, opponent, rng)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::MatrixGame;
    use crate::rng::{seeded, Purpose};

    fn bandit() -> GameTree<f64> {
        let g = MatrixGame::new(vec![vec![0.0], vec![1.0], vec![0.25]]).unwrap();
        GameTree::from_matrix(&g).unwrap()
    }

    #[test]
    fn zero_episodes_leave_the_table_alone() {
        let g = bandit();
        let mut learner = QLearner::new(&g, Player::One, QConfig::default()).unwrap();
        let before = learner.clone();
        let opp = BehaviorPolicy::uniform(&g, Player::Two);
        qlearner_train(&mut learner, &g, |_| &opp, 0, &mut seeded(0, Purpose::QLearning)).unwrap();
        assert_eq!(learner, before);
    }

    #[test]
    fn single_decision_converges() {
        let g = bandit();
        let mut learner = QLearner::new(&g, Player::One, QConfig::default()).unwrap();
        let opp = BehaviorPolicy::uniform(&g, Player::Two);
        let mut rng = seeded(1, Purpose::QLearning);
        qlearner_train(&mut learner, &g, |_| &opp, 10_000, &mut rng).unwrap();
        assert!((learner.q_values(0)[1] - 1.0).abs() < 0.05);
        assert_eq!(learner.greedy_policy(&g).unwrap().pure_actions().unwrap(), vec![1]);
        assert_eq!(learner.episodes(), 10_000);
    }

    #[test]
    fn ties_go_to_the_lowest_action() {
        let g = bandit();
        let learner = QLearner::new(&g, Player::One, QConfig::default()).unwrap();
        assert_eq!(learner.greedy_policy(&g).unwrap().pure_actions().unwrap(), vec![0]);
    }

    #[test]
    fn rejects_bad_config() {
        let g = bandit();
        assert!(QLearner::new(&g, Player::One, QConfig { step_size: 0.0, epsilon: 0.2 }).is_err());
        assert!(QLearner::new(&g, Player::One, QConfig { step_size: 0.1, epsilon: 1.5 }).is_err());
    }
}
