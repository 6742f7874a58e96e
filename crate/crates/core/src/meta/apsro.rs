use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::game::{MatrixGame, MixedStrategy, Player};
use crate::qlearn::{qlearner_train, QConfig, QLearner};
use crate::regret::{normalize_reward, RegretState};
use crate::rng::{Rng, RngCursor};
use crate::scalar::Scalar;
use crate::solvers::{best_response_tree, solve_matrix_nash, EmpiricalPayoffs, PayoffMode};
use crate::tree::{merge_population, sample_index, BehaviorPolicy, GameTree};

use super::rmbr::{evaluate_profile, new_regret_state, player_bounds, regret_step};
use super::{Algorithm, Checkpoint, MetaSolver, Outcome, PopulationGame, RegretConfig, RunState, RunTrace, CHECKPOINT_FORMAT};

/// How the responding player's policy is produced.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BrLearner {
    /// Tabular Q-learning; the greedy policy is the response.
    QLearning(QConfig),
    /// Exact best response by tree traversal.
    Exact,
}

impl Default for BrLearner {
    fn default() -> Self {
        BrLearner::QLearning(QConfig::default())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ApsroConfig {
    /// Regret updates per player per outer iteration.
    pub regret_updates: u64,
    /// Q-learning episodes per player per outer iteration.
    pub q_episodes: u64,
    #[serde(default = "default_regret_batch")]
    pub regret_batch: u64,
    #[serde(default = "default_q_batch")]
    pub q_batch: u64,
    #[serde(default)]
    pub regret: RegretConfig,
    #[serde(default)]
    pub learner: BrLearner,
    /// Keep each learner's Q-table across outer iterations.
    #[serde(default)]
    pub warm_start: bool,
}

fn default_regret_batch() -> u64 {
    10
}

fn default_q_batch() -> u64 {
    100
}

impl ApsroConfig {
    fn validate(&self) -> Result<()> {
        if self.regret_batch == 0 || self.q_batch == 0 {
            return arg("batch sizes must be at least 1");
        }
        Ok(())
    }

    /// Number of interleaved learner/regret steps in one inner loop.
    fn steps(&self) -> u64 {
        match self.learner {
            BrLearner::QLearning(_) if self.q_episodes > 0 => self.q_episodes.div_ceil(self.q_batch),
            _ => self.regret_updates.div_ceil(self.regret_batch),
        }
    }
}

fn fresh_learner<T: Scalar>(
    game: &GameTree<T>,
    owner: Player,
    learner: BrLearner,
    stored: &mut [Option<QLearner<T>>; 2],
    warm_start: bool,
) -> Result<Option<QLearner<T>>> {
    let BrLearner::QLearning(config) = learner else {
        return Ok(None);
    };
    match stored[owner.index()].take() {
        Some(q) if warm_start => Ok(Some(q)),
        _ => QLearner::new(game, owner, config).map(Some),
    }
}

fn cursor_pair(rngs: Vec<RngCursor>) -> Result<(Rng, Rng)> {
    let [a, b] = <[RngCursor; 2]>::try_from(rngs).map_err(|_| Error::Argument("checkpoint needs two rng cursors".into()))?;
    Ok((a.restore()?, b.restore()?))
}

fn stored_learners<T: Scalar>(tables: Vec<QLearner<T>>) -> Result<[Option<QLearner<T>>; 2]> {
    let mut stored = [None, None];
    for q in tables {
        let slot = &mut stored[q.owner().index()];
        if slot.is_some() {
            return arg("checkpoint holds two Q-tables for one player");
        }
        *slot = Some(q);
    }
    Ok(stored)
}

/// Anytime PSRO on a game tree.
pub struct ApsroRunner<'g, T: Scalar> {
    game: &'g GameTree<T>,
    config: ApsroConfig,
    regret_rng: Rng,
    q_rng: Rng,
    learners: [Option<QLearner<T>>; 2],
    last_states: Vec<RegretState<T>>,
    state: RunState<T, BehaviorPolicy<T>>,
}

impl<'g, T: Scalar> ApsroRunner<'g, T> {
    pub fn new(
        game: &'g GameTree<T>,
        init_pops: [Vec<BehaviorPolicy<T>>; 2],
        outer_iters: usize,
        config: ApsroConfig,
        regret_rng: Rng,
        q_rng: Rng,
    ) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            game,
            config,
            regret_rng,
            q_rng,
            learners: [None, None],
            last_states: Vec::new(),
            state: RunState::new(Algorithm::Apsro, init_pops, outer_iters)?,
        })
    }

    pub fn resume(
        game: &'g GameTree<T>,
        config: ApsroConfig,
        checkpoint: Checkpoint<T, BehaviorPolicy<T>>,
        config_hash: &str,
    ) -> Result<Self> {
        config.validate()?;
        checkpoint.expect(Algorithm::Apsro, config_hash)?;
        let (regret_rng, q_rng) = cursor_pair(checkpoint.rng)?;
        Ok(Self {
            game,
            config,
            regret_rng,
            q_rng,
            learners: stored_learners(checkpoint.q_tables)?,
            last_states: checkpoint.regret_states,
            state: checkpoint.state,
        })
    }

    /// Inner loop for the restricted player `player`: its regret learner
    /// against a response for the opponent trained at the same time.
    /// Returns the reported distribution, the response, and the final state.
    fn inner(
        &mut self,
        player: Player,
        counters: &mut super::Counters,
    ) -> Result<(Vec<T>, BehaviorPolicy<T>, RegretState<T>)> {
        let game = self.game;
        let cfg = self.config;
        let own = &self.state.populations[player.index()];
        let (lo, hi) = player_bounds(PopulationGame::payoff_bounds(game), player);
        let mut state = new_regret_state::<T>(&cfg.regret, own.len(), cfg.regret_updates)?;
        let mut learner = fresh_learner(game, player.opponent(), cfg.learner, &mut self.learners, cfg.warm_start)?;
        let steps = cfg.steps();
        let mut done_updates = 0u64;
        let mut done_episodes = 0u64;
        for s in 0..steps {
            let response = match learner.as_mut() {
                Some(q) => {
                    let episodes = cfg.q_batch.min(cfg.q_episodes - done_episodes);
                    let dist = state.distribution();
                    qlearner_train(q, game, |rng: &mut Rng| &own[sample_index(&dist, rng)], episodes, &mut self.q_rng)?;
                    done_episodes += episodes;
                    q.greedy_policy(game)?
                }
                None => {
                    let merged = merge_population(game, own, &MixedStrategy::new(state.distribution())?)?;
                    counters.br_calls += 1;
                    best_response_tree(game, &merged, player.opponent())?.0
                }
            };
            let target = ((s + 1) as u128 * cfg.regret_updates as u128 / steps as u128) as u64;
            if target > done_updates {
                let rewards: Vec<T> = game
                    .member_payoffs(player, own, &response)?
                    .into_iter()
                    .map(|v| normalize_reward(v, lo, hi))
                    .collect();
                while done_updates < target {
                    regret_step(&mut state, &rewards, &mut self.regret_rng)?;
                    done_updates += 1;
                }
            }
        }
        counters.regret_updates += done_updates;
        counters.q_episodes += done_episodes;
        let reported = if done_updates > 0 { state.average_distribution()? } else { state.distribution() };
        let response = match learner {
            Some(q) => {
                let policy = q.greedy_policy(game)?;
                self.learners[player.opponent().index()] = Some(q);
                policy
            }
            None => {
                let merged = merge_population(game, own, &MixedStrategy::new(reported.clone())?)?;
                counters.br_calls += 1;
                best_response_tree(game, &merged, player.opponent())?.0
            }
        };
        Ok((reported, response, state))
    }
}

impl<T: Scalar> MetaSolver<T> for ApsroRunner<'_, T> {
    type Strategy = BehaviorPolicy<T>;

    fn state(&self) -> &RunState<T, BehaviorPolicy<T>> {
        &self.state
    }

    fn step(&mut self) -> Result<()> {
        if self.state.is_done() {
            return Ok(());
        }
        let started = Instant::now();
        let mut counters = self.state.counters;
        // Player one's restricted loop trains a player-two response and vice versa.
        let (pi1, beta2, s1) = self.inner(Player::One, &mut counters)?;
        let (pi2, beta1, s2) = self.inner(Player::Two, &mut counters)?;
        self.state.counters = counters;
        self.last_states = vec![s1, s2];
        let dists = [pi1, pi2];
        let (values, exploitability, _) = evaluate_profile(self.game, &self.state.populations, &dists, None)?;
        let outcome = Outcome {
            distributions: dists,
            values,
            exploitability,
            responses: [Some(beta1), Some(beta2)],
            gap_reached: false,
            tolerate_stale: matches!(self.config.learner, BrLearner::QLearning(_)),
        };
        self.state.commit(outcome, started);
        Ok(())
    }

    fn checkpoint(&self, config_hash: &str) -> Checkpoint<T, BehaviorPolicy<T>> {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config_hash: config_hash.into(),
            state: self.state.clone(),
            regret_states: self.last_states.clone(),
            q_tables: if self.config.warm_start { self.learners.iter().flatten().cloned().collect() } else { Vec::new() },
            rng: vec![RngCursor::capture(&self.regret_rng), RngCursor::capture(&self.q_rng)],
            empirical_payoffs: None,
        }
    }
}

pub fn run_apsro<T: Scalar>(
    game: &GameTree<T>,
    init_pops: [Vec<BehaviorPolicy<T>>; 2],
    outer_iters: usize,
    config: ApsroConfig,
    regret_rng: Rng,
    q_rng: Rng,
) -> Result<RunTrace<T, BehaviorPolicy<T>>> {
    ApsroRunner::new(game, init_pops, outer_iters, config, regret_rng, q_rng)?.run_to_end()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PsroConfig {
    /// Q-learning episodes per best response.
    pub q_episodes: u64,
    #[serde(default)]
    pub learner: BrLearner,
    #[serde(default = "exact_mode")]
    pub payoff_mode: PayoffMode,
    #[serde(default)]
    pub warm_start: bool,
}

fn exact_mode() -> PayoffMode {
    PayoffMode::Exact
}

/// PSRO with the restricted Nash equilibrium of the empirical payoff matrix
/// as meta-solver.
pub struct PsroRunner<'g, T: Scalar> {
    game: &'g GameTree<T>,
    config: PsroConfig,
    sim_rng: Rng,
    q_rng: Rng,
    learners: [Option<QLearner<T>>; 2],
    table: EmpiricalPayoffs<T>,
    state: RunState<T, BehaviorPolicy<T>>,
}

impl<'g, T: Scalar> PsroRunner<'g, T> {
    pub fn new(
        game: &'g GameTree<T>,
        init_pops: [Vec<BehaviorPolicy<T>>; 2],
        outer_iters: usize,
        config: PsroConfig,
        sim_rng: Rng,
        q_rng: Rng,
    ) -> Result<Self> {
        Ok(Self {
            game,
            config,
            sim_rng,
            q_rng,
            learners: [None, None],
            table: EmpiricalPayoffs::new(),
            state: RunState::new(Algorithm::PsroTabular, init_pops, outer_iters)?,
        })
    }

    pub fn resume(
        game: &'g GameTree<T>,
        config: PsroConfig,
        checkpoint: Checkpoint<T, BehaviorPolicy<T>>,
        config_hash: &str,
    ) -> Result<Self> {
        checkpoint.expect(Algorithm::PsroTabular, config_hash)?;
        let (sim_rng, q_rng) = cursor_pair(checkpoint.rng)?;
        let table = match checkpoint.empirical_payoffs {
            Some(rows) => EmpiricalPayoffs::from_rows(rows)?,
            None => EmpiricalPayoffs::new(),
        };
        Ok(Self {
            game,
            config,
            sim_rng,
            q_rng,
            learners: stored_learners(checkpoint.q_tables)?,
            table,
            state: checkpoint.state,
        })
    }

    fn respond(&mut self, responder: Player, opponent: &BehaviorPolicy<T>, counters: &mut super::Counters) -> Result<BehaviorPolicy<T>> {
        let game = self.game;
        match fresh_learner(game, responder, self.config.learner, &mut self.learners, self.config.warm_start)? {
            Some(mut q) => {
                qlearner_train(&mut q, game, |_: &mut Rng| opponent, self.config.q_episodes, &mut self.q_rng)?;
                counters.q_episodes += self.config.q_episodes;
                let policy = q.greedy_policy(game)?;
                self.learners[responder.index()] = Some(q);
                Ok(policy)
            }
            None => {
                counters.br_calls += 1;
                Ok(best_response_tree(game, opponent, responder)?.0)
            }
        }
    }
}

impl<T: Scalar> MetaSolver<T> for PsroRunner<'_, T> {
    type Strategy = BehaviorPolicy<T>;

    fn state(&self) -> &RunState<T, BehaviorPolicy<T>> {
        &self.state
    }

    fn step(&mut self) -> Result<()> {
        if self.state.is_done() {
            return Ok(());
        }
        let started = Instant::now();
        let game = self.game;
        let [pop1, pop2] = &self.state.populations;
        self.table.extend(game, pop1, pop2, self.config.payoff_mode, &mut self.sim_rng)?;
        let matrix: MatrixGame<T> = self.table.matrix()?;
        let ne = solve_matrix_nash(&matrix, T::lit(crate::solvers::DEFAULT_NASH_TOL))?;
        let merged1 = merge_population(game, pop1, &ne.row_strategy)?;
        let merged2 = merge_population(game, pop2, &ne.col_strategy)?;
        let dists = [ne.row_strategy.into_weights(), ne.col_strategy.into_weights()];
        let mut counters = self.state.counters;
        let beta1 = self.respond(Player::One, &merged2, &mut counters)?;
        let beta2 = self.respond(Player::Two, &merged1, &mut counters)?;
        self.state.counters = counters;
        let (_, exploitability, _) = evaluate_profile(game, &self.state.populations, &dists, None)?;
        let outcome = Outcome {
            distributions: dists,
            values: [ne.value, -ne.value],
            exploitability,
            responses: [Some(beta1), Some(beta2)],
            gap_reached: false,
            tolerate_stale: matches!(self.config.learner, BrLearner::QLearning(_)),
        };
        self.state.commit(outcome, started);
        Ok(())
    }

    fn checkpoint(&self, config_hash: &str) -> Checkpoint<T, BehaviorPolicy<T>> {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config_hash: config_hash.into(),
            state: self.state.clone(),
            regret_states: Vec::new(),
            q_tables: if self.config.warm_start { self.learners.iter().flatten().cloned().collect() } else { Vec::new() },
            rng: vec![RngCursor::capture(&self.sim_rng), RngCursor::capture(&self.q_rng)],
            empirical_payoffs: Some(self.table.rows().to_vec()),
        }
    }
}

pub fn run_psro_tabular<T: Scalar>(
    game: &GameTree<T>,
    init_pops: [Vec<BehaviorPolicy<T>>; 2],
    outer_iters: usize,
    config: PsroConfig,
    sim_rng: Rng,
    q_rng: Rng,
) -> Result<RunTrace<T, BehaviorPolicy<T>>> {
    PsroRunner::new(game, init_pops, outer_iters, config, sim_rng, q_rng)?.run_to_end()
}
