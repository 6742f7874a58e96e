use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::game::Player;
use crate::regret::{exp3_gamma_schedule, normalize_reward, RegretRule, RegretState, DEFAULT_MWU_ETA};
use crate::rng::{Rng, RngCursor};
use crate::scalar::Scalar;

use super::{Algorithm, Checkpoint, MetaSolver, Outcome, PopulationGame, RunState, RunTrace, CHECKPOINT_FORMAT};

/// Which no-regret learner the restricted player runs and its rates. Unset
/// rates take the defaults: MWU `eta = 0.1`; Exp3 `gamma` from the schedule
/// with the planned update count and `eta = gamma / k`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RegretConfig {
    pub rule: RegretRule,
    #[serde(default)]
    pub eta: Option<f64>,
    #[serde(default)]
    pub gamma: Option<f64>,
}

impl Default for RegretConfig {
    fn default() -> Self {
        Self { rule: RegretRule::Exp3, eta: None, gamma: None }
    }
}

/// Fresh learner over `k` arms for a loop of `n_total` planned updates.
pub fn new_regret_state<T: Scalar>(config: &RegretConfig, k: usize, n_total: u64) -> Result<RegretState<T>> {
    match config.rule {
        RegretRule::Mwu => RegretState::mwu(k, T::lit(config.eta.unwrap_or(DEFAULT_MWU_ETA))),
        RegretRule::Exp3 => {
            let gamma = match config.gamma {
                Some(g) => g,
                None if k >= 2 => exp3_gamma_schedule::<f64>(k, n_total.max(1))?,
                None => 0.0,
            };
            let eta = config.eta.unwrap_or(if gamma > 0.0 { gamma / k as f64 } else { 1.0 });
            RegretState::exp3(k, T::lit(eta), T::lit(gamma))
        }
    }
}

/// Oriented, normalized reward bounds for `player`.
pub(crate) fn player_bounds<T: Scalar>(bounds: (T, T), player: Player) -> (T, T) {
    match player {
        Player::One => bounds,
        Player::Two => (-bounds.1, -bounds.0),
    }
}

/// One regret update of `state` given each arm's normalized reward.
pub(crate) fn regret_step<T: Scalar>(state: &mut RegretState<T>, rewards: &[T], rng: &mut Rng) -> Result<()> {
    match state.rule() {
        RegretRule::Mwu => state.mwu_update(rewards),
        RegretRule::Exp3 => {
            let (arm, p) = state.sample(rng);
            state.exp3_update(arm, rewards[arm], p)
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmbrConfig {
    /// Regret updates per player.
    pub updates: u64,
    /// Regret updates between best-response recomputations.
    pub br_every: u64,
    #[serde(default)]
    pub regret: RegretConfig,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RmbrOutcome<T> {
    pub current: [Vec<T>; 2],
    /// Time average of the played distributions; equals `current` when no
    /// update ran.
    pub average: [Vec<T>; 2],
    pub states: [RegretState<T>; 2],
    pub br_calls: u64,
    pub regret_updates: u64,
}

/// Regret minimization against a best response, run independently for each
/// player's population against an unrestricted opponent.
pub fn run_rmbr<T: Scalar, G: PopulationGame<T>>(
    game: &G,
    pops: &[Vec<G::Strategy>; 2],
    config: &RmbrConfig,
    rng: &mut Rng,
) -> Result<RmbrOutcome<T>> {
    if config.br_every == 0 {
        return arg("br_every must be at least 1");
    }
    let bounds = game.payoff_bounds();
    let mut br_calls = 0;
    let mut run_player = |player: Player| -> Result<(Vec<T>, Vec<T>, RegretState<T>)> {
        let i = player.index();
        let (own, opp) = (&pops[i], &pops[1 - i]);
        let (lo, hi) = player_bounds(bounds, player);
        let mut state = new_regret_state::<T>(&config.regret, own.len(), config.updates)?;
        let mut rewards = Vec::new();
        for u in 0..config.updates {
            if u % config.br_every == 0 {
                let (beta, _) = game.best_response(player.opponent(), own, &state.distribution(), opp, None)?;
                br_calls += 1;
                rewards = game
                    .member_payoffs(player, own, &beta)?
                    .into_iter()
                    .map(|v| normalize_reward(v, lo, hi))
                    .collect();
            }
            regret_step(&mut state, &rewards, rng)?;
        }
        let current = state.distribution();
        let average = if config.updates > 0 { state.average_distribution()? } else { current.clone() };
        Ok((current, average, state))
    };
    let (c1, a1, s1) = run_player(Player::One)?;
    let (c2, a2, s2) = run_player(Player::Two)?;
    Ok(RmbrOutcome {
        current: [c1, c2],
        average: [a1, a2],
        states: [s1, s2],
        br_calls,
        regret_updates: 2 * config.updates,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RmbrDoConfig {
    pub inner: RmbrConfig,
    /// Stop once `-(g1 + g2)` is at most this.
    pub epsilon: f64,
    /// A best response outside the population within this
    /// much of the best value is preferred. Restricted distributions are only
    /// approximate, so exact ties of the restricted solution show up as near-ties.
    #[serde(default)]
    pub novelty_tol: f64,
}

/// Exact best responses to both reported distributions. Returns
/// `([g1, g2], exploitability, [beta1, beta2])` where `g_i` is player i's
/// payoff against its best-responding opponent.
pub(crate) fn evaluate_profile<T: Scalar, G: PopulationGame<T>>(
    game: &G,
    pops: &[Vec<G::Strategy>; 2],
    dists: &[Vec<T>; 2],
    novelty_tol: Option<T>,
) -> Result<([T; 2], T, [G::Strategy; 2])> {
    let (_, v1) = game.best_response(Player::One, &pops[1], &dists[1], &pops[0], None)?;
    let (_, v2) = game.best_response(Player::Two, &pops[0], &dists[0], &pops[1], None)?;
    let (beta1, _) = game.best_response(Player::One, &pops[1], &dists[1], &pops[0], novelty_tol)?;
    let (beta2, _) = game.best_response(Player::Two, &pops[0], &dists[0], &pops[1], novelty_tol)?;
    Ok(([-v2, -v1], v1 + v2, [beta1, beta2]))
}

/// RM-BR DO: ADO with each restricted distribution found by [`run_rmbr`].
pub struct RmbrDoRunner<'g, T: Scalar, G: PopulationGame<T>> {
    game: &'g G,
    config: RmbrDoConfig,
    rng: Rng,
    state: RunState<T, G::Strategy>,
    last_states: Vec<RegretState<T>>,
}

impl<'g, T: Scalar, G: PopulationGame<T>> RmbrDoRunner<'g, T, G> {
    pub fn new(game: &'g G, init_pops: [Vec<G::Strategy>; 2], outer_iters: usize, config: RmbrDoConfig, rng: Rng) -> Result<Self> {
        Ok(Self {
            game,
            config,
            rng,
            state: RunState::new(Algorithm::RmbrDo, init_pops, outer_iters)?,
            last_states: Vec::new(),
        })
    }

    pub fn resume(game: &'g G, config: RmbrDoConfig, checkpoint: Checkpoint<T, G::Strategy>, config_hash: &str) -> Result<Self> {
        checkpoint.expect(Algorithm::RmbrDo, config_hash)?;
        let [cursor] = <[RngCursor; 1]>::try_from(checkpoint.rng).map_err(|_| crate::Error::Argument("checkpoint needs one rng cursor".into()))?;
        Ok(Self {
            game,
            config,
            rng: cursor.restore()?,
            state: checkpoint.state,
            last_states: checkpoint.regret_states,
        })
    }
}

impl<T: Scalar, G: PopulationGame<T>> MetaSolver<T> for RmbrDoRunner<'_, T, G> {
    type Strategy = G::Strategy;

    fn state(&self) -> &RunState<T, G::Strategy> {
        &self.state
    }

    fn step(&mut self) -> Result<()> {
        if self.state.is_done() {
            return Ok(());
        }
        let started = Instant::now();
        let inner = run_rmbr(self.game, &self.state.populations, &self.config.inner, &mut self.rng)?;
        self.state.counters.br_calls += inner.br_calls + 2;
        self.state.counters.regret_updates += inner.regret_updates;
        let (values, exploitability, responses) = evaluate_profile(
            self.game,
            &self.state.populations,
            &inner.average,
            (self.config.novelty_tol > 0.0).then(|| T::lit(self.config.novelty_tol)),
        )?;
        let gap = -(values[0] + values[1]);
        self.last_states = inner.states.to_vec();
        let [beta1, beta2] = responses;
        let outcome = Outcome {
            distributions: inner.average,
            values,
            exploitability,
            responses: [Some(beta1), Some(beta2)],
            gap_reached: gap <= T::lit(self.config.epsilon),
            tolerate_stale: false,
        };
        self.state.commit(outcome, started);
        Ok(())
    }

    fn checkpoint(&self, config_hash: &str) -> Checkpoint<T, G::Strategy> {
        Checkpoint {
            format: CHECKPOINT_FORMAT.into(),
            config_hash: config_hash.into(),
            state: self.state.clone(),
            regret_states: self.last_states.clone(),
            q_tables: Vec::new(),
            rng: vec![RngCursor::capture(&self.rng)],
            empirical_payoffs: None,
        }
    }
}

pub fn run_rmbr_do<T: Scalar, G: PopulationGame<T>>(
    game: &G,
    init_pops: [Vec<G::Strategy>; 2],
    outer_iters: usize,
    config: RmbrDoConfig,
    rng: Rng,
) -> Result<RunTrace<T, G::Strategy>> {
    RmbrDoRunner::new(game, init_pops, outer_iters, config, rng)?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::MatrixGame;
    use crate::meta::run_ado;
    use crate::rng::{seeded, Purpose};
    use crate::zoo::fig1_bad_case;

    fn mwu(updates: u64, br_every: u64) -> RmbrConfig {
        RmbrConfig { updates, br_every, regret: RegretConfig { rule: RegretRule::Mwu, eta: Some(0.1), gamma: None } }
    }

    #[test]
    fn singleton_population_stays_put() {
        let g: MatrixGame<f64> = fig1_bad_case();
        let mut rng = seeded(0, Purpose::RegretSampling);
        for rule in [RegretRule::Mwu, RegretRule::Exp3] {
            let cfg = RmbrConfig { updates: 500, br_every: 7, regret: RegretConfig { rule, eta: None, gamma: None } };
            let out = run_rmbr(&g, &[vec![1], vec![2]], &cfg, &mut rng).unwrap();
            assert_eq!(out.average, [vec![1.0], vec![1.0]]);
            assert_eq!(out.br_calls, 2 * 72);
        }
    }

    #[test]
    fn zero_updates_report_uniform() {
        let g: MatrixGame<f64> = fig1_bad_case();
        let mut rng = seeded(0, Purpose::RegretSampling);
        let out = run_rmbr(&g, &[vec![0, 1], vec![0, 1, 2]], &mwu(0, 1), &mut rng).unwrap();
        assert_eq!(out.average[0], vec![0.5, 0.5]);
        assert_eq!(out.br_calls, 0);
    }

    #[test]
    fn default_exp3_rates_follow_the_schedule() {
        let s: RegretState<f64> = new_regret_state(&RegretConfig::default(), 4, 1000).unwrap();
        let gamma: f64 = exp3_gamma_schedule(4, 1000).unwrap();
        assert_eq!(s.gamma(), gamma);
        assert_eq!(s.eta(), gamma / 4.0);
        let single: RegretState<f64> = new_regret_state(&RegretConfig::default(), 1, 1000).unwrap();
        assert_eq!(single.distribution(), vec![1.0]);
    }

    #[test]
    fn fig1_tracks_ado() {
        let g: MatrixGame<f64> = fig1_bad_case();
        let ado = run_ado(&g, [vec![0], vec![0]], 10, 1e-9).unwrap();
        let cfg = RmbrDoConfig { inner: mwu(20_000, 1), epsilon: 1e-3, novelty_tol: 0.01 };
        let r = run_rmbr_do(&g, [vec![0], vec![0]], 10, cfg, seeded(0, Purpose::RegretSampling)).unwrap();
        let (a, b) = (ado.exploitabilities(), r.exploitabilities());
        assert_eq!(a.len(), b.len(), "{a:?} vs {b:?}");
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).abs() < 0.05, "{a:?} vs {b:?}");
        }
    }

    #[test]
    fn rejects_zero_cadence() {
        let g: MatrixGame<f64> = fig1_bad_case();
        let mut rng = seeded(0, Purpose::RegretSampling);
        assert!(run_rmbr(&g, &[vec![0], vec![0]], &mwu(10, 0), &mut rng).is_err());
    }
}
