use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::Result;
use crate::game::{MatrixGame, MixedStrategy, Player, Side};
use crate::scalar::Scalar;
use crate::solvers::{best_response_matrix_within, best_response_tree_within};
use crate::tree::{evaluate_tree, merge_population, BehaviorPolicy, GameTree};

/// A game whose pure strategies can be held in populations and answered with
/// exact best responses.
pub trait PopulationGame<T: Scalar>: Sync {
    type Strategy: Clone + PartialEq + std::fmt::Debug + Serialize + DeserializeOwned + Send + Sync;

    /// Range of player one's payoff.
    fn payoff_bounds(&self) -> (T, T);

    /// Player one's payoff when `s1` meets `s2`.
    fn payoff(&self, s1: &Self::Strategy, s2: &Self::Strategy) -> Result<T>;

    /// Exact best response of `responder` to the opponent mixture
    /// `weights` over `opponent_pop`. Where the game supports it, a strategy
    /// outside `own_pop` within `novelty_tol` of the best value is preferred.
    /// Returns the response and its exact payoff to the responder.
    fn best_response(
        &self,
        responder: Player,
        opponent_pop: &[Self::Strategy],
        weights: &[T],
        own_pop: &[Self::Strategy],
        novelty_tol: Option<T>,
    ) -> Result<(Self::Strategy, T)>;

    /// Payoff of each member of `pop` (owned by `owner`) against `opponent`,
    /// from the owner's point of view.
    fn member_payoffs(&self, owner: Player, pop: &[Self::Strategy], opponent: &Self::Strategy) -> Result<Vec<T>> {
        pop.iter()
            .map(|s| {
                let v = match owner {
                    Player::One => self.payoff(s, opponent)?,
                    Player::Two => self.payoff(opponent, s)?,
                };
                Ok(owner.orient(v))
            })
            .collect()
    }
}

impl<T: Scalar> PopulationGame<T> for MatrixGame<T> {
    type Strategy = usize;

    fn payoff_bounds(&self) -> (T, T) {
        MatrixGame::payoff_bounds(self, Player::One)
    }

    fn payoff(&self, s1: &usize, s2: &usize) -> Result<T> {
        Ok(self.get(*s1, *s2))
    }

    fn best_response(
        &self,
        responder: Player,
        opponent_pop: &[usize],
        weights: &[T],
        own_pop: &[usize],
        novelty_tol: Option<T>,
    ) -> Result<(usize, T)> {
        let side = Side::of(responder);
        let size = self.actions(match side {
            Side::Row => Side::Col,
            Side::Col => Side::Row,
        });
        let opp = MixedStrategy::new(weights.to_vec())?.scatter(size, opponent_pop)?;
        let br = best_response_matrix_within(self, &opp, side, own_pop, novelty_tol)?;
        Ok((br.index, br.value))
    }
}

impl<T: Scalar> PopulationGame<T> for GameTree<T> {
    type Strategy = BehaviorPolicy<T>;

    fn payoff_bounds(&self) -> (T, T) {
        GameTree::payoff_bounds(self, Player::One)
    }

    fn payoff(&self, s1: &BehaviorPolicy<T>, s2: &BehaviorPolicy<T>) -> Result<T> {
        evaluate_tree(self, s1, s2)
    }

    fn best_response(
        &self,
        responder: Player,
        opponent_pop: &[BehaviorPolicy<T>],
        weights: &[T],
        own_pop: &[BehaviorPolicy<T>],
        novelty_tol: Option<T>,
    ) -> Result<(BehaviorPolicy<T>, T)> {
        let opp = merge_population(self, opponent_pop, &MixedStrategy::new(weights.to_vec())?)?;
        best_response_tree_within(self, &opp, responder, own_pop, novelty_tol)
    }
}
