//! Exact oracles: matrix-game Nash equilibria, best responses in matrix and
//! tree games, exploitability, and the restricted games used by the double
//! oracle family.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::game::{MatrixGame, MixedStrategy, Player, Side};
use crate::lp::{solve_zero_sum, PivotRule};
use crate::scalar::Scalar;
use crate::tree::{evaluate_tree, merge_population, sample_playout, BehaviorPolicy, GameTree, Node, NodeId};

pub const DEFAULT_NASH_TOL: f64 = 1e-9;

/// Tie window for best-response argmax: `1e-12` relative to the best value,
/// widened to a few ulps for `f32`.
fn tie_window<T: Scalar>(best: T) -> T {
    T::slack(1e-12) * (T::one() + best.abs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NashSolution<T> {
    pub row_strategy: MixedStrategy<T>,
    pub col_strategy: MixedStrategy<T>,
    /// Game value to the row player.
    pub value: T,
}

/// How much each player could gain by deviating from `(x, y)`:
/// `(max_r (Ay)_r - xᵀAy, xᵀAy - min_c (xᵀA)_c)`.
pub fn deviation_gains<T: Scalar>(game: &MatrixGame<T>, x: &[T], y: &[T]) -> (T, T) {
    let ay = game.row_payoffs(y);
    let xa = game.col_payoffs(x);
    let v: T = xa.iter().zip(y).map(|(a, b)| *a * *b).sum();
    let best_row = ay.iter().copied().fold(T::neg_infinity(), T::max);
    let best_col = xa.iter().copied().fold(T::infinity(), T::min);
    (best_row - v, v - best_col)
}

/// Solves `max_x min_y xᵀAy` with the dense simplex. The returned pair is
/// checked to be a `tol`-equilibrium (each player's deviation gain at most
/// `tol * max(1, max|A|)`) before it is handed back.
pub fn solve_matrix_nash<T: Scalar>(game: &MatrixGame<T>, tol: T) -> Result<NashSolution<T>> {
    if !(tol > T::zero()) {
        return arg("tolerance must be positive");
    }
    let scale = T::one().max(game.max_entry().abs()).max(game.min_entry().abs());
    let mut last_gap = T::infinity();
    for rule in [PivotRule::Dantzig, PivotRule::Bland] {
        let sol = match solve_zero_sum(game, rule) {
            Ok(sol) => sol,
            Err(e) if rule == PivotRule::Dantzig => {
                let _ = e;
                continue;
            }
            Err(e) => return Err(e),
        };
        let (gain_row, gain_col) = deviation_gains(game, &sol.row, &sol.col);
        last_gap = gain_row.max(gain_col);
        if last_gap <= tol * scale {
            return Ok(NashSolution {
                row_strategy: MixedStrategy::normalized(sol.row, T::slack(1e-9))?,
                col_strategy: MixedStrategy::normalized(sol.col, T::slack(1e-9))?,
                value: sol.value,
            });
        }
    }
    Err(Error::Solver(format!("equilibrium certification failed: deviation gain {last_gap:?}")))
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BestResponse<T> {
    pub index: usize,
    /// Expected payoff to the responder.
    pub value: T,
    /// Every maximizer was in the avoid set.
    pub novelty_exhausted: bool,
}

impl<T: Scalar> BestResponse<T> {
    /// The same value expressed as the row player's payoff.
    pub fn row_value(&self, side: Side) -> T {
        side.player().orient(self.value)
    }
}

/// Pure best response for `side` against `opponent`. Among actions within the
/// tie window of the best value, the first one not in `avoid` wins; if all are
/// in `avoid`, the lowest index is returned with `novelty_exhausted` set.
pub fn best_response_matrix<T: Scalar>(
    game: &MatrixGame<T>,
    opponent: &MixedStrategy<T>,
    side: Side,
    avoid: &[usize],
) -> Result<BestResponse<T>> {
    best_response_matrix_within(game, opponent, side, avoid, None)
}

/// [`best_response_matrix`] with an explicit tie window.
pub fn best_response_matrix_within<T: Scalar>(
    game: &MatrixGame<T>,
    opponent: &MixedStrategy<T>,
    side: Side,
    avoid: &[usize],
    tie_tol: Option<T>,
) -> Result<BestResponse<T>> {
    let values: Vec<T> = match side {
        Side::Row => {
            if opponent.len() != game.cols() {
                return Err(Error::Dimension { expected: game.cols(), got: opponent.len() });
            }
            game.row_payoffs(opponent.weights())
        }
        Side::Col => {
            if opponent.len() != game.rows() {
                return Err(Error::Dimension { expected: game.rows(), got: opponent.len() });
            }
            game.col_payoffs(opponent.weights()).into_iter().map(|v| -v).collect()
        }
    };
    Ok(pick_best(&values, avoid, tie_tol))
}

fn pick_best<T: Scalar>(values: &[T], avoid: &[usize], tie_tol: Option<T>) -> BestResponse<T> {
    let best = values.iter().copied().fold(T::neg_infinity(), T::max);
    let window = tie_tol.unwrap_or_else(|| tie_window(best));
    let tied = || (0..values.len()).filter(|&i| values[i] >= best - window);
    let novel = tied().find(|i| !avoid.contains(i));
    let index = novel.unwrap_or_else(|| tied().next().expect("non-empty action set"));
    BestResponse { index, value: values[index], novelty_exhausted: novel.is_none() }
}

/// `max_r (Ay)_r - min_c (xᵀA)_c`: the sum of both best-response values.
pub fn exploitability_matrix<T: Scalar>(game: &MatrixGame<T>, x: &MixedStrategy<T>, y: &MixedStrategy<T>) -> Result<T> {
    let row = best_response_matrix(game, y, Side::Row, &[])?;
    let col = best_response_matrix(game, x, Side::Col, &[])?;
    Ok(row.value + col.value)
}

/// Exact best response of `responder` against `opponent` by one bottom-up pass.
///
/// Responder infosets are resolved deepest-first; each action is scored by the
/// sum over member histories of (chance x opponent reach) times the value of the
/// child under already-resolved deeper choices. Ties go to the lowest action.
/// Returns the pure policy and the responder's expected payoff.
pub fn best_response_tree<T: Scalar>(
    game: &GameTree<T>,
    opponent: &BehaviorPolicy<T>,
    responder: Player,
) -> Result<(BehaviorPolicy<T>, T)> {
    best_response_tree_within(game, opponent, responder, &[], None)
}

/// [`best_response_tree`] that avoids the policies in `avoid` where it can.
///
/// If the exact best response is in `avoid`, single action swaps at infosets
/// the response reaches are tried in order of value lost; the first one that
/// leaves `avoid` and loses at most the tie window is returned instead. The
/// value returned is that of the policy returned.
pub fn best_response_tree_within<T: Scalar>(
    game: &GameTree<T>,
    opponent: &BehaviorPolicy<T>,
    responder: Player,
    avoid: &[BehaviorPolicy<T>],
    tie_tol: Option<T>,
) -> Result<(BehaviorPolicy<T>, T)> {
    if opponent.owner() != responder.opponent() {
        return arg("best response needs the other player's policy");
    }
    let n = game.num_nodes();
    // Chance-and-opponent reach.
    let mut reach = vec![T::zero(); n];
    reach[game.root()] = T::one();
    for &id in game.preorder() {
        let r = reach[id];
        if r == T::zero() {
            continue;
        }
        match game.node(id) {
            Node::Terminal { .. } => {}
            Node::Chance { outcomes } => {
                for o in outcomes {
                    reach[o.child] = r * o.prob;
                }
            }
            Node::Decision { player, infoset, children } => {
                if *player == responder {
                    for &c in children {
                        reach[c] = r;
                    }
                } else {
                    let probs = opponent.action_probs(*infoset).ok_or_else(|| Error::PolicyDomain {
                        infoset: *infoset,
                        label: game.infoset(*player, *infoset).label.clone(),
                    })?;
                    for (p, &c) in probs.iter().zip(children) {
                        reach[c] = r * *p;
                    }
                }
            }
        }
    }

    struct Pass<'a, T> {
        game: &'a GameTree<T>,
        opponent: &'a BehaviorPolicy<T>,
        responder: Player,
        choice: Vec<Option<usize>>,
        memo: Vec<Option<T>>,
    }
    impl<T: Scalar> Pass<'_, T> {
        fn value(&mut self, id: NodeId) -> T {
            if let Some(v) = self.memo[id] {
                return v;
            }
            let v = match self.game.node(id) {
                Node::Terminal { payoff } => self.responder.orient(*payoff),
                Node::Chance { outcomes } => {
                    let mut v = T::zero();
                    for o in outcomes {
                        if o.prob > T::zero() {
                            v += o.prob * self.value(o.child);
                        }
                    }
                    v
                }
                Node::Decision { player, infoset, children } => {
                    if *player == self.responder {
                        let a = self.choice[*infoset].expect("deeper infosets are resolved first");
                        self.value(children[a])
                    } else {
                        // Reach was positive on the way here, so the entry exists.
                        let probs = self.opponent.action_probs(*infoset).expect("checked during reach pass");
                        let mut v = T::zero();
                        for (p, &c) in probs.iter().zip(children) {
                            if *p > T::zero() {
                                v += *p * self.value(c);
                            }
                        }
                        v
                    }
                }
            };
            self.memo[id] = Some(v);
            v
        }
    }

    let mut pass = Pass {
        game,
        opponent,
        responder,
        choice: vec![None; game.num_infosets(responder)],
        memo: vec![None; n],
    };
    let mut action_values = vec![Vec::new(); game.num_infosets(responder)];
    for &s in game.infosets_by_depth(responder).iter().rev() {
        let info = game.infoset(responder, s);
        let mut q = vec![T::zero(); info.num_actions()];
        for &h in &info.nodes {
            if reach[h] == T::zero() {
                continue;
            }
            let Node::Decision { children, .. } = game.node(h) else { unreachable!() };
            for (qa, &c) in q.iter_mut().zip(children) {
                *qa += reach[h] * pass.value(c);
            }
        }
        pass.choice[s] = Some(pick_best(&q, &[], None).index);
        action_values[s] = q;
    }
    let value = pass.value(game.root());
    let mut actions: Vec<usize> = pass.choice.into_iter().map(|c| c.unwrap_or(0)).collect();
    let policy = BehaviorPolicy::deterministic(game, responder, &actions)?;
    if !avoid.contains(&policy) {
        return Ok((policy, value));
    }

    // Infosets the response itself reaches with positive chance-and-opponent reach.
    let mut live = vec![false; n];
    let mut reached = vec![false; game.num_infosets(responder)];
    live[game.root()] = true;
    for &id in game.preorder() {
        if !live[id] {
            continue;
        }
        match game.node(id) {
            Node::Terminal { .. } => {}
            Node::Chance { outcomes } => {
                for o in outcomes.iter().filter(|o| o.prob > T::zero()) {
                    live[o.child] = true;
                }
            }
            Node::Decision { player, infoset, children } => {
                if *player == responder {
                    reached[*infoset] = true;
                    live[children[actions[*infoset]]] = true;
                } else {
                    for &c in children.iter().filter(|&&c| reach[c] > T::zero()) {
                        live[c] = true;
                    }
                }
            }
        }
    }
    let window = tie_tol.unwrap_or_else(|| tie_window(value));
    let mut swaps: Vec<(T, usize, usize)> = Vec::new();
    for (s, q) in action_values.iter().enumerate().filter(|&(s, _)| reached[s]) {
        let best = q[actions[s]];
        for (a, &qa) in q.iter().enumerate() {
            if a != actions[s] && best - qa <= window {
                swaps.push((best - qa, s, a));
            }
        }
    }
    swaps.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal).then((x.1, x.2).cmp(&(y.1, y.2))));
    for (loss, s, a) in swaps {
        let keep = actions[s];
        actions[s] = a;
        let alt = BehaviorPolicy::deterministic(game, responder, &actions)?;
        if !avoid.contains(&alt) {
            return Ok((alt, value - loss));
        }
        actions[s] = keep;
    }
    Ok((policy, value))
}

/// Sum of both players' best-response values against the profile.
pub fn exploitability_tree<T: Scalar>(game: &GameTree<T>, p1: &BehaviorPolicy<T>, p2: &BehaviorPolicy<T>) -> Result<T> {
    let (_, v1) = best_response_tree(game, p2, Player::One)?;
    let (_, v2) = best_response_tree(game, p1, Player::Two)?;
    Ok(v1 + v2)
}

/// Exploitability of two weighted populations, each merged into one behavior
/// policy first.
pub fn exploitability_populations<T: Scalar>(
    game: &GameTree<T>,
    pop1: &[BehaviorPolicy<T>],
    w1: &MixedStrategy<T>,
    pop2: &[BehaviorPolicy<T>],
    w2: &MixedStrategy<T>,
) -> Result<T> {
    let p1 = merge_population(game, pop1, w1)?;
    let p2 = merge_population(game, pop2, w2)?;
    exploitability_tree(game, &p1, &p2)
}

/// Where a restricted-game strategy comes from.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StrategyLabel {
    /// Population member `slot`, which is pure strategy `action` of the full game.
    Member { slot: usize, action: usize },
    /// Pure strategy `action` of the unrestricted player.
    Unrestricted { action: usize },
}

impl StrategyLabel {
    pub fn action(&self) -> usize {
        match *self {
            StrategyLabel::Member { action, .. } | StrategyLabel::Unrestricted { action } => action,
        }
    }
}

/// A matrix game whose rows and columns are labelled with their origin. The
/// row player of `matrix` is always the maximizer.
#[derive(Clone, Debug, PartialEq)]
pub struct RestrictedGame<T> {
    pub matrix: MatrixGame<T>,
    pub row_labels: Vec<StrategyLabel>,
    pub col_labels: Vec<StrategyLabel>,
}

fn members(pop: &[usize]) -> Vec<StrategyLabel> {
    pop.iter().enumerate().map(|(slot, &action)| StrategyLabel::Member { slot, action }).collect()
}

/// Both players restricted to their populations.
pub fn restricted_do<T: Scalar>(game: &MatrixGame<T>, pop_rows: &[usize], pop_cols: &[usize]) -> Result<RestrictedGame<T>> {
    if pop_rows.is_empty() || pop_cols.is_empty() {
        return arg("populations must be non-empty");
    }
    Ok(RestrictedGame {
        matrix: game.submatrix(pop_rows, pop_cols)?,
        row_labels: members(pop_rows),
        col_labels: members(pop_cols),
    })
}

/// Only the player on `side` is restricted; the opponent keeps every action.
/// The result is oriented with the restricted player as the row maximizer, so
/// for `Side::Col` the matrix is the restricted rows of `-Aᵀ`.
pub fn restricted_ado<T: Scalar>(game: &MatrixGame<T>, pop: &[usize], side: Side) -> Result<RestrictedGame<T>> {
    if pop.is_empty() {
        return arg("population must be non-empty");
    }
    let oriented;
    let base = match side {
        Side::Row => game,
        Side::Col => {
            oriented = game.negated_transpose();
            &oriented
        }
    };
    let all: Vec<usize> = (0..base.cols()).collect();
    Ok(RestrictedGame {
        matrix: base.submatrix(pop, &all)?,
        row_labels: members(pop),
        col_labels: all.into_iter().map(|action| StrategyLabel::Unrestricted { action }).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode")]
pub enum PayoffMode {
    /// Exact expected payoff by tree traversal.
    Exact,
    /// Mean of `episodes` sampled playouts.
    Simulated { episodes: usize },
}

/// Population-vs-population payoff table that grows with the populations.
/// Only entries for new rows or columns are evaluated on `extend`.
#[derive(Clone, Debug, Default)]
pub struct EmpiricalPayoffs<T> {
    entries: Vec<Vec<T>>,
    cols: usize,
}

impl<T: Scalar> EmpiricalPayoffs<T> {
    pub fn new() -> Self {
        Self { entries: Vec::new(), cols: 0 }
    }

    pub fn extend<R: Rng + ?Sized>(
        &mut self,
        game: &GameTree<T>,
        pop1: &[BehaviorPolicy<T>],
        pop2: &[BehaviorPolicy<T>],
        mode: PayoffMode,
        rng: &mut R,
    ) -> Result<()> {
        if pop1.len() < self.entries.len() || pop2.len() < self.cols {
            return arg("populations can only grow");
        }
        let entry = |a: &BehaviorPolicy<T>, b: &BehaviorPolicy<T>, rng: &mut R| -> Result<T> {
            match mode {
                PayoffMode::Exact => evaluate_tree(game, a, b),
                PayoffMode::Simulated { episodes } => {
                    if episodes == 0 {
                        return arg("simulated mode needs at least one episode");
                    }
                    let mut total = T::zero();
                    for _ in 0..episodes {
                        total += sample_playout(game, a, b, rng)?;
                    }
                    Ok(total / T::lit(episodes as f64))
                }
            }
        };
        for (k, row) in self.entries.iter_mut().enumerate() {
            for l in self.cols..pop2.len() {
                row.push(entry(&pop1[k], &pop2[l], rng)?);
            }
        }
        for a in &pop1[self.entries.len()..] {
            let row = pop2.iter().map(|b| entry(a, b, rng)).collect::<Result<Vec<T>>>()?;
            self.entries.push(row);
        }
        self.cols = pop2.len();
        Ok(())
    }

    pub fn matrix(&self) -> Result<MatrixGame<T>> {
        MatrixGame::new(self.entries.clone())
    }

    pub fn rows(&self) -> &[Vec<T>] {
        &self.entries
    }

    /// Rebuilds a table from previously stored rows.
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self> {
        let cols = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != cols) {
            return arg("ragged payoff table");
        }
        Ok(Self { entries: rows, cols })
    }
}

/// Builds the empirical payoff matrix from scratch.
pub fn empirical_payoff_matrix<T: Scalar, R: Rng + ?Sized>(
    game: &GameTree<T>,
    pop1: &[BehaviorPolicy<T>],
    pop2: &[BehaviorPolicy<T>],
    mode: PayoffMode,
    rng: &mut R,
) -> Result<MatrixGame<T>> {
    if pop1.is_empty() || pop2.is_empty() {
        return arg("populations must be non-empty");
    }
    let mut table = EmpiricalPayoffs::new();
    table.extend(game, pop1, pop2, mode, rng)?;
    table.matrix()
}
