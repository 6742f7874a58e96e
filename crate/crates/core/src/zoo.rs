//! Games used by the experiments: seeded random matrix games, the double
//! oracle bad cases, Kuhn poker and Leduc poker.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::game::{MatrixGame, Player};
use crate::rng::{seeded, Purpose};
use crate::scalar::{from_usize, Scalar};
use crate::tree::{GameTree, NodeId, TreeBuilder};

/// `rows x cols` matrix with i.i.d. Uniform[0, 1) entries for the row player,
/// drawn row-major from the `GameGeneration` ChaCha8 stream of `seed`.
pub fn random_matrix_game<T: Scalar>(rows: usize, cols: usize, seed: u64) -> Result<MatrixGame<T>> {
    if rows == 0 || cols == 0 {
        return arg("random game dimensions must be positive");
    }
    let mut rng = seeded(seed, Purpose::GameGeneration);
    let below_one = T::one() - T::epsilon();
    let data = (0..rows * cols).map(|_| T::lit(rng.gen::<f64>()).min(below_one)).collect();
    MatrixGame::from_flat(rows, cols, data)
}

/// How the off-diagonal bad-case value is read.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BadCaseVariant {
    /// `sum_{i=0..r} (2^i + 2i)`
    Summed,
    /// `(sum_{i=0..r} 2^i) + 2r`
    Split,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BadCaseSpec {
    pub n: usize,
    pub variant: BadCaseVariant,
}

impl BadCaseSpec {
    pub fn new(n: usize, variant: BadCaseVariant) -> Result<Self> {
        if n < 2 {
            return arg(format!("bad case needs at least 2 actions, got {n}"));
        }
        Ok(Self { n, variant })
    }

    /// Off-diagonal value for index `k`; `sign` is +1 below the diagonal and -1
    /// above it (the powers of two are negated).
    fn value(&self, k: usize, sign: f64) -> f64 {
        let pow = |i: usize| sign * 2f64.powi(i as i32);
        match self.variant {
            BadCaseVariant::Summed => (0..=k).map(|i| pow(i) + 2.0 * i as f64).sum(),
            BadCaseVariant::Split => (0..=k).map(pow).sum::<f64>() + 2.0 * k as f64,
        }
    }
}

/// All entries zero except directly below the diagonal (row = col + 1, value
/// with positive powers) and directly above it (col = row + 1, negated powers).
pub fn do_bad_case<T: Scalar>(spec: BadCaseSpec) -> Result<MatrixGame<T>> {
    BadCaseSpec::new(spec.n, spec.variant)?;
    MatrixGame::from_fn(spec.n, spec.n, |r, c| {
        if r == c + 1 {
            T::lit(spec.value(r, 1.0))
        } else if c == r + 1 {
            T::lit(spec.value(c, -1.0))
        } else {
            T::zero()
        }
    })
}

/// The three-action game where double oracle's exploitability goes 2 -> 4 -> 0.
pub fn fig1_bad_case<T: Scalar>() -> MatrixGame<T> {
    let rows = [[0.0, -1.0, 0.0], [1.0, 0.0, -2.0], [0.0, 2.0, 0.0]];
    MatrixGame::new(rows.iter().map(|r| r.iter().map(|v| T::lit(*v)).collect()).collect())
        .expect("fixed matrix is valid")
}

const RANKS: [&str; 3] = ["J", "Q", "K"];

/// Kuhn poker: three cards, ante 1, one bet of 1. Player one acts first.
pub fn kuhn_poker<T: Scalar>() -> GameTree<T> {
    let mut b = TreeBuilder::new();
    let mut deals = Vec::new();
    let sixth = T::one() / from_usize::<T>(6);
    for c1 in 0..3 {
        for c2 in (0..3).filter(|&c| c != c1) {
            let showdown = |stake: f64| T::lit(if c1 > c2 { stake } else { -stake });
            let (l1, l2) = (RANKS[c1], RANKS[c2]);
            let actions = ["p", "b"];
            // p p: showdown for 1. p b p: player one folds. p b b: showdown for 2.
            let pp = b.terminal(showdown(1.0));
            let pbp = b.terminal(T::lit(-1.0));
            let pbb = b.terminal(showdown(2.0));
            let pb = b.decision(Player::One, &format!("{l1}:pb"), &actions, vec![pbp, pbb]).unwrap();
            let p = b.decision(Player::Two, &format!("{l2}:p"), &actions, vec![pp, pb]).unwrap();
            // b p: player two folds. b b: showdown for 2.
            let bp = b.terminal(T::one());
            let bb = b.terminal(showdown(2.0));
            let bet = b.decision(Player::Two, &format!("{l2}:b"), &actions, vec![bp, bb]).unwrap();
            let root = b.decision(Player::One, &format!("{l1}:"), &actions, vec![p, bet]).unwrap();
            deals.push((sixth, root));
        }
    }
    let root = b.chance(deals);
    b.build(root).expect("kuhn tree is well formed")
}

/// Betting state within one Leduc round.
#[derive(Clone)]
struct Round {
    contrib: [u32; 2],
    bet: u32,
    raises: u32,
    to_act: usize,
    actions_taken: usize,
}

struct Leduc<'a, T: Scalar> {
    b: &'a mut TreeBuilder<T>,
}

impl<T: Scalar> Leduc<'_, T> {
    fn showdown(cards: [usize; 2], public: usize, contrib: [u32; 2]) -> T {
        let strength = |c: usize| if c / 2 == public / 2 { 10 } else { c / 2 };
        let (s1, s2) = (strength(cards[0]), strength(cards[1]));
        let pot = contrib[0] as f64;
        T::lit(match s1.cmp(&s2) {
            std::cmp::Ordering::Greater => pot,
            std::cmp::Ordering::Less => -pot,
            std::cmp::Ordering::Equal => 0.0,
        })
    }

    fn label(player: usize, cards: [usize; 2], public: Option<usize>, history: &str) -> String {
        match public {
            None => format!("{}|{}", RANKS[cards[player] / 2], history),
            Some(p) => format!("{}|{}|{}", RANKS[cards[player] / 2], RANKS[p / 2], history),
        }
    }

    /// Builds the subtree for a betting round. `history` is the public action
    /// string so far (round one, then `/` and round two).
    fn betting(&mut self, cards: [usize; 2], public: Option<usize>, round: Round, history: String) -> NodeId {
        let me = round.to_act;
        let facing = round.contrib[me] < round.contrib[1 - me];
        let mut labels: Vec<&str> = Vec::new();
        let mut children = Vec::new();
        if facing {
            labels.push("f");
            // Folding forfeits the folder's contribution.
            let payoff = if me == 0 { -(round.contrib[0] as f64) } else { round.contrib[1] as f64 };
            children.push(self.b.terminal(T::lit(payoff)));
        }
        labels.push("c");
        {
            let mut next = round.clone();
            next.contrib[me] = next.contrib[1 - me];
            next.actions_taken += 1;
            next.to_act = 1 - me;
            let h = format!("{history}c");
            let child = if next.actions_taken >= 2 {
                match public {
                    None => self.deal_public(cards, next.contrib, h),
                    Some(p) => self.b.terminal(Self::showdown(cards, p, next.contrib)),
                }
            } else {
                self.betting(cards, public, next, h)
            };
            children.push(child);
        }
        if round.raises < 2 {
            labels.push("r");
            let mut next = round.clone();
            next.contrib[me] = next.contrib[1 - me] + round.bet;
            next.raises += 1;
            next.actions_taken += 1;
            next.to_act = 1 - me;
            children.push(self.betting(cards, public, next, format!("{history}r")));
        }
        let player = if me == 0 { Player::One } else { Player::Two };
        let label = Self::label(me, cards, public, &history);
        self.b.decision(player, &label, &labels, children).expect("consistent leduc infosets")
    }

    fn deal_public(&mut self, cards: [usize; 2], contrib: [u32; 2], history: String) -> NodeId {
        let remaining: Vec<usize> = (0..6).filter(|c| !cards.contains(c)).collect();
        let p = T::one() / from_usize::<T>(remaining.len());
        let outcomes = remaining
            .into_iter()
            .map(|public| {
                let round = Round { contrib, bet: 4, raises: 0, to_act: 0, actions_taken: 0 };
                (p, self.betting(cards, Some(public), round, format!("{history}/")))
            })
            .collect();
        self.b.chance(outcomes)
    }
}

/// Leduc hold'em: six cards (three ranks, two suits), ante 1, two betting
/// rounds with fixed raise sizes 2 and 4 and at most two raises per round.
/// A public card is revealed between the rounds; pairing it wins, otherwise the
/// higher private rank wins. Infosets identify cards by rank.
pub fn leduc_poker<T: Scalar>() -> GameTree<T> {
    let mut b = TreeBuilder::new();
    let mut first = Vec::new();
    {
        let mut leduc = Leduc { b: &mut b };
        for c1 in 0..6 {
            let mut second = Vec::new();
            for c2 in (0..6).filter(|&c| c != c1) {
                let round = Round { contrib: [1, 1], bet: 2, raises: 0, to_act: 0, actions_taken: 0 };
                let node = leduc.betting([c1, c2], None, round, String::new());
                second.push((T::one() / from_usize::<T>(5), node));
            }
            let node = leduc.b.chance(second);
            first.push((T::one() / from_usize::<T>(6), node));
        }
    }
    let root = b.chance(first);
    b.build(root).expect("leduc tree is well formed")
}
