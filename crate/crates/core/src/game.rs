//! Normal-form games and mixed strategies.

use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::scalar::{from_usize, is_distribution, Scalar};

/// One of the two players. Player one is the row player / maximizer of the
/// stored payoffs; player two receives their negation.
/// Serialized as the integers 1 and 2.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "u8", try_from = "u8")]
pub enum Player {
    One,
    Two,
}

impl From<Player> for u8 {
    fn from(p: Player) -> u8 {
        p.index() as u8 + 1
    }
}

impl TryFrom<u8> for Player {
    type Error = Error;
    fn try_from(n: u8) -> Result<Self> {
        match n {
            1 => Ok(Player::One),
            2 => Ok(Player::Two),
            _ => arg(format!("player must be 1 or 2, got {n}")),
        }
    }
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn from_index(i: usize) -> Result<Self> {
        match i {
            0 => Ok(Player::One),
            1 => Ok(Player::Two),
            _ => arg(format!("player index {i} out of range")),
        }
    }

    pub fn opponent(self) -> Self {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    /// Converts a payoff to player one into this player's payoff.
    pub fn orient<T: Scalar>(self, payoff_to_p1: T) -> T {
        match self {
            Player::One => payoff_to_p1,
            Player::Two => -payoff_to_p1,
        }
    }
}

/// Which side of a matrix a strategy lives on.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Side {
    Row,
    Col,
}

impl Side {
    pub fn player(self) -> Player {
        match self {
            Side::Row => Player::One,
            Side::Col => Player::Two,
        }
    }

    pub fn of(player: Player) -> Self {
        match player {
            Player::One => Side::Row,
            Player::Two => Side::Col,
        }
    }
}

/// Zero-sum normal-form game. Entry `(r, c)` is the row player's payoff.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<Vec<T>>", into = "Vec<Vec<T>>", bound = "T: Scalar")]
pub struct MatrixGame<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> TryFrom<Vec<Vec<T>>> for MatrixGame<T> {
    type Error = Error;
    fn try_from(rows: Vec<Vec<T>>) -> Result<Self> {
        Self::new(rows)
    }
}

impl<T: Scalar> From<MatrixGame<T>> for Vec<Vec<T>> {
    fn from(game: MatrixGame<T>) -> Self {
        game.to_rows()
    }
}

impl<T: Scalar> MatrixGame<T> {
    pub fn new(rows: Vec<Vec<T>>) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, Vec::len);
        if n_rows == 0 || n_cols == 0 {
            return arg("payoff matrix must have at least one row and one column");
        }
        let mut data = Vec::with_capacity(n_rows * n_cols);
        for row in rows {
            if row.len() != n_cols {
                return Err(Error::Dimension { expected: n_cols, got: row.len() });
            }
            data.extend(row);
        }
        Self::from_flat(n_rows, n_cols, data)
    }

    /// Builds from row-major storage.
    pub fn from_flat(rows: usize, cols: usize, data: Vec<T>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return arg("payoff matrix must have at least one row and one column");
        }
        if data.len() != rows * cols {
            return Err(Error::Dimension { expected: rows * cols, got: data.len() });
        }
        if data.iter().any(|v| !v.is_finite()) {
            return arg("payoff entries must be finite");
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> T) -> Result<Self> {
        let data = (0..rows).flat_map(|r| (0..cols).map(move |c| (r, c))).map(|(r, c)| f(r, c));
        Self::from_flat(rows, cols, data.collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    /// Number of pure strategies available on `side`.
    pub fn actions(&self, side: Side) -> usize {
        match side {
            Side::Row => self.rows,
            Side::Col => self.cols,
        }
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> T {
        self.data[r * self.cols + c]
    }

    pub fn row(&self, r: usize) -> &[T] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        self.data.chunks(self.cols).map(<[T]>::to_vec).collect()
    }

    pub fn min_entry(&self) -> T {
        self.data.iter().copied().fold(T::infinity(), T::min)
    }

    pub fn max_entry(&self) -> T {
        self.data.iter().copied().fold(T::neg_infinity(), T::max)
    }

    /// Payoff range seen by `player`.
    pub fn payoff_bounds(&self, player: Player) -> (T, T) {
        match player {
            Player::One => (self.min_entry(), self.max_entry()),
            Player::Two => (-self.max_entry(), -self.min_entry()),
        }
    }

    /// Submatrix on the given row and column indices, in the given order.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Result<Self> {
        if let Some(&r) = rows.iter().find(|&&r| r >= self.rows) {
            return arg(format!("row index {r} out of range for {} rows", self.rows));
        }
        if let Some(&c) = cols.iter().find(|&&c| c >= self.cols) {
            return arg(format!("column index {c} out of range for {} columns", self.cols));
        }
        Self::from_fn(rows.len(), cols.len(), |i, j| self.get(rows[i], cols[j]))
    }

    /// The same game seen from the column player: `-Aᵀ`.
    pub fn negated_transpose(&self) -> Self {
        Self {
            rows: self.cols,
            cols: self.rows,
            data: (0..self.cols)
                .flat_map(|c| (0..self.rows).map(move |r| (r, c)))
                .map(|(r, c)| -self.get(r, c))
                .collect(),
        }
    }

    /// `A y`: the row player's payoff for each pure row against column mixture `y`.
    pub fn row_payoffs(&self, y: &[T]) -> Vec<T> {
        (0..self.rows)
            .map(|r| self.row(r).iter().zip(y).map(|(a, w)| *a * *w).sum())
            .collect()
    }

    /// `xᵀA`: the row player's payoff for each pure column against row mixture `x`.
    pub fn col_payoffs(&self, x: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        for (r, w) in x.iter().enumerate() {
            if *w == T::zero() {
                continue;
            }
            for (o, a) in out.iter_mut().zip(self.row(r)) {
                *o += *w * *a;
            }
        }
        out
    }
}

/// Probability vector over an ordered set of pure strategies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<T>", into = "Vec<T>", bound = "T: Scalar")]
pub struct MixedStrategy<T>(Vec<T>);

impl<T: Scalar> TryFrom<Vec<T>> for MixedStrategy<T> {
    type Error = Error;
    fn try_from(weights: Vec<T>) -> Result<Self> {
        Self::new(weights)
    }
}

impl<T: Scalar> From<MixedStrategy<T>> for Vec<T> {
    fn from(s: MixedStrategy<T>) -> Self {
        s.0
    }
}

impl<T: Scalar> MixedStrategy<T> {
    pub fn new(weights: Vec<T>) -> Result<Self> {
        if !is_distribution(&weights, T::slack(1e-12)) {
            return arg(format!("not a probability vector: {weights:?}"));
        }
        Ok(Self(weights))
    }

    /// Clamps tiny negative round-off to zero and renormalizes. Rejects anything
    /// that is not a distribution up to `tol`.
    pub fn normalized(weights: Vec<T>, tol: T) -> Result<Self> {
        if !is_distribution(&weights, tol) {
            return arg(format!("not a probability vector: {weights:?}"));
        }
        let clamped: Vec<T> = weights.into_iter().map(|w| w.max(T::zero())).collect();
        let total: T = clamped.iter().copied().sum();
        Ok(Self(clamped.into_iter().map(|w| w / total).collect()))
    }

    pub fn pure(n: usize, index: usize) -> Self {
        assert!(index < n, "pure strategy index {index} out of range {n}");
        let mut w = vec![T::zero(); n];
        w[index] = T::one();
        Self(w)
    }

    pub fn uniform(n: usize) -> Self {
        assert!(n > 0, "uniform strategy over an empty set");
        Self(vec![T::one() / from_usize::<T>(n); n])
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn weights(&self) -> &[T] {
        &self.0
    }

    pub fn into_weights(self) -> Vec<T> {
        self.0
    }

    /// Spreads weights over a larger index space: `slots[k]` receives `self[k]`.
    pub fn scatter(&self, size: usize, slots: &[usize]) -> Result<Self> {
        if slots.len() != self.len() {
            return Err(Error::Dimension { expected: self.len(), got: slots.len() });
        }
        let mut out = vec![T::zero(); size];
        for (w, &s) in self.0.iter().zip(slots) {
            if s >= size {
                return arg(format!("slot {s} out of range {size}"));
            }
            out[s] += *w;
        }
        Ok(Self(out))
    }

    /// Support indices (weight strictly above `tol`).
    pub fn support(&self, tol: T) -> Vec<usize> {
        (0..self.len()).filter(|&i| self.0[i] > tol).collect()
    }
}

/// Expected payoff to the row player, `xᵀ A y`.
pub fn evaluate_matrix<T: Scalar>(
    game: &MatrixGame<T>,
    x: &MixedStrategy<T>,
    y: &MixedStrategy<T>,
) -> Result<T> {
    if x.len() != game.rows() {
        return Err(Error::Dimension { expected: game.rows(), got: x.len() });
    }
    if y.len() != game.cols() {
        return Err(Error::Dimension { expected: game.cols(), got: y.len() });
    }
    Ok(game
        .col_payoffs(x.weights())
        .iter()
        .zip(y.weights())
        .map(|(v, w)| *v * *w)
        .sum())
}
