//! Dense tableau simplex for the linear program behind a zero-sum matrix game.
//!
//! With the payoffs shifted to be strictly positive (`B = A - min(A) + 1`), the
//! column player's program is
//!
//! ```text
//! maximize 1ᵀu  subject to  B u <= 1,  u >= 0
//! ```
//!
//! whose optimum is `1 / value(B)`. The slack basis is feasible at the start,
//! the program is bounded because `B > 0`, and the row player's strategy is
//! read off the duals of the slack columns.

use crate::error::{Error, Result};
use crate::game::MatrixGame;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PivotRule {
    /// Most positive reduced cost; switches to Bland after a run of
    /// degenerate pivots.
    Dantzig,
    /// Lowest-index entering and leaving variables. Never cycles.
    Bland,
}

/// Primal/dual solution of the shifted program, already scaled back.
pub(crate) struct LpSolution<T> {
    pub row: Vec<T>,
    pub col: Vec<T>,
    pub value: T,
}

struct Tableau<T> {
    m: usize,
    width: usize,
    /// `m` constraint rows of `width` entries followed by the objective row.
    /// The last entry of each row is the right-hand side.
    cells: Vec<T>,
    basis: Vec<usize>,
}

impl<T: Scalar> Tableau<T> {
    fn new(b: &MatrixGame<T>) -> Self {
        let (m, n) = (b.rows(), b.cols());
        let width = n + m + 1;
        let mut cells = vec![T::zero(); (m + 1) * width];
        for i in 0..m {
            let row = &mut cells[i * width..(i + 1) * width];
            row[..n].copy_from_slice(b.row(i));
            row[n + i] = T::one();
            row[width - 1] = T::one();
        }
        // Objective row holds reduced costs c_j - z_j; RHS holds -objective.
        for j in 0..n {
            cells[m * width + j] = T::one();
        }
        Self { m, width, cells, basis: (n..n + m).collect() }
    }

    #[inline]
    fn at(&self, i: usize, j: usize) -> T {
        self.cells[i * self.width + j]
    }

    fn pivot(&mut self, r: usize, c: usize) {
        let w = self.width;
        let p = self.at(r, c);
        for j in 0..w {
            self.cells[r * w + j] /= p;
        }
        let (before, rest) = self.cells.split_at_mut(r * w);
        let (pivot_row, after) = rest.split_at_mut(w);
        let eliminate = |row: &mut [T]| {
            let f = row[c];
            if f != T::zero() {
                for (x, y) in row.iter_mut().zip(pivot_row.iter()) {
                    *x -= f * *y;
                }
                row[c] = T::zero();
            }
        };
        before.chunks_mut(w).for_each(eliminate);
        after.chunks_mut(w).for_each(eliminate);
        self.basis[r] = c;
    }

    fn solve(&mut self, rule: PivotRule, tol: T) -> Result<()> {
        let m = self.m;
        let cols = self.width - 1;
        let max_pivots = 50 * (m + cols) + 1000;
        let mut degenerate_run = 0usize;
        for _ in 0..max_pivots {
            let bland = rule == PivotRule::Bland || degenerate_run > 2 * (m + cols);
            let entering = if bland {
                (0..cols).find(|&j| self.at(m, j) > tol)
            } else {
                (0..cols)
                    .filter(|&j| self.at(m, j) > tol)
                    .max_by(|&a, &b| self.at(m, a).partial_cmp(&self.at(m, b)).unwrap().then(b.cmp(&a)))
            };
            let Some(c) = entering else {
                return Ok(());
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..m {
                let a = self.at(i, c);
                if a <= tol {
                    continue;
                }
                let ratio = self.at(i, cols) / a;
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((r, best)) => {
                        let slack = tol * (T::one() + best.abs());
                        if ratio < best - slack {
                            Some((i, ratio))
                        } else if ratio <= best + slack {
                            // Tie: Bland takes the lowest basic index, otherwise
                            // prefer the larger pivot element for stability.
                            let better = if bland {
                                self.basis[i] < self.basis[r]
                            } else {
                                a > self.at(r, c)
                            };
                            if better { Some((i, ratio)) } else { Some((r, best)) }
                        } else {
                            Some((r, best))
                        }
                    }
                };
            }
            let Some((r, ratio)) = leave else {
                return Err(Error::Solver("linear program is unbounded".into()));
            };
            if ratio <= tol {
                degenerate_run += 1;
            } else {
                degenerate_run = 0;
            }
            self.pivot(r, c);
        }
        Err(Error::Solver(format!("simplex did not terminate within {max_pivots} pivots")))
    }
}

/// Solves the zero-sum game `game` for both players' optimal strategies.
pub(crate) fn solve_zero_sum<T: Scalar>(game: &MatrixGame<T>, rule: PivotRule) -> Result<LpSolution<T>> {
    let shift = T::one() - game.min_entry();
    let shifted = MatrixGame::from_fn(game.rows(), game.cols(), |r, c| game.get(r, c) + shift)?;
    let scale = T::one() + shifted.max_entry();
    let tol = T::epsilon() * T::lit(1e3) * scale;
    let mut tab = Tableau::new(&shifted);
    tab.solve(rule, tol)?;

    let (m, n) = (game.rows(), game.cols());
    let rhs = tab.width - 1;
    let mut col = vec![T::zero(); n];
    for (i, &b) in tab.basis.iter().enumerate() {
        if b < n {
            col[b] = tab.at(i, rhs).max(T::zero());
        }
    }
    let row: Vec<T> = (0..m).map(|i| (-tab.at(m, n + i)).max(T::zero())).collect();
    let sum_col: T = col.iter().copied().sum();
    let sum_row: T = row.iter().copied().sum();
    if !(sum_col > T::zero() && sum_row > T::zero()) {
        return Err(Error::Solver("degenerate simplex solution".into()));
    }
    let shifted_value = T::one() / sum_col;
    Ok(LpSolution {
        row: row.into_iter().map(|x| x / sum_row).collect(),
        col: col.into_iter().map(|y| y / sum_col).collect(),
        value: shifted_value - shift,
    })
}
