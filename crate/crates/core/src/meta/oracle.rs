use std::time::Instant;

use crate::error::Result;
use crate::game::{MatrixGame, MixedStrategy, Side};
use crate::scalar::Scalar;
use crate::solvers::{best_response_matrix_within, restricted_ado, restricted_do, solve_matrix_nash};

use super::{Algorithm, Checkpoint, MetaSolver, Outcome, RunState, RunTrace, CHECKPOINT_FORMAT};

fn best_responses<T: Scalar>(
    game: &MatrixGame<T>,
    pops: &[Vec<usize>; 2],
    x: &[T],
    y: &[T],
    tol: T,
) -> Result<(T, [Option<usize>; 2])> {
    let x = MixedStrategy::new(x.to_vec())?.scatter(game.rows(), &pops[0])?;
    let y = MixedStrategy::new(y.to_vec())?.scatter(game.cols(), &pops[1])?;
    let br1 = best_response_matrix_within(game, &y, Side::Row, &pops[0], Some(tol))?;
    let br2 = best_response_matrix_within(game, &x, Side::Col, &pops[1], Some(tol))?;
    Ok((br1.value + br2.value, [Some(br1.index), Some(br2.index)]))
}

/// Double oracle on a matrix game.
pub struct DoRunner<'g, T: Scalar> {
    game: &'g MatrixGame<T>,
    tol: T,
    state: RunState<T, usize>,
}

impl<'g, T: Scalar> DoRunner<'g, T> {
    pub fn new(game: &'g MatrixGame<T>, init_pops: [Vec<usize>; 2], max_iters: usize, tol: T) -> Result<Self> {
        Ok(Self { game, tol, state: RunState::new(Algorithm::Do, init_pops, max_iters)? })
    }

    pub fn resume(game: &'g MatrixGame<T>, tol: T, checkpoint: Checkpoint<T, usize>, config_hash: &str) -> Result<Self> {
        checkpoint.expect(Algorithm::Do, config_hash)?;
        Ok(Self { game, tol, state: checkpoint.state })
    }
}

impl<T: Scalar> MetaSolver<T> for DoRunner<'_, T> {
    type Strategy = usize;

    fn state(&self) -> &RunState<T, usize> {
        &self.state
    }

    fn step(&mut self) -> Result<()> {
        if self.state.is_done() {
            return Ok(());
        }
        let started = Instant::now();
        let pops = &self.state.populations;
        let restricted = restricted_do(self.game, &pops[0], &pops[1])?;
        let ne = solve_matrix_nash(&restricted.matrix, self.tol)?;
        let (x, y) = (ne.row_strategy.into_weights(), ne.col_strategy.into_weights());
        let (exploitability, responses) = best_responses(self.game, pops, &x, &y, self.tol)?;
        self.state.counters.br_calls += 2;
        let outcome = Outcome {
            distributions: [x, y],
            values: [ne.value, -ne.value],
            exploitability,
            responses,
            gap_reached: false,
            tolerate_stale: false,
        };
        self.state.commit(outcome, started);
        Ok(())
    }

    fn checkpoint(&self, config_hash: &str) -> Checkpoint<T, usize> {
        plain_checkpoint(&self.state, config_hash)
    }
}

/// Anytime double oracle: each player's distribution is the least exploitable
/// mixture of its population against an unrestricted opponent.
pub struct AdoRunner<'g, T: Scalar> {
    game: &'g MatrixGame<T>,
    tol: T,
    state: RunState<T, usize>,
}

impl<'g, T: Scalar> AdoRunner<'g, T> {
    pub fn new(game: &'g MatrixGame<T>, init_pops: [Vec<usize>; 2], max_iters: usize, tol: T) -> Result<Self> {
        Ok(Self { game, tol, state: RunState::new(Algorithm::Ado, init_pops, max_iters)? })
    }

    pub fn resume(game: &'g MatrixGame<T>, tol: T, checkpoint: Checkpoint<T, usize>, config_hash: &str) -> Result<Self> {
        checkpoint.expect(Algorithm::Ado, config_hash)?;
        Ok(Self { game, tol, state: checkpoint.state })
    }
}

impl<T: Scalar> MetaSolver<T> for AdoRunner<'_, T> {
    type Strategy = usize;

    fn state(&self) -> &RunState<T, usize> {
        &self.state
    }

    fn step(&mut self) -> Result<()> {
        if self.state.is_done() {
            return Ok(());
        }
        let started = Instant::now();
        let pops = &self.state.populations;
        let s1 = solve_matrix_nash(&restricted_ado(self.game, &pops[0], Side::Row)?.matrix, self.tol)?;
        let s2 = solve_matrix_nash(&restricted_ado(self.game, &pops[1], Side::Col)?.matrix, self.tol)?;
        let (x, y) = (s1.row_strategy.into_weights(), s2.row_strategy.into_weights());
        let (exploitability, responses) = best_responses(self.game, pops, &x, &y, self.tol)?;
        self.state.counters.br_calls += 2;
        let outcome = Outcome {
            distributions: [x, y],
            values: [s1.value, s2.value],
            exploitability,
            responses,
            gap_reached: false,
            tolerate_stale: false,
        };
        self.state.commit(outcome, started);
        Ok(())
    }

    fn checkpoint(&self, config_hash: &str) -> Checkpoint<T, usize> {
        plain_checkpoint(&self.state, config_hash)
    }
}

fn plain_checkpoint<T: Scalar>(state: &RunState<T, usize>, config_hash: &str) -> Checkpoint<T, usize> {
    Checkpoint {
        format: CHECKPOINT_FORMAT.into(),
        config_hash: config_hash.into(),
        state: state.clone(),
        regret_states: Vec::new(),
        q_tables: Vec::new(),
        rng: Vec::new(),
        empirical_payoffs: None,
    }
}

/// Runs double oracle to termination. `max_iters` bounds the iteration index.
pub fn run_do<T: Scalar>(game: &MatrixGame<T>, init_pops: [Vec<usize>; 2], max_iters: usize, tol: T) -> Result<RunTrace<T, usize>> {
    DoRunner::new(game, init_pops, max_iters, tol)?.run_to_end()
}

/// Runs anytime double oracle to termination.
pub fn run_ado<T: Scalar>(game: &MatrixGame<T>, init_pops: [Vec<usize>; 2], max_iters: usize, tol: T) -> Result<RunTrace<T, usize>> {
    AdoRunner::new(game, init_pops, max_iters, tol)?.run_to_end()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::meta::Termination;
    use crate::zoo::fig1_bad_case;

    fn close(a: &[f64], b: &[f64]) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-9)
    }

    #[test]
    fn fig1_traces() {
        let g: MatrixGame<f64> = fig1_bad_case();
        let d = run_do(&g, [vec![0], vec![0]], 100, 1e-9).unwrap();
        assert!(close(&d.exploitabilities(), &[2.0, 4.0, 0.0]), "{:?}", d.exploitabilities());
        assert_eq!(d.termination, Termination::NoNovelBestResponse);
        let a = run_ado(&g, [vec![0], vec![0]], 100, 1e-9).unwrap();
        assert!(close(&a.exploitabilities(), &[2.0, 4.0 / 3.0, 0.0]), "{:?}", a.exploitabilities());
        assert!(close(&a.records[1].distributions[0], &[2.0 / 3.0, 1.0 / 3.0]));
        assert_eq!(a.records[0].pop_size_p1, 1);
        assert_eq!(a.records[2].br_calls, 6);
    }

    #[test]
    fn stops_at_iteration_cap() {
        let g: MatrixGame<f64> = fig1_bad_case();
        let d = run_do(&g, [vec![0], vec![0]], 1, 1e-9).unwrap();
        assert_eq!(d.records.len(), 2);
        assert_eq!(d.termination, Termination::MaxIterations);
        assert_eq!(d.populations[0].len(), 2);
    }

    #[test]
    fn support_in_initial_population_terminates_at_once() {
        let g: MatrixGame<f64> = fig1_bad_case();
        let d = run_do(&g, [vec![0, 1, 2], vec![0, 1, 2]], 10, 1e-9).unwrap();
        assert_eq!(d.records.len(), 1);
        assert!(d.records[0].exploitability <= 1e-9);
    }

    #[test]
    fn rejects_bad_populations() {
        let g: MatrixGame<f64> = fig1_bad_case();
        assert!(run_do(&g, [vec![], vec![0]], 10, 1e-9).is_err());
        assert!(run_ado(&g, [vec![1, 1], vec![0]], 10, 1e-9).is_err());
        assert!(run_ado(&g, [vec![5], vec![0]], 10, 1e-9).is_err());
    }
}
