use std::io::Write;
use std::path::{Path, PathBuf};

use psro_core::game::Player;
use psro_core::meta::{
    AdoRunner, Algorithm, ApsroConfig, ApsroRunner, BrLearner, Checkpoint, DoRunner, IterationRecord, MetaSolver, PsroConfig,
    PsroRunner, RmbrConfig, RmbrDoConfig, RmbrDoRunner, Termination,
};
use psro_core::rng::{SeedStream, Purpose};
use psro_core::solvers::{empirical_payoff_matrix, PayoffMode};
use psro_core::tree::{reduced_normal_form, BehaviorPolicy, GameTree, DEFAULT_STRATEGY_CAP};
use psro_core::MatrixGame;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{ExperimentConfig, Game, LearnerKind};
use crate::error::{HarnessError, Result};

pub const CSV_HEADER: [&str; 10] = [
    "iteration",
    "exploitability",
    "restricted_value_p1",
    "restricted_value_p2",
    "pop_size_p1",
    "pop_size_p2",
    "br_calls",
    "regret_updates",
    "q_episodes",
    "wall_ms",
];

/// One CSV row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub exploitability: f64,
    pub restricted_value_p1: f64,
    pub restricted_value_p2: f64,
    pub pop_size_p1: usize,
    pub pop_size_p2: usize,
    pub br_calls: u64,
    pub regret_updates: u64,
    pub q_episodes: u64,
    pub wall_ms: u64,
}

impl TraceRow {
    fn from_record(r: &IterationRecord<f64>, wall: bool) -> Self {
        Self {
            iteration: r.iteration,
            exploitability: r.exploitability,
            restricted_value_p1: r.restricted_value_p1,
            restricted_value_p2: r.restricted_value_p2,
            pop_size_p1: r.pop_size_p1,
            pop_size_p2: r.pop_size_p2,
            br_calls: r.br_calls,
            regret_updates: r.regret_updates,
            q_episodes: r.q_episodes,
            wall_ms: if wall { r.wall_ms } else { 0 },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedSummary {
    pub seed: u64,
    pub iterations: usize,
    pub final_exploitability: f64,
    pub termination: Termination,
    pub trace: String,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Quartiles {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl Quartiles {
    /// Linear interpolation between order statistics. `None` for no values.
    pub fn of(values: &[f64]) -> Option<Self> {
        let mut v = values.to_vec();
        if v.is_empty() {
            return None;
        }
        v.sort_by(f64::total_cmp);
        let at = |q: f64| {
            let pos = q * (v.len() - 1) as f64;
            let lo = pos.floor() as usize;
            let hi = pos.ceil() as usize;
            v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
        };
        Some(Self { min: v[0], q1: at(0.25), median: at(0.5), q3: at(0.75), max: v[v.len() - 1] })
    }
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Contents of `summary.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub seeds: Vec<SeedSummary>,
    pub final_exploitability: Quartiles,
}

pub fn trace_file_name(algorithm: Algorithm, seed: u64) -> String {
    format!("{}_seed{}.csv", algorithm.name(), seed)
}

fn checkpoint_path(dir: &Path, algorithm: Algorithm, seed: u64) -> PathBuf {
    dir.join("checkpoints").join(format!("{}_seed{}.json", algorithm.name(), seed))
}

/// Writes `bytes` to `path` through a temporary file in the same directory.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).map_err(|e| HarnessError::io(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| HarnessError::io(dir, e))?;
    tmp.write_all(bytes).map_err(|e| HarnessError::io(path, e))?;
    tmp.persist(path).map_err(|e| HarnessError::io(path, e.error))?;
    Ok(())
}

pub fn csv_bytes(rows: &[TraceRow]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    if rows.is_empty() {
        w.write_record(CSV_HEADER)?;
    }
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| HarnessError::io(Path::new("<csv>"), e.into_error()))
}

pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>> {
    let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
        csv::ErrorKind::Io(io) => HarnessError::io(path, io),
        kind => HarnessError::Argument(format!("{}: {kind:?}", path.display())),
    })?;
    let header: Vec<String> = r.headers()?.iter().map(str::to_owned).collect();
    if header != CSV_HEADER {
        return Err(HarnessError::Argument(format!("{}: unexpected columns {header:?}", path.display())));
    }
    r.deserialize().map(|row| row.map_err(HarnessError::from)).collect()
}

struct SeedCtx<'a> {
    config: &'a ExperimentConfig,
    out: &'a Path,
    seed: u64,
    hash: String,
}

impl SeedCtx<'_> {
    fn stream(&self) -> SeedStream {
        SeedStream::new(0, self.seed)
    }

    fn trace_path(&self) -> PathBuf {
        self.out.join(trace_file_name(self.config.algorithm, self.seed))
    }

    fn flush(&self, records: &[IterationRecord<f64>]) -> Result<()> {
        let rows: Vec<TraceRow> = records.iter().map(|r| TraceRow::from_record(r, self.config.record_wall_time)).collect();
        write_atomic(&self.trace_path(), &csv_bytes(&rows)?)
    }

    /// Runs to completion, resuming from and saving checkpoints when enabled.
    /// The trace is written even if the run fails part way.
    fn drive<R, N, M>(&self, fresh: N, resume: M) -> Result<SeedSummary>
    where
        R: MetaSolver<f64>,
        N: FnOnce() -> psro_core::Result<R>,
        M: FnOnce(Checkpoint<f64, R::Strategy>, &str) -> psro_core::Result<R>,
    {
        let cp_path = checkpoint_path(self.out, self.config.algorithm, self.seed);
        let mut runner = if self.config.checkpoint && cp_path.exists() {
            let text = std::fs::read_to_string(&cp_path).map_err(|e| HarnessError::io(&cp_path, e))?;
            resume(Checkpoint::from_json(&text)?, &self.hash)?
        } else {
            fresh()?
        };
        while !runner.state().is_done() {
            if let Err(e) = runner.step() {
                self.flush(&runner.state().records)?;
                return Err(e.into());
            }
            if self.config.checkpoint {
                write_atomic(&cp_path, runner.checkpoint(&self.hash).to_json()?.as_bytes())?;
            }
        }
        let state = runner.state();
        self.flush(&state.records)?;
        let last = state.records.last().expect("a finished run has records");
        Ok(SeedSummary {
            seed: self.seed,
            iterations: state.records.len(),
            final_exploitability: last.exploitability,
            termination: state.termination.expect("finished"),
            trace: trace_file_name(self.config.algorithm, self.seed),
        })
    }
}

fn first_policies(game: &GameTree<f64>) -> psro_core::Result<[Vec<BehaviorPolicy<f64>>; 2]> {
    let [a, b] = Player::BOTH.map(|p| BehaviorPolicy::deterministic(game, p, &vec![0; game.num_infosets(p)]));
    Ok([vec![a?], vec![b?]])
}

fn rnf_matrix(game: &GameTree<f64>, ctx: &SeedCtx) -> Result<MatrixGame> {
    let [s1, s2] = Player::BOTH.map(|p| reduced_normal_form(game, p, DEFAULT_STRATEGY_CAP));
    let mut rng = ctx.stream().rng(Purpose::Simulation, 0);
    Ok(empirical_payoff_matrix(game, &s1?, &s2?, PayoffMode::Exact, &mut rng)?)
}

fn run_matrix(game: &MatrixGame, ctx: &SeedCtx) -> Result<SeedSummary> {
    let c = ctx.config;
    let max_iters = c.outer_iterations - 1;
    let init = || [vec![0usize], vec![0usize]];
    match c.algorithm {
        Algorithm::Do => ctx.drive(
            || DoRunner::new(game, init(), max_iters, c.tolerance),
            |cp, h| DoRunner::resume(game, c.tolerance, cp, h),
        ),
        Algorithm::Ado => ctx.drive(
            || AdoRunner::new(game, init(), max_iters, c.tolerance),
            |cp, h| AdoRunner::resume(game, c.tolerance, cp, h),
        ),
        Algorithm::RmbrDo => {
            let cfg = rmbr_config(c);
            ctx.drive(
                || RmbrDoRunner::new(game, init(), max_iters, cfg, ctx.stream().rng(Purpose::RegretSampling, 0)),
                |cp, h| RmbrDoRunner::resume(game, cfg, cp, h),
            )
        }
        Algorithm::Apsro | Algorithm::PsroTabular => run_tree(&GameTree::from_matrix(game)?, ctx),
    }
}

fn run_tree(game: &GameTree<f64>, ctx: &SeedCtx) -> Result<SeedSummary> {
    let c = ctx.config;
    let max_iters = c.outer_iterations - 1;
    let s = ctx.stream();
    match c.algorithm {
        Algorithm::Do | Algorithm::Ado => run_matrix(&rnf_matrix(game, ctx)?, ctx),
        Algorithm::RmbrDo => {
            let cfg = rmbr_config(c);
            ctx.drive(
                || RmbrDoRunner::new(game, first_policies(game)?, max_iters, cfg, s.rng(Purpose::RegretSampling, 0)),
                |cp, h| RmbrDoRunner::resume(game, cfg, cp, h),
            )
        }
        Algorithm::Apsro => {
            let cfg = apsro_config(c);
            ctx.drive(
                || {
                    let pops = first_policies(game)?;
                    ApsroRunner::new(game, pops, max_iters, cfg, s.rng(Purpose::RegretSampling, 0), s.rng(Purpose::QLearning, 0))
                },
                |cp, h| ApsroRunner::resume(game, cfg, cp, h),
            )
        }
        Algorithm::PsroTabular => {
            let cfg = psro_config(c);
            ctx.drive(
                || {
                    let pops = first_policies(game)?;
                    PsroRunner::new(game, pops, max_iters, cfg, s.rng(Purpose::Simulation, 0), s.rng(Purpose::QLearning, 0))
                },
                |cp, h| PsroRunner::resume(game, cfg, cp, h),
            )
        }
    }
}

fn learner(c: &ExperimentConfig) -> BrLearner {
    match c.learner {
        Some(LearnerKind::Exact) => BrLearner::Exact,
        _ => BrLearner::QLearning(c.q_learning.unwrap_or_default()),
    }
}

pub fn rmbr_config(c: &ExperimentConfig) -> RmbrDoConfig {
    let e = c.effective();
    RmbrDoConfig {
        inner: RmbrConfig { updates: e.regret_updates, br_every: e.br_every, regret: c.regret.unwrap_or_default() },
        epsilon: c.epsilon.unwrap_or(c.tolerance),
        novelty_tol: c.novelty_tol.unwrap_or(0.0),
    }
}

pub fn apsro_config(c: &ExperimentConfig) -> ApsroConfig {
    let e = c.effective();
    ApsroConfig {
        regret_updates: e.regret_updates,
        q_episodes: e.q_episodes,
        regret_batch: e.regret_batch,
        q_batch: e.q_batch,
        regret: c.regret.unwrap_or_default(),
        learner: learner(c),
        warm_start: c.warm_start.unwrap_or(false),
    }
}

pub fn psro_config(c: &ExperimentConfig) -> PsroConfig {
    PsroConfig {
        q_episodes: c.effective().q_episodes,
        learner: learner(c),
        payoff_mode: c.payoff_mode.unwrap_or(PayoffMode::Exact),
        warm_start: c.warm_start.unwrap_or(false),
    }
}

/// Runs one seed and writes its trace into `out`.
pub fn run_seed(config: &ExperimentConfig, seed: u64, out: &Path) -> Result<SeedSummary> {
    let ctx = SeedCtx { config, out, seed, hash: config.run_hash(seed) };
    match config.game.build(seed)? {
        Game::Matrix(m) => run_matrix(&m, &ctx),
        Game::Tree(t) => run_tree(&t, &ctx),
    }
}

/// Runs every seed in parallel, then writes `summary.json`. The first error
/// is returned after all seeds have finished and flushed their traces.
pub fn run_experiment(config: &ExperimentConfig, out: &Path) -> Result<Summary> {
    config.validate()?;
    std::fs::create_dir_all(out).map_err(|e| HarnessError::io(out, e))?;
    let results: Vec<Result<SeedSummary>> = config.seeds.par_iter().map(|&seed| run_seed(config, seed, out)).collect();
    let seeds = results.into_iter().collect::<Result<Vec<_>>>()?;
    let finals: Vec<f64> = seeds.iter().map(|s| s.final_exploitability).collect();
    let summary = Summary {
        config: config.clone(),
        final_exploitability: Quartiles::of(&finals).expect("seeds are non-empty"),
        seeds,
    };
    write_atomic(&out.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(summary)
}

pub fn read_summary(dir: &Path) -> Result<Summary> {
    let path = dir.join(SUMMARY_FILE);
    let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
    serde_json::from_str(&text).map_err(|e| HarnessError::Argument(format!("{}: {e}", path.display())))
}
