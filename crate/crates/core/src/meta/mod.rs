//! Population meta-algorithms: DO, ADO, RM-BR DO, tabular PSRO and APSRO.
//!
//! Every algorithm runs the same outer loop. Iteration `t` computes the
//! restricted distributions for the current populations, records them with
//! their exact exploitability, and then either stops or adds the novel best
//! responses. Iteration 0 is the initial population.

mod apsro;
mod oracle;
mod population;
mod rmbr;

use std::time::Instant;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Result};
use crate::regret::RegretState;
use crate::qlearn::QLearner;
use crate::rng::RngCursor;
use crate::scalar::Scalar;

pub use apsro::{run_apsro, run_psro_tabular, ApsroConfig, ApsroRunner, BrLearner, PsroConfig, PsroRunner};
pub use oracle::{run_ado, run_do, AdoRunner, DoRunner};
pub use population::PopulationGame;
pub use rmbr::{new_regret_state, run_rmbr, run_rmbr_do, RegretConfig, RmbrConfig, RmbrDoConfig, RmbrDoRunner, RmbrOutcome};

pub const CHECKPOINT_FORMAT: &str = "psro-checkpoint/1";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Algorithm {
    Do,
    Ado,
    RmbrDo,
    PsroTabular,
    Apsro,
}

impl Algorithm {
    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Do => "do",
            Algorithm::Ado => "ado",
            Algorithm::RmbrDo => "rmbr_do",
            Algorithm::PsroTabular => "psro_tabular",
            Algorithm::Apsro => "apsro",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Neither player has a best response outside its population.
    NoNovelBestResponse,
    /// The restricted gap `-(g1 + g2)` fell to the configured epsilon.
    GapBelowEpsilon,
    MaxIterations,
}

/// Budget counters, cumulative over the run.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Counters {
    pub br_calls: u64,
    pub regret_updates: u64,
    pub q_episodes: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct IterationRecord<T> {
    pub iteration: usize,
    pub exploitability: T,
    pub restricted_value_p1: T,
    pub restricted_value_p2: T,
    pub pop_size_p1: usize,
    pub pop_size_p2: usize,
    pub br_calls: u64,
    pub regret_updates: u64,
    pub q_episodes: u64,
    pub wall_ms: u64,
    /// Reported weights over each population, in insertion order.
    pub distributions: [Vec<T>; 2],
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar, S: Serialize + DeserializeOwned")]
pub struct RunTrace<T, S> {
    pub algorithm: Algorithm,
    pub records: Vec<IterationRecord<T>>,
    pub populations: [Vec<S>; 2],
    pub termination: Termination,
}

impl<T: Scalar, S> RunTrace<T, S> {
    pub fn exploitabilities(&self) -> Vec<T> {
        self.records.iter().map(|r| r.exploitability).collect()
    }

    pub fn final_record(&self) -> &IterationRecord<T> {
        self.records.last().expect("a trace has at least iteration 0")
    }

    pub fn final_distributions(&self) -> &[Vec<T>; 2] {
        &self.final_record().distributions
    }
}

/// Progress of one run; everything needed to continue it is here or in the
/// runner's checkpoint extras.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar, S: Serialize + DeserializeOwned")]
pub struct RunState<T, S> {
    pub algorithm: Algorithm,
    /// Index of the next iteration to execute.
    pub iteration: usize,
    pub max_iterations: usize,
    pub populations: [Vec<S>; 2],
    pub records: Vec<IterationRecord<T>>,
    pub counters: Counters,
    pub termination: Option<Termination>,
    pub elapsed_ms: u64,
}

impl<T: Scalar, S: Clone + PartialEq> RunState<T, S> {
    pub(crate) fn new(algorithm: Algorithm, populations: [Vec<S>; 2], max_iterations: usize) -> Result<Self> {
        for pop in &populations {
            if pop.is_empty() {
                return arg("initial populations must be non-empty");
            }
            for (i, s) in pop.iter().enumerate() {
                if pop[..i].contains(s) {
                    return arg("initial populations must not contain duplicates");
                }
            }
        }
        Ok(Self {
            algorithm,
            iteration: 0,
            max_iterations,
            populations,
            records: Vec::new(),
            counters: Counters::default(),
            termination: None,
            elapsed_ms: 0,
        })
    }

    pub fn is_done(&self) -> bool {
        self.termination.is_some()
    }

    pub fn trace(&self) -> Result<RunTrace<T, S>> {
        let Some(termination) = self.termination else {
            return arg("run has not terminated");
        };
        Ok(RunTrace {
            algorithm: self.algorithm,
            records: self.records.clone(),
            populations: self.populations.clone(),
            termination,
        })
    }
}

/// What one iteration produced, before it is committed to the run state.
pub(crate) struct Outcome<T, S> {
    pub distributions: [Vec<T>; 2],
    pub values: [T; 2],
    pub exploitability: T,
    /// Best responses for each player; only those not yet in the population
    /// are added.
    pub responses: [Option<S>; 2],
    pub gap_reached: bool,
    /// Keep iterating when no response is novel (learned responses are noisy,
    /// so a stale iteration is not a fixed point).
    pub tolerate_stale: bool,
}

impl<T: Scalar, S: Clone + PartialEq> RunState<T, S> {
    pub(crate) fn commit(&mut self, outcome: Outcome<T, S>, started: Instant) {
        let wall_ms = self.elapsed_ms + started.elapsed().as_millis() as u64;
        self.records.push(IterationRecord {
            iteration: self.iteration,
            exploitability: outcome.exploitability,
            restricted_value_p1: outcome.values[0],
            restricted_value_p2: outcome.values[1],
            pop_size_p1: self.populations[0].len(),
            pop_size_p2: self.populations[1].len(),
            br_calls: self.counters.br_calls,
            regret_updates: self.counters.regret_updates,
            q_episodes: self.counters.q_episodes,
            wall_ms,
            distributions: outcome.distributions,
        });
        self.elapsed_ms = wall_ms;
        let novel: Vec<(usize, S)> = outcome
            .responses
            .into_iter()
            .enumerate()
            .filter_map(|(i, r)| r.filter(|s| !self.populations[i].contains(s)).map(|s| (i, s)))
            .collect();
        if novel.is_empty() && !outcome.tolerate_stale {
            self.termination = Some(Termination::NoNovelBestResponse);
        } else if outcome.gap_reached {
            self.termination = Some(Termination::GapBelowEpsilon);
        } else if self.iteration >= self.max_iterations {
            self.termination = Some(Termination::MaxIterations);
        } else {
            for (i, s) in novel {
                self.populations[i].push(s);
            }
            self.iteration += 1;
        }
    }
}

/// Serialized run in progress. `config_hash` identifies the configuration the
/// run was started with; resuming under a different hash is refused.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar, S: Serialize + DeserializeOwned", deny_unknown_fields)]
pub struct Checkpoint<T, S> {
    pub format: String,
    pub config_hash: String,
    pub state: RunState<T, S>,
    #[serde(default)]
    pub regret_states: Vec<RegretState<T>>,
    #[serde(default)]
    pub q_tables: Vec<QLearner<T>>,
    #[serde(default)]
    pub rng: Vec<RngCursor>,
    /// Empirical payoff table of tabular PSRO.
    #[serde(default)]
    pub empirical_payoffs: Option<Vec<Vec<T>>>,
}

impl<T: Scalar, S: Serialize + DeserializeOwned> Checkpoint<T, S> {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cp: Self = serde_json::from_str(text)?;
        if cp.format != CHECKPOINT_FORMAT {
            return arg(format!("unsupported checkpoint format {:?}", cp.format));
        }
        Ok(cp)
    }

    pub(crate) fn expect(&self, algorithm: Algorithm, config_hash: &str) -> Result<()> {
        if self.state.algorithm != algorithm {
            return arg(format!("checkpoint is for {}, not {}", self.state.algorithm.name(), algorithm.name()));
        }
        if self.config_hash != config_hash {
            return arg("checkpoint was written under a different configuration");
        }
        Ok(())
    }
}

/// Common driver interface for the runners.
pub trait MetaSolver<T: Scalar> {
    type Strategy: Clone + PartialEq + Serialize + DeserializeOwned;

    fn state(&self) -> &RunState<T, Self::Strategy>;

    /// Executes one outer iteration. Does nothing once the run has terminated.
    fn step(&mut self) -> Result<()>;

    fn checkpoint(&self, config_hash: &str) -> Checkpoint<T, Self::Strategy>;

    fn run_to_end(&mut self) -> Result<RunTrace<T, Self::Strategy>> {
        while !self.state().is_done() {
            self.step()?;
        }
        self.state().trace()
    }
}
