use std::collections::HashSet;
use std::path::{Path, PathBuf};

use psro_core::game::MatrixGame;
use psro_core::meta::{new_regret_state, Algorithm, RegretConfig};
use psro_core::qlearn::QConfig;
use psro_core::solvers::PayoffMode;
use psro_core::tree::GameTree;
use psro_core::zoo::{do_bad_case, fig1_bad_case, kuhn_poker, leduc_poker, random_matrix_game, BadCaseSpec, BadCaseVariant};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{config_err, HarnessError, Result};

/// Which game to play. `random_nfg` without a seed draws a fresh game for
/// every run seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawGameSpec", into = "RawGameSpec")]
pub enum GameSpec {
    RandomNfg { rows: usize, cols: usize, seed: Option<u64> },
    BadCase { n: usize, variant: BadCaseVariant },
    Fig1,
    Kuhn,
    Leduc,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
enum GameKind {
    RandomNfg,
    BadCase,
    Fig1,
    Kuhn,
    Leduc,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGameSpec {
    kind: GameKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rows: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    cols: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    variant: Option<BadCaseVariant>,
}

impl TryFrom<RawGameSpec> for GameSpec {
    type Error = String;

    fn try_from(r: RawGameSpec) -> std::result::Result<Self, String> {
        let extra = |allowed: &[&str]| {
            let set = [
                ("rows", r.rows.is_some()),
                ("cols", r.cols.is_some()),
                ("seed", r.seed.is_some()),
                ("n", r.n.is_some()),
                ("variant", r.variant.is_some()),
            ];
            match set.iter().find(|(k, on)| *on && !allowed.contains(k)) {
                Some((k, _)) => Err(format!("field `{k}` does not apply to this game")),
                None => Ok(()),
            }
        };
        Ok(match r.kind {
            GameKind::RandomNfg => {
                extra(&["rows", "cols", "seed"])?;
                match (r.rows, r.cols) {
                    (Some(rows), Some(cols)) => GameSpec::RandomNfg { rows, cols, seed: r.seed },
                    _ => return Err("random_nfg needs rows and cols".into()),
                }
            }
            GameKind::BadCase => {
                extra(&["n", "variant"])?;
                let n = r.n.ok_or("bad_case needs n")?;
                GameSpec::BadCase { n, variant: r.variant.unwrap_or(BadCaseVariant::Summed) }
            }
            GameKind::Fig1 => extra(&[]).map(|_| GameSpec::Fig1)?,
            GameKind::Kuhn => extra(&[]).map(|_| GameSpec::Kuhn)?,
            GameKind::Leduc => extra(&[]).map(|_| GameSpec::Leduc)?,
        })
    }
}

impl From<GameSpec> for RawGameSpec {
    fn from(g: GameSpec) -> Self {
        let mut r = RawGameSpec { kind: GameKind::Fig1, rows: None, cols: None, seed: None, n: None, variant: None };
        match g {
            GameSpec::RandomNfg { rows, cols, seed } => {
                r.kind = GameKind::RandomNfg;
                (r.rows, r.cols, r.seed) = (Some(rows), Some(cols), seed);
            }
            GameSpec::BadCase { n, variant } => {
                r.kind = GameKind::BadCase;
                (r.n, r.variant) = (Some(n), Some(variant));
            }
            GameSpec::Fig1 => r.kind = GameKind::Fig1,
            GameSpec::Kuhn => r.kind = GameKind::Kuhn,
            GameSpec::Leduc => r.kind = GameKind::Leduc,
        }
        r
    }
}

pub enum Game {
    Matrix(MatrixGame<f64>),
    Tree(GameTree<f64>),
}

impl GameSpec {
    /// Parses either a JSON object or a bare kind name such as `kuhn`.
    pub fn parse(text: &str) -> Result<Self> {
        let text = text.trim();
        let spec: GameSpec = if text.starts_with('{') {
            serde_json::from_str(text).map_err(|e| HarnessError::Argument(format!("game spec: {e}")))?
        } else {
            serde_json::from_value(serde_json::json!({ "kind": text }))
                .map_err(|e| HarnessError::Argument(format!("game spec {text:?}: {e}")))?
        };
        spec.validate().map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Argument(m),
            e => e,
        })?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            GameSpec::RandomNfg { rows, cols, .. } if rows == 0 || cols == 0 => config_err("random_nfg needs positive dimensions"),
            GameSpec::BadCase { n, .. } if n < 2 => config_err("bad_case needs n >= 2"),
            _ => Ok(()),
        }
    }

    pub fn is_tree(&self) -> bool {
        matches!(self, GameSpec::Kuhn | GameSpec::Leduc)
    }

    pub fn build(&self, run_seed: u64) -> Result<Game> {
        Ok(match *self {
            GameSpec::RandomNfg { rows, cols, seed } => Game::Matrix(random_matrix_game(rows, cols, seed.unwrap_or(run_seed))?),
            GameSpec::BadCase { n, variant } => Game::Matrix(do_bad_case(BadCaseSpec::new(n, variant)?)?),
            GameSpec::Fig1 => Game::Matrix(fig1_bad_case()),
            GameSpec::Kuhn => Game::Tree(kuhn_poker()),
            GameSpec::Leduc => Game::Tree(leduc_poker()),
        })
    }
}

/// Budget overrides, all at full scale; `budget_scale` multiplies them.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budgets {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret_updates: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub br_every: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_episodes: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret_batch: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_batch: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerKind {
    QLearning,
    Exact,
}

pub const DEFAULT_BUDGET_SCALE: f64 = 0.1;
pub const DEFAULT_TOLERANCE: f64 = 1e-9;

pub const FULL_RMBR_UPDATES: u64 = 100_000;
pub const FULL_RMBR_BR_EVERY: u64 = 1_000;
pub const FULL_APSRO_UPDATES: u64 = 50_000;
pub const FULL_Q_EPISODES: u64 = 500_000;
pub const DEFAULT_REGRET_BATCH: u64 = 10;
pub const DEFAULT_Q_BATCH: u64 = 100;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub game: GameSpec,
    pub algorithm: Algorithm,
    pub seeds: Vec<u64>,
    /// Maximum number of recorded iterations, iteration 0 included.
    pub outer_iterations: usize,
    #[serde(default = "default_tolerance")]
    pub tolerance: f64,
    #[serde(default = "default_scale")]
    pub budget_scale: f64,
    #[serde(default)]
    pub budgets: Budgets,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub regret: Option<RegretConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q_learning: Option<QConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub learner: Option<LearnerKind>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payoff_mode: Option<PayoffMode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub warm_start: Option<bool>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub novelty_tol: Option<f64>,
    #[serde(default)]
    pub record_wall_time: bool,
    /// Write a checkpoint after every iteration and resume from it on re-run.
    #[serde(default)]
    pub checkpoint: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

fn default_tolerance() -> f64 {
    DEFAULT_TOLERANCE
}

fn default_scale() -> f64 {
    DEFAULT_BUDGET_SCALE
}

/// Budgets after scaling, as handed to the runners.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Effective {
    pub regret_updates: u64,
    pub br_every: u64,
    pub q_episodes: u64,
    pub regret_batch: u64,
    pub q_batch: u64,
}

fn scaled(full: u64, scale: f64) -> u64 {
    if full == 0 {
        0
    } else {
        ((full as f64 * scale).round() as u64).max(1)
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let config: Self = serde_json::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        self.game.validate()?;
        if self.seeds.is_empty() {
            return config_err("seeds must not be empty");
        }
        if self.seeds.iter().collect::<HashSet<_>>().len() != self.seeds.len() {
            return config_err("seeds must be distinct");
        }
        if self.outer_iterations == 0 {
            return config_err("outer_iterations must be at least 1");
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return config_err("tolerance must be positive");
        }
        if !(self.budget_scale > 0.0 && self.budget_scale.is_finite()) {
            return config_err("budget_scale must be positive");
        }
        let b = &self.budgets;
        let applicable: &[(&str, bool)] = &[
            ("budgets.regret_updates", b.regret_updates.is_some()),
            ("budgets.br_every", b.br_every.is_some()),
            ("budgets.q_episodes", b.q_episodes.is_some()),
            ("budgets.regret_batch", b.regret_batch.is_some()),
            ("budgets.q_batch", b.q_batch.is_some()),
            ("regret", self.regret.is_some()),
            ("q_learning", self.q_learning.is_some()),
            ("learner", self.learner.is_some()),
            ("payoff_mode", self.payoff_mode.is_some()),
            ("warm_start", self.warm_start.is_some()),
            ("epsilon", self.epsilon.is_some()),
            ("novelty_tol", self.novelty_tol.is_some()),
        ];
        let allowed: &[&str] = match self.algorithm {
            Algorithm::Do | Algorithm::Ado => &[],
            Algorithm::RmbrDo => &["budgets.regret_updates", "budgets.br_every", "regret", "epsilon", "novelty_tol"],
            Algorithm::Apsro => &[
                "budgets.regret_updates",
                "budgets.q_episodes",
                "budgets.regret_batch",
                "budgets.q_batch",
                "regret",
                "q_learning",
                "learner",
                "warm_start",
            ],
            Algorithm::PsroTabular => &["budgets.q_episodes", "q_learning", "learner", "payoff_mode", "warm_start"],
        };
        for (name, set) in applicable {
            if *set && !allowed.contains(name) {
                return config_err(format!("{name} does not apply to {}", self.algorithm.name()));
            }
        }
        if matches!(self.algorithm, Algorithm::Do | Algorithm::Ado) && self.game == GameSpec::Leduc {
            return config_err("do and ado need the reduced normal form, which is too large for leduc");
        }
        if b.br_every == Some(0) || b.regret_batch == Some(0) || b.q_batch == Some(0) {
            return config_err("br_every and batch sizes must be at least 1");
        }
        if let Some(r) = &self.regret {
            new_regret_state::<f64>(r, 2, 1).map_err(|e| HarnessError::Config(format!("regret: {e}")))?;
        }
        if self.learner == Some(LearnerKind::Exact) && self.q_learning.is_some() {
            return config_err("q_learning does not apply to the exact learner");
        }
        if let Some(q) = &self.q_learning {
            q.validate().map_err(|e| HarnessError::Config(format!("q_learning: {e}")))?;
        }
        if let Some(PayoffMode::Simulated { episodes: 0 }) = self.payoff_mode {
            return config_err("simulated payoff mode needs at least one episode");
        }
        for (name, v) in [("epsilon", self.epsilon), ("novelty_tol", self.novelty_tol)] {
            if let Some(v) = v {
                if !(v >= 0.0 && v.is_finite()) {
                    return config_err(format!("{name} must be non-negative"));
                }
            }
        }
        Ok(())
    }

    pub fn effective(&self) -> Effective {
        let b = &self.budgets;
        let s = self.budget_scale;
        let (updates, br_every) = match self.algorithm {
            Algorithm::Apsro => (FULL_APSRO_UPDATES, FULL_RMBR_BR_EVERY),
            _ => (FULL_RMBR_UPDATES, FULL_RMBR_BR_EVERY),
        };
        Effective {
            regret_updates: scaled(b.regret_updates.unwrap_or(updates), s),
            br_every: scaled(b.br_every.unwrap_or(br_every), s),
            q_episodes: scaled(b.q_episodes.unwrap_or(FULL_Q_EPISODES), s),
            regret_batch: b.regret_batch.unwrap_or(DEFAULT_REGRET_BATCH),
            q_batch: b.q_batch.unwrap_or(DEFAULT_Q_BATCH),
        }
    }

    /// Hash of everything that determines the traces of one seed.
    pub fn run_hash(&self, seed: u64) -> String {
        let mut c = self.clone();
        c.output_dir = None;
        c.record_wall_time = false;
        c.checkpoint = false;
        c.seeds = vec![seed];
        let text = serde_json::to_string(&c).expect("config serializes");
        hex::encode(&Sha256::digest(text.as_bytes())[..16])
    }
}
