//! Population-based solvers for two-player zero-sum games: double oracle,
//! anytime double oracle, RM-BR DO, tabular PSRO and anytime PSRO, with the
//! matrix and game-tree machinery they run on.
//!
//! Everything numeric is generic over [`Scalar`] (`f64` or `f32`). The aliases
//! below fix the scalar for the common cases.

pub mod error;
pub mod game;
mod lp;
pub mod meta;
pub mod qlearn;
pub mod regret;
pub mod rng;
pub mod scalar;
pub mod solvers;
pub mod tree;
pub mod zoo;

pub use error::{Error, Result};
pub use game::{Player, Side};
pub use lp::PivotRule;
pub use scalar::Scalar;

pub type MatrixGame = game::MatrixGame<f64>;
pub type MixedStrategy = game::MixedStrategy<f64>;
pub type GameTree = tree::GameTree<f64>;
pub type BehaviorPolicy = tree::BehaviorPolicy<f64>;
pub type NashSolution = solvers::NashSolution<f64>;
pub type RegretState = regret::RegretState<f64>;
pub type QLearner = qlearn::QLearner<f64>;

pub type MatrixGame32 = game::MatrixGame<f32>;
pub type MixedStrategy32 = game::MixedStrategy<f32>;
pub type GameTree32 = tree::GameTree<f32>;
pub type BehaviorPolicy32 = tree::BehaviorPolicy<f32>;
pub type NashSolution32 = solvers::NashSolution<f32>;
pub type RegretState32 = regret::RegretState<f32>;
pub type QLearner32 = qlearn::QLearner<f32>;
