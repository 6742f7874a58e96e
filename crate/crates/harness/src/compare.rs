use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::config::GameSpec;
use crate::error::{HarnessError, Result};
use crate::run::{read_summary, read_trace};

pub const DEFAULT_INCREASE_THRESHOLD: f64 = 0.05;

/// Exploitability curves of one algorithm, keyed by seed.
#[derive(Clone, Debug, PartialEq)]
pub struct RunSet {
    pub tag: String,
    pub game: GameSpec,
    pub curves: BTreeMap<u64, Vec<f64>>,
}

impl RunSet {
    /// Loads `summary.json` and every trace it lists from `dir`.
    pub fn load(dir: &Path) -> Result<Self> {
        let summary = read_summary(dir)?;
        let mut curves = BTreeMap::new();
        for s in &summary.seeds {
            let rows = read_trace(&dir.join(&s.trace))?;
            curves.insert(s.seed, rows.iter().map(|r| r.exploitability).collect());
        }
        Ok(Self { tag: summary.config.algorithm.name().to_owned(), game: summary.config.game, curves })
    }
}

/// Value at `t`, holding the last value once a run has stopped.
pub fn carried(curve: &[f64], t: usize) -> f64 {
    curve[t.min(curve.len() - 1)]
}

pub fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let n = values.len();
    if n % 2 == 1 {
        values[n / 2]
    } else {
        0.5 * (values[n / 2 - 1] + values[n / 2])
    }
}

/// Iterations whose exploitability rose by more than `threshold` over the
/// previous one.
pub fn increase_events(curve: &[f64], threshold: f64) -> usize {
    curve.windows(2).filter(|w| w[1] - w[0] > threshold).count()
}

/// Per-iteration median over the runs, each carried forward to `len`.
pub fn median_curve(curves: &BTreeMap<u64, Vec<f64>>, len: usize) -> Vec<f64> {
    (0..len)
        .map(|t| median(&mut curves.values().map(|c| carried(c, t)).collect::<Vec<_>>()))
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    CandidateBetter,
    BaselineBetter,
    Tie,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SideReport {
    pub tag: String,
    pub runs: usize,
    pub final_median: f64,
    pub increase_events: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub iteration: usize,
    pub baseline: f64,
    pub candidate: f64,
    pub difference: f64,
    /// Every run on both sides reached this iteration.
    pub shared: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub seed: u64,
    pub baseline_final: f64,
    pub candidate_final: f64,
    pub verdict: Verdict,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub game: GameSpec,
    pub increase_threshold: f64,
    pub baseline: SideReport,
    pub candidate: SideReport,
    /// Median curves; runs that stopped early hold their final value.
    pub curve: Vec<CurvePoint>,
    /// Seeds present on both sides.
    pub seeds: Vec<SeedOutcome>,
    pub candidate_wins: usize,
    pub baseline_wins: usize,
    pub ties: usize,
}

impl ComparisonReport {
    /// Whether the candidate median is at most the baseline median at every
    /// shared iteration.
    pub fn candidate_never_worse(&self) -> bool {
        self.curve.iter().filter(|p| p.shared).all(|p| p.candidate <= p.baseline)
    }
}

fn side(set: &RunSet, threshold: f64) -> SideReport {
    SideReport {
        tag: set.tag.clone(),
        runs: set.curves.len(),
        final_median: median(&mut set.curves.values().map(|c| c[c.len() - 1]).collect::<Vec<_>>()),
        increase_events: set.curves.values().map(|c| increase_events(c, threshold)).sum(),
    }
}

pub fn compare_sets(baseline: &RunSet, candidate: &RunSet, increase_threshold: f64) -> Result<ComparisonReport> {
    if baseline.game != candidate.game {
        return Err(HarnessError::Argument(format!(
            "traces are for different games: {:?} vs {:?}",
            baseline.game, candidate.game
        )));
    }
    for set in [baseline, candidate] {
        if set.curves.is_empty() || set.curves.values().any(Vec::is_empty) {
            return Err(HarnessError::Argument(format!("{}: no trace rows", set.tag)));
        }
    }
    let lens = || baseline.curves.values().chain(candidate.curves.values()).map(Vec::len);
    let (len, shared) = (lens().max().unwrap_or(0), lens().min().unwrap_or(0));
    let (b, c) = (median_curve(&baseline.curves, len), median_curve(&candidate.curves, len));
    let curve = (0..len)
        .map(|t| CurvePoint { iteration: t, baseline: b[t], candidate: c[t], difference: c[t] - b[t], shared: t < shared })
        .collect();
    let seeds: Vec<SeedOutcome> = baseline
        .curves
        .iter()
        .filter_map(|(seed, bc)| {
            let cc = candidate.curves.get(seed)?;
            let (bf, cf) = (bc[bc.len() - 1], cc[cc.len() - 1]);
            let verdict = if cf < bf {
                Verdict::CandidateBetter
            } else if bf < cf {
                Verdict::BaselineBetter
            } else {
                Verdict::Tie
            };
            Some(SeedOutcome { seed: *seed, baseline_final: bf, candidate_final: cf, verdict })
        })
        .collect();
    let count = |v: Verdict| seeds.iter().filter(|s| s.verdict == v).count();
    Ok(ComparisonReport {
        game: baseline.game.clone(),
        increase_threshold,
        baseline: side(baseline, increase_threshold),
        candidate: side(candidate, increase_threshold),
        curve,
        candidate_wins: count(Verdict::CandidateBetter),
        baseline_wins: count(Verdict::BaselineBetter),
        ties: count(Verdict::Tie),
        seeds,
    })
}

/// Compares two output directories written by `solve`.
pub fn compare_runs(baseline: &Path, candidate: &Path, increase_threshold: f64) -> Result<ComparisonReport> {
    compare_sets(&RunSet::load(baseline)?, &RunSet::load(candidate)?, increase_threshold)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set(tag: &str, curves: &[(u64, &[f64])]) -> RunSet {
        RunSet {
            tag: tag.into(),
            game: GameSpec::Fig1,
            curves: curves.iter().map(|(s, c)| (*s, c.to_vec())).collect(),
        }
    }

    #[test]
    fn short_runs_carry_their_final_value() {
        let a = set("a", &[(0, &[3.0, 1.0]), (1, &[2.0, 2.0, 2.0, 0.5]), (2, &[4.0, 0.0, 0.0])]);
        assert_eq!(median_curve(&a.curves, 4), vec![3.0, 1.0, 1.0, 0.5]);
    }

    #[test]
    fn counts_rises_above_threshold() {
        assert_eq!(increase_events(&[1.0, 1.04, 1.2, 0.1, 0.2], 0.05), 2);
    }

    #[test]
    fn self_comparison_has_no_differences() {
        let a = set("a", &[(0, &[2.0, 4.0, 0.0]), (1, &[1.0, 0.5])]);
        let r = compare_sets(&a, &a, 0.05).unwrap();
        assert!(r.curve.iter().all(|p| p.difference == 0.0));
        assert_eq!((r.candidate_wins, r.baseline_wins, r.ties), (0, 0, 2));
        assert_eq!(r.baseline, r.candidate);
        assert_eq!(r.curve.iter().filter(|p| p.shared).count(), 2);
    }

    #[test]
    fn mismatched_games_are_rejected() {
        let a = set("a", &[(0, &[1.0])]);
        let mut b = a.clone();
        b.game = GameSpec::Kuhn;
        assert!(matches!(compare_sets(&a, &b, 0.05), Err(HarnessError::Argument(_))));
    }

    #[test]
    fn verdicts_follow_final_values() {
        let a = set("a", &[(0, &[1.0, 0.5]), (1, &[1.0, 0.2]), (7, &[1.0])]);
        let b = set("b", &[(0, &[1.0, 0.1]), (1, &[1.0, 0.3])]);
        let r = compare_sets(&a, &b, 0.05).unwrap();
        assert_eq!((r.candidate_wins, r.baseline_wins, r.seeds.len()), (1, 1, 2));
    }
}
