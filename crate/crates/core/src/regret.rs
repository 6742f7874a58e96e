//! No-regret learners over a finite set of arms: Exp3 with bandit feedback and
//! multiplicative weights with full feedback, both keeping the running average
//! of the distributions they played.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{arg, Error, Result};
use crate::scalar::{from_usize, softmax, Scalar};
use crate::tree::sample_index;

/// Default MWU learning rate.
pub const DEFAULT_MWU_ETA: f64 = 0.1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RegretRule {
    Exp3,
    Mwu,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct RegretState<T> {
    rule: RegretRule,
    eta: T,
    /// Exploration mix; always 0 for MWU.
    gamma: T,
    cumulative: Vec<T>,
    t: u64,
    avg_accumulator: Vec<T>,
}

impl<T: Scalar> RegretState<T> {
    pub fn exp3(k: usize, eta: T, gamma: T) -> Result<Self> {
        if !(gamma >= T::zero() && gamma <= T::one()) {
            return arg(format!("gamma must lie in [0, 1], got {gamma}"));
        }
        Self::build(RegretRule::Exp3, k, eta, gamma)
    }

    pub fn mwu(k: usize, eta: T) -> Result<Self> {
        Self::build(RegretRule::Mwu, k, eta, T::zero())
    }

    fn build(rule: RegretRule, k: usize, eta: T, gamma: T) -> Result<Self> {
        if k == 0 {
            return arg("need at least one arm");
        }
        if !(eta > T::zero() && eta.is_finite()) {
            return arg(format!("learning rate must be positive, got {eta}"));
        }
        Ok(Self {
            rule,
            eta,
            gamma,
            cumulative: vec![T::zero(); k],
            t: 0,
            avg_accumulator: vec![T::zero(); k],
        })
    }

    pub fn rule(&self) -> RegretRule {
        self.rule
    }

    pub fn k(&self) -> usize {
        self.cumulative.len()
    }

    pub fn eta(&self) -> T {
        self.eta
    }

    pub fn gamma(&self) -> T {
        self.gamma
    }

    pub fn updates(&self) -> u64 {
        self.t
    }

    pub fn cumulative(&self) -> &[T] {
        &self.cumulative
    }

    /// Current sampling distribution.
    pub fn distribution(&self) -> Vec<T> {
        let soft = softmax(&self.cumulative, self.eta);
        if self.gamma == T::zero() {
            return soft;
        }
        let floor = self.gamma / from_usize::<T>(self.k());
        soft.into_iter().map(|p| (T::one() - self.gamma) * p + floor).collect()
    }

    /// Draws an arm from the current distribution; returns it with its probability.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> (usize, T) {
        let p = self.distribution();
        let arm = sample_index(&p, rng);
        (arm, p[arm])
    }

    fn record(&mut self, played: &[T]) {
        for (acc, p) in self.avg_accumulator.iter_mut().zip(played) {
            *acc += *p;
        }
        self.t += 1;
    }

    /// Importance-weighted update of the sampled arm.
    pub fn exp3_update(&mut self, arm: usize, reward: T, p_sampled: T) -> Result<()> {
        if self.rule != RegretRule::Exp3 {
            return arg("exp3_update on a multiplicative-weights state");
        }
        if arm >= self.k() {
            return arg(format!("arm {arm} out of range for {} arms", self.k()));
        }
        if !(reward >= T::zero() && reward <= T::one()) {
            return arg(format!("reward {reward} outside [0, 1]"));
        }
        if !(p_sampled > T::zero() && p_sampled <= T::one()) {
            return arg(format!("sampling probability {p_sampled} outside (0, 1]"));
        }
        let played = self.distribution();
        self.record(&played);
        self.cumulative[arm] += reward / p_sampled;
        Ok(())
    }

    /// Full-information update with one reward per arm.
    pub fn mwu_update(&mut self, rewards: &[T]) -> Result<()> {
        if self.rule != RegretRule::Mwu {
            return arg("mwu_update on an Exp3 state");
        }
        if rewards.len() != self.k() {
            return Err(Error::Dimension { expected: self.k(), got: rewards.len() });
        }
        if rewards.iter().any(|r| !r.is_finite()) {
            return arg("rewards must be finite");
        }
        let played = self.distribution();
        self.record(&played);
        for (s, x) in self.cumulative.iter_mut().zip(rewards) {
            *s += *x;
        }
        Ok(())
    }

    /// Mean of the distributions in effect at each update.
    pub fn average_distribution(&self) -> Result<Vec<T>> {
        if self.t == 0 {
            return Err(Error::EmptyHistory);
        }
        let total: T = self.avg_accumulator.iter().copied().sum();
        Ok(self.avg_accumulator.iter().map(|a| *a / total).collect())
    }
}

/// `(1 - γ) softmax(ηŜ) + γ/k` for an Exp3 state.
pub fn exp3_distribution<T: Scalar>(state: &RegretState<T>) -> Vec<T> {
    state.distribution()
}

/// Exploration mix `min(1, sqrt(k ln k) / ((e - 1) n_total))`.
pub fn exp3_gamma_schedule<T: Scalar>(k: usize, n_total: u64) -> Result<T> {
    if k < 2 || n_total == 0 {
        return arg("gamma schedule needs k >= 2 and n_total >= 1");
    }
    let k = k as f64;
    let g = (k * k.ln()).sqrt() / ((std::f64::consts::E - 1.0) * n_total as f64);
    Ok(T::lit(g.min(1.0)))
}

/// Maps a payoff in `[lo, hi]` to `[0, 1]`, clamping round-off excursions.
pub fn normalize_reward<T: Scalar>(v: T, lo: T, hi: T) -> T {
    if hi <= lo {
        return T::lit(0.5);
    }
    ((v - lo) / (hi - lo)).max(T::zero()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{seeded, Purpose};

    const E: f64 = std::f64::consts::E;

    #[test]
    fn initial_distribution_is_uniform() {
        let s = RegretState::<f64>::exp3(2, 0.05, 0.1).unwrap();
        assert_eq!(exp3_distribution(&s), vec![0.5, 0.5]);
    }

    #[test]
    fn closed_form_softmax() {
        let mut s = RegretState::<f64>::exp3(2, 1.0, 0.0).unwrap();
        s.cumulative = vec![1.0, 0.0];
        let p = exp3_distribution(&s);
        assert!((p[0] - E / (E + 1.0)).abs() < 1e-12);
        assert!((p[1] - 1.0 / (E + 1.0)).abs() < 1e-12);
        s.cumulative = vec![-4.0, -5.0];
        let q = exp3_distribution(&s);
        assert!((p[0] - q[0]).abs() < 1e-12);
    }

    #[test]
    fn importance_weighted_increment() {
        let mut s = RegretState::<f64>::exp3(2, 0.1, 0.1).unwrap();
        s.exp3_update(0, 0.8, 0.5).unwrap();
        assert!((s.cumulative()[0] - 1.6).abs() < 1e-12);
        assert_eq!(s.cumulative()[1], 0.0);
        s.exp3_update(1, 0.0, 0.5).unwrap();
        assert_eq!(s.cumulative()[1], 0.0);
        assert_eq!(s.updates(), 2);
        assert!(s.exp3_update(0, 1.2, 0.5).is_err());
        assert!(s.exp3_update(0, -0.1, 0.5).is_err());
        assert!(s.exp3_update(2, 0.5, 0.5).is_err());
    }

    #[test]
    fn increments_bounded_by_exploration_floor() {
        let (k, gamma) = (4, 0.2);
        let mut s = RegretState::<f64>::exp3(k, 1.0, gamma).unwrap();
        s.cumulative = vec![50.0, 0.0, 0.0, 0.0];
        let p = exp3_distribution(&s);
        assert!(p.iter().all(|&x| x >= gamma / k as f64 - 1e-15));
        let before = s.cumulative()[3];
        s.exp3_update(3, 1.0, p[3]).unwrap();
        assert!(s.cumulative()[3] - before <= k as f64 / gamma + 1e-9);
    }

    #[test]
    fn gamma_schedule() {
        assert_eq!(exp3_gamma_schedule::<f64>(10, 1).unwrap(), 1.0);
        let tiny: f64 = exp3_gamma_schedule(2, u64::MAX).unwrap();
        assert!(tiny > 0.0 && tiny < 1e-18);
        let mut last = 1.0;
        for n in 1..2000 {
            let g: f64 = exp3_gamma_schedule(7, n).unwrap();
            assert!(g <= last);
            last = g;
        }
        assert!(exp3_gamma_schedule::<f64>(1, 10).is_err());
        assert!(exp3_gamma_schedule::<f64>(3, 0).is_err());
    }

    #[test]
    fn mwu_examples() {
        let mut s = RegretState::<f64>::mwu(2, 0.1).unwrap();
        s.mwu_update(&[1.0, 0.0]).unwrap();
        let p = s.distribution();
        let expected = 1.0 / (1.0 + (-0.1f64).exp());
        assert!((p[0] - expected).abs() < 1e-12);
        assert!((p[0] - 0.52498).abs() < 1e-5);
        s.mwu_update(&[0.3, 0.3]).unwrap();
        assert!((s.distribution()[0] - p[0]).abs() < 1e-12);
        for _ in 0..1000 {
            s.mwu_update(&[1.0, 0.0]).unwrap();
        }
        assert!(s.distribution()[0] > 1.0 - 1e-12);
        assert!(s.mwu_update(&[1.0]).is_err());
    }

    #[test]
    fn averages() {
        let s = RegretState::<f64>::mwu(2, 0.1).unwrap();
        assert!(matches!(s.average_distribution(), Err(Error::EmptyHistory)));

        let mut s = RegretState::<f64>::mwu(2, 0.1).unwrap();
        s.mwu_update(&[1.0, 0.0]).unwrap();
        assert_eq!(s.average_distribution().unwrap(), vec![0.5, 0.5]);

        let mut s = RegretState::<f64>::mwu(2, 1e6).unwrap();
        s.cumulative = vec![1.0, 0.0];
        s.mwu_update(&[-2.0, 0.0]).unwrap();
        s.mwu_update(&[0.0, 0.0]).unwrap();
        let avg = s.average_distribution().unwrap();
        assert!((avg[0] - 0.5).abs() < 1e-12);

        let mut s = RegretState::<f64>::mwu(3, 0.1).unwrap();
        for _ in 0..10 {
            s.mwu_update(&[0.4, 0.4, 0.4]).unwrap();
        }
        for p in s.average_distribution().unwrap() {
            assert!((p - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn extreme_cumulative_values_stay_finite() {
        let mut s = RegretState::<f64>::exp3(5, 1.0, 0.01).unwrap();
        s.cumulative = vec![1e6, -1e6, 0.0, 1e6 - 1.0, -3.0];
        let p = s.distribution();
        assert!(p.iter().all(|x| x.is_finite() && *x >= 0.0));
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let mut s = RegretState::<f32>::mwu(3, 1.0).unwrap();
        s.cumulative = vec![1e6, -1e6, 5e5];
        assert!(s.distribution().iter().all(|x| x.is_finite()));
    }

    #[test]
    fn sampling_returns_the_drawn_probability() {
        let mut s = RegretState::<f64>::exp3(3, 0.5, 0.3).unwrap();
        s.cumulative = vec![2.0, 0.0, 1.0];
        let p = s.distribution();
        let mut rng = seeded(1, Purpose::Testing);
        for _ in 0..100 {
            let (arm, q) = s.sample(&mut rng);
            assert_eq!(q, p[arm]);
        }
    }

    #[test]
    fn state_round_trips_through_json() {
        let mut s = RegretState::<f64>::exp3(3, 0.5, 0.3).unwrap();
        s.exp3_update(1, 0.25, 0.3).unwrap();
        let back: RegretState<f64> = serde_json::from_str(&serde_json::to_string(&s).unwrap()).unwrap();
        assert_eq!(back, s);
    }

    #[test]
    fn reward_normalization() {
        assert_eq!(normalize_reward(0.0, -2.0, 2.0), 0.5);
        assert_eq!(normalize_reward(2.0 + 1e-15, -2.0, 2.0), 1.0);
        assert_eq!(normalize_reward(-13.0, -13.0, 13.0), 0.0);
    }
}
