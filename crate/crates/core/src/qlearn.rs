//! Tabular Q-learning over analysis configurations.
//!
//! A state is the configuration that just ran and an action is the
//! configuration to run next. Both range over the 26 valid configurations.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::seads::{Configuration, Controller};
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LearnerParams {
    pub gamma: f64,
    pub alpha: f64,
    pub epsilon: f64,
    pub seed: u64,
    /// Bootstrap from the best value of the next state's row instead of the
    /// best value anywhere in the table.
    pub next_state_max: bool,
    /// Reward returned when the cost equals the budget exactly.
    pub reward_cap: f64,
}

impl Default for LearnerParams {
    fn default() -> Self {
        LearnerParams {
            gamma: 0.9,
            alpha: 0.9,
            epsilon: 0.2,
            seed: 0,
            next_state_max: false,
            reward_cap: 1e6,
        }
    }
}

impl LearnerParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("gamma", self.gamma), ("alpha", self.alpha), ("epsilon", self.epsilon)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(Error::Config(format!("{name} must lie in [0, 1], got {v}")));
            }
        }
        if !(self.reward_cap.is_finite() && self.reward_cap > 0.0) {
            return Err(Error::Config(format!("reward cap must be positive and finite, got {}", self.reward_cap)));
        }
        Ok(())
    }
}

/// `1000 / (budget - cost)`; `cap` when the two are equal.
pub fn reward(budget: f64, cost: f64, cap: f64) -> f64 {
    let r = 1000.0 / (budget - cost);
    if r.is_finite() {
        r.clamp(-cap, cap)
    } else {
        cap
    }
}

/// Expected rewards, zero for every cell never updated.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QTable {
    values: BTreeMap<(Configuration, Configuration), f64>,
}

impl QTable {
    pub fn get(&self, state: Configuration, action: Configuration) -> f64 {
        self.values.get(&(state, action)).copied().unwrap_or(0.0)
    }

    pub fn set(&mut self, state: Configuration, action: Configuration, v: f64) {
        debug_assert!(state.is_valid() && action.is_valid() && v.is_finite());
        self.values.insert((state, action), v);
    }

    /// Largest value in the table, counting untouched cells as zero.
    pub fn max_value(&self) -> f64 {
        let stored = self.values.values().copied().fold(f64::NEG_INFINITY, f64::max);
        if self.values.len() < 26 * 26 {
            stored.max(0.0)
        } else {
            stored
        }
    }

    pub fn row_max(&self, state: Configuration) -> f64 {
        Configuration::all_valid().into_iter().map(|a| self.get(state, a)).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Highest-valued action from `state`, lowest encoding on ties.
    pub fn greedy(&self, state: Configuration) -> Configuration {
        let mut best = (f64::NEG_INFINITY, Configuration::FULL);
        for a in Configuration::all_valid() {
            let v = self.get(state, a);
            if v > best.0 {
                best = (v, a);
            }
        }
        best.1
    }

    pub fn scaled(&self, k: f64) -> QTable {
        QTable {
            values: self.values.iter().map(|(key, v)| (*key, v * k)).collect(),
        }
    }

    /// `state action value` lines for every updated cell.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        for ((s, a), v) in &self.values {
            writeln!(out, "{s} {a} {v}").expect("writing to a String");
        }
        out
    }
}

/// Applies one Bellman update to the cell `(state, action)`.
pub fn update(q: &mut QTable, state: Configuration, action: Configuration, r: f64, params: &LearnerParams) {
    let best = if params.next_state_max { q.row_max(action) } else { q.max_value() };
    let v = q.get(state, action);
    q.set(state, action, v + params.alpha * (r + params.gamma * best - v));
}

/// Epsilon-greedy choice given a uniform draw in `[0, 1)`.
pub fn choose(q: &QTable, state: Configuration, epsilon: f64, draw: f64, rng: &mut impl Rng) -> Configuration {
    if draw > 1.0 - epsilon {
        let all = Configuration::all_valid();
        all[rng.gen_range(0..all.len())]
    } else {
        q.greedy(state)
    }
}

pub fn select_action(q: &QTable, state: Configuration, params: &LearnerParams, rng: &mut impl Rng) -> Configuration {
    let draw: f64 = rng.gen();
    choose(q, state, params.epsilon, draw, rng)
}

/// Configuration controller that learns from each round's reward.
#[derive(Clone, Debug)]
pub struct QLearner {
    pub table: QTable,
    pub params: LearnerParams,
    rng: ChaCha8Rng,
}

impl QLearner {
    pub fn new(params: LearnerParams) -> Result<Self> {
        params.validate()?;
        Ok(QLearner {
            table: QTable::default(),
            params,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        })
    }
}

impl Controller for QLearner {
    fn next(&mut self, prev: Configuration, current: Configuration, cost: f64, budget: f64) -> Configuration {
        let r = reward(budget, cost, self.params.reward_cap);
        update(&mut self.table, prev, current, r, &self.params);
        select_action(&self.table, current, &self.params, &mut self.rng)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use statrs::distribution::{ChiSquared, ContinuousCDF};

    fn c(s: &str) -> Configuration {
        s.parse().unwrap()
    }

    #[test]
    fn reward_examples() {
        assert!((reward(60000.0, 40000.0, 1e6) - 0.05).abs() < 1e-12);
        assert_eq!(reward(2000.0, 1000.0, 1e6), 1.0);
        assert_eq!(reward(1000.0, 3000.0, 1e6), -0.5);
        assert_eq!(reward(5.0, 5.0, 42.0), 42.0);
    }

    #[test]
    fn update_examples() {
        let p = LearnerParams::default();
        let mut q = QTable::default();
        update(&mut q, Configuration::FULL, c("000100"), 0.05, &p);
        assert!((q.get(Configuration::FULL, c("000100")) - 0.045).abs() < 1e-12);

        let frozen = LearnerParams { alpha: 0.0, ..p };
        let before = q.clone();
        update(&mut q, Configuration::FULL, c("000100"), 7.0, &frozen);
        assert_eq!(q.get(Configuration::FULL, c("000100")), before.get(Configuration::FULL, c("000100")));

        let greedy = LearnerParams { alpha: 1.0, gamma: 0.0, ..p };
        update(&mut q, c("100000"), c("100000"), -3.5, &greedy);
        assert_eq!(q.get(c("100000"), c("100000")), -3.5);
    }

    #[test]
    fn whole_table_versus_next_row_bootstrap() {
        let mut q = QTable::default();
        q.set(c("100000"), c("100000"), 10.0);
        let p = LearnerParams { alpha: 1.0, gamma: 0.5, ..LearnerParams::default() };
        update(&mut q, Configuration::FULL, c("000100"), 0.0, &p);
        assert_eq!(q.get(Configuration::FULL, c("000100")), 5.0);
        let p = LearnerParams { next_state_max: true, ..p };
        update(&mut q, Configuration::FULL, c("000100"), 0.0, &p);
        assert_eq!(q.get(Configuration::FULL, c("000100")), 0.0);
    }

    #[test]
    fn greedy_ties_take_the_lowest_encoding() {
        let q = QTable::default();
        assert_eq!(q.greedy(Configuration::FULL), c("000100"));
        let mut q = q;
        q.set(Configuration::FULL, Configuration::FULL, 1.0);
        assert_eq!(q.greedy(Configuration::FULL), Configuration::FULL);
    }

    #[test]
    fn draw_above_threshold_explores() {
        let mut q = QTable::default();
        q.set(Configuration::FULL, Configuration::FULL, 5.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let picks: Vec<_> = (0..200).map(|_| choose(&q, Configuration::FULL, 0.2, 0.803, &mut rng)).collect();
        assert!(picks.iter().any(|a| *a != Configuration::FULL));
        assert!((0..50).all(|_| choose(&q, Configuration::FULL, 0.2, 0.79, &mut rng) == Configuration::FULL));
    }

    #[test]
    fn full_exploration_is_uniform() {
        let p = LearnerParams { epsilon: 1.0, seed: 11, ..LearnerParams::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
        let q = QTable::default();
        let all = Configuration::all_valid();
        let mut counts = BTreeMap::new();
        let n = 10_000;
        for _ in 0..n {
            *counts.entry(select_action(&q, Configuration::FULL, &p, &mut rng)).or_insert(0usize) += 1;
        }
        assert_eq!(counts.len(), all.len());
        let expected = n as f64 / all.len() as f64;
        let chi2: f64 = counts.values().map(|o| (*o as f64 - expected).powi(2) / expected).sum();
        let critical = ChiSquared::new((all.len() - 1) as f64).unwrap().inverse_cdf(0.999);
        assert!(chi2 < critical, "chi2 {chi2} >= {critical}");
    }

    #[test]
    fn params_are_range_checked() {
        assert!(QLearner::new(LearnerParams { gamma: 1.5, ..LearnerParams::default() }).is_err());
        assert!(QLearner::new(LearnerParams { epsilon: -0.1, ..LearnerParams::default() }).is_err());
    }

    #[test]
    fn seeded_learner_is_deterministic() {
        let run = || {
            let mut l = QLearner::new(LearnerParams { seed: 9, ..LearnerParams::default() }).unwrap();
            let mut cur = Configuration::FULL;
            let mut prev = cur;
            (0..100)
                .map(|i| {
                    let next = l.next(prev, cur, (i % 7) as f64 * 10.0, 40.0);
                    prev = cur;
                    cur = next;
                    next
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn settles_on_the_only_configuration_within_budget() {
        let target = c("100100");
        let cost = |cfg: Configuration| if cfg == target { 90.0 } else { 200.0 };
        let mut l = QLearner::new(LearnerParams { seed: 5, ..LearnerParams::default() }).unwrap();
        let (mut prev, mut cur) = (Configuration::FULL, Configuration::FULL);
        for _ in 0..400 {
            let next = l.next(prev, cur, cost(cur), 100.0);
            prev = cur;
            cur = next;
        }
        assert_eq!(l.table.greedy(target), target);
        for start in Configuration::all_valid() {
            let mut s = start;
            for _ in 0..26 {
                s = l.table.greedy(s);
            }
            assert_eq!(s, target, "greedy walk from {start}");
        }
    }

    #[test]
    fn scaling_keeps_the_greedy_choice() {
        let mut q = QTable::default();
        q.set(Configuration::FULL, c("110111"), 2.0);
        q.set(Configuration::FULL, c("000100"), -1.0);
        for k in [0.001, 1.0, 1e6] {
            assert_eq!(q.scaled(k).greedy(Configuration::FULL), c("110111"));
        }
    }

    #[test]
    fn dump_lists_cells() {
        let mut q = QTable::default();
        q.set(Configuration::FULL, c("000100"), 0.5);
        assert_eq!(q.dump(), "111111 000100 0.5\n");
    }
}
