//! Goal selection strategies.
//!
//! All three strategies keep a table of goal values and pick goals with the
//! same softmax rule; they differ in what the values are conditioned on and
//! how they are learned:
//!
//! | strategy     | key                  | update                               |
//! |--------------|----------------------|--------------------------------------|
//! | bandit       | none                 | EMA, α = 0.01                        |
//! | contextual   | context key          | EMA, α = 0.1                         |
//! | Q-learning   | context key          | Q-learning, α = 0.1, γ = 0.3         |

use std::collections::BTreeMap;
use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::motivation::ContextKey;
use crate::world::GoalId;

pub const BANDIT_SMOOTHING: f64 = 0.01;
pub const CONTEXTUAL_SMOOTHING: f64 = 0.1;
pub const Q_LEARNING_RATE: f64 = 0.1;
pub const Q_DISCOUNT: f64 = 0.3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SoftmaxRule {
    pub temperature: f64,
}

impl SoftmaxRule {
    pub fn new(temperature: f64) -> Self {
        Self { temperature }
    }

    /// Selection probabilities, computed with the max value subtracted so
    /// small temperatures do not overflow. An infinite temperature gives the
    /// uniform distribution.
    pub fn probabilities(&self, values: &[f64]) -> Vec<f64> {
        let n = values.len();
        if n == 0 {
            return Vec::new();
        }
        if self.temperature.is_infinite() {
            return vec![1.0 / n as f64; n];
        }
        let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = values
            .iter()
            .map(|v| ((v - max) / self.temperature).exp())
            .collect();
        let total: f64 = weights.iter().sum();
        weights.into_iter().map(|w| w / total).collect()
    }

    pub fn sample<R: Rng + ?Sized>(&self, values: &[f64], rng: &mut R) -> usize {
        let probs = self.probabilities(values);
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (i, p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                return i;
            }
        }
        // rounding left u above the last cumulative sum
        probs.iter().rposition(|p| *p > 0.0).unwrap_or(0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BanditValues {
    pub ema: Vec<f64>,
    pub alpha: f64,
}

impl BanditValues {
    pub fn new(num_goals: usize) -> Self {
        Self {
            ema: vec![0.0; num_goals],
            alpha: BANDIT_SMOOTHING,
        }
    }

    pub fn update(&mut self, goal: GoalId, reward: f64) {
        let v = &mut self.ema[goal.0];
        *v = (1.0 - self.alpha) * *v + self.alpha * reward;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContextualValues {
    pub num_goals: usize,
    pub alpha: f64,
    pub table: BTreeMap<ContextKey, Vec<f64>>,
}

impl ContextualValues {
    pub fn new(num_goals: usize) -> Self {
        Self {
            num_goals,
            alpha: CONTEXTUAL_SMOOTHING,
            table: BTreeMap::new(),
        }
    }

    pub fn values(&self, key: ContextKey) -> Vec<f64> {
        self.table
            .get(&key)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.num_goals])
    }

    pub fn update(&mut self, key: ContextKey, goal: GoalId, reward: f64) {
        let row = self
            .table
            .entry(key)
            .or_insert_with(|| vec![0.0; self.num_goals]);
        let v = &mut row[goal.0];
        *v = (1.0 - self.alpha) * *v + self.alpha * reward;
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QValues {
    pub num_goals: usize,
    pub alpha: f64,
    pub gamma: f64,
    pub table: BTreeMap<ContextKey, Vec<f64>>,
}

impl QValues {
    pub fn new(num_goals: usize) -> Self {
        Self {
            num_goals,
            alpha: Q_LEARNING_RATE,
            gamma: Q_DISCOUNT,
            table: BTreeMap::new(),
        }
    }

    pub fn values(&self, key: ContextKey) -> Vec<f64> {
        self.table
            .get(&key)
            .cloned()
            .unwrap_or_else(|| vec![0.0; self.num_goals])
    }

    pub fn get(&self, key: ContextKey, goal: GoalId) -> f64 {
        self.table.get(&key).map_or(0.0, |row| row[goal.0])
    }

    pub fn max_value(&self, key: ContextKey) -> f64 {
        self.table.get(&key).map_or(0.0, |row| {
            row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        })
    }

    /// One Q-learning step. `terminal` transitions (end of an epoch) do not
    /// bootstrap from the next state.
    pub fn update(
        &mut self,
        key: ContextKey,
        goal: GoalId,
        reward: f64,
        next_key: ContextKey,
        terminal: bool,
    ) {
        let bootstrap = if terminal {
            0.0
        } else {
            self.gamma * self.max_value(next_key)
        };
        let row = self
            .table
            .entry(key)
            .or_insert_with(|| vec![0.0; self.num_goals]);
        let q = &mut row[goal.0];
        *q += self.alpha * (reward + bootstrap - *q);
    }
}

/// One of the three value stores, plus the shared softmax rule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum GoalSelector {
    Bandit(BanditValues, SoftmaxRule),
    Contextual(ContextualValues, SoftmaxRule),
    QLearning(QValues, SoftmaxRule),
}

/// What a selector needs to learn from one trial.
#[derive(Debug, Clone, Copy)]
pub struct SelectionFeedback {
    pub key: ContextKey,
    pub goal: GoalId,
    pub reward: f64,
    pub next_key: ContextKey,
    pub terminal: bool,
}

impl GoalSelector {
    pub fn softmax(&self) -> &SoftmaxRule {
        match self {
            GoalSelector::Bandit(_, s) | GoalSelector::Contextual(_, s) | GoalSelector::QLearning(_, s) => s,
        }
    }

    pub fn values(&self, key: ContextKey) -> Vec<f64> {
        match self {
            GoalSelector::Bandit(v, _) => v.ema.clone(),
            GoalSelector::Contextual(v, _) => v.values(key),
            GoalSelector::QLearning(v, _) => v.values(key),
        }
    }

    pub fn probabilities(&self, key: ContextKey) -> Vec<f64> {
        self.softmax().probabilities(&self.values(key))
    }

    pub fn select<R: Rng + ?Sized>(&self, key: ContextKey, rng: &mut R) -> GoalId {
        GoalId(self.softmax().sample(&self.values(key), rng))
    }

    pub fn update(&mut self, fb: SelectionFeedback) {
        match self {
            GoalSelector::Bandit(v, _) => v.update(fb.goal, fb.reward),
            GoalSelector::Contextual(v, _) => v.update(fb.key, fb.goal, fb.reward),
            GoalSelector::QLearning(v, _) => {
                v.update(fb.key, fb.goal, fb.reward, fb.next_key, fb.terminal)
            }
        }
    }

    /// Rows of the value table as `(key, values)`; the bandit has a single
    /// row under key 0.
    pub fn rows(&self) -> Vec<(ContextKey, Vec<f64>)> {
        match self {
            GoalSelector::Bandit(v, _) => vec![(ContextKey(0), v.ema.clone())],
            GoalSelector::Contextual(v, _) => {
                v.table.iter().map(|(k, r)| (*k, r.clone())).collect()
            }
            GoalSelector::QLearning(v, _) => v.table.iter().map(|(k, r)| (*k, r.clone())).collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.rows().iter().all(|(_, r)| r.iter().all(|v| v.is_finite()))
    }

    /// Appends `(replication, trial_index, context_key, goal, value)` rows.
    pub fn write_rows<W: Write>(
        &self,
        w: &mut csv::Writer<W>,
        replication: usize,
        trial_index: usize,
        labels: &[String],
    ) -> csv::Result<()> {
        for (key, row) in self.rows() {
            for (g, v) in row.iter().enumerate() {
                w.write_record([
                    replication.to_string(),
                    trial_index.to_string(),
                    key.0.to_string(),
                    labels[g].clone(),
                    format!("{v:.8}"),
                ])?;
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;

    #[test]
    fn equal_values_give_uniform_choice() {
        let p = SoftmaxRule::new(0.1).probabilities(&[0.3; 6]);
        for x in p {
            assert_abs_diff_eq!(x, 1.0 / 6.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_preferred_goal() {
        // e^5 / (e^5 + 5)
        let p = SoftmaxRule::new(0.1).probabilities(&[0.5, 0.0, 0.0, 0.0, 0.0, 0.0]);
        let expected = 5f64.exp() / (5f64.exp() + 5.0);
        assert_abs_diff_eq!(p[0], expected, epsilon = 1e-12);
        assert_abs_diff_eq!(p[0], 0.9674, epsilon = 5e-5);
    }

    #[test]
    fn infinite_temperature_is_uniform() {
        let p = SoftmaxRule::new(f64::INFINITY).probabilities(&[9.0, 0.0, -3.0]);
        assert_eq!(p, vec![1.0 / 3.0; 3]);
        let p = SoftmaxRule::new(1e12).probabilities(&[9.0, 0.0, -3.0]);
        assert!(p.iter().all(|x| (x - 1.0 / 3.0).abs() < 1e-9));
    }

    #[test]
    fn sampling_follows_probabilities() {
        let rule = SoftmaxRule::new(0.5);
        let values = [1.0, 0.0, 0.5];
        let probs = rule.probabilities(&values);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let n = 60_000;
        let mut counts = [0usize; 3];
        for _ in 0..n {
            counts[rule.sample(&values, &mut rng)] += 1;
        }
        for i in 0..3 {
            assert!((counts[i] as f64 / n as f64 - probs[i]).abs() < 0.01);
        }
    }

    #[test]
    fn bandit_ema() {
        let mut v = BanditValues::new(6);
        v.update(GoalId(0), 1.0);
        assert_abs_diff_eq!(v.ema[0], 0.01, epsilon = 1e-15);
        assert!(v.ema[1..].iter().all(|x| *x == 0.0));

        let mut v = BanditValues::new(1);
        for _ in 0..1000 {
            v.update(GoalId(0), 0.7);
        }
        // 0.7 * 0.99^1000 ≈ 3e-5
        assert!((v.ema[0] - 0.7).abs() < 0.01);

        let mut v = BanditValues::new(1);
        v.ema[0] = 0.25;
        v.update(GoalId(0), 0.25);
        assert_eq!(v.ema[0], 0.25);
    }

    #[test]
    fn contextual_update_touches_one_cell() {
        let mut v = ContextualValues::new(6);
        v.update(ContextKey(1), GoalId(0), 0.5);
        assert_abs_diff_eq!(v.values(ContextKey(1))[0], 0.05, epsilon = 1e-15);
        assert_eq!(v.values(ContextKey(0)), vec![0.0; 6]);
        for _ in 0..100 {
            v.update(ContextKey(0), GoalId(0), 0.0);
        }
        assert_eq!(v.values(ContextKey(0))[0], 0.0);
    }

    #[test]
    fn q_update_examples() {
        let mut q = QValues::new(6);
        q.update(ContextKey(0), GoalId(0), 0.5, ContextKey(1), false);
        assert_abs_diff_eq!(q.get(ContextKey(0), GoalId(0)), 0.05, epsilon = 1e-15);

        let mut q = QValues::new(6);
        q.table.insert(ContextKey(1), vec![1.0, 0.0, 0.0, 0.0, 0.0, 0.0]);
        q.update(ContextKey(0), GoalId(3), 0.0, ContextKey(1), false);
        assert_abs_diff_eq!(q.get(ContextKey(0), GoalId(3)), 0.03, epsilon = 1e-15);

        let mut q = QValues::new(6);
        q.table.insert(ContextKey(1), vec![1.0; 6]);
        q.update(ContextKey(0), GoalId(3), 0.0, ContextKey(1), true);
        assert_eq!(q.get(ContextKey(0), GoalId(3)), 0.0);
    }

    #[test]
    fn q_learning_on_a_three_state_chain() {
        // s0 -a-> s1 -a-> s2 -a-> end, reward 1 on the last transition.
        // Value-iteration fixed point: q(s2)=1, q(s1)=γ, q(s0)=γ².
        let mut q = QValues::new(1);
        let a = GoalId(0);
        for _ in 0..2000 {
            q.update(ContextKey(2), a, 1.0, ContextKey(3), true);
            q.update(ContextKey(1), a, 0.0, ContextKey(2), false);
            q.update(ContextKey(0), a, 0.0, ContextKey(1), false);
        }
        assert_abs_diff_eq!(q.get(ContextKey(2), a), 1.0, epsilon = 1e-6);
        assert_abs_diff_eq!(q.get(ContextKey(1), a), 0.3, epsilon = 1e-6);
        assert_abs_diff_eq!(q.get(ContextKey(0), a), 0.09, epsilon = 1e-6);
    }

    proptest! {
        #[test]
        fn softmax_is_a_distribution(
            values in prop::collection::vec(-1.0f64..1.0, 1..12),
            temperature in 1e-3f64..10.0,
        ) {
            let p = SoftmaxRule::new(temperature).probabilities(&values);
            let total: f64 = p.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!(p.iter().all(|x| *x >= 0.0));
            let best = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let argmax: Vec<usize> = (0..values.len()).filter(|i| values[*i] == best).collect();
            if argmax.len() == 1 {
                let top = argmax[0];
                prop_assert!(p.iter().enumerate().all(|(i, x)| i == top || *x <= p[top]));
            }
        }

        #[test]
        fn updates_touch_exactly_one_cell(
            key in 0u32..8, goal in 0usize..6, reward in -1.0f64..1.0, next in 0u32..8, terminal: bool,
        ) {
            let seed_rows = |t: &mut BTreeMap<ContextKey, Vec<f64>>| {
                for k in 0..8 {
                    t.insert(ContextKey(k), (0..6).map(|g| 0.01 * (k as f64 + g as f64)).collect());
                }
            };
            let mut c = ContextualValues::new(6);
            seed_rows(&mut c.table);
            let mut q = QValues::new(6);
            seed_rows(&mut q.table);
            let (c0, q0) = (c.clone(), q.clone());
            c.update(ContextKey(key), GoalId(goal), reward);
            q.update(ContextKey(key), GoalId(goal), reward, ContextKey(next), terminal);
            for k in 0..8 {
                for g in 0..6 {
                    if (k, g) != (key, goal) {
                        prop_assert_eq!(c.table[&ContextKey(k)][g], c0.table[&ContextKey(k)][g]);
                        prop_assert_eq!(q.table[&ContextKey(k)][g], q0.table[&ContextKey(k)][g]);
                    }
                }
            }
            let mut b = BanditValues::new(6);
            b.ema = vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6];
            let b0 = b.clone();
            b.update(GoalId(goal), reward);
            for g in 0..6 {
                if g != goal {
                    prop_assert_eq!(b.ema[g], b0.ema[g]);
                }
            }
        }

        #[test]
        fn q_values_stay_bounded(
            rewards in prop::collection::vec((0u32..4, 0usize..3, 0.0f64..1.0, 0u32..4, any::<bool>()), 1..300),
        ) {
            let mut q = QValues::new(3);
            for (k, g, r, n, t) in rewards {
                q.update(ContextKey(k), GoalId(g), r, ContextKey(n), t);
            }
            let bound = 1.0 / (1.0 - Q_DISCOUNT);
            for row in q.table.values() {
                prop_assert!(row.iter().all(|v| *v >= 0.0 && *v <= bound + 1e-12));
            }
        }
    }
}
