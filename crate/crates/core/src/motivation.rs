//! Competence-based intrinsic motivation.
//!
//! An [`AchievementPredictor`] keeps, for every goal and context key, the
//! predicted probability of achieving that goal within a trial, updated with
//! a delta rule. The intrinsic reward for the selected goal is the
//! competence-prediction improvement (CPI): how much the prediction moved
//! toward success on this trial.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::world::{GoalId, WorldState};

/// How world states are collapsed into predictor and selector table keys.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ContextKeying {
    /// One key for every state.
    None,
    /// The contextual feature only.
    ContextFeature,
    /// Every sphere's status plus the contextual feature.
    FullSphereState,
}

/// Key of a tabular context. For [`ContextKeying::FullSphereState`] this is
/// [`WorldState::full_key`]; for [`ContextKeying::ContextFeature`] it is 0 or 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ContextKey(pub u32);

impl ContextKeying {
    pub fn key(self, state: &WorldState) -> ContextKey {
        match self {
            ContextKeying::None => ContextKey(0),
            ContextKeying::ContextFeature => ContextKey(u32::from(state.context_on())),
            ContextKeying::FullSphereState => ContextKey(state.full_key()),
        }
    }

    /// Number of distinct keys for a scenario with `num_goals` spheres.
    pub fn key_space(self, num_goals: usize) -> usize {
        match self {
            ContextKeying::None => 1,
            ContextKeying::ContextFeature => 2,
            ContextKeying::FullSphereState => 1 << (num_goals + 1),
        }
    }
}

/// Maps the predictor's one-step change into an intrinsic reward.
pub trait RewardRule {
    fn reward(&self, before: f64, after: f64) -> f64;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CpiRule {
    /// Positive part of the prediction change.
    #[default]
    Clipped,
    /// Raw prediction change, negative on failures.
    Signed,
}

impl RewardRule for CpiRule {
    fn reward(&self, before: f64, after: f64) -> f64 {
        match self {
            CpiRule::Clipped => (after - before).max(0.0),
            CpiRule::Signed => after - before,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AchievementPredictor {
    num_goals: usize,
    rate: f64,
    keying: ContextKeying,
    rule: CpiRule,
    gate_threshold: f64,
    table: BTreeMap<(ContextKey, GoalId), f64>,
}

pub const DEFAULT_PREDICTOR_RATE: f64 = 0.1;
pub const DEFAULT_GATE_THRESHOLD: f64 = 0.05;

impl AchievementPredictor {
    pub fn new(num_goals: usize, keying: ContextKeying) -> Self {
        Self {
            num_goals,
            rate: DEFAULT_PREDICTOR_RATE,
            keying,
            rule: CpiRule::Clipped,
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            table: BTreeMap::new(),
        }
    }

    pub fn with_rate(mut self, rate: f64) -> Self {
        self.rate = rate;
        self
    }

    pub fn with_rule(mut self, rule: CpiRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn with_gate_threshold(mut self, threshold: f64) -> Self {
        self.gate_threshold = threshold;
        self
    }

    pub fn keying(&self) -> ContextKeying {
        self.keying
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn gate_threshold(&self) -> f64 {
        self.gate_threshold
    }

    pub fn num_goals(&self) -> usize {
        self.num_goals
    }

    /// Predicted probability of achieving `goal` from `state`. Unvisited
    /// entries predict 0.
    pub fn predict(&self, goal: GoalId, state: &WorldState) -> f64 {
        self.predict_key(goal, self.keying.key(state))
    }

    pub fn predict_key(&self, goal: GoalId, key: ContextKey) -> f64 {
        self.table.get(&(key, goal)).copied().unwrap_or(0.0)
    }

    /// Delta-rule update toward the trial outcome; returns the CPI reward
    /// under the configured rule.
    pub fn update_and_reward(&mut self, goal: GoalId, state: &WorldState, achieved: bool) -> f64 {
        let rule = self.rule;
        self.update_and_reward_with(goal, state, achieved, &rule)
    }

    pub fn update_and_reward_with<R: RewardRule + ?Sized>(
        &mut self,
        goal: GoalId,
        state: &WorldState,
        achieved: bool,
        rule: &R,
    ) -> f64 {
        let key = self.keying.key(state);
        let entry = self.table.entry((key, goal)).or_insert(0.0);
        let before = *entry;
        let outcome = if achieved { 1.0 } else { 0.0 };
        let after = (before + self.rate * (outcome - before)).clamp(0.0, 1.0);
        *entry = after;
        rule.reward(before, after)
    }

    /// `false` blocks the selected expert's learning: the goal is predicted
    /// (near) unachievable here and was not achieved.
    pub fn learning_gate(&self, goal: GoalId, state: &WorldState, achieved: bool) -> bool {
        achieved || self.predict(goal, state) > self.gate_threshold
    }

    /// Visited `(context key, goal, P)` entries in key order.
    pub fn entries(&self) -> impl Iterator<Item = (ContextKey, GoalId, f64)> + '_ {
        self.table.iter().map(|((k, g), p)| (*k, *g, *p))
    }

    pub fn write_csv<W: Write>(&self, out: W, labels: &[String]) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(["goal", "context_key", "p"])?;
        for (k, g, p) in self.entries() {
            w.write_record([labels[g.0].clone(), k.0.to_string(), format!("{p:.6}")])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn dump_csv(&self, path: &Path, labels: &[String]) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_csv(file, labels).map_err(|e| Error::csv(path, e))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn off() -> WorldState {
        WorldState::all_off(6, 0.0)
    }

    fn with_p(p: f64) -> AchievementPredictor {
        let mut pred = AchievementPredictor::new(6, ContextKeying::None);
        pred.table.insert((ContextKey(0), GoalId(0)), p);
        pred
    }

    #[test]
    fn fresh_predictor_is_pessimistic() {
        let pred = AchievementPredictor::new(6, ContextKeying::FullSphereState);
        let mut s = off();
        s.sphere_on[2] = true;
        assert_eq!(pred.predict(GoalId(1), &s), 0.0);
        assert_eq!(pred.predict(GoalId(5), &off()), 0.0);
    }

    #[test]
    fn no_keying_ignores_the_state() {
        let mut pred = AchievementPredictor::new(6, ContextKeying::None);
        pred.update_and_reward(GoalId(0), &off(), true);
        let mut other = WorldState::all_off(6, 1.0);
        other.sphere_on[3] = true;
        assert_eq!(pred.predict(GoalId(0), &off()), pred.predict(GoalId(0), &other));
    }

    #[test]
    fn fifty_successes_saturate_the_prediction() {
        // 1 - 0.9^50 = 0.99485
        let mut pred = AchievementPredictor::new(6, ContextKeying::None);
        for _ in 0..50 {
            pred.update_and_reward(GoalId(0), &off(), true);
        }
        assert!(pred.predict(GoalId(0), &off()) >= 0.99);
    }

    #[test]
    fn cpi_on_success_and_failure() {
        let mut pred = with_p(0.5);
        let r = pred.update_and_reward(GoalId(0), &off(), true);
        assert_abs_diff_eq!(pred.predict(GoalId(0), &off()), 0.55, epsilon = 1e-12);
        assert_abs_diff_eq!(r, 0.05, epsilon = 1e-12);

        let mut pred = with_p(0.5);
        let r = pred.update_and_reward(GoalId(0), &off(), false);
        assert_abs_diff_eq!(pred.predict(GoalId(0), &off()), 0.45, epsilon = 1e-12);
        assert_eq!(r, 0.0);

        let mut pred = with_p(1.0);
        assert_eq!(pred.update_and_reward(GoalId(0), &off(), true), 0.0);
    }

    #[test]
    fn signed_rule_penalises_failures() {
        let mut pred = with_p(0.5).with_rule(CpiRule::Signed);
        let r = pred.update_and_reward(GoalId(0), &off(), false);
        assert_abs_diff_eq!(r, -0.05, epsilon = 1e-12);
    }

    #[test]
    fn gate() {
        assert!(!with_p(0.0).learning_gate(GoalId(0), &off(), false));
        assert!(with_p(0.0).learning_gate(GoalId(0), &off(), true));
        assert!(with_p(0.7).learning_gate(GoalId(0), &off(), false));
        assert!(!with_p(0.05).learning_gate(GoalId(0), &off(), false));
    }

    #[test]
    fn converges_to_bernoulli_rate() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for p in [0.2, 0.5, 0.8] {
            let mut pred = AchievementPredictor::new(1, ContextKeying::None);
            let mut tail = Vec::new();
            for t in 0..3000 {
                pred.update_and_reward(GoalId(0), &WorldState::all_off(1, 0.0), rng.random_bool(p));
                if t >= 2000 {
                    tail.push(pred.predict(GoalId(0), &WorldState::all_off(1, 0.0)));
                }
            }
            let mean = tail.iter().sum::<f64>() / tail.len() as f64;
            assert!((mean - p).abs() < 0.05, "p={p} mean={mean}");
        }
    }

    #[test]
    fn reward_fades_under_constant_success() {
        let mut pred = AchievementPredictor::new(1, ContextKeying::None);
        let s = WorldState::all_off(1, 0.0);
        let rewards: Vec<f64> = (0..400).map(|_| pred.update_and_reward(GoalId(0), &s, true)).collect();
        let tail = |t: usize| rewards[t..].iter().sum::<f64>();
        // tail sum is the remaining gap to 1, which shrinks geometrically
        assert!(tail(0) > tail(50) && tail(50) > tail(100) && tail(100) > tail(200));
        assert!(tail(200) < 1e-8);
    }

    proptest! {
        #[test]
        fn prediction_stays_in_unit_interval(
            outcomes in prop::collection::vec(any::<bool>(), 1..200),
            rate in 0.0f64..=1.0,
        ) {
            let mut pred = AchievementPredictor::new(1, ContextKeying::None).with_rate(rate);
            let s = WorldState::all_off(1, 0.0);
            for o in outcomes {
                let r = pred.update_and_reward(GoalId(0), &s, o);
                let p = pred.predict(GoalId(0), &s);
                prop_assert!((0.0..=1.0).contains(&p));
                prop_assert!(r >= 0.0);
            }
        }

        #[test]
        fn full_state_keys_are_isolated(
            bits_a in 0u32..128, bits_b in 0u32..128, goal in 0usize..6, achieved: bool,
        ) {
            prop_assume!(bits_a != bits_b);
            let mut pred = AchievementPredictor::new(6, ContextKeying::FullSphereState);
            let a = WorldState::from_full_key(bits_a, 6);
            let b = WorldState::from_full_key(bits_b, 6);
            pred.update_and_reward(GoalId(goal), &b, true);
            let before: Vec<f64> = (0..6).map(|g| pred.predict(GoalId(g), &b)).collect();
            pred.update_and_reward(GoalId(goal), &a, achieved);
            let after: Vec<f64> = (0..6).map(|g| pred.predict(GoalId(g), &b)).collect();
            prop_assert_eq!(before, after);
        }
    }
}
