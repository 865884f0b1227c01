//! Low-level skill learning: two experts per goal (one per arm) and the
//! expert selector that picks between them.

pub mod actor_critic;
pub mod idealized;

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arm::ArmSide;
use crate::error::{Error, Result};
use crate::selection::SoftmaxRule;
use crate::world::GoalId;

pub use actor_critic::{ActorCriticExpert, ActorCriticParams, ExplorationNoise, Transition};
pub use idealized::{AttemptOutcome, IdealizedExpert, IdealizedParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ExpertId {
    pub goal: GoalId,
    pub arm: ArmSide,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Expert {
    Idealized(IdealizedExpert),
    ActorCritic(Box<ActorCriticExpert>),
}

/// What an expert learns from after a trial.
#[derive(Debug, Clone, PartialEq)]
pub enum Trajectory {
    Attempt(AttemptOutcome),
    Rollout(Vec<Transition>),
}

impl Expert {
    /// Learn from the trial just finished. With `gate == false` the expert is
    /// left exactly as it was.
    pub fn learn(&mut self, trajectory: &Trajectory, pseudo_reward: f64, gate: bool) -> Result<()> {
        if !gate {
            return Ok(());
        }
        match (self, trajectory) {
            (Expert::Idealized(e), Trajectory::Attempt(o)) => {
                e.learn(o, pseudo_reward, true);
                Ok(())
            }
            (Expert::ActorCritic(e), Trajectory::Rollout(t)) => e.learn(t, pseudo_reward).map(|_| ()),
            _ => Err(Error::Config(
                "trajectory kind does not match the expert backend".into(),
            )),
        }
    }
}

pub const DEFAULT_SELECTOR_SMOOTHING: f64 = 0.1;
pub const DEFAULT_SELECTOR_TEMPERATURE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectorParams {
    pub smoothing: f64,
    pub temperature: f64,
}

impl Default for SelectorParams {
    fn default() -> Self {
        Self {
            smoothing: DEFAULT_SELECTOR_SMOOTHING,
            temperature: DEFAULT_SELECTOR_TEMPERATURE,
        }
    }
}

/// Chooses which of a goal's two experts to train, by softmax over each
/// expert's success EMA.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSelector {
    pub ema: Vec<[f64; 2]>,
    pub smoothing: f64,
    pub temperature: f64,
}

impl ExpertSelector {
    pub fn new(num_goals: usize, params: &SelectorParams) -> Self {
        Self {
            ema: vec![[0.0; 2]; num_goals],
            smoothing: params.smoothing,
            temperature: params.temperature,
        }
    }

    pub fn probabilities(&self, goal: GoalId) -> [f64; 2] {
        let p = SoftmaxRule::new(self.temperature).probabilities(&self.ema[goal.0]);
        [p[0], p[1]]
    }

    pub fn select<R: Rng + ?Sized>(&self, goal: GoalId, rng: &mut R) -> ExpertId {
        let i = SoftmaxRule::new(self.temperature).sample(&self.ema[goal.0], rng);
        ExpertId {
            goal,
            arm: ArmSide::from_index(i),
        }
    }

    /// The expert with the higher success EMA (left on ties).
    pub fn preferred(&self, goal: GoalId) -> ExpertId {
        let [l, r] = self.ema[goal.0];
        ExpertId {
            goal,
            arm: if r > l { ArmSide::Right } else { ArmSide::Left },
        }
    }

    pub fn update(&mut self, expert: ExpertId, success: bool) {
        let v = &mut self.ema[expert.goal.0][expert.arm.index()];
        let outcome = if success { 1.0 } else { 0.0 };
        *v += self.smoothing * (outcome - *v);
    }
}

/// All experts of one simulation, `[left, right]` per goal.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpertSnapshot {
    pub experts: Vec<[Expert; 2]>,
    pub selector: ExpertSelector,
}

impl ExpertSnapshot {
    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn equal_emas_split_evenly() {
        let es = ExpertSelector::new(6, &SelectorParams::default());
        assert_eq!(es.probabilities(GoalId(2)), [0.5, 0.5]);
    }

    #[test]
    fn strong_preference() {
        // 1 / (1 + e^-8)
        let mut es = ExpertSelector::new(1, &SelectorParams::default());
        es.ema[0] = [0.9, 0.1];
        let p = es.probabilities(GoalId(0));
        assert_abs_diff_eq!(p[0], 1.0 / (1.0 + (-8f64).exp()), epsilon = 1e-12);
        assert_abs_diff_eq!(p[0], 0.99966, epsilon = 1e-5);
    }

    #[test]
    fn repeated_success_locks_in_one_arm() {
        let mut es = ExpertSelector::new(1, &SelectorParams::default());
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        for _ in 0..200 {
            let id = es.select(GoalId(0), &mut rng);
            es.update(id, id.arm == ArmSide::Right);
        }
        assert!(es.probabilities(GoalId(0))[1] > 0.9);
        assert_eq!(es.preferred(GoalId(0)).arm, ArmSide::Right);
    }

    #[test]
    fn closed_gate_leaves_any_expert_unchanged() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let mut ac = Expert::ActorCritic(Box::new(ActorCriticExpert::new(
            ActorCriticParams::default(),
            &crate::arm::ArmConfig::default(),
            &mut rng,
        )));
        let before = ac.clone();
        let j = crate::arm::JointState::new([0.1; 4]);
        let t = Transition {
            state: j,
            action: j,
            next_state: j,
            last: true,
            terminal: true,
        };
        ac.learn(&Trajectory::Rollout(vec![t]), 1.0, false).unwrap();
        assert_eq!(ac, before);
    }

    #[test]
    fn snapshot_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("experts.json");
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let mut ac = || {
            Expert::ActorCritic(Box::new(ActorCriticExpert::new(
                ActorCriticParams::default(),
                &crate::arm::ArmConfig::default(),
                &mut ChaCha8Rng::seed_from_u64(rng.random()),
            )))
        };
        let snap = ExpertSnapshot {
            experts: vec![[ac(), ac()], [
                Expert::Idealized(IdealizedExpert::new(&IdealizedParams::default())),
                Expert::Idealized(IdealizedExpert::new(&IdealizedParams::default())),
            ]],
            selector: ExpertSelector::new(2, &SelectorParams::default()),
        };
        snap.save(&path).unwrap();
        assert_eq!(ExpertSnapshot::load(&path).unwrap(), snap);
    }
}
