//! Fast stand-in expert whose skill is a single competence number.
//!
//! An attempt reaches the target with probability equal to the competence;
//! the sphere lights only if it was achievable. Learning mirrors what a
//! reward-driven controller would do: a rewarded reach raises competence, a
//! reach that produced no reward (the sphere was not achievable) is
//! disruptive and lowers it.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

pub const DEFAULT_INITIAL_COMPETENCE: f64 = 0.15;
pub const DEFAULT_LEARNING_RATE: f64 = 0.02;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IdealizedParams {
    pub initial_competence: f64,
    pub learning_rate: f64,
    /// Fractional competence loss after an unrewarded reach.
    pub disruption_rate: f64,
    /// Std-dev of Gaussian jitter on the per-attempt success probability.
    pub noise: f64,
}

impl Default for IdealizedParams {
    fn default() -> Self {
        Self {
            initial_competence: DEFAULT_INITIAL_COMPETENCE,
            learning_rate: DEFAULT_LEARNING_RATE,
            disruption_rate: DEFAULT_LEARNING_RATE,
            noise: 0.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct AttemptOutcome {
    /// The effector reached the target sphere.
    pub reached: bool,
    /// The target sphere lit up.
    pub achieved: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IdealizedExpert {
    pub competence: f64,
    pub learning_rate: f64,
    pub disruption_rate: f64,
    pub noise: f64,
}

impl IdealizedExpert {
    pub fn new(params: &IdealizedParams) -> Self {
        Self {
            competence: params.initial_competence.clamp(0.0, 1.0),
            learning_rate: params.learning_rate,
            disruption_rate: params.disruption_rate,
            noise: params.noise,
        }
    }

    pub fn attempt<R: Rng + ?Sized>(&self, achievable: bool, rng: &mut R) -> AttemptOutcome {
        let mut p = self.competence;
        if self.noise > 0.0 {
            let z: f64 = rng.sample(StandardNormal);
            p = (p + self.noise * z).clamp(0.0, 1.0);
        }
        let reached = rng.random::<f64>() < p;
        AttemptOutcome {
            reached,
            achieved: reached && achievable,
        }
    }

    pub fn learn(&mut self, outcome: &AttemptOutcome, pseudo_reward: f64, gate: bool) {
        if !gate {
            return;
        }
        let c = self.competence;
        self.competence = if outcome.achieved && pseudo_reward > 0.0 {
            c + self.learning_rate * (1.0 - c)
        } else if outcome.reached {
            c - self.disruption_rate * c
        } else {
            c
        }
        .clamp(0.0, 1.0);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn expert(c: f64, lr: f64) -> IdealizedExpert {
        IdealizedExpert {
            competence: c,
            learning_rate: lr,
            disruption_rate: lr,
            noise: 0.0,
        }
    }

    const SUCCESS: AttemptOutcome = AttemptOutcome {
        reached: true,
        achieved: true,
    };

    #[test]
    fn unachievable_never_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = expert(1.0, 0.1);
        assert!((0..1000).all(|_| !e.attempt(false, &mut rng).achieved));
    }

    #[test]
    fn full_competence_always_succeeds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let e = expert(1.0, 0.1);
        assert!((0..1000).all(|_| e.attempt(true, &mut rng).achieved));
    }

    #[test]
    fn success_rate_matches_competence() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let e = expert(0.5, 0.1);
        let n = 10_000;
        let hits = (0..n).filter(|_| e.attempt(true, &mut rng).achieved).count();
        assert!((hits as f64 / n as f64 - 0.5).abs() < 0.05);
    }

    #[test]
    fn success_update() {
        let mut e = expert(0.5, 0.1);
        e.learn(&SUCCESS, 1.0, true);
        assert_abs_diff_eq!(e.competence, 0.55, epsilon = 1e-15);

        let mut e = expert(1.0, 0.1);
        e.learn(&SUCCESS, 1.0, true);
        assert_eq!(e.competence, 1.0);
    }

    #[test]
    fn closed_gate_is_a_noop() {
        let mut e = expert(0.4, 0.1);
        let before = e.clone();
        e.learn(&SUCCESS, 1.0, false);
        e.learn(
            &AttemptOutcome {
                reached: true,
                achieved: false,
            },
            0.0,
            false,
        );
        assert_eq!(e, before);
    }

    #[test]
    fn unrewarded_reach_is_disruptive() {
        let mut e = expert(0.8, 0.1);
        e.learn(
            &AttemptOutcome {
                reached: true,
                achieved: false,
            },
            0.0,
            true,
        );
        assert_abs_diff_eq!(e.competence, 0.72, epsilon = 1e-15);
        let mut e = expert(0.8, 0.1);
        e.learn(&AttemptOutcome::default(), 0.0, true);
        assert_eq!(e.competence, 0.8);
    }

    proptest! {
        #[test]
        fn successes_never_lower_competence(c in 0.0f64..=1.0, lr in 0.0f64..=1.0, n in 1usize..50) {
            let mut e = expert(c, lr);
            let mut prev = e.competence;
            for _ in 0..n {
                e.learn(&SUCCESS, 1.0, true);
                prop_assert!(e.competence >= prev && e.competence <= 1.0);
                prev = e.competence;
            }
        }
    }
}
