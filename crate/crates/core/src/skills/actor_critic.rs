//! Continuous actor-critic expert.
//!
//! Actor and critic are one-hidden-layer tanh networks fed with the four
//! joint angles (scaled by 1/π). The actor outputs four desired joint angles
//! squashed into the joint limits; exploration adds temporally correlated
//! Gaussian noise (an Ornstein-Uhlenbeck style AR(1) process) whose scale
//! decays with the number of learning trials.
//!
//! Learning is TD(0) over the trajectory of the finished trial, replayed from
//! the last transition to the first so a terminal reward reaches the early
//! states in one pass. The critic follows the semi-gradient of the squared
//! TD error; the actor moves its mean toward the executed action in
//! proportion to the TD error.

use std::f64::consts::PI;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::arm::{ArmConfig, JointState, NUM_JOINTS};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ActorCriticParams {
    pub hidden_units: usize,
    pub actor_rate: f64,
    pub critic_rate: f64,
    pub discount: f64,
    /// Initial exploration noise std-dev (radians).
    pub noise_initial: f64,
    pub noise_min: f64,
    /// Multiplicative noise decay per learning trial.
    pub noise_decay: f64,
    /// AR(1) coefficient of the exploration noise between timesteps.
    pub noise_correlation: f64,
    pub init_scale: f64,
}

impl Default for ActorCriticParams {
    fn default() -> Self {
        Self {
            hidden_units: 20,
            actor_rate: 0.05,
            critic_rate: 0.05,
            discount: 0.99,
            noise_initial: 0.8,
            noise_min: 0.05,
            noise_decay: 0.998,
            noise_correlation: 0.95,
            init_scale: 0.1,
        }
    }
}

/// One hidden layer, tanh hidden units, linear outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    inputs: usize,
    hidden: usize,
    outputs: usize,
    w1: Vec<f64>,
    b1: Vec<f64>,
    w2: Vec<f64>,
    b2: Vec<f64>,
}

impl Mlp {
    pub fn new<R: Rng + ?Sized>(
        inputs: usize,
        hidden: usize,
        outputs: usize,
        scale: f64,
        rng: &mut R,
    ) -> Self {
        let mut init = |n: usize| -> Vec<f64> {
            (0..n).map(|_| scale * rng.random_range(-1.0..1.0)).collect()
        };
        Self {
            inputs,
            hidden,
            outputs,
            w1: init(hidden * inputs),
            b1: vec![0.0; hidden],
            w2: init(outputs * hidden),
            b2: vec![0.0; outputs],
        }
    }

    fn hidden_activations(&self, x: &[f64]) -> Vec<f64> {
        (0..self.hidden)
            .map(|h| {
                let row = &self.w1[h * self.inputs..(h + 1) * self.inputs];
                (self.b1[h] + row.iter().zip(x).map(|(w, v)| w * v).sum::<f64>()).tanh()
            })
            .collect()
    }

    fn output_from(&self, hidden: &[f64]) -> Vec<f64> {
        (0..self.outputs)
            .map(|o| {
                let row = &self.w2[o * self.hidden..(o + 1) * self.hidden];
                self.b2[o] + row.iter().zip(hidden).map(|(w, v)| w * v).sum::<f64>()
            })
            .collect()
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        self.output_from(&self.hidden_activations(x))
    }

    /// Gradient step `θ += Σ_o out_grad[o] · ∂y_o/∂θ` at input `x`.
    fn backprop_step(&mut self, x: &[f64], out_grad: &[f64]) {
        let h = self.hidden_activations(x);
        let mut hidden_grad = vec![0.0; self.hidden];
        for (o, g) in out_grad.iter().enumerate() {
            if *g == 0.0 {
                continue;
            }
            for j in 0..self.hidden {
                hidden_grad[j] += g * self.w2[o * self.hidden + j];
                self.w2[o * self.hidden + j] += g * h[j];
            }
            self.b2[o] += g;
        }
        for j in 0..self.hidden {
            let d = hidden_grad[j] * (1.0 - h[j] * h[j]);
            if d == 0.0 {
                continue;
            }
            for (i, v) in x.iter().enumerate() {
                self.w1[j * self.inputs + i] += d * v;
            }
            self.b1[j] += d;
        }
    }

    pub fn parameters(&self) -> impl Iterator<Item = &f64> {
        self.w1.iter().chain(&self.b1).chain(&self.w2).chain(&self.b2)
    }

    pub fn is_finite(&self) -> bool {
        self.parameters().all(|p| p.is_finite())
    }
}

/// Temporally correlated exploration noise for one rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct ExplorationNoise {
    scale: f64,
    correlation: f64,
    state: [f64; NUM_JOINTS],
    primed: bool,
}

impl ExplorationNoise {
    pub fn new(scale: f64, correlation: f64) -> Self {
        Self {
            scale,
            correlation,
            state: [0.0; NUM_JOINTS],
            primed: false,
        }
    }

    pub fn off() -> Self {
        Self::new(0.0, 0.0)
    }

    pub fn is_off(&self) -> bool {
        self.scale == 0.0
    }

    pub fn sample<R: Rng + ?Sized>(&mut self, rng: &mut R) -> [f64; NUM_JOINTS] {
        if self.is_off() {
            return [0.0; NUM_JOINTS];
        }
        let innovation = (1.0 - self.correlation * self.correlation).sqrt() * self.scale;
        for s in &mut self.state {
            let z: f64 = rng.sample(StandardNormal);
            // first draw starts from the stationary distribution
            *s = if self.primed {
                self.correlation * *s + innovation * z
            } else {
                self.scale * z
            };
        }
        self.primed = true;
        self.state
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Transition {
    pub state: JointState,
    pub action: JointState,
    pub next_state: JointState,
    /// The trial ended with this transition (touch or timeout).
    pub last: bool,
    /// The trial ended by a touch rather than a timeout.
    pub terminal: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorCriticExpert {
    pub params: ActorCriticParams,
    actor: Mlp,
    critic: Mlp,
    /// Gated learning trials so far; drives the noise schedule.
    pub episodes: u64,
    limits: [[f64; 2]; NUM_JOINTS],
}

fn features(j: &JointState) -> [f64; NUM_JOINTS] {
    j.angles.map(|a| a / PI)
}

impl ActorCriticExpert {
    pub fn new<R: Rng + ?Sized>(params: ActorCriticParams, arm: &ArmConfig, rng: &mut R) -> Self {
        Self {
            actor: Mlp::new(NUM_JOINTS, params.hidden_units, NUM_JOINTS, params.init_scale, rng),
            critic: Mlp::new(NUM_JOINTS, params.hidden_units, 1, params.init_scale, rng),
            params,
            episodes: 0,
            limits: arm.joint_limits,
        }
    }

    pub fn noise_scale(&self) -> f64 {
        (self.params.noise_initial * self.params.noise_decay.powf(self.episodes as f64))
            .max(self.params.noise_min)
    }

    pub fn exploration(&self) -> ExplorationNoise {
        ExplorationNoise::new(self.noise_scale(), self.params.noise_correlation)
    }

    fn squash(&self, pre: &[f64]) -> [f64; NUM_JOINTS] {
        let mut out = [0.0; NUM_JOINTS];
        for i in 0..NUM_JOINTS {
            let [lo, hi] = self.limits[i];
            out[i] = 0.5 * (lo + hi) + 0.5 * (hi - lo) * pre[i].tanh();
        }
        out
    }

    /// Deterministic policy output.
    pub fn mean_action(&self, joints: &JointState) -> JointState {
        JointState::new(self.squash(&self.actor.forward(&features(joints))))
    }

    /// Mean action plus exploration noise, clamped to the joint limits.
    pub fn act<R: Rng + ?Sized>(
        &self,
        joints: &JointState,
        noise: &mut ExplorationNoise,
        rng: &mut R,
    ) -> JointState {
        let mean = self.mean_action(joints);
        let eps = noise.sample(rng);
        let mut out = mean.angles;
        for i in 0..NUM_JOINTS {
            let [lo, hi] = self.limits[i];
            out[i] = (out[i] + eps[i]).clamp(lo, hi);
        }
        JointState::new(out)
    }

    pub fn value(&self, joints: &JointState) -> f64 {
        self.critic.forward(&features(joints))[0]
    }

    /// TD(0) update from a finished trial. The pseudo-reward is delivered on
    /// the final transition. Returns the mean absolute TD error.
    pub fn learn(&mut self, trajectory: &[Transition], pseudo_reward: f64) -> Result<f64> {
        if trajectory.is_empty() {
            return Ok(0.0);
        }
        let gamma = self.params.discount;
        let mut total = 0.0;
        for t in trajectory.iter().rev() {
            let x = features(&t.state);
            let reward = if t.last { pseudo_reward } else { 0.0 };
            let bootstrap = if t.terminal {
                0.0
            } else {
                gamma * self.value(&t.next_state)
            };
            let delta = reward + bootstrap - self.critic.forward(&x)[0];
            total += delta.abs();

            self.critic.backprop_step(&x, &[self.params.critic_rate * delta]);

            let pre = self.actor.forward(&x);
            let mut grad = [0.0; NUM_JOINTS];
            for i in 0..NUM_JOINTS {
                let [lo, hi] = self.limits[i];
                let half = 0.5 * (hi - lo);
                let mean = 0.5 * (lo + hi) + half * pre[i].tanh();
                let th = pre[i].tanh();
                // ∂mean/∂pre = half·(1 − tanh²); exploration error in units of the half range
                grad[i] = self.params.actor_rate * delta * (t.action.angles[i] - mean) / half
                    * (1.0 - th * th);
            }
            self.actor.backprop_step(&x, &grad);
        }
        if !(self.actor.is_finite() && self.critic.is_finite()) {
            return Err(Error::NonFinite("actor-critic parameters".into()));
        }
        self.episodes += 1;
        Ok(total / trajectory.len() as f64)
    }

    pub fn parameters(&self) -> Vec<f64> {
        self.actor
            .parameters()
            .chain(self.critic.parameters())
            .copied()
            .collect()
    }
}
