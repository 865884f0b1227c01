//! Autonomous learning of multiple interrelated tasks.
//!
//! A robot (here a pair of planar 4-DOF arms) learns to light up spheres by
//! touching them. Some spheres only light up under a contextual condition or
//! after other spheres are on. A goal selector picks which sphere to practice
//! each trial, driven by a competence-based intrinsic reward: the improvement
//! of a predictor of the probability of achieving the selected goal.
//!
//! Three selectors are provided:
//!
//! * [`System::Grail`]: context-blind bandit, one EMA per goal.
//! * [`System::CGrail`]: contextual bandit, one EMA per (context, goal).
//! * [`System::MGrail`]: Q-learning over the goal-selection MDP, so that the
//!   intrinsic value of a chain-end goal propagates back to its preconditions.
//!
//! The [`experiment`] module runs the trial loop and collects the metrics,
//! [`cli`] wraps it in a command-line tool.

pub mod arm;
pub mod cli;
pub mod config;
pub mod error;
pub mod experiment;
pub mod motivation;
pub mod plot;
pub mod selection;
pub mod skills;
pub mod world;

pub use error::{Error, Result};
pub use config::{Backend, ExperimentConfig, System};
pub use world::{GoalId, ScenarioSpec, WorldState};
