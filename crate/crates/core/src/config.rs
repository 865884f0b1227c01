//! Experiment configuration, loadable from TOML.
//!
//! Every field has a default, so an empty file is a valid configuration.
//! `ExperimentConfig::default().to_toml_string()` prints the full set.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motivation::{ContextKeying, CpiRule, DEFAULT_GATE_THRESHOLD, DEFAULT_PREDICTOR_RATE};
use crate::skills::{ActorCriticParams, IdealizedParams, SelectorParams};
use crate::world::{builtin_scenario, ScenarioSpec};

/// Softmax temperature shared by every goal selector.
pub const DEFAULT_TEMPERATURE: f64 = 0.0015;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum System {
    Grail,
    CGrail,
    MGrail,
}

impl System {
    pub const ALL: [System; 3] = [System::Grail, System::CGrail, System::MGrail];

    pub fn name(self) -> &'static str {
        match self {
            System::Grail => "grail",
            System::CGrail => "c_grail",
            System::MGrail => "m_grail",
        }
    }
}

impl fmt::Display for System {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for System {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        System::ALL
            .into_iter()
            .find(|sys| sys.name() == s)
            .ok_or_else(|| {
                let valid: Vec<_> = System::ALL.iter().map(|s| s.name()).collect();
                Error::Config(format!("unknown system `{s}` (valid: {})", valid.join(", ")))
            })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    Idealized,
    ActorCritic,
}

impl Backend {
    pub const ALL: [Backend; 2] = [Backend::Idealized, Backend::ActorCritic];

    pub fn name(self) -> &'static str {
        match self {
            Backend::Idealized => "idealized",
            Backend::ActorCritic => "actor_critic",
        }
    }
}

impl fmt::Display for Backend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Backend {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Backend::ALL
            .into_iter()
            .find(|b| b.name() == s)
            .ok_or_else(|| {
                Error::Config(format!("unknown backend `{s}` (valid: idealized, actor_critic)"))
            })
    }
}

/// Table keying for the predictor and goal selector. `Auto` picks from the
/// scenario and system.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KeyingChoice {
    #[default]
    Auto,
    None,
    ContextFeature,
    FullSphereState,
}

/// Whether the learning gate is applied. `Auto` enables it for the
/// context-aware systems only.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GateChoice {
    #[default]
    Auto,
    On,
    Off,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SelectionParams {
    pub temperature: f64,
}

impl Default for SelectionParams {
    fn default() -> Self {
        Self {
            temperature: DEFAULT_TEMPERATURE,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MotivationParams {
    pub rate: f64,
    pub gate_threshold: f64,
    pub rule: CpiRule,
    pub gate: GateChoice,
}

impl Default for MotivationParams {
    fn default() -> Self {
        Self {
            rate: DEFAULT_PREDICTOR_RATE,
            gate_threshold: DEFAULT_GATE_THRESHOLD,
            rule: CpiRule::Clipped,
            gate: GateChoice::Auto,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    /// Built-in scenario (1, 2 or 3). Ignored when `scenario_file` is set.
    pub scenario: u8,
    pub scenario_file: Option<PathBuf>,
    pub system: System,
    pub backend: Backend,
    pub replications: usize,
    pub seed: u64,
    pub timeout_steps: usize,
    /// Trials between competence measurements.
    pub eval_interval: usize,
    /// Frozen-policy probes per goal for the actor-critic backend.
    pub eval_trials: usize,
    /// Worker threads for replications; 0 uses every core.
    pub jobs: usize,
    pub out: PathBuf,
    pub context_keying: KeyingChoice,
    /// Also write the goal-selector tables at every evaluation point.
    pub dump_values: bool,
    pub selection: SelectionParams,
    pub motivation: MotivationParams,
    pub idealized: IdealizedParams,
    pub actor_critic: ActorCriticParams,
    pub expert_selector: SelectorParams,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: 1,
            scenario_file: None,
            system: System::Grail,
            backend: Backend::Idealized,
            replications: 10,
            seed: 0,
            timeout_steps: 800,
            eval_interval: 50,
            eval_trials: 10,
            jobs: 0,
            out: PathBuf::from("results"),
            context_keying: KeyingChoice::Auto,
            dump_values: false,
            selection: SelectionParams::default(),
            motivation: MotivationParams::default(),
            idealized: IdealizedParams::default(),
            actor_critic: ActorCriticParams::default(),
            expert_selector: SelectorParams::default(),
        }
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be positive, got {v}")))
    }
}

fn unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} must be in [0, 1], got {v}")))
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config is always serializable")
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications == 0 {
            return Err(Error::Config("replications must be at least 1".into()));
        }
        if self.timeout_steps == 0 {
            return Err(Error::Config("timeout_steps must be positive".into()));
        }
        if self.eval_interval == 0 {
            return Err(Error::Config("eval_interval must be positive".into()));
        }
        if self.backend == Backend::ActorCritic && self.eval_trials == 0 {
            return Err(Error::Config("eval_trials must be positive".into()));
        }
        positive("selection.temperature", self.selection.temperature)?;
        positive("expert_selector.temperature", self.expert_selector.temperature)?;
        unit("expert_selector.smoothing", self.expert_selector.smoothing)?;
        unit("motivation.rate", self.motivation.rate)?;
        unit("motivation.gate_threshold", self.motivation.gate_threshold)?;
        unit("idealized.initial_competence", self.idealized.initial_competence)?;
        unit("idealized.learning_rate", self.idealized.learning_rate)?;
        unit("idealized.disruption_rate", self.idealized.disruption_rate)?;
        if !(self.idealized.noise.is_finite() && self.idealized.noise >= 0.0) {
            return Err(Error::Config("idealized.noise must be non-negative".into()));
        }
        let ac = &self.actor_critic;
        if ac.hidden_units == 0 {
            return Err(Error::Config("actor_critic.hidden_units must be positive".into()));
        }
        positive("actor_critic.actor_rate", ac.actor_rate)?;
        positive("actor_critic.critic_rate", ac.critic_rate)?;
        unit("actor_critic.discount", ac.discount)?;
        unit("actor_critic.noise_decay", ac.noise_decay)?;
        unit("actor_critic.noise_correlation", ac.noise_correlation)?;
        Ok(())
    }

    /// The scenario this configuration runs, validated.
    pub fn load_scenario(&self) -> Result<ScenarioSpec> {
        let spec = match &self.scenario_file {
            Some(path) => ScenarioSpec::from_path(path)?,
            None => builtin_scenario(self.scenario)?,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn keying_for(&self, spec: &ScenarioSpec) -> ContextKeying {
        match self.context_keying {
            KeyingChoice::None => ContextKeying::None,
            KeyingChoice::ContextFeature => ContextKeying::ContextFeature,
            KeyingChoice::FullSphereState => ContextKeying::FullSphereState,
            KeyingChoice::Auto => match self.system {
                System::Grail => ContextKeying::None,
                _ if spec.has_goal_dependencies() => ContextKeying::FullSphereState,
                _ if spec.has_context_rules() => ContextKeying::ContextFeature,
                _ => ContextKeying::None,
            },
        }
    }

    pub fn gate_enabled(&self) -> bool {
        match self.motivation.gate {
            GateChoice::On => true,
            GateChoice::Off => false,
            GateChoice::Auto => self.system != System::Grail,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_default() {
        assert_eq!(ExperimentConfig::from_toml_str("").unwrap(), ExperimentConfig::default());
    }

    #[test]
    fn printed_defaults_parse_back() {
        let cfg = ExperimentConfig {
            scenario_file: Some("s.toml".into()),
            ..Default::default()
        };
        let text = cfg.to_toml_string();
        assert!(text.contains("[selection]"));
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn nested_overrides() {
        let cfg = ExperimentConfig::from_toml_str(
            "system = \"m_grail\"\nscenario = 3\n[selection]\ntemperature = 0.1\n[motivation]\nrule = \"signed\"\n",
        )
        .unwrap();
        assert_eq!(cfg.system, System::MGrail);
        assert_eq!(cfg.selection.temperature, 0.1);
        assert_eq!(cfg.motivation.rule, CpiRule::Signed);
        assert_eq!(cfg.idealized, IdealizedParams::default());
    }

    #[test]
    fn unknown_key_rejected() {
        assert!(ExperimentConfig::from_toml_str("sistem = \"grail\"").is_err());
    }

    #[test]
    fn unknown_system_lists_valid_ones() {
        let msg = "x_grail".parse::<System>().unwrap_err().to_string();
        for s in ["grail", "c_grail", "m_grail"] {
            assert!(msg.contains(s));
        }
        assert_eq!("c_grail".parse::<System>().unwrap(), System::CGrail);
    }

    #[test]
    fn invalid_values_rejected() {
        for cfg in [
            ExperimentConfig { replications: 0, ..Default::default() },
            ExperimentConfig { timeout_steps: 0, ..Default::default() },
            ExperimentConfig {
                selection: SelectionParams { temperature: 0.0 },
                ..Default::default()
            },
        ] {
            assert!(cfg.validate().is_err());
        }
        ExperimentConfig::default().validate().unwrap();
    }

    #[test]
    fn automatic_keying() {
        let s2 = builtin_scenario(2).unwrap();
        let s3 = builtin_scenario(3).unwrap();
        let mut cfg = ExperimentConfig { system: System::CGrail, ..Default::default() };
        assert_eq!(cfg.keying_for(&s2), ContextKeying::ContextFeature);
        assert_eq!(cfg.keying_for(&s3), ContextKeying::FullSphereState);
        cfg.system = System::Grail;
        assert_eq!(cfg.keying_for(&s3), ContextKeying::None);
        assert!(!cfg.gate_enabled());
    }
}
