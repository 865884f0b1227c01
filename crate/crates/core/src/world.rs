//! Sphere-activation environment.
//!
//! Each goal is a sphere that lights up when touched while its dependency
//! rule holds. Rules are evaluated on the current activation status only:
//! spheres listed in `requires_on` must all be lit, spheres in `blocked_by`
//! must all be dark, and `requires_context` (when set) must equal the
//! contextual feature.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::arm::{self, ArmConfig, ArmSide, Point};
use crate::error::{Error, Result};

/// Index of a goal (sphere) inside its scenario.
#[derive(
    Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
pub struct GoalId(pub usize);

impl GoalId {
    pub fn index(self) -> usize {
        self.0
    }
}

impl fmt::Display for GoalId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ResetPolicy {
    PerTrial,
    PerEpoch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GoalSpec {
    pub label: String,
    pub position: Point,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DependencyRule {
    pub goal: GoalId,
    pub requires_on: Vec<GoalId>,
    pub blocked_by: Vec<GoalId>,
    pub requires_context: Option<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WorldState {
    pub sphere_on: Vec<bool>,
    pub context_feature: f64,
}

impl WorldState {
    pub fn all_off(num_goals: usize, context_feature: f64) -> Self {
        Self {
            sphere_on: vec![false; num_goals],
            context_feature,
        }
    }

    pub fn is_on(&self, goal: GoalId) -> bool {
        self.sphere_on[goal.0]
    }

    pub fn context_on(&self) -> bool {
        self.context_feature >= 0.5
    }

    /// Lit spheres as a bitmask, bit `i` for goal `i`.
    pub fn sphere_bits(&self) -> u32 {
        self.sphere_on
            .iter()
            .enumerate()
            .filter(|(_, on)| **on)
            .fold(0, |acc, (i, _)| acc | (1 << i))
    }

    /// Sphere bitmask with the contextual feature in the next bit up.
    pub fn full_key(&self) -> u32 {
        self.sphere_bits() | (u32::from(self.context_on()) << self.sphere_on.len())
    }

    pub fn from_full_key(key: u32, num_goals: usize) -> Self {
        Self {
            sphere_on: (0..num_goals).map(|i| key & (1 << i) != 0).collect(),
            context_feature: if key & (1 << num_goals) != 0 { 1.0 } else { 0.0 },
        }
    }

    pub fn num_lit(&self) -> usize {
        self.sphere_on.iter().filter(|on| **on).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioSpec {
    pub name: String,
    pub goals: Vec<GoalSpec>,
    /// One rule per goal, indexed by goal.
    pub rules: Vec<DependencyRule>,
    pub context_prob_on: f64,
    pub trials_per_epoch: usize,
    pub total_trials: usize,
    pub reset_policy: ResetPolicy,
    pub arm: ArmConfig,
}

pub const MAX_GOALS: usize = 16;
const LABELS: [&str; 6] = ["a", "b", "c", "d", "e", "f"];

impl ScenarioSpec {
    pub fn num_goals(&self) -> usize {
        self.goals.len()
    }

    pub fn goal_ids(&self) -> impl Iterator<Item = GoalId> {
        (0..self.goals.len()).map(GoalId)
    }

    pub fn label(&self, goal: GoalId) -> &str {
        &self.goals[goal.0].label
    }

    pub fn goal_by_label(&self, label: &str) -> Result<GoalId> {
        self.goals
            .iter()
            .position(|g| g.label == label)
            .map(GoalId)
            .ok_or_else(|| Error::UnknownGoal(label.to_string()))
    }

    pub fn num_epochs(&self) -> usize {
        self.total_trials / self.trials_per_epoch
    }

    fn check_goal(&self, goal: GoalId) -> Result<()> {
        if goal.0 < self.goals.len() {
            Ok(())
        } else {
            Err(Error::UnknownGoal(goal.to_string()))
        }
    }

    pub fn is_achievable(&self, goal: GoalId, state: &WorldState) -> Result<bool> {
        self.check_goal(goal)?;
        Ok(self.achievable_unchecked(goal, state))
    }

    pub(crate) fn achievable_unchecked(&self, goal: GoalId, state: &WorldState) -> bool {
        let rule = &self.rules[goal.0];
        !state.is_on(goal)
            && rule.requires_on.iter().all(|g| state.is_on(*g))
            && !rule.blocked_by.iter().any(|g| state.is_on(*g))
            && rule
                .requires_context
                .is_none_or(|c| (c >= 0.5) == state.context_on())
    }

    /// Touch a sphere. It lights up iff it was achievable; nothing else changes.
    pub fn apply_touch(&self, goal: GoalId, state: &WorldState) -> Result<(WorldState, bool)> {
        let mut next = state.clone();
        let achieved = self.touch_in_place(goal, &mut next)?;
        Ok((next, achieved))
    }

    pub fn touch_in_place(&self, goal: GoalId, state: &mut WorldState) -> Result<bool> {
        if self.is_achievable(goal, state)? {
            state.sphere_on[goal.0] = true;
            Ok(true)
        } else {
            Ok(false)
        }
    }

    /// All spheres off, contextual feature redrawn.
    pub fn reset<R: Rng + ?Sized>(&self, rng: &mut R) -> WorldState {
        let on = self.context_prob_on > 0.0 && rng.random::<f64>() < self.context_prob_on;
        WorldState::all_off(self.num_goals(), if on { 1.0 } else { 0.0 })
    }

    /// Whether the environment is reset before trial `trial` (0-based).
    pub fn resets_before(&self, trial: usize) -> bool {
        match self.reset_policy {
            ResetPolicy::PerTrial => true,
            ResetPolicy::PerEpoch => trial.is_multiple_of(self.trials_per_epoch),
        }
    }

    /// Whether trial `trial` is the last one before a reset.
    pub fn ends_episode(&self, trial: usize) -> bool {
        self.resets_before(trial + 1)
    }

    pub fn has_context_rules(&self) -> bool {
        self.rules.iter().any(|r| r.requires_context.is_some())
    }

    pub fn has_goal_dependencies(&self) -> bool {
        self.rules
            .iter()
            .any(|r| !r.requires_on.is_empty() || !r.blocked_by.is_empty())
    }

    /// Checks every structural invariant plus sphere reachability.
    pub fn validate(&self) -> Result<()> {
        self.validate_structure()?;
        self.validate_reachability()
    }

    pub fn validate_structure(&self) -> Result<()> {
        let n = self.goals.len();
        if n == 0 {
            return Err(Error::Config("scenario has no goals".into()));
        }
        if n > MAX_GOALS {
            return Err(Error::Config(format!(
                "scenario has {n} goals, at most {MAX_GOALS} are supported"
            )));
        }
        let mut labels = HashSet::new();
        for g in &self.goals {
            if !labels.insert(g.label.as_str()) {
                return Err(Error::Config(format!("duplicate goal label `{}`", g.label)));
            }
        }
        if self.rules.len() != n {
            return Err(Error::Config(format!(
                "expected exactly one rule per goal ({n}), found {}",
                self.rules.len()
            )));
        }
        for (i, rule) in self.rules.iter().enumerate() {
            if rule.goal.0 != i {
                return Err(Error::Config(format!(
                    "rule {i} is attached to goal {} instead of `{}`",
                    rule.goal, self.goals[i].label
                )));
            }
            let label = &self.goals[i].label;
            for g in rule.requires_on.iter().chain(&rule.blocked_by) {
                self.check_goal(*g)?;
            }
            if rule.requires_on.contains(&rule.goal) {
                return Err(Error::Config(format!("goal `{label}` requires itself")));
            }
            if let Some(g) = rule.requires_on.iter().find(|g| rule.blocked_by.contains(g)) {
                return Err(Error::Config(format!(
                    "goal `{label}` both requires and is blocked by `{}`",
                    self.label(*g)
                )));
            }
            if let Some(c) = rule.requires_context {
                if c != 0.0 && c != 1.0 {
                    return Err(Error::Config(format!(
                        "goal `{label}`: requires_context must be 0.0 or 1.0, got {c}"
                    )));
                }
            }
        }
        if let Some(cycle) = self.find_requirement_cycle() {
            return Err(Error::Cycle(
                cycle.into_iter().map(|g| self.label(g).to_string()).collect(),
            ));
        }
        if !(0.0..=1.0).contains(&self.context_prob_on) {
            return Err(Error::Config("context_prob_on must lie in [0, 1]".into()));
        }
        if self.trials_per_epoch == 0 || self.total_trials == 0 {
            return Err(Error::Config(
                "trials_per_epoch and total_trials must be positive".into(),
            ));
        }
        if !self.total_trials.is_multiple_of(self.trials_per_epoch) {
            return Err(Error::Config(format!(
                "total_trials {} is not a multiple of trials_per_epoch {}",
                self.total_trials, self.trials_per_epoch
            )));
        }
        self.arm.validate()
    }

    pub fn validate_reachability(&self) -> Result<()> {
        for g in &self.goals {
            for side in ArmSide::BOTH {
                if !arm::is_reachable(side, &g.position, &self.arm) {
                    return Err(Error::Unreachable {
                        goal: g.label.clone(),
                        arm: side.name().into(),
                        x: g.position.x,
                        y: g.position.y,
                    });
                }
            }
        }
        Ok(())
    }

    /// A `requires_on` cycle as a closed path (first goal repeated at the end).
    pub fn find_requirement_cycle(&self) -> Option<Vec<GoalId>> {
        #[derive(Clone, Copy, PartialEq)]
        enum Mark {
            New,
            Active,
            Done,
        }
        fn visit(
            spec: &ScenarioSpec,
            g: usize,
            marks: &mut [Mark],
            path: &mut Vec<GoalId>,
        ) -> Option<Vec<GoalId>> {
            marks[g] = Mark::Active;
            path.push(GoalId(g));
            for req in &spec.rules[g].requires_on {
                let r = req.0;
                match marks[r] {
                    Mark::Active => {
                        let start = path.iter().position(|p| p.0 == r).unwrap_or(0);
                        let mut cycle = path[start..].to_vec();
                        cycle.push(GoalId(r));
                        return Some(cycle);
                    }
                    Mark::New => {
                        if let Some(c) = visit(spec, r, marks, path) {
                            return Some(c);
                        }
                    }
                    Mark::Done => {}
                }
            }
            path.pop();
            marks[g] = Mark::Done;
            None
        }
        let n = self.rules.len();
        let mut marks = vec![Mark::New; n];
        for g in 0..n {
            if marks[g] == Mark::New {
                let mut path = Vec::new();
                if let Some(c) = visit(self, g, &mut marks, &mut path) {
                    return Some(c);
                }
            }
        }
        None
    }

    /// Human-readable dependency graph: maximal precondition chains, then
    /// blocking relations, then context requirements.
    pub fn describe_dependencies(&self) -> String {
        let mut out = String::new();
        let is_required: HashSet<usize> = self
            .rules
            .iter()
            .flat_map(|r| r.requires_on.iter().map(|g| g.0))
            .collect();
        // enablers[g] = goals that list g in requires_on
        let mut enables: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
        for r in &self.rules {
            for req in &r.requires_on {
                enables.entry(req.0).or_default().push(r.goal.0);
            }
        }
        let mut chains = Vec::new();
        fn walk(
            g: usize,
            enables: &BTreeMap<usize, Vec<usize>>,
            path: &mut Vec<usize>,
            out: &mut Vec<Vec<usize>>,
        ) {
            path.push(g);
            match enables.get(&g) {
                Some(next) if !next.is_empty() => {
                    for n in next {
                        walk(*n, enables, path, out);
                    }
                }
                _ => out.push(path.clone()),
            }
            path.pop();
        }
        for r in &self.rules {
            let g = r.goal.0;
            if r.requires_on.is_empty() && is_required.contains(&g) {
                walk(g, &enables, &mut Vec::new(), &mut chains);
            }
        }
        let arrow = |c: &Vec<usize>| {
            c.iter()
                .map(|g| self.goals[*g].label.as_str())
                .collect::<Vec<_>>()
                .join(" -> ")
        };
        if chains.is_empty() {
            out.push_str("chains: none\n");
        } else {
            for c in &chains {
                out.push_str(&format!("chain: {}\n", arrow(c)));
            }
        }
        let mut seen = HashSet::new();
        for r in &self.rules {
            for b in &r.blocked_by {
                let (x, y) = (r.goal.0.min(b.0), r.goal.0.max(b.0));
                let mutual = self.rules[b.0].blocked_by.contains(&r.goal);
                if mutual {
                    if seen.insert((x, y)) {
                        out.push_str(&format!(
                            "exclusive: {} -| {} (mutual)\n",
                            self.goals[x].label, self.goals[y].label
                        ));
                    }
                } else {
                    out.push_str(&format!(
                        "blocks: {} -| {}\n",
                        self.goals[b.0].label, self.goals[r.goal.0].label
                    ));
                }
            }
        }
        for r in &self.rules {
            if let Some(c) = r.requires_context {
                out.push_str(&format!(
                    "context: {} requires cf={c:.1}\n",
                    self.goals[r.goal.0].label
                ));
            }
        }
        let free: Vec<&str> = self
            .rules
            .iter()
            .filter(|r| {
                r.requires_on.is_empty()
                    && r.blocked_by.is_empty()
                    && r.requires_context.is_none()
                    && !is_required.contains(&r.goal.0)
            })
            .map(|r| self.goals[r.goal.0].label.as_str())
            .collect();
        if !free.is_empty() {
            out.push_str(&format!("unconditioned: {}\n", free.join(", ")));
        }
        out
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ScenarioFile = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        file.resolve()
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ScenarioFile = toml::from_str(&text).map_err(|e| Error::Parse {
            path: path.to_path_buf(),
            message: e.to_string(),
        })?;
        file.resolve()
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(&ScenarioFile::from(self)).expect("scenario serializes")
    }
}

/// Builtin scenarios: 1 = independent goals, 2 = context-dependent goals,
/// 3 = two mutually exclusive precondition chains.
pub fn builtin_scenario(id: u8) -> Result<ScenarioSpec> {
    let positions = arm::default_layout(LABELS.len());
    let goals: Vec<GoalSpec> = LABELS
        .iter()
        .zip(positions)
        .map(|(l, p)| GoalSpec {
            label: l.to_string(),
            position: p,
        })
        .collect();
    let free = |i| DependencyRule {
        goal: GoalId(i),
        ..Default::default()
    };
    let [a, b, c, d, e, f] = [0, 1, 2, 3, 4, 5].map(GoalId);
    let spec = match id {
        1 => ScenarioSpec {
            name: "independent".into(),
            goals,
            rules: (0..6).map(free).collect(),
            context_prob_on: 0.0,
            trials_per_epoch: 1,
            total_trials: 3000,
            reset_policy: ResetPolicy::PerTrial,
            arm: ArmConfig::default(),
        },
        2 => ScenarioSpec {
            name: "contextual".into(),
            goals,
            rules: (0..6)
                .map(|i| DependencyRule {
                    requires_context: Some(if i % 2 == 0 { 1.0 } else { 0.0 }),
                    ..free(i)
                })
                .collect(),
            context_prob_on: 0.5,
            trials_per_epoch: 1,
            total_trials: 4000,
            reset_policy: ResetPolicy::PerTrial,
            arm: ArmConfig::default(),
        },
        3 => {
            let rule = |g: GoalId, req: &[GoalId], blk: &[GoalId]| DependencyRule {
                goal: g,
                requires_on: req.to_vec(),
                blocked_by: blk.to_vec(),
                requires_context: None,
            };
            ScenarioSpec {
                name: "interrelated".into(),
                goals,
                rules: vec![
                    rule(a, &[f], &[]),
                    rule(b, &[], &[d]),
                    rule(c, &[d], &[]),
                    rule(d, &[], &[b]),
                    rule(e, &[c], &[]),
                    rule(f, &[b], &[]),
                ],
                context_prob_on: 0.0,
                trials_per_epoch: 3,
                total_trials: 6000,
                reset_policy: ResetPolicy::PerEpoch,
                arm: ArmConfig::default(),
            }
        }
        other => {
            return Err(Error::Config(format!(
                "unknown builtin scenario {other} (valid: 1, 2, 3)"
            )))
        }
    };
    Ok(spec)
}

// ── File format ─────────────────────────────────────────────────────────

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScenarioFile {
    #[serde(default = "default_name")]
    name: String,
    #[serde(default)]
    context_prob_on: f64,
    #[serde(default = "one")]
    trials_per_epoch: usize,
    total_trials: usize,
    #[serde(default = "default_reset")]
    reset_policy: ResetPolicy,
    goals: Vec<GoalEntry>,
    #[serde(default)]
    rules: Vec<RuleEntry>,
    #[serde(default)]
    arm: ArmConfig,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GoalEntry {
    label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    position: Option<[f64; 2]>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RuleEntry {
    goal: String,
    #[serde(default)]
    requires_on: Vec<String>,
    #[serde(default)]
    blocked_by: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    requires_context: Option<f64>,
}

fn default_name() -> String {
    "custom".into()
}

fn one() -> usize {
    1
}

fn default_reset() -> ResetPolicy {
    ResetPolicy::PerTrial
}

impl ScenarioFile {
    fn resolve(self) -> Result<ScenarioSpec> {
        let layout = arm::default_layout(self.goals.len());
        let goals: Vec<GoalSpec> = self
            .goals
            .iter()
            .zip(layout)
            .map(|(g, p)| GoalSpec {
                label: g.label.clone(),
                position: g.position.map(|[x, y]| Point::new(x, y)).unwrap_or(p),
            })
            .collect();
        let index = |label: &str| {
            goals
                .iter()
                .position(|g| g.label == label)
                .map(GoalId)
                .ok_or_else(|| Error::UnknownGoal(label.to_string()))
        };
        let mut rules: Vec<Option<DependencyRule>> = vec![None; goals.len()];
        for r in &self.rules {
            let goal = index(&r.goal)?;
            if rules[goal.0].is_some() {
                return Err(Error::Config(format!("goal `{}` has more than one rule", r.goal)));
            }
            rules[goal.0] = Some(DependencyRule {
                goal,
                requires_on: r.requires_on.iter().map(|l| index(l)).collect::<Result<_>>()?,
                blocked_by: r.blocked_by.iter().map(|l| index(l)).collect::<Result<_>>()?,
                requires_context: r.requires_context,
            });
        }
        // goals without an explicit rule are unconditioned
        let rules = rules
            .into_iter()
            .enumerate()
            .map(|(i, r)| {
                r.unwrap_or(DependencyRule {
                    goal: GoalId(i),
                    ..Default::default()
                })
            })
            .collect();
        let spec = ScenarioSpec {
            name: self.name,
            goals,
            rules,
            context_prob_on: self.context_prob_on,
            trials_per_epoch: self.trials_per_epoch,
            total_trials: self.total_trials,
            reset_policy: self.reset_policy,
            arm: self.arm,
        };
        spec.validate_structure()?;
        Ok(spec)
    }
}

impl From<&ScenarioSpec> for ScenarioFile {
    fn from(s: &ScenarioSpec) -> Self {
        let label = |g: &GoalId| s.goals[g.0].label.clone();
        ScenarioFile {
            name: s.name.clone(),
            context_prob_on: s.context_prob_on,
            trials_per_epoch: s.trials_per_epoch,
            total_trials: s.total_trials,
            reset_policy: s.reset_policy,
            goals: s
                .goals
                .iter()
                .map(|g| GoalEntry {
                    label: g.label.clone(),
                    position: Some([g.position.x, g.position.y]),
                })
                .collect(),
            rules: s
                .rules
                .iter()
                .map(|r| RuleEntry {
                    goal: label(&r.goal),
                    requires_on: r.requires_on.iter().map(label).collect(),
                    blocked_by: r.blocked_by.iter().map(label).collect(),
                    requires_context: r.requires_context,
                })
                .collect(),
            arm: s.arm.clone(),
        }
    }
}
