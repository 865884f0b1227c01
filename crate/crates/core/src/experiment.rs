//! Trial loop, replications and metrics.
//!
//! One [`Simulation`] is a single replication: a goal selector, a predictor,
//! two experts per goal and the expert selector, all driven by one seeded
//! generator. [`run_experiment`] runs the replications (in parallel when
//! allowed) and gathers per-replication and aggregate series.

use std::fs::File;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::arm::{check_touch, effector_position, step_toward, JointState, Point};
use crate::config::{Backend, ExperimentConfig, System};
use crate::error::{Error, Result};
use crate::motivation::{AchievementPredictor, ContextKey, ContextKeying};
use crate::selection::{
    BanditValues, ContextualValues, GoalSelector, QValues, SelectionFeedback, SoftmaxRule,
};
use crate::skills::{
    ActorCriticExpert, Expert, ExpertId, ExpertSelector, ExpertSnapshot, ExplorationNoise,
    IdealizedExpert, Trajectory, Transition,
};
use crate::world::{GoalId, ScenarioSpec, WorldState};

/// Largest joint offset (radians) applied to the home posture in
/// actor-critic evaluation probes.
const EVAL_JITTER: f64 = 0.05;
const EVAL_STREAM_OFFSET: u64 = 1 << 32;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub epoch: usize,
    /// [`WorldState::full_key`] of the state the goal was selected in.
    pub state_key: u32,
    pub goal: GoalId,
    pub achievable: bool,
    pub achieved: bool,
    pub reward: f64,
    pub steps: usize,
}

impl TrialRecord {
    pub fn wasted(&self) -> bool {
        !self.achievable
    }
}

struct Rollout {
    trajectory: Trajectory,
    touched: Option<GoalId>,
    steps: usize,
}

pub struct Simulation {
    spec: ScenarioSpec,
    system: System,
    backend: Backend,
    keying: ContextKeying,
    gate_enabled: bool,
    timeout_steps: usize,
    eval_trials: usize,
    selector: GoalSelector,
    predictor: AchievementPredictor,
    experts: Vec<[Expert; 2]>,
    expert_selector: ExpertSelector,
    spheres: Vec<Point>,
    state: WorldState,
    trial: usize,
    rng: ChaCha8Rng,
    eval_rng: ChaCha8Rng,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig, spec: ScenarioSpec, replication: usize) -> Result<Self> {
        cfg.validate()?;
        let n = spec.num_goals();
        let keying = cfg.keying_for(&spec);
        let softmax = SoftmaxRule::new(cfg.selection.temperature);
        let selector = match cfg.system {
            System::Grail => GoalSelector::Bandit(BanditValues::new(n), softmax),
            System::CGrail => GoalSelector::Contextual(ContextualValues::new(n), softmax),
            System::MGrail => GoalSelector::QLearning(QValues::new(n), softmax),
        };
        let predictor = AchievementPredictor::new(n, keying)
            .with_rate(cfg.motivation.rate)
            .with_rule(cfg.motivation.rule)
            .with_gate_threshold(cfg.motivation.gate_threshold);

        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(replication as u64);
        let mut eval_rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        eval_rng.set_stream(EVAL_STREAM_OFFSET + replication as u64);

        let experts = (0..n)
            .map(|_| {
                let mut make = || match cfg.backend {
                    Backend::Idealized => Expert::Idealized(IdealizedExpert::new(&cfg.idealized)),
                    Backend::ActorCritic => Expert::ActorCritic(Box::new(ActorCriticExpert::new(
                        cfg.actor_critic,
                        &spec.arm,
                        &mut rng,
                    ))),
                };
                [make(), make()]
            })
            .collect();

        let state = WorldState::all_off(n, 0.0);
        Ok(Self {
            spheres: spec.goals.iter().map(|g| g.position).collect(),
            expert_selector: ExpertSelector::new(n, &cfg.expert_selector),
            system: cfg.system,
            backend: cfg.backend,
            gate_enabled: cfg.gate_enabled(),
            timeout_steps: cfg.timeout_steps,
            eval_trials: cfg.eval_trials,
            keying,
            selector,
            predictor,
            experts,
            state,
            trial: 0,
            rng,
            eval_rng,
            spec,
        })
    }

    pub fn scenario(&self) -> &ScenarioSpec {
        &self.spec
    }

    pub fn system(&self) -> System {
        self.system
    }

    pub fn keying(&self) -> ContextKeying {
        self.keying
    }

    /// Trials completed so far.
    pub fn trial(&self) -> usize {
        self.trial
    }

    pub fn is_done(&self) -> bool {
        self.trial >= self.spec.total_trials
    }

    pub fn state(&self) -> &WorldState {
        &self.state
    }

    pub fn selector(&self) -> &GoalSelector {
        &self.selector
    }

    pub fn predictor(&self) -> &AchievementPredictor {
        &self.predictor
    }

    pub fn expert_selector(&self) -> &ExpertSelector {
        &self.expert_selector
    }

    pub fn expert(&self, id: ExpertId) -> &Expert {
        &self.experts[id.goal.0][id.arm.index()]
    }

    pub fn snapshot(&self) -> ExpertSnapshot {
        ExpertSnapshot {
            experts: self.experts.clone(),
            selector: self.expert_selector.clone(),
        }
    }

    /// Runs one trial: reset if due, select a goal and an expert, attempt,
    /// update the world, then the predictor, expert, expert selector and goal
    /// selector in that order. A closed learning gate blocks both the expert
    /// and the expert selector.
    pub fn run_trial(&mut self) -> Result<TrialRecord> {
        if self.is_done() {
            return Err(Error::Config(format!(
                "scenario schedule of {} trials is complete",
                self.spec.total_trials
            )));
        }
        let t = self.trial;
        if self.spec.resets_before(t) {
            self.state = self.spec.reset(&mut self.rng);
        }
        let before = self.state.clone();
        let key = self.keying.key(&before);
        let goal = self.selector.select(key, &mut self.rng);
        let achievable = self.spec.achievable_unchecked(goal, &before);
        let expert_id = self.expert_selector.select(goal, &mut self.rng);

        let rollout = match self.backend {
            Backend::Idealized => {
                let Expert::Idealized(e) = &self.experts[goal.0][expert_id.arm.index()] else {
                    unreachable!("backend and expert kind always agree")
                };
                let outcome = e.attempt(achievable, &mut self.rng);
                Rollout {
                    touched: outcome.reached.then_some(goal),
                    trajectory: Trajectory::Attempt(outcome),
                    steps: 1,
                }
            }
            Backend::ActorCritic => {
                let start = self.spec.arm.home_state();
                let mut noise = match self.expert(expert_id) {
                    Expert::ActorCritic(e) => e.exploration(),
                    Expert::Idealized(_) => unreachable!("backend and expert kind always agree"),
                };
                self.rollout_with(expert_id, start, &mut noise, false)
            }
        };

        let lit = match rollout.touched {
            Some(g) => self.spec.touch_in_place(g, &mut self.state)?,
            None => false,
        };
        let achieved = lit && rollout.touched == Some(goal);

        let gate = !self.gate_enabled || self.predictor.learning_gate(goal, &before, achieved);
        let reward = self.predictor.update_and_reward(goal, &before, achieved);
        let pseudo_reward = if achieved { 1.0 } else { 0.0 };
        self.experts[goal.0][expert_id.arm.index()].learn(&rollout.trajectory, pseudo_reward, gate)?;
        if gate {
            self.expert_selector.update(expert_id, achieved);
        }

        let next_key = self.keying.key(&self.state);
        self.selector.update(SelectionFeedback {
            key,
            goal,
            reward,
            next_key,
            terminal: self.spec.ends_episode(t),
        });
        let value = self.selector.values(key)[goal.0];
        if !(reward.is_finite() && value.is_finite()) {
            return Err(Error::NonFinite(format!(
                "trial {t}: reward {reward}, value {value} for goal {}",
                self.spec.label(goal)
            )));
        }

        self.trial += 1;
        Ok(TrialRecord {
            trial: t,
            epoch: t / self.spec.trials_per_epoch,
            state_key: before.full_key(),
            goal,
            achievable,
            achieved,
            reward,
            steps: rollout.steps,
        })
    }

    /// Drives an actor-critic expert from `start` until it touches any sphere
    /// or times out. With `eval` the main generator is left untouched.
    fn rollout_with(
        &mut self,
        id: ExpertId,
        start: JointState,
        noise: &mut ExplorationNoise,
        eval: bool,
    ) -> Rollout {
        let Expert::ActorCritic(expert) = &self.experts[id.goal.0][id.arm.index()] else {
            unreachable!("rollouts only run for actor-critic experts")
        };
        let rng = if eval { &mut self.eval_rng } else { &mut self.rng };
        let arm = &self.spec.arm;
        let mut joints = start;
        let mut trajectory = Vec::with_capacity(if eval { 0 } else { self.timeout_steps });
        for step in 0..self.timeout_steps {
            let desired = expert.act(&joints, noise, rng);
            let next = step_toward(&joints, &desired, arm);
            let effector = effector_position(id.arm, &next, arm);
            let touched = self
                .spheres
                .iter()
                .position(|p| check_touch(&effector, p, arm))
                .map(GoalId);
            if !eval {
                trajectory.push(Transition {
                    state: joints,
                    action: desired,
                    next_state: next,
                    last: touched.is_some() || step + 1 == self.timeout_steps,
                    terminal: touched.is_some(),
                });
            }
            joints = next;
            if touched.is_some() {
                return Rollout {
                    trajectory: Trajectory::Rollout(trajectory),
                    touched,
                    steps: step + 1,
                };
            }
        }
        Rollout {
            trajectory: Trajectory::Rollout(trajectory),
            touched: None,
            steps: self.timeout_steps,
        }
    }

    /// Competence on `goal` of the expert the expert selector prefers. For
    /// idealized experts this is the competence value; actor-critic experts
    /// are probed with frozen, noise-free rollouts from jittered home
    /// postures, counting a success when the goal's sphere is the first one
    /// touched. No learner is updated.
    pub fn measure_competence(&mut self, goal: GoalId) -> f64 {
        let id = self.expert_selector.preferred(goal);
        if let Expert::Idealized(e) = self.expert(id) {
            return e.competence;
        }
        let home = self.spec.arm.home_state();
        let mut hits = 0;
        for _ in 0..self.eval_trials {
            let start = self.spec.arm.clamp_to_limits(std::array::from_fn(|i| {
                home.angles[i] + self.eval_rng.random_range(-EVAL_JITTER..=EVAL_JITTER)
            }));
            let r = self.rollout_with(id, start, &mut ExplorationNoise::off(), true);
            if r.touched == Some(goal) {
                hits += 1;
            }
        }
        hits as f64 / self.eval_trials as f64
    }

    pub fn competences(&mut self) -> Vec<f64> {
        (0..self.spec.num_goals())
            .map(|g| self.measure_competence(GoalId(g)))
            .collect()
    }
}

/// Trials in `range` whose goal was not achievable when selected.
pub fn count_wasted(records: &[TrialRecord], range: std::ops::Range<usize>) -> usize {
    records
        .iter()
        .filter(|r| range.contains(&r.trial) && r.wasted())
        .count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompetencePoint {
    /// Trials completed when measured.
    pub trial_index: usize,
    pub values: Vec<f64>,
}

/// Goal-selector values per context.
pub type ValueTable = Vec<(ContextKey, Vec<f64>)>;

#[derive(Debug, Clone, PartialEq)]
pub struct ReplicationResult {
    pub replication: usize,
    pub records: Vec<TrialRecord>,
    pub competence: Vec<CompetencePoint>,
    /// `(interval_end, cumulative_wasted)`.
    pub wasted: Vec<(usize, usize)>,
    pub predictor: AchievementPredictor,
    /// Goal-selector tables at each evaluation point, when requested.
    pub values: Vec<(usize, ValueTable)>,
}

impl ReplicationResult {
    pub fn final_competence(&self) -> &[f64] {
        &self.competence.last().expect("at least the initial point").values
    }

    /// First trial index at which every goal's competence is at least
    /// `threshold`.
    pub fn all_above(&self, threshold: f64) -> Option<usize> {
        self.competence
            .iter()
            .find(|p| p.values.iter().all(|v| *v >= threshold))
            .map(|p| p.trial_index)
    }
}

pub fn run_replication(
    cfg: &ExperimentConfig,
    spec: &ScenarioSpec,
    replication: usize,
) -> Result<ReplicationResult> {
    let mut sim = Simulation::new(cfg, spec.clone(), replication)?;
    let total = spec.total_trials;
    let mut records = Vec::with_capacity(total);
    let mut competence = vec![CompetencePoint {
        trial_index: 0,
        values: sim.competences(),
    }];
    let mut wasted = Vec::new();
    let mut values = Vec::new();
    if cfg.dump_values {
        values.push((0, sim.selector().rows()));
    }
    let mut cumulative = 0;
    while !sim.is_done() {
        let rec = sim.run_trial()?;
        cumulative += usize::from(rec.wasted());
        records.push(rec);
        let done = sim.trial();
        if done % cfg.eval_interval == 0 || done == total {
            competence.push(CompetencePoint {
                trial_index: done,
                values: sim.competences(),
            });
            wasted.push((done, cumulative));
            if cfg.dump_values {
                values.push((done, sim.selector().rows()));
            }
        }
    }
    log::debug!(
        "replication {replication}: final competence {:?}",
        competence.last().map(|p| &p.values)
    );
    Ok(ReplicationResult {
        replication,
        records,
        competence,
        wasted,
        predictor: sim.predictor().clone(),
        values,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Summary {
    pub mean: f64,
    pub ci_low: f64,
    pub ci_high: f64,
}

/// Mean with a normal 95% interval, mean ± 1.96·SE.
pub fn summarize(xs: &[f64]) -> Summary {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let se = if xs.len() > 1 {
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
        (var / n).sqrt()
    } else {
        0.0
    };
    Summary {
        mean,
        ci_low: mean - 1.96 * se,
        ci_high: mean + 1.96 * se,
    }
}

#[derive(Debug, Clone)]
pub struct ExperimentResult {
    pub config: ExperimentConfig,
    pub scenario: ScenarioSpec,
    pub replications: Vec<ReplicationResult>,
}

impl ExperimentResult {
    pub fn labels(&self) -> Vec<String> {
        self.scenario.goals.iter().map(|g| g.label.clone()).collect()
    }

    /// `(trial_index, goal, summary)` over replications.
    pub fn competence_aggregate(&self) -> Vec<(usize, GoalId, Summary)> {
        let first = &self.replications[0];
        let mut out = Vec::new();
        for (i, point) in first.competence.iter().enumerate() {
            for g in self.scenario.goal_ids() {
                let xs: Vec<f64> = self
                    .replications
                    .iter()
                    .map(|r| r.competence[i].values[g.0])
                    .collect();
                out.push((point.trial_index, g, summarize(&xs)));
            }
        }
        out
    }

    /// `(interval_end, summary)` of the cumulative wasted counts.
    pub fn wasted_aggregate(&self) -> Vec<(usize, Summary)> {
        let first = &self.replications[0];
        (0..first.wasted.len())
            .map(|i| {
                let xs: Vec<f64> = self
                    .replications
                    .iter()
                    .map(|r| r.wasted[i].1 as f64)
                    .collect();
                (first.wasted[i].0, summarize(&xs))
            })
            .collect()
    }

    /// Writes every CSV output plus the resolved `config.toml` into `dir`.
    pub fn write_outputs(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let labels = self.labels();

        write_csv(&dir.join("trials.csv"), |w| {
            w.write_record([
                "replication", "trial", "epoch", "state_key", "goal", "achievable", "achieved",
                "reward", "steps",
            ])?;
            for rep in &self.replications {
                for r in &rep.records {
                    w.write_record([
                        rep.replication.to_string(),
                        r.trial.to_string(),
                        r.epoch.to_string(),
                        r.state_key.to_string(),
                        labels[r.goal.0].clone(),
                        r.achievable.to_string(),
                        r.achieved.to_string(),
                        format!("{:.8}", r.reward),
                        r.steps.to_string(),
                    ])?;
                }
            }
            Ok(())
        })?;

        write_csv(&dir.join("competence.csv"), |w| {
            w.write_record(["replication", "trial_index", "goal", "competence"])?;
            for rep in &self.replications {
                for p in &rep.competence {
                    for (g, v) in p.values.iter().enumerate() {
                        w.write_record([
                            rep.replication.to_string(),
                            p.trial_index.to_string(),
                            labels[g].clone(),
                            format!("{v:.6}"),
                        ])?;
                    }
                }
            }
            Ok(())
        })?;

        write_csv(&dir.join("wasted.csv"), |w| {
            w.write_record(["replication", "interval_end", "cumulative_wasted"])?;
            for rep in &self.replications {
                for (end, n) in &rep.wasted {
                    w.write_record([rep.replication.to_string(), end.to_string(), n.to_string()])?;
                }
            }
            Ok(())
        })?;

        write_csv(&dir.join("competence_agg.csv"), |w| {
            w.write_record(["trial_index", "goal", "mean", "ci_low", "ci_high"])?;
            for (t, g, s) in self.competence_aggregate() {
                w.write_record([
                    t.to_string(),
                    labels[g.0].clone(),
                    format!("{:.6}", s.mean),
                    format!("{:.6}", s.ci_low),
                    format!("{:.6}", s.ci_high),
                ])?;
            }
            Ok(())
        })?;

        write_csv(&dir.join("wasted_agg.csv"), |w| {
            w.write_record(["interval_end", "mean", "ci_low", "ci_high"])?;
            for (t, s) in self.wasted_aggregate() {
                w.write_record([
                    t.to_string(),
                    format!("{:.6}", s.mean),
                    format!("{:.6}", s.ci_low),
                    format!("{:.6}", s.ci_high),
                ])?;
            }
            Ok(())
        })?;

        write_csv(&dir.join("predictor.csv"), |w| {
            w.write_record(["replication", "goal", "context_key", "p"])?;
            for rep in &self.replications {
                for (k, g, p) in rep.predictor.entries() {
                    w.write_record([
                        rep.replication.to_string(),
                        labels[g.0].clone(),
                        k.0.to_string(),
                        format!("{p:.6}"),
                    ])?;
                }
            }
            Ok(())
        })?;

        if self.config.dump_values {
            write_csv(&dir.join("values.csv"), |w| {
                w.write_record(["replication", "trial_index", "context_key", "goal", "value"])?;
                for rep in &self.replications {
                    for (t, rows) in &rep.values {
                        for (k, row) in rows {
                            for (g, v) in row.iter().enumerate() {
                                w.write_record([
                                    rep.replication.to_string(),
                                    t.to_string(),
                                    k.0.to_string(),
                                    labels[g].clone(),
                                    format!("{v:.8}"),
                                ])?;
                            }
                        }
                    }
                }
                Ok(())
            })?;
        }

        let cfg_path = dir.join("config.toml");
        std::fs::write(&cfg_path, self.config.to_toml_string()).map_err(|e| Error::io(&cfg_path, e))
    }
}

fn write_csv(
    path: &Path,
    body: impl FnOnce(&mut csv::Writer<File>) -> csv::Result<()>,
) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(file);
    body(&mut w).map_err(|e| Error::csv(path, e))?;
    w.flush().map_err(|e| Error::io(path, e))
}

/// Runs every replication of `cfg`, in parallel on up to `cfg.jobs` threads.
/// Results are ordered by replication index regardless of scheduling.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentResult> {
    cfg.validate()?;
    let spec = cfg.load_scenario()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    let replications = pool.install(|| {
        (0..cfg.replications)
            .into_par_iter()
            .map(|rep| run_replication(cfg, &spec, rep))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(ExperimentResult {
        config: cfg.clone(),
        scenario: spec,
        replications,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::builtin_scenario;
    use approx::assert_abs_diff_eq;

    fn config(scenario: u8, system: System) -> ExperimentConfig {
        ExperimentConfig {
            scenario,
            system,
            replications: 2,
            ..Default::default()
        }
    }

    #[test]
    fn wasted_counting() {
        let rec = |trial, achievable| TrialRecord {
            trial,
            epoch: 0,
            state_key: 0,
            goal: GoalId(0),
            achievable,
            achieved: false,
            reward: 0.0,
            steps: 1,
        };
        let rs = [rec(0, false), rec(1, true), rec(2, false), rec(3, false)];
        assert_eq!(count_wasted(&rs, 0..4), 3);
        assert_eq!(count_wasted(&rs, 1..3), 1);
        assert_eq!(count_wasted(&rs, 4..10), 0);
    }

    #[test]
    fn summary_of_constant_series_has_no_width() {
        let s = summarize(&[0.4; 5]);
        assert_abs_diff_eq!(s.mean, 0.4, epsilon = 1e-15);
        assert_abs_diff_eq!(s.ci_low, s.ci_high, epsilon = 1e-15);
    }

    #[test]
    fn summary_interval() {
        let s = summarize(&[1.0, 2.0, 3.0, 2.0]);
        assert_abs_diff_eq!(s.mean, 2.0, epsilon = 1e-12);
        let sd = (2.0f64 / 3.0).sqrt();
        assert_abs_diff_eq!(s.ci_high - s.mean, 1.96 * sd / 2.0, epsilon = 1e-12);
    }

    #[test]
    fn untrained_idealized_competence_is_initial_value() {
        let cfg = config(1, System::Grail);
        let mut sim = Simulation::new(&cfg, builtin_scenario(1).unwrap(), 0).unwrap();
        for c in sim.competences() {
            assert_eq!(c, cfg.idealized.initial_competence);
        }
    }

    #[test]
    fn fresh_epoch_chain_end_is_not_achievable() {
        let cfg = config(3, System::MGrail);
        let spec = builtin_scenario(3).unwrap();
        let e = spec.goal_by_label("e").unwrap();
        // force the selector onto e by making its value dominant in the initial state
        let mut sim = Simulation::new(&cfg, spec, 0).unwrap();
        if let GoalSelector::QLearning(q, _) = &mut sim.selector {
            let key = sim.keying.key(&WorldState::all_off(6, 0.0));
            for _ in 0..200 {
                q.update(key, e, 1.0, key, true);
            }
        }
        let r = sim.run_trial().unwrap();
        assert_eq!(r.goal, e);
        assert!(!r.achievable && !r.achieved);
        assert_eq!(r.reward, 0.0);
    }

    #[test]
    fn schedule_lengths() {
        for (id, n) in [(1u8, 3000usize), (2, 4000), (3, 6000)] {
            let cfg = ExperimentConfig {
                eval_interval: 1000,
                ..config(id, System::CGrail)
            };
            let r = run_replication(&cfg, &builtin_scenario(id).unwrap(), 0).unwrap();
            assert_eq!(r.records.len(), n);
            assert!(r.records.iter().all(|t| !t.achieved || t.achievable));
            assert_eq!(r.wasted.last().unwrap().0, n);
        }
    }

    #[test]
    fn scenario_one_never_wastes() {
        let cfg = config(1, System::Grail);
        let r = run_replication(&cfg, &builtin_scenario(1).unwrap(), 0).unwrap();
        assert_eq!(count_wasted(&r.records, 0..3000), 0);
    }

    #[test]
    fn evaluation_leaves_actor_critic_untouched() {
        let cfg = ExperimentConfig {
            backend: Backend::ActorCritic,
            timeout_steps: 50,
            eval_trials: 3,
            ..config(1, System::Grail)
        };
        let mut sim = Simulation::new(&cfg, builtin_scenario(1).unwrap(), 0).unwrap();
        sim.run_trial().unwrap();
        let before = sim.snapshot();
        let next_draw = sim.rng.clone().random::<u64>();
        let c = sim.competences();
        assert!(c.iter().all(|v| (0.0..=1.0).contains(v)));
        assert_eq!(sim.snapshot(), before);
        assert_eq!(sim.rng.clone().random::<u64>(), next_draw);
    }

    #[test]
    fn actor_critic_trials_respect_timeout() {
        let cfg = ExperimentConfig {
            backend: Backend::ActorCritic,
            timeout_steps: 30,
            ..config(3, System::MGrail)
        };
        let mut sim = Simulation::new(&cfg, builtin_scenario(3).unwrap(), 1).unwrap();
        for _ in 0..6 {
            let r = sim.run_trial().unwrap();
            assert!(r.steps >= 1 && r.steps <= 30);
            assert!(!r.achieved || r.achievable);
        }
    }
}
