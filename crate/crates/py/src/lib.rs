//! Python bindings: scenarios, the trial-level simulation, whole experiments
//! and a few of the building blocks (softmax, predictor, arm kinematics).

use std::path::PathBuf;

use pyo3::exceptions::{PyArithmeticError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use goalchain_core::arm::{self, ArmConfig, ArmSide, JointState};
use goalchain_core::experiment::{self, TrialRecord};
use goalchain_core::motivation::{self, ContextKeying};
use goalchain_core::selection::SoftmaxRule;
use goalchain_core::world::{builtin_scenario, GoalId, ScenarioSpec, WorldState};
use goalchain_core::{Error, ExperimentConfig};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NonFinite(_) => PyArithmeticError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn world_state(spec: &ScenarioSpec, sphere_on: Vec<bool>, context_feature: f64) -> PyResult<WorldState> {
    if sphere_on.len() != spec.num_goals() {
        return Err(PyValueError::new_err(format!(
            "expected {} sphere flags, got {}",
            spec.num_goals(),
            sphere_on.len()
        )));
    }
    Ok(WorldState {
        sphere_on,
        context_feature,
    })
}

/// A task environment: spheres, their dependency rules and the trial schedule.
#[pyclass(name = "Scenario", module = "goalchain", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioSpec,
}

#[pymethods]
impl PyScenario {
    /// Built-in scenario 1, 2 or 3.
    #[staticmethod]
    fn builtin(id: u8) -> PyResult<Self> {
        builtin_scenario(id).map(|inner| Self { inner }).map_err(py_err)
    }

    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        ScenarioSpec::from_toml_str(text).map(|inner| Self { inner }).map_err(py_err)
    }

    #[getter]
    fn name(&self) -> String {
        self.inner.name.clone()
    }

    #[getter]
    fn labels(&self) -> Vec<String> {
        self.inner.goals.iter().map(|g| g.label.clone()).collect()
    }

    #[getter]
    fn total_trials(&self) -> usize {
        self.inner.total_trials
    }

    #[getter]
    fn trials_per_epoch(&self) -> usize {
        self.inner.trials_per_epoch
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(py_err)
    }

    fn describe(&self) -> String {
        self.inner.describe_dependencies()
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml_string()
    }

    #[pyo3(signature = (goal, sphere_on, context_feature=0.0))]
    fn is_achievable(&self, goal: &str, sphere_on: Vec<bool>, context_feature: f64) -> PyResult<bool> {
        let g = self.inner.goal_by_label(goal).map_err(py_err)?;
        let s = world_state(&self.inner, sphere_on, context_feature)?;
        self.inner.is_achievable(g, &s).map_err(py_err)
    }

    /// Touch `goal`'s sphere; returns the new sphere flags and whether it lit.
    #[pyo3(signature = (goal, sphere_on, context_feature=0.0))]
    fn touch(&self, goal: &str, sphere_on: Vec<bool>, context_feature: f64) -> PyResult<(Vec<bool>, bool)> {
        let g = self.inner.goal_by_label(goal).map_err(py_err)?;
        let s = world_state(&self.inner, sphere_on, context_feature)?;
        let (next, lit) = self.inner.apply_touch(g, &s).map_err(py_err)?;
        Ok((next.sphere_on, lit))
    }

    fn __repr__(&self) -> String {
        format!("Scenario({:?}, goals={})", self.inner.name, self.inner.num_goals())
    }
}

fn record_dict<'py>(py: Python<'py>, spec: &ScenarioSpec, r: &TrialRecord) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("trial", r.trial)?;
    d.set_item("epoch", r.epoch)?;
    d.set_item("state_key", r.state_key)?;
    d.set_item("goal", spec.label(r.goal))?;
    d.set_item("achievable", r.achievable)?;
    d.set_item("achieved", r.achieved)?;
    d.set_item("reward", r.reward)?;
    d.set_item("steps", r.steps)?;
    Ok(d)
}

fn config_from(
    scenario: u8,
    system: &str,
    backend: &str,
    seed: u64,
    temperature: Option<f64>,
    config_toml: Option<&str>,
) -> PyResult<ExperimentConfig> {
    let mut cfg = match config_toml {
        Some(text) => ExperimentConfig::from_toml_str(text).map_err(py_err)?,
        None => ExperimentConfig::default(),
    };
    cfg.scenario = scenario;
    cfg.system = system.parse().map_err(py_err)?;
    cfg.backend = backend.parse().map_err(py_err)?;
    cfg.seed = seed;
    if let Some(t) = temperature {
        cfg.selection.temperature = t;
    }
    Ok(cfg)
}

/// One replication, stepped a trial at a time.
#[pyclass(name = "Simulation", module = "goalchain", unsendable)]
struct PySimulation {
    inner: experiment::Simulation,
}

#[pymethods]
impl PySimulation {
    #[new]
    #[pyo3(signature = (scenario=1, system="grail", backend="idealized", seed=0, replication=0, temperature=None, config_toml=None))]
    fn new(
        scenario: u8,
        system: &str,
        backend: &str,
        seed: u64,
        replication: usize,
        temperature: Option<f64>,
        config_toml: Option<&str>,
    ) -> PyResult<Self> {
        let cfg = config_from(scenario, system, backend, seed, temperature, config_toml)?;
        let spec = cfg.load_scenario().map_err(py_err)?;
        experiment::Simulation::new(&cfg, spec, replication)
            .map(|inner| Self { inner })
            .map_err(py_err)
    }

    #[getter]
    fn trial(&self) -> usize {
        self.inner.trial()
    }

    #[getter]
    fn done(&self) -> bool {
        self.inner.is_done()
    }

    /// Current sphere flags and contextual feature.
    #[getter]
    fn state(&self) -> (Vec<bool>, f64) {
        let s = self.inner.state();
        (s.sphere_on.clone(), s.context_feature)
    }

    fn run_trial<'py>(&mut self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = self.inner.run_trial().map_err(py_err)?;
        record_dict(py, self.inner.scenario(), &r)
    }

    /// Runs `n` trials (or until the schedule ends) and returns their records.
    fn run<'py>(&mut self, py: Python<'py>, n: usize) -> PyResult<Vec<Bound<'py, PyDict>>> {
        let mut out = Vec::with_capacity(n);
        for _ in 0..n {
            if self.inner.is_done() {
                break;
            }
            let r = self.inner.run_trial().map_err(py_err)?;
            out.push(record_dict(py, self.inner.scenario(), &r)?);
        }
        Ok(out)
    }

    fn competences(&mut self) -> Vec<f64> {
        self.inner.competences()
    }

    /// Goal-selection probabilities in the current state.
    fn selection_probabilities(&self) -> Vec<f64> {
        let key = self.inner.keying().key(self.inner.state());
        self.inner.selector().probabilities(key)
    }
}

/// Runs a full experiment. Returns the final mean competence per goal and the
/// mean cumulative wasted trials; writes CSVs when `out` is given.
#[pyfunction]
#[allow(clippy::too_many_arguments)]
#[pyo3(signature = (scenario=1, system="grail", backend="idealized", seed=0, replications=10, out=None, config_toml=None))]
fn run_experiment<'py>(
    py: Python<'py>,
    scenario: u8,
    system: &str,
    backend: &str,
    seed: u64,
    replications: usize,
    out: Option<PathBuf>,
    config_toml: Option<&str>,
) -> PyResult<Bound<'py, PyDict>> {
    let mut cfg = config_from(scenario, system, backend, seed, None, config_toml)?;
    cfg.replications = replications;
    let result = py.detach(|| experiment::run_experiment(&cfg)).map_err(py_err)?;
    if let Some(dir) = &out {
        result.write_outputs(dir).map_err(py_err)?;
    }
    let labels = result.labels();
    let last = result.replications[0].competence.len() - 1;
    let comp = PyDict::new(py);
    for (i, label) in labels.iter().enumerate() {
        let xs: Vec<f64> = result
            .replications
            .iter()
            .map(|r| r.competence[last].values[i])
            .collect();
        comp.set_item(label, experiment::summarize(&xs).mean)?;
    }
    let wasted = result.wasted_aggregate().last().map(|(_, s)| s.mean).unwrap_or(0.0);
    let d = PyDict::new(py);
    d.set_item("final_competence", comp)?;
    d.set_item("wasted", wasted)?;
    d.set_item("replications", result.replications.len())?;
    Ok(d)
}

/// Softmax selection probabilities of `values` at `temperature`.
#[pyfunction]
fn softmax(values: Vec<f64>, temperature: f64) -> PyResult<Vec<f64>> {
    if temperature.is_nan() || temperature <= 0.0 {
        return Err(PyValueError::new_err("temperature must be positive"));
    }
    Ok(SoftmaxRule::new(temperature).probabilities(&values))
}

/// Achievement predictor producing competence-prediction-improvement rewards.
#[pyclass(name = "Predictor", module = "goalchain")]
struct PyPredictor {
    inner: motivation::AchievementPredictor,
}

fn keying(name: &str) -> PyResult<ContextKeying> {
    match name {
        "none" => Ok(ContextKeying::None),
        "context_feature" => Ok(ContextKeying::ContextFeature),
        "full_sphere_state" => Ok(ContextKeying::FullSphereState),
        _ => Err(PyValueError::new_err(format!(
            "unknown keying `{name}` (valid: none, context_feature, full_sphere_state)"
        ))),
    }
}

impl PyPredictor {
    fn state(&self, sphere_on: Vec<bool>, context_feature: f64) -> PyResult<WorldState> {
        if sphere_on.len() != self.inner.num_goals() {
            return Err(PyValueError::new_err("sphere flag count does not match num_goals"));
        }
        Ok(WorldState {
            sphere_on,
            context_feature,
        })
    }
}

#[pymethods]
impl PyPredictor {
    #[new]
    #[pyo3(signature = (num_goals, keying="none", rate=0.1))]
    fn new(num_goals: usize, keying: &str, rate: f64) -> PyResult<Self> {
        Ok(Self {
            inner: motivation::AchievementPredictor::new(num_goals, self::keying(keying)?).with_rate(rate),
        })
    }

    #[pyo3(signature = (goal, sphere_on, context_feature=0.0))]
    fn predict(&self, goal: usize, sphere_on: Vec<bool>, context_feature: f64) -> PyResult<f64> {
        let s = self.state(sphere_on, context_feature)?;
        Ok(self.inner.predict(GoalId(goal), &s))
    }

    /// Updates the prediction with the trial outcome and returns the reward.
    #[pyo3(signature = (goal, achieved, sphere_on, context_feature=0.0))]
    fn update(&mut self, goal: usize, achieved: bool, sphere_on: Vec<bool>, context_feature: f64) -> PyResult<f64> {
        let s = self.state(sphere_on, context_feature)?;
        Ok(self.inner.update_and_reward(GoalId(goal), &s, achieved))
    }

    #[pyo3(signature = (goal, achieved, sphere_on, context_feature=0.0))]
    fn learning_gate(&self, goal: usize, achieved: bool, sphere_on: Vec<bool>, context_feature: f64) -> PyResult<bool> {
        let s = self.state(sphere_on, context_feature)?;
        Ok(self.inner.learning_gate(GoalId(goal), &s, achieved))
    }
}

/// End-effector position of one arm for four joint angles.
#[pyfunction]
#[pyo3(signature = (angles, side="right"))]
fn effector_position(angles: [f64; 4], side: &str) -> PyResult<(f64, f64)> {
    let side = match side {
        "left" => ArmSide::Left,
        "right" => ArmSide::Right,
        _ => return Err(PyValueError::new_err("side must be `left` or `right`")),
    };
    let p = arm::effector_position(side, &JointState::new(angles), &ArmConfig::default());
    Ok((p.x, p.y))
}

#[pymodule(name = "goalchain")]
pub fn goalchain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PySimulation>()?;
    m.add_class::<PyPredictor>()?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    m.add_function(wrap_pyfunction!(softmax, m)?)?;
    m.add_function(wrap_pyfunction!(effector_position, m)?)?;
    m.add("SYSTEMS", ["grail", "c_grail", "m_grail"])?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn non_finite_errors_map_to_arithmetic_error() {
        Python::initialize();
        Python::attach(|py| {
            let e = py_err(Error::NonFinite("q value".into()));
            assert!(e.is_instance_of::<PyArithmeticError>(py));
            let e = py_err(Error::Config("bad".into()));
            assert!(e.is_instance_of::<PyValueError>(py));
        });
    }

    #[test]
    fn keying_names() {
        assert_eq!(keying("full_sphere_state").unwrap(), ContextKeying::FullSphereState);
        assert!(keying("everything").is_err());
    }
}
